#include "marl/envs/switch_riddle.hpp"

#include "marl/errors.hpp"

namespace marl::envs {

namespace {

struct SwitchRiddleState : EnvState {
  int day = 1;
  int chosen_prisoner = 0;
  bool bulb = false;
  std::vector<uint8_t> has_been;
  bool done = false;
};

class SwitchRiddle final : public Env {
 public:
  SwitchRiddle(int n_agents, int max_steps) : max_steps_(max_steps) {
    for (int i = 0; i < n_agents; ++i) agents_.push_back("agent_" + std::to_string(i));
  }

  std::string id() const override { return "switch_riddle_v0"; }

  SpaceDescriptor observation_space(const std::string&) const override {
    return SpaceDescriptor::box({3}, 0.0f, 1.0f);
  }
  // 0 = do nothing, 1 = toggle bulb, 2 = tell the warden.
  SpaceDescriptor action_space(const std::string&) const override {
    return SpaceDescriptor::discrete(3);
  }

  int max_steps() const override { return max_steps_; }
  bool cooperative() const override { return true; }

  std::pair<AgentMap<Obs>, StatePtr> reset(const PrngKey& key) const override {
    auto s = std::make_shared<SwitchRiddleState>();
    s->has_been.assign(agents_.size(), 0);
    s->chosen_prisoner = prng::randint1(key, 0, num_agents());
    return {observe(*s), s};
  }

  StepResult step(const PrngKey& key, const EnvState& state,
                  const AgentMap<Action>& actions) const override {
    const auto& prev = dynamic_cast<const SwitchRiddleState&>(state);
    if (prev.done) throw ContractError("switch_riddle_v0: cannot step a terminal state");
    validate_actions(actions);

    auto next = std::make_shared<SwitchRiddleState>(prev);
    next->has_been[size_t(next->chosen_prisoner)] = 1;

    int act = std::get<int>(actions.at(agents_[size_t(next->chosen_prisoner)]));
    double reward = 0.0;
    if (act == 2) {
      bool all_visited = true;
      for (uint8_t v : next->has_been) all_visited = all_visited && v;
      reward = all_visited ? 1.0 : -1.0;
      next->done = true;
    } else {
      if (act == 1) next->bulb = !next->bulb;
      if (next->day >= max_steps_) {
        next->done = true;  // timeout, reward stays 0
      } else {
        next->day += 1;
        next->chosen_prisoner = prng::randint1(key, 0, num_agents());
      }
    }

    StepResult r;
    r.obs = observe(*next);
    r.state = next;
    for (const auto& a : agents_) {
      r.rewards.emplace(a, reward);
      r.dones.emplace(a, next->done);
      r.infos.emplace(a, Info{});
    }
    r.dones.emplace(kAllAgents, next->done);
    return r;
  }

  std::optional<std::vector<float>> world_state(const EnvState& state) const override {
    const auto& s = dynamic_cast<const SwitchRiddleState&>(state);
    std::vector<float> w;
    w.push_back(s.bulb ? 1.0f : 0.0f);
    w.push_back(float(s.day) / float(max_steps_));
    for (size_t i = 0; i < agents_.size(); ++i) w.push_back(s.has_been[i] ? 1.0f : 0.0f);
    for (size_t i = 0; i < agents_.size(); ++i)
      w.push_back(int(i) == s.chosen_prisoner ? 1.0f : 0.0f);
    return w;
  }
  int world_state_size() const override { return 2 + 2 * num_agents(); }

  std::string render(const EnvState& state) const override {
    const auto& s = dynamic_cast<const SwitchRiddleState&>(state);
    std::string out = "day " + std::to_string(s.day) + " bulb " + (s.bulb ? "on" : "off") +
                      " in-room agent_" + std::to_string(s.chosen_prisoner) + " visited [";
    for (size_t i = 0; i < s.has_been.size(); ++i) out += s.has_been[i] ? '1' : '0';
    out += s.done ? "] done" : "]";
    return out;
  }

  uint64_t state_hash(const EnvState& state) const override {
    const auto& s = dynamic_cast<const SwitchRiddleState&>(state);
    uint64_t h = 1469598103934665603ull;
    auto mix = [&h](uint64_t v) { h = (h ^ v) * 1099511628211ull; };
    mix(uint64_t(s.day));
    mix(uint64_t(s.chosen_prisoner));
    mix(s.bulb ? 1 : 0);
    mix(s.done ? 1 : 0);
    for (uint8_t v : s.has_been) mix(v);
    return h;
  }

 private:
  AgentMap<Obs> observe(const SwitchRiddleState& s) const {
    AgentMap<Obs> obs;
    for (size_t i = 0; i < agents_.size(); ++i) {
      bool in_room = int(i) == s.chosen_prisoner;
      obs.emplace(agents_[i], Obs{in_room ? 1.0f : 0.0f,
                                  (in_room && s.bulb) ? 1.0f : 0.0f,
                                  float(s.day) / float(max_steps_)});
    }
    return obs;
  }

  int max_steps_;
};

}  // namespace

std::shared_ptr<const Env> make_switch_riddle(const Config& config) {
  ConfigView cfg(config, "switch_riddle_v0");
  int n_agents = cfg.get_int("n_agents", 3);
  if (n_agents < 3) throw SchemaError("switch_riddle_v0: n_agents must be >= 3");
  int max_steps = cfg.get_int("max_steps", 4 * n_agents - 6);
  if (max_steps < 1) throw SchemaError("switch_riddle_v0: max_steps must be >= 1");
  cfg.check_no_extras();
  return std::make_shared<SwitchRiddle>(n_agents, max_steps);
}

}  // namespace marl::envs
