#include "marl/envs/bandit.hpp"

#include "marl/errors.hpp"

namespace marl::envs {

namespace {

struct BanditState : EnvState {
  bool done = false;
};

class Bandit final : public Env {
 public:
  explicit Bandit(std::vector<double> arm_rewards) : arms_(std::move(arm_rewards)) {
    agents_ = {"agent_0"};
  }

  std::string id() const override { return "bandit_v0"; }

  SpaceDescriptor observation_space(const std::string&) const override {
    return SpaceDescriptor::box({1}, 1.0f, 1.0f);
  }
  SpaceDescriptor action_space(const std::string&) const override {
    return SpaceDescriptor::discrete(int(arms_.size()));
  }

  int max_steps() const override { return 1; }
  bool cooperative() const override { return true; }

  std::pair<AgentMap<Obs>, StatePtr> reset(const PrngKey&) const override {
    AgentMap<Obs> obs;
    obs.emplace(agents_[0], Obs{1.0f});
    return {obs, std::make_shared<BanditState>()};
  }

  StepResult step(const PrngKey&, const EnvState& state,
                  const AgentMap<Action>& actions) const override {
    const auto& prev = dynamic_cast<const BanditState&>(state);
    if (prev.done) throw ContractError("bandit_v0: cannot step a terminal state");
    validate_actions(actions);

    auto next = std::make_shared<BanditState>();
    next->done = true;

    StepResult r;
    r.obs.emplace(agents_[0], Obs{1.0f});
    r.state = next;
    r.rewards.emplace(agents_[0], arms_[size_t(std::get<int>(actions.at(agents_[0])))]);
    r.dones.emplace(agents_[0], true);
    r.dones.emplace(kAllAgents, true);
    r.infos.emplace(agents_[0], Info{});
    return r;
  }

  std::optional<std::vector<float>> world_state(const EnvState&) const override {
    return std::vector<float>{1.0f};
  }
  int world_state_size() const override { return 1; }

 private:
  std::vector<double> arms_;
};

}  // namespace

std::shared_ptr<const Env> make_bandit(const Config& config) {
  ConfigView cfg(config, "bandit_v0");
  auto arms = cfg.get_double_list("arm_rewards", {0.1, 1.0, 0.5, 0.2});
  cfg.check_no_extras();
  if (arms.size() < 2) throw SchemaError("bandit_v0: arm_rewards needs at least 2 arms");
  return std::make_shared<Bandit>(std::move(arms));
}

}  // namespace marl::envs
