#include "marl/envs/mpe.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "marl/errors.hpp"

namespace marl::envs {

namespace {

constexpr double kDt = 0.1;
constexpr double kDamping = 0.25;
constexpr double kContactForce = 1e2;
constexpr double kContactMargin = 1e-3;
constexpr double kDefaultSensitivity = 5.0;
constexpr int kEpisodeSteps = 25;

// Static per-entity attributes; agents come first, landmarks after.
struct EntitySpec {
  double size = 0.05;
  bool movable = false;
  bool collide = true;
  double accel = -1;      // sensitivity; <0 means default 5.0
  double max_speed = -1;  // <0 means unlimited
  bool silent = true;
  bool adversary = false;
};

struct MpeState : EnvState {
  std::vector<double> pos;   // 2 per entity
  std::vector<double> vel;   // 2 per movable entity slot (agents only move here)
  std::vector<double> comm;  // dim_c per agent
  int goal_landmark = -1;
  int steps = 0;
};

double logaddexp0(double z) {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

class MpeEnv final : public Env {
 public:
  MpeEnv(std::string scenario, bool continuous, bool cooperative_prey)
      : scenario_(std::move(scenario)),
        continuous_(continuous),
        cooperative_prey_(cooperative_prey) {
    if (scenario_ == "simple_spread") {
      dim_c_ = 2;
      for (int i = 0; i < 3; ++i) {
        agents_.push_back("agent_" + std::to_string(i));
        specs_.push_back({.size = 0.15, .movable = true, .collide = true});
      }
      n_landmarks_ = 3;
      for (int i = 0; i < 3; ++i) specs_.push_back({.size = 0.05, .collide = false});
    } else if (scenario_ == "simple_speaker_listener") {
      dim_c_ = 3;
      agents_ = {"speaker_0", "listener_0"};
      specs_.push_back({.size = 0.075, .movable = false, .collide = false, .silent = false});
      specs_.push_back({.size = 0.075, .movable = true, .collide = false});
      n_landmarks_ = 3;
      for (int i = 0; i < 3; ++i) specs_.push_back({.size = 0.04, .collide = false});
    } else if (scenario_ == "simple_tag") {
      dim_c_ = 2;
      for (int i = 0; i < 3; ++i) {
        agents_.push_back("adversary_" + std::to_string(i));
        specs_.push_back({.size = 0.075, .movable = true, .collide = true, .accel = 3.0,
                          .max_speed = 1.0, .adversary = true});
      }
      agents_.push_back("agent_0");
      specs_.push_back(
          {.size = 0.05, .movable = true, .collide = true, .accel = 4.0, .max_speed = 1.3});
      n_landmarks_ = 2;
      for (int i = 0; i < 2; ++i) specs_.push_back({.size = 0.2, .movable = false, .collide = true});
    } else {
      throw NotFoundError("unknown mpe scenario: " + scenario_);
    }
  }

  std::string id() const override {
    if (scenario_ == "simple_spread") return "MPE_simple_spread_v3";
    if (scenario_ == "simple_speaker_listener") return "MPE_simple_speaker_listener_v4";
    return "MPE_simple_tag_v3";
  }

  SpaceDescriptor observation_space(const std::string& agent) const override {
    return SpaceDescriptor::box({obs_size(agent_index(agent))}, -1e6f, 1e6f);
  }

  SpaceDescriptor action_space(const std::string& agent) const override {
    const EntitySpec& spec = specs_[size_t(agent_index(agent))];
    if (spec.movable) {  // movement (comm agents here are silent movers)
      return continuous_ ? SpaceDescriptor::box({5}, 0.0f, 1.0f) : SpaceDescriptor::discrete(5);
    }
    // speaker: communication only
    return continuous_ ? SpaceDescriptor::box({dim_c_}, 0.0f, 1.0f)
                       : SpaceDescriptor::discrete(dim_c_);
  }

  int max_steps() const override { return kEpisodeSteps; }

  bool cooperative() const override {
    return scenario_ != "simple_tag" || cooperative_prey_;
  }

  std::pair<AgentMap<Obs>, StatePtr> reset(const PrngKey& key) const override {
    auto s = std::make_shared<MpeState>();
    size_t n_entities = specs_.size();
    auto kids = prng::split(key, n_entities + 1);
    s->pos.resize(2 * n_entities);
    s->vel.assign(2 * num_agents(), 0.0);
    s->comm.assign(size_t(dim_c_) * size_t(num_agents()), 0.0);
    for (size_t i = 0; i < n_entities; ++i) {
      bool is_agent = i < size_t(num_agents());
      double lim = is_agent ? 1.0 : 0.9;
      auto u = prng::uniform(kids[i], 2, -lim, lim);
      s->pos[2 * i] = u[0];
      s->pos[2 * i + 1] = u[1];
    }
    if (scenario_ == "simple_speaker_listener")
      s->goal_landmark = prng::randint1(kids[n_entities], 0, n_landmarks_);
    return {observe_all(*s), s};
  }

  StepResult step(const PrngKey&, const EnvState& state,
                  const AgentMap<Action>& actions) const override {
    const auto& prev = dynamic_cast<const MpeState&>(state);
    if (prev.steps >= kEpisodeSteps)
      throw ContractError(id() + ": cannot step a terminal state");
    validate_actions(actions);

    auto next = std::make_shared<MpeState>(prev);
    int n_agents = num_agents();
    size_t n_entities = specs_.size();

    // per-agent action force and comm
    std::vector<double> force(2 * n_entities, 0.0);
    for (int i = 0; i < n_agents; ++i) {
      const EntitySpec& spec = specs_[size_t(i)];
      const Action& act = actions.at(agents_[size_t(i)]);
      double u[2] = {0.0, 0.0};
      if (spec.movable) {
        if (continuous_) {
          const auto& v = std::get<std::vector<float>>(act);
          u[0] = double(v[1]) - double(v[2]);
          u[1] = double(v[3]) - double(v[4]);
        } else {
          int a = std::get<int>(act);
          if (a == 1) u[0] = -1.0;
          if (a == 2) u[0] = +1.0;
          if (a == 3) u[1] = -1.0;
          if (a == 4) u[1] = +1.0;
        }
        double sens = spec.accel > 0 ? spec.accel : kDefaultSensitivity;
        force[2 * size_t(i)] += u[0] * sens;
        force[2 * size_t(i) + 1] += u[1] * sens;
      }
      if (!spec.silent) {
        double* c = &next->comm[size_t(i) * size_t(dim_c_)];
        if (continuous_) {
          const auto& v = std::get<std::vector<float>>(act);
          for (int k = 0; k < dim_c_; ++k) c[k] = double(v[size_t(k)]);
        } else {
          std::fill(c, c + dim_c_, 0.0);
          c[std::get<int>(act)] = 1.0;
        }
      }
    }

    // pairwise contact forces over entities (a < b), equal and opposite
    for (size_t a = 0; a < n_entities; ++a) {
      for (size_t b = a + 1; b < n_entities; ++b) {
        if (!specs_[a].collide || !specs_[b].collide) continue;
        double dx = next->pos[2 * a] - next->pos[2 * b];
        double dy = next->pos[2 * a + 1] - next->pos[2 * b + 1];
        double dist = std::sqrt(dx * dx + dy * dy);
        if (dist < 1e-9) dist = 1e-9;
        double dist_min = specs_[a].size + specs_[b].size;
        double penetration = logaddexp0(-(dist - dist_min) / kContactMargin) * kContactMargin;
        double fx = kContactForce * dx / dist * penetration;
        double fy = kContactForce * dy / dist * penetration;
        if (specs_[a].movable) {
          force[2 * a] += fx;
          force[2 * a + 1] += fy;
        }
        if (specs_[b].movable) {
          force[2 * b] -= fx;
          force[2 * b + 1] -= fy;
        }
      }
    }

    // integrate agent motion (landmarks never move)
    for (int i = 0; i < n_agents; ++i) {
      const EntitySpec& spec = specs_[size_t(i)];
      if (!spec.movable) continue;
      double* v = &next->vel[2 * size_t(i)];
      v[0] *= (1.0 - kDamping);
      v[1] *= (1.0 - kDamping);
      v[0] += force[2 * size_t(i)] * kDt;  // unit mass
      v[1] += force[2 * size_t(i) + 1] * kDt;
      if (spec.max_speed > 0) {
        double speed = std::sqrt(v[0] * v[0] + v[1] * v[1]);
        if (speed > spec.max_speed) {
          v[0] = v[0] / speed * spec.max_speed;
          v[1] = v[1] / speed * spec.max_speed;
        }
      }
      next->pos[2 * size_t(i)] += v[0] * kDt;
      next->pos[2 * size_t(i) + 1] += v[1] * kDt;
    }
    // silent agents' comm stays zero
    next->steps = prev.steps + 1;

    bool done = next->steps >= kEpisodeSteps;
    StepResult r;
    r.obs = observe_all(*next);
    r.state = next;
    for (int i = 0; i < n_agents; ++i) {
      r.rewards.emplace(agents_[size_t(i)], reward(*next, i));
      r.dones.emplace(agents_[size_t(i)], done);
      r.infos.emplace(agents_[size_t(i)], Info{});
    }
    r.dones.emplace(kAllAgents, done);
    return r;
  }

  std::optional<std::vector<float>> world_state(const EnvState& state) const override {
    const auto& s = dynamic_cast<const MpeState&>(state);
    std::vector<float> w;
    for (int i = 0; i < num_agents(); ++i) {
      auto o = observe(s, i);
      w.insert(w.end(), o.begin(), o.end());
    }
    return w;
  }
  int world_state_size() const override {
    int total = 0;
    for (int i = 0; i < num_agents(); ++i) total += obs_size(i);
    return total;
  }

  std::string render(const EnvState& state) const override {
    const auto& s = dynamic_cast<const MpeState&>(state);
    std::string out = scenario_ + " step " + std::to_string(s.steps);
    for (size_t i = 0; i < agents_.size(); ++i) {
      out += "\n  " + agents_[i] + " pos(" + std::to_string(s.pos[2 * i]) + ", " +
             std::to_string(s.pos[2 * i + 1]) + ")";
    }
    return out;
  }

  uint64_t state_hash(const EnvState& state) const override {
    const auto& s = dynamic_cast<const MpeState&>(state);
    uint64_t h = 1469598103934665603ull;
    auto mix = [&h](uint64_t v) { h = (h ^ v) * 1099511628211ull; };
    auto mixd = [&](double d) {
      uint64_t bits;
      std::memcpy(&bits, &d, 8);
      mix(bits);
    };
    for (double p : s.pos) mixd(p);
    for (double v : s.vel) mixd(v);
    for (double c : s.comm) mixd(c);
    mix(uint64_t(s.steps));
    mix(uint64_t(int64_t(s.goal_landmark)));
    return h;
  }

 private:
  int agent_index(const std::string& agent) const {
    for (size_t i = 0; i < agents_.size(); ++i)
      if (agents_[i] == agent) return int(i);
    throw ContractError(id() + ": unknown agent '" + agent + "'");
  }

  int obs_size(int i) const {
    if (scenario_ == "simple_spread") return 4 + 2 * n_landmarks_ + 4 * (num_agents() - 1);
    if (scenario_ == "simple_speaker_listener") return i == 0 ? n_landmarks_ : 2 + 2 * n_landmarks_ + dim_c_;
    // simple_tag: vel(2) + pos(2) + landmarks + others' pos + non-adversary others' vel
    int n_others = num_agents() - 1;
    int n_prey_vel = specs_[size_t(i)].adversary ? 1 : 0;
    return 4 + 2 * n_landmarks_ + 2 * n_others + 2 * n_prey_vel;
  }

  double lm_pos(const MpeState& s, int j, int axis) const {
    return s.pos[2 * (size_t(num_agents()) + size_t(j)) + size_t(axis)];
  }

  Obs observe(const MpeState& s, int i) const {
    std::vector<double> o;
    const size_t ui = size_t(i);
    if (scenario_ == "simple_speaker_listener" && i == 0) {
      for (int j = 0; j < n_landmarks_; ++j) o.push_back(j == s.goal_landmark ? 1.0 : 0.0);
    } else if (scenario_ == "simple_speaker_listener") {
      o.push_back(s.vel[2 * ui]);
      o.push_back(s.vel[2 * ui + 1]);
      for (int j = 0; j < n_landmarks_; ++j) {
        o.push_back(lm_pos(s, j, 0) - s.pos[2 * ui]);
        o.push_back(lm_pos(s, j, 1) - s.pos[2 * ui + 1]);
      }
      for (int k = 0; k < dim_c_; ++k) o.push_back(s.comm[size_t(k)]);  // speaker is agent 0
    } else {
      o.push_back(s.vel[2 * ui]);
      o.push_back(s.vel[2 * ui + 1]);
      o.push_back(s.pos[2 * ui]);
      o.push_back(s.pos[2 * ui + 1]);
      for (int j = 0; j < n_landmarks_; ++j) {
        o.push_back(lm_pos(s, j, 0) - s.pos[2 * ui]);
        o.push_back(lm_pos(s, j, 1) - s.pos[2 * ui + 1]);
      }
      for (int j = 0; j < num_agents(); ++j) {
        if (j == i) continue;
        o.push_back(s.pos[2 * size_t(j)] - s.pos[2 * ui]);
        o.push_back(s.pos[2 * size_t(j) + 1] - s.pos[2 * ui + 1]);
      }
      if (scenario_ == "simple_spread") {
        for (int j = 0; j < num_agents(); ++j) {
          if (j == i) continue;
          for (int k = 0; k < dim_c_; ++k) o.push_back(s.comm[size_t(j) * size_t(dim_c_) + size_t(k)]);
        }
      } else {  // simple_tag: velocities of non-adversary others
        for (int j = 0; j < num_agents(); ++j) {
          if (j == i || specs_[size_t(j)].adversary) continue;
          o.push_back(s.vel[2 * size_t(j)]);
          o.push_back(s.vel[2 * size_t(j) + 1]);
        }
      }
    }
    Obs out(o.size());
    for (size_t k = 0; k < o.size(); ++k) out[k] = float(o[k]);
    return out;
  }

  AgentMap<Obs> observe_all(const MpeState& s) const {
    AgentMap<Obs> obs;
    for (int i = 0; i < num_agents(); ++i) obs.emplace(agents_[size_t(i)], observe(s, i));
    return obs;
  }

  bool entities_collide(const MpeState& s, size_t a, size_t b) const {
    double dx = s.pos[2 * a] - s.pos[2 * b];
    double dy = s.pos[2 * a + 1] - s.pos[2 * b + 1];
    return std::sqrt(dx * dx + dy * dy) < specs_[a].size + specs_[b].size;
  }

  double bound_penalty(double x) const {
    if (x < 0.9) return 0.0;
    if (x < 1.0) return (x - 0.9) * 10.0;
    return std::min(std::exp(2.0 * x - 2.0), 10.0);
  }

  double reward(const MpeState& s, int i) const {
    if (scenario_ == "simple_spread") {
      double rew = 0.0;
      for (int j = 0; j < n_landmarks_; ++j) {
        double best = 1e18;
        for (int a = 0; a < num_agents(); ++a) {
          double dx = s.pos[2 * size_t(a)] - lm_pos(s, j, 0);
          double dy = s.pos[2 * size_t(a) + 1] - lm_pos(s, j, 1);
          best = std::min(best, std::sqrt(dx * dx + dy * dy));
        }
        rew -= best;
      }
      for (int a = 0; a < num_agents(); ++a)
        if (a != i && entities_collide(s, size_t(a), size_t(i))) rew -= 1.0;
      return rew;
    }
    if (scenario_ == "simple_speaker_listener") {
      double dx = s.pos[2] - lm_pos(s, s.goal_landmark, 0);
      double dy = s.pos[3] - lm_pos(s, s.goal_landmark, 1);
      return -(dx * dx + dy * dy);
    }
    // simple_tag: prey is agent index 3
    double touches = 0.0;
    for (size_t a = 0; a < 3; ++a)
      if (entities_collide(s, a, 3)) touches += 1.0;
    if (cooperative_prey_ || specs_[size_t(i)].adversary) return 10.0 * touches;
    double rew = -10.0 * touches;
    rew -= bound_penalty(std::abs(s.pos[2 * size_t(i)]));
    rew -= bound_penalty(std::abs(s.pos[2 * size_t(i) + 1]));
    return rew;
  }

  std::string scenario_;
  bool continuous_;
  bool cooperative_prey_;
  int dim_c_ = 0;
  int n_landmarks_ = 0;
  std::vector<EntitySpec> specs_;  // agents then landmarks
};

}  // namespace

std::shared_ptr<const Env> make_mpe(const std::string& scenario, const Config& config) {
  ConfigView cfg(config, "MPE " + scenario);
  bool continuous = cfg.get_bool("continuous_actions", false);
  bool coop_prey = scenario == "simple_tag" ? cfg.get_bool("cooperative_prey_reward", false) : false;
  cfg.check_no_extras();
  return std::make_shared<MpeEnv>(scenario, continuous, coop_prey);
}

}  // namespace marl::envs
