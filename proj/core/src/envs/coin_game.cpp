#include "marl/envs/coin_game.hpp"

#include <cstdint>
#include <string>
#include <vector>

#include "marl/errors.hpp"

namespace marl::envs {
namespace {

// actions: 0=up 1=down 2=left 3=right, moves wrap around the torus
constexpr int kDr[4] = {-1, 1, 0, 0};
constexpr int kDc[4] = {0, 0, -1, 1};

// players and coin colours share indices: 0=red (agent_0), 1=blue (agent_1)
struct CoinGameState final : EnvState {
  int agent_cell[2] = {0, 0};
  int coin_cell[2] = {0, 0};
  int t = 0;
};

class CoinGameEnv final : public Env {
 public:
  explicit CoinGameEnv(const Config& config) {
    ConfigView v(config, "coin_game_v0");
    max_steps_ = v.get_int("max_steps", 36);
    grid_ = v.get_int("grid_size", 3);
    if (max_steps_ < 1) throw SchemaError("coin_game: max_steps must be >= 1");
    if (grid_ < 2) throw SchemaError("coin_game: grid_size must be >= 2");
    v.check_no_extras();
    cells_ = grid_ * grid_;
    agents_ = {"agent_0", "agent_1"};
  }

  std::string id() const override { return "coin_game_v0"; }

  SpaceDescriptor observation_space(const std::string&) const override {
    return SpaceDescriptor::box({4 * cells_}, 0.0f, 1.0f);
  }
  SpaceDescriptor action_space(const std::string&) const override {
    return SpaceDescriptor::discrete(4);
  }

  int max_steps() const override { return max_steps_; }

  std::pair<AgentMap<Obs>, StatePtr> reset(const PrngKey& key) const override {
    auto s = std::make_shared<CoinGameState>();
    // agents and both coins start on four distinct cells
    auto perm = prng::permutation(key, cells_);
    s->agent_cell[0] = perm[0];
    s->agent_cell[1] = perm[1];
    s->coin_cell[0] = perm[2];
    s->coin_cell[1] = perm[3];
    return {observe(*s), s};
  }

  StepResult step(const PrngKey& key, const EnvState& state,
                  const AgentMap<Action>& actions) const override {
    const auto& prev = dynamic_cast<const CoinGameState&>(state);
    if (prev.t >= max_steps_) throw ContractError("coin_game_v0: cannot step a terminal state");
    validate_actions(actions);

    auto s = std::make_shared<CoinGameState>(prev);
    for (int i = 0; i < 2; ++i) {
      int a = std::get<int>(actions.at(agents_[size_t(i)]));
      int r = (s->agent_cell[i] / grid_ + kDr[a] + grid_) % grid_;
      int c = (s->agent_cell[i] % grid_ + kDc[a] + grid_) % grid_;
      s->agent_cell[i] = r * grid_ + c;
    }

    // collection is simultaneous: both players standing on the same coin both
    // collect it (the coin counts once for each), then it respawns once
    double reward[2] = {0.0, 0.0};
    uint64_t respawn_draw = 0;
    for (int colour = 0; colour < 2; ++colour) {
      bool taken = false;
      for (int i = 0; i < 2; ++i) {
        if (s->agent_cell[i] != prev.coin_cell[colour]) continue;
        reward[i] += 1.0;
        if (i != colour) reward[colour] -= 2.0;  // cross-colour grab hurts the owner
        taken = true;
      }
      if (taken) respawn_coin(*s, colour, prng::fold_in(key, respawn_draw++));
    }

    s->t = prev.t + 1;
    bool done = s->t >= max_steps_;
    StepResult r;
    r.obs = observe(*s);
    r.state = s;
    for (int i = 0; i < 2; ++i) {
      r.rewards.emplace(agents_[size_t(i)], reward[i]);
      r.dones.emplace(agents_[size_t(i)], done);
      r.infos.emplace(agents_[size_t(i)], Info{});
    }
    r.dones.emplace(kAllAgents, done);
    return r;
  }

  // layout: agent_0, agent_1, red coin, blue coin position planes, then t
  int world_state_size() const override { return 4 * cells_ + 1; }

  std::optional<std::vector<float>> world_state(const EnvState& state) const override {
    const auto& s = dynamic_cast<const CoinGameState&>(state);
    std::vector<float> w(size_t(world_state_size()), 0.0f);
    w[size_t(s.agent_cell[0])] = 1.0f;
    w[size_t(cells_ + s.agent_cell[1])] = 1.0f;
    w[size_t(2 * cells_ + s.coin_cell[0])] = 1.0f;
    w[size_t(3 * cells_ + s.coin_cell[1])] = 1.0f;
    w[size_t(4 * cells_)] = float(s.t) / float(max_steps_);
    return w;
  }

  std::string render(const EnvState& state) const override {
    const auto& s = dynamic_cast<const CoinGameState&>(state);
    std::vector<std::string> grid(size_t(grid_), std::string(size_t(grid_), '.'));
    auto put = [&](int cell, char ch) {
      char& g = grid[size_t(cell / grid_)][size_t(cell % grid_)];
      g = g == '.' ? ch : '+';  // overlapping entities collapse to '+'
    };
    put(s.coin_cell[0], 'r');
    put(s.coin_cell[1], 'b');
    put(s.agent_cell[0], 'R');
    put(s.agent_cell[1], 'B');
    std::string out = "coin_game t=" + std::to_string(s.t) + "\n";
    for (const auto& line : grid) out += line + "\n";
    return out;
  }

  uint64_t state_hash(const EnvState& state) const override {
    const auto& s = dynamic_cast<const CoinGameState&>(state);
    uint64_t h = 1469598103934665603ull;
    auto mix = [&h](uint64_t v) { h = (h ^ v) * 1099511628211ull; };
    mix(uint64_t(s.agent_cell[0]));
    mix(uint64_t(s.agent_cell[1]));
    mix(uint64_t(s.coin_cell[0]));
    mix(uint64_t(s.coin_cell[1]));
    mix(uint64_t(s.t));
    return h;
  }

 private:
  // same-colour respawn on a cell not holding an agent or the other coin
  void respawn_coin(CoinGameState& s, int colour, const PrngKey& key) const {
    std::vector<int> candidates;
    for (int cell = 0; cell < cells_; ++cell) {
      if (cell == s.agent_cell[0] || cell == s.agent_cell[1]) continue;
      if (cell == s.coin_cell[1 - colour]) continue;
      candidates.push_back(cell);
    }
    s.coin_cell[colour] = candidates[size_t(prng::randint1(key, 0, int(candidates.size())))];
  }

  // egocentric planes: self, other player, own-colour coin, other-colour coin
  AgentMap<Obs> observe(const CoinGameState& s) const {
    AgentMap<Obs> obs;
    for (int i = 0; i < 2; ++i) {
      Obs o(size_t(4 * cells_), 0.0f);
      int r0 = s.agent_cell[i] / grid_, c0 = s.agent_cell[i] % grid_;
      auto centered = [&](int cell) {
        int r = ((cell / grid_ - r0) % grid_ + grid_ + grid_ / 2) % grid_;
        int c = ((cell % grid_ - c0) % grid_ + grid_ + grid_ / 2) % grid_;
        return r * grid_ + c;
      };
      o[size_t(centered(s.agent_cell[i]))] = 1.0f;
      o[size_t(cells_ + centered(s.agent_cell[1 - i]))] = 1.0f;
      o[size_t(2 * cells_ + centered(s.coin_cell[i]))] = 1.0f;
      o[size_t(3 * cells_ + centered(s.coin_cell[1 - i]))] = 1.0f;
      obs.emplace(agents_[size_t(i)], std::move(o));
    }
    return obs;
  }

  int max_steps_ = 36;
  int grid_ = 3;
  int cells_ = 9;
};

}  // namespace

std::shared_ptr<const Env> make_coin_game(const Config& config) {
  return std::make_shared<CoinGameEnv>(config);
}

}  // namespace marl::envs
