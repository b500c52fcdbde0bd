#include "marl/envs/storm.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <vector>

#include "marl/errors.hpp"

namespace marl::envs {
namespace {

constexpr int kGrid = 8;
constexpr int kCoinsPerType = 4;
constexpr int kFreezeSteps = 5;
constexpr int kView = 5;  // egocentric window, agent at rear-center

// facing: 0=N 1=E 2=S 3=W
constexpr int kDr[4] = {-1, 0, 1, 0};
constexpr int kDc[4] = {0, 1, 0, -1};

// actions
constexpr int kForward = 0;
constexpr int kTurnLeft = 1;
constexpr int kTurnRight = 2;
constexpr int kInteract = 3;
constexpr int kNoop = 4;

// observation planes per window cell
enum Plane : int {
  kPlaneSelf = 0,
  kPlaneOther,
  kPlaneOtherReady,
  kPlaneOtherFrozen,
  kPlaneOtherFaceN,
  kPlaneOtherFaceE,
  kPlaneOtherFaceS,
  kPlaneOtherFaceW,
  kPlaneOtherCoopInv,    // populated only while that agent is frozen
  kPlaneOtherDefectInv,  // populated only while that agent is frozen
  kPlaneCoopCoin,
  kPlaneDefectCoin,
  kNumPlanes,
};

struct Payoffs {
  // [my strategy][their strategy] -> reward, 0=cooperate 1=defect; the agent
  // that fired the beam is "mine" (the row player)
  double mine[2][2];
  double theirs[2][2];
};

Payoffs named_payoffs(const std::string& game) {
  Payoffs p{};
  if (game == "ipd") {
    p.mine[0][0] = 3;  p.theirs[0][0] = 3;
    p.mine[0][1] = 0;  p.theirs[0][1] = 5;
    p.mine[1][0] = 5;  p.theirs[1][0] = 0;
    p.mine[1][1] = 1;  p.theirs[1][1] = 1;
  } else if (game == "matching_pennies") {
    p.mine[0][0] = 1;  p.theirs[0][0] = -1;
    p.mine[0][1] = -1; p.theirs[0][1] = 1;
    p.mine[1][0] = -1; p.theirs[1][0] = 1;
    p.mine[1][1] = 1;  p.theirs[1][1] = -1;
  } else {
    throw NotFoundError("storm: unknown game '" + game + "'");
  }
  return p;
}

struct StormState final : EnvState {
  std::vector<int> row, col, facing;      // per agent
  std::vector<int> coop_inv, defect_inv;  // per agent
  std::vector<int> frozen;                // steps of freeze remaining
  std::vector<int> coin_row, coin_col;    // coop coins first, then defect
  int t = 0;
};

class StormEnv final : public Env {
 public:
  StormEnv(const std::string& game, const Config& config) : game_(game) {
    ConfigView v(config, "STORM_" + game + "_v0");
    max_steps_ = v.get_int("max_steps", 128);
    n_agents_ = v.get_int("n_agents", 2);
    if (max_steps_ < 1) throw SchemaError("STORM: max_steps must be >= 1");
    if (n_agents_ < 2 || n_agents_ > 4)
      throw SchemaError("STORM: n_agents must be in [2, 4]");
    payoffs_ = named_payoffs(game);
    if (v.has("payoffs")) {
      auto flat = v.get_double_list("payoffs", {});
      if (flat.size() != 8) throw SchemaError("STORM: payoffs must have 8 entries");
      payoffs_.mine[0][0] = flat[0]; payoffs_.theirs[0][0] = flat[1];
      payoffs_.mine[0][1] = flat[2]; payoffs_.theirs[0][1] = flat[3];
      payoffs_.mine[1][0] = flat[4]; payoffs_.theirs[1][0] = flat[5];
      payoffs_.mine[1][1] = flat[6]; payoffs_.theirs[1][1] = flat[7];
    }
    v.check_no_extras();
    for (int i = 0; i < n_agents_; ++i) agents_.push_back("agent_" + std::to_string(i));
    obs_size_ = kView * kView * kNumPlanes + 4;  // + own scalars
  }

  std::string id() const override { return "STORM_" + game_ + "_v0"; }

  SpaceDescriptor observation_space(const std::string&) const override {
    return SpaceDescriptor::box({obs_size_}, -1.0f, 1e6f);
  }
  SpaceDescriptor action_space(const std::string&) const override {
    return SpaceDescriptor::discrete(5);
  }

  int max_steps() const override { return max_steps_; }

  std::pair<AgentMap<Obs>, StatePtr> reset(const PrngKey& key) const override {
    auto s = std::make_shared<StormState>();
    s->row.resize(size_t(n_agents_));
    s->col.resize(size_t(n_agents_));
    s->facing.resize(size_t(n_agents_));
    s->coop_inv.assign(size_t(n_agents_), 0);
    s->defect_inv.assign(size_t(n_agents_), 0);
    s->frozen.assign(size_t(n_agents_), 0);
    const int n_coins = 2 * kCoinsPerType;
    s->coin_row.resize(size_t(n_coins));
    s->coin_col.resize(size_t(n_coins));

    // agents and coins land on distinct cells; coins reshuffle every reset
    auto perm = prng::permutation(prng::fold_in(key, 0), kGrid * kGrid);
    for (int i = 0; i < n_agents_; ++i) {
      s->row[size_t(i)] = perm[size_t(i)] / kGrid;
      s->col[size_t(i)] = perm[size_t(i)] % kGrid;
      s->facing[size_t(i)] = prng::randint1(prng::fold_in(key, uint64_t(1 + i)), 0, 4);
    }
    for (int c = 0; c < n_coins; ++c) {
      s->coin_row[size_t(c)] = perm[size_t(n_agents_ + c)] / kGrid;
      s->coin_col[size_t(c)] = perm[size_t(n_agents_ + c)] % kGrid;
    }
    return {observe(*s), s};
  }

  StepResult step(const PrngKey& key, const EnvState& state,
                  const AgentMap<Action>& actions) const override {
    const auto& prev = dynamic_cast<const StormState&>(state);
    if (prev.t >= max_steps_) throw ContractError(id() + ": cannot step a terminal state");
    validate_actions(actions);

    auto s = std::make_shared<StormState>(prev);
    std::vector<int> act(size_t(n_agents_), kNoop);
    for (int i = 0; i < n_agents_; ++i) {
      act[size_t(i)] = std::get<int>(actions.at(agents_[size_t(i)]));
      if (s->frozen[size_t(i)] > 0) act[size_t(i)] = kNoop;  // frozen agents do nothing
    }

    // turns apply first; all movement then resolves simultaneously
    for (int i = 0; i < n_agents_; ++i) {
      if (act[size_t(i)] == kTurnLeft) s->facing[size_t(i)] = (s->facing[size_t(i)] + 3) % 4;
      else if (act[size_t(i)] == kTurnRight) s->facing[size_t(i)] = (s->facing[size_t(i)] + 1) % 4;
    }

    // movement: forward one cell, blocked by walls; stationary agents always
    // keep their cell, two movers contending for one cell draw a winner
    std::vector<int> want_r(agents_.size()), want_c(agents_.size());
    std::vector<uint8_t> moving(agents_.size(), 0);
    for (int i = 0; i < n_agents_; ++i) {
      want_r[size_t(i)] = s->row[size_t(i)];
      want_c[size_t(i)] = s->col[size_t(i)];
      if (act[size_t(i)] != kForward) continue;
      int nr = s->row[size_t(i)] + kDr[s->facing[size_t(i)]];
      int nc = s->col[size_t(i)] + kDc[s->facing[size_t(i)]];
      if (nr < 0 || nr >= kGrid || nc < 0 || nc >= kGrid) continue;
      want_r[size_t(i)] = nr;
      want_c[size_t(i)] = nc;
      moving[size_t(i)] = 1;
    }
    // conflicts cascade (a bounced mover becomes an obstacle), so iterate to
    // a fixpoint; pair tie-break draws are keyed per pair, not per pass
    auto bounce = [&](int i) {
      want_r[size_t(i)] = s->row[size_t(i)];
      want_c[size_t(i)] = s->col[size_t(i)];
      moving[size_t(i)] = 0;
    };
    for (bool changed = true; changed;) {
      changed = false;
      for (int i = 0; i < n_agents_; ++i) {
        if (!moving[size_t(i)]) continue;
        for (int j = 0; j < n_agents_; ++j) {
          if (j == i) continue;
          if (!moving[size_t(j)]) {
            if (want_r[size_t(i)] == s->row[size_t(j)] && want_c[size_t(i)] == s->col[size_t(j)]) {
              bounce(i);
              changed = true;
              break;
            }
            continue;
          }
          bool same_target = want_r[size_t(i)] == want_r[size_t(j)] &&
                             want_c[size_t(i)] == want_c[size_t(j)];
          bool swap = want_r[size_t(i)] == s->row[size_t(j)] &&
                      want_c[size_t(i)] == s->col[size_t(j)] &&
                      want_r[size_t(j)] == s->row[size_t(i)] &&
                      want_c[size_t(j)] == s->col[size_t(i)];
          if (!same_target && !swap) continue;
          changed = true;
          if (swap) {  // moving through each other bounces both
            bounce(i);
            bounce(j);
          } else {  // same target: random winner, loser stays
            int lo = std::min(i, j), hi = std::max(i, j);
            bool first_loses = prng::bernoulli(prng::fold_in(key, uint64_t(100 + lo * n_agents_ + hi)), 0.5);
            bounce(first_loses ? lo : hi);
          }
          if (!moving[size_t(i)]) break;
        }
      }
    }
    for (int i = 0; i < n_agents_; ++i) {
      s->row[size_t(i)] = want_r[size_t(i)];
      s->col[size_t(i)] = want_c[size_t(i)];
    }

    // collection: an agent standing on a coin picks it up; the coin respawns
    // with the same type on a random empty cell, keeping counts constant
    int respawn_draw = 0;
    for (int i = 0; i < n_agents_; ++i) {
      for (int c = 0; c < 2 * kCoinsPerType; ++c) {
        if (s->coin_row[size_t(c)] != s->row[size_t(i)] ||
            s->coin_col[size_t(c)] != s->col[size_t(i)])
          continue;
        if (c < kCoinsPerType) s->coop_inv[size_t(i)] += 1;
        else s->defect_inv[size_t(i)] += 1;
        respawn_coin(*s, c, prng::fold_in(key, uint64_t(200 + respawn_draw++)));
      }
    }

    // beams, in agent order: a beam one cell ahead from a ready, unfrozen
    // shooter that hits a ready, unfrozen agent triggers the matrix game
    AgentMap<double> rewards;
    for (const auto& name : agents_) rewards.emplace(name, 0.0);
    for (int i = 0; i < n_agents_; ++i) {
      if (act[size_t(i)] != kInteract || s->frozen[size_t(i)] > 0 || !ready(*s, i)) continue;
      int br = s->row[size_t(i)] + kDr[s->facing[size_t(i)]];
      int bc = s->col[size_t(i)] + kDc[s->facing[size_t(i)]];
      for (int j = 0; j < n_agents_; ++j) {
        if (j == i || s->frozen[size_t(j)] > 0 || !ready(*s, j)) continue;
        if (s->row[size_t(j)] != br || s->col[size_t(j)] != bc) continue;
        bool i_coop = storm_strategy_sample(prng::fold_in(key, uint64_t(300 + 2 * i)),
                                            s->coop_inv[size_t(i)], s->defect_inv[size_t(i)]);
        bool j_coop = storm_strategy_sample(prng::fold_in(key, uint64_t(300 + 2 * i + 1)),
                                            s->coop_inv[size_t(j)], s->defect_inv[size_t(j)]);
        int a = i_coop ? 0 : 1, b = j_coop ? 0 : 1;
        rewards.at(agents_[size_t(i)]) += payoffs_.mine[a][b];
        rewards.at(agents_[size_t(j)]) += payoffs_.theirs[a][b];
        s->frozen[size_t(i)] = kFreezeSteps;
        s->frozen[size_t(j)] = kFreezeSteps;
        break;
      }
    }

    // freeze timers tick; expiry respawns the agent with an empty inventory
    int respawn_agent_draw = 0;
    for (int i = 0; i < n_agents_; ++i) {
      if (prev.frozen[size_t(i)] == 0) continue;  // froze this step: full 5 ticks ahead
      s->frozen[size_t(i)] -= 1;
      if (s->frozen[size_t(i)] == 0) {
        auto cell = free_cell(*s, prng::fold_in(key, uint64_t(400 + respawn_agent_draw)), -1);
        s->row[size_t(i)] = cell.first;
        s->col[size_t(i)] = cell.second;
        s->facing[size_t(i)] =
            prng::randint1(prng::fold_in(key, uint64_t(500 + respawn_agent_draw)), 0, 4);
        s->coop_inv[size_t(i)] = 0;
        s->defect_inv[size_t(i)] = 0;
        ++respawn_agent_draw;
      }
    }

    s->t = prev.t + 1;
    bool done = s->t >= max_steps_;
    StepResult r;
    r.obs = observe(*s);
    r.state = s;
    r.rewards = std::move(rewards);
    for (const auto& name : agents_) {
      r.dones.emplace(name, done);
      r.infos.emplace(name, Info{});
    }
    r.dones.emplace(kAllAgents, done);
    return r;
  }

  // layout: per-agent position planes, coop-coin plane, defect-coin plane,
  // then per-agent [coop_inv, defect_inv, frozen/5, facing one-hot], then t
  int world_state_size() const override {
    return (n_agents_ + 2) * kGrid * kGrid + 7 * n_agents_ + 1;
  }

  std::optional<std::vector<float>> world_state(const EnvState& state) const override {
    const auto& s = dynamic_cast<const StormState&>(state);
    std::vector<float> w(size_t(world_state_size()), 0.0f);
    auto plane = [&](int p, int r, int c) -> float& {
      return w[size_t(p * kGrid * kGrid + r * kGrid + c)];
    };
    for (int i = 0; i < n_agents_; ++i) plane(i, s.row[size_t(i)], s.col[size_t(i)]) = 1.0f;
    for (int c = 0; c < 2 * kCoinsPerType; ++c)
      plane(c < kCoinsPerType ? n_agents_ : n_agents_ + 1, s.coin_row[size_t(c)],
            s.coin_col[size_t(c)]) = 1.0f;
    size_t at = size_t((n_agents_ + 2) * kGrid * kGrid);
    for (int i = 0; i < n_agents_; ++i) {
      w[at++] = float(s.coop_inv[size_t(i)]);
      w[at++] = float(s.defect_inv[size_t(i)]);
      w[at++] = float(s.frozen[size_t(i)]) / kFreezeSteps;
      w[at + size_t(s.facing[size_t(i)])] = 1.0f;
      at += 4;
    }
    w[at] = float(s.t) / float(max_steps_);
    return w;
  }

  std::string render(const EnvState& state) const override {
    const auto& s = dynamic_cast<const StormState&>(state);
    std::vector<std::string> grid(kGrid, std::string(kGrid, '.'));
    for (int c = 0; c < 2 * kCoinsPerType; ++c)
      grid[size_t(s.coin_row[size_t(c)])][size_t(s.coin_col[size_t(c)])] =
          c < kCoinsPerType ? 'c' : 'd';
    const char face_glyph[4] = {'^', '>', 'v', '<'};
    for (int i = 0; i < n_agents_; ++i)
      grid[size_t(s.row[size_t(i)])][size_t(s.col[size_t(i)])] =
          s.frozen[size_t(i)] > 0 ? '*' : face_glyph[s.facing[size_t(i)]];
    std::string out = "STORM " + game_ + " t=" + std::to_string(s.t) + "\n";
    for (const auto& line : grid) out += line + "\n";
    for (int i = 0; i < n_agents_; ++i)
      out += agents_[size_t(i)] + " inv=(" + std::to_string(s.coop_inv[size_t(i)]) + "," +
             std::to_string(s.defect_inv[size_t(i)]) +
             ") frozen=" + std::to_string(s.frozen[size_t(i)]) + "\n";
    return out;
  }

  uint64_t state_hash(const EnvState& state) const override {
    const auto& s = dynamic_cast<const StormState&>(state);
    uint64_t h = 1469598103934665603ull;
    auto mix = [&h](uint64_t v) { h = (h ^ v) * 1099511628211ull; };
    for (int i = 0; i < n_agents_; ++i) {
      mix(uint64_t(s.row[size_t(i)] * kGrid + s.col[size_t(i)]));
      mix(uint64_t(s.facing[size_t(i)]));
      mix(uint64_t(s.coop_inv[size_t(i)]));
      mix(uint64_t(s.defect_inv[size_t(i)]));
      mix(uint64_t(s.frozen[size_t(i)]));
    }
    for (int c = 0; c < 2 * kCoinsPerType; ++c)
      mix(uint64_t(s.coin_row[size_t(c)] * kGrid + s.coin_col[size_t(c)]));
    mix(uint64_t(s.t));
    return h;
  }

 private:
  bool ready(const StormState& s, int i) const {
    return s.coop_inv[size_t(i)] + s.defect_inv[size_t(i)] >= 1;
  }

  bool cell_free(const StormState& s, int r, int c, int skip_coin) const {
    for (int i = 0; i < n_agents_; ++i)
      if (s.row[size_t(i)] == r && s.col[size_t(i)] == c) return false;
    for (int k = 0; k < 2 * kCoinsPerType; ++k)
      if (k != skip_coin && s.coin_row[size_t(k)] == r && s.coin_col[size_t(k)] == c) return false;
    return true;
  }

  std::pair<int, int> free_cell(const StormState& s, const PrngKey& key, int skip_coin) const {
    std::vector<int> candidates;
    for (int r = 0; r < kGrid; ++r)
      for (int c = 0; c < kGrid; ++c)
        if (cell_free(s, r, c, skip_coin)) candidates.push_back(r * kGrid + c);
    int pick = candidates[size_t(prng::randint1(key, 0, int(candidates.size())))];
    return {pick / kGrid, pick % kGrid};
  }

  void respawn_coin(StormState& s, int c, const PrngKey& key) const {
    auto cell = free_cell(s, key, c);
    s.coin_row[size_t(c)] = cell.first;
    s.coin_col[size_t(c)] = cell.second;
  }

  AgentMap<Obs> observe(const StormState& s) const {
    AgentMap<Obs> obs;
    for (int i = 0; i < n_agents_; ++i) {
      Obs o(size_t(obs_size_), 0.0f);
      // forward-biased window: the agent sits at the rear-center cell and the
      // window is rotated into its facing frame
      int f = s.facing[size_t(i)];
      int fr = kDr[f], fc = kDc[f];                      // forward
      int rr = kDr[(f + 1) % 4], rc = kDc[(f + 1) % 4];  // right
      for (int wr = 0; wr < kView; ++wr) {
        for (int wc = 0; wc < kView; ++wc) {
          int ahead = (kView - 1) - wr;  // wr = 4 is the agent's own row
          int side = wc - kView / 2;
          int r = s.row[size_t(i)] + ahead * fr + side * rr;
          int c = s.col[size_t(i)] + ahead * fc + side * rc;
          if (r < 0 || r >= kGrid || c < 0 || c >= kGrid) continue;
          auto put = [&](int p, float v) { o[size_t((wr * kView + wc) * kNumPlanes + p)] = v; };
          if (ahead == 0 && side == 0) put(kPlaneSelf, 1.0f);
          for (int j = 0; j < n_agents_; ++j) {
            if (j == i || s.row[size_t(j)] != r || s.col[size_t(j)] != c) continue;
            put(kPlaneOther, 1.0f);
            if (ready(s, j)) put(kPlaneOtherReady, 1.0f);
            if (s.frozen[size_t(j)] > 0) {
              put(kPlaneOtherFrozen, 1.0f);
              // frozen agents reveal what they were holding
              put(kPlaneOtherCoopInv, float(s.coop_inv[size_t(j)]));
              put(kPlaneOtherDefectInv, float(s.defect_inv[size_t(j)]));
            }
            put(kPlaneOtherFaceN + s.facing[size_t(j)], 1.0f);
          }
          for (int k = 0; k < 2 * kCoinsPerType; ++k) {
            if (s.coin_row[size_t(k)] != r || s.coin_col[size_t(k)] != c) continue;
            put(k < kCoinsPerType ? kPlaneCoopCoin : kPlaneDefectCoin, 1.0f);
          }
        }
      }
      size_t at = size_t(kView * kView * kNumPlanes);
      o[at + 0] = float(s.coop_inv[size_t(i)]);
      o[at + 1] = float(s.defect_inv[size_t(i)]);
      o[at + 2] = float(s.frozen[size_t(i)]) / kFreezeSteps;
      o[at + 3] = float(s.t) / float(max_steps_);
      obs.emplace(agents_[size_t(i)], std::move(o));
    }
    return obs;
  }

  std::string game_;
  Payoffs payoffs_{};
  int max_steps_ = 128;
  int n_agents_ = 2;
  int obs_size_ = 0;
};

}  // namespace

bool storm_strategy_sample(const PrngKey& key, int coop_coins, int defect_coins) {
  if (coop_coins < 0 || defect_coins < 0 || coop_coins + defect_coins == 0)
    throw ContractError("storm_strategy_sample: inventory must be non-negative and non-empty");
  double p = double(coop_coins) / double(coop_coins + defect_coins);
  return prng::bernoulli(key, p);
}

std::shared_ptr<const Env> make_storm(const std::string& game, const Config& config) {
  return std::make_shared<StormEnv>(game, config);
}

}  // namespace marl::envs
