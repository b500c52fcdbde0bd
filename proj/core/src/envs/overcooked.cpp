#include "marl/envs/overcooked.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "marl/errors.hpp"

namespace marl::envs {
namespace {

// actions: 0=up 1=down 2=left 3=right 4=stay 5=interact
constexpr int kUp = 0, kDown = 1, kLeft = 2, kRight = 3, kStay = 4, kInteract = 5;
constexpr int kDr[4] = {-1, 1, 0, 0};
constexpr int kDc[4] = {0, 0, -1, 1};

// held item codes
constexpr int kNone = 0, kOnion = 1, kPlate = 2, kSoup = 3;

// the five reference kitchens
struct NamedLayout {
  const char* name;
  const char* text;
};
constexpr NamedLayout kLayouts[] = {
    {"cramped_room",
     "XXPXX\n"
     "O  2O\n"
     "X1  X\n"
     "XDXSX\n"},
    {"asymmetric_advantages",
     "XXXXXXXXX\n"
     "O XSXOX S\n"
     "X   P 1 X\n"
     "X 2 P   X\n"
     "XXXDXDXXX\n"},
    {"coordination_ring",
     "XXXPX\n"
     "X 1 P\n"
     "D2X X\n"
     "O   X\n"
     "XOSXX\n"},
    {"forced_coordination",
     "XXXPX\n"
     "O X1P\n"
     "O2X X\n"
     "D X X\n"
     "XXXSX\n"},
    {"counter_circuit",
     "XXXPPXXX\n"
     "X 1    X\n"
     "D XXXX S\n"
     "X     2X\n"
     "XXXOOXXX\n"},
};

struct Layout {
  int h = 0, w = 0;
  std::vector<char> kind;  // 'X','O','D','P','S',' ' per cell
  int spawn[2] = {-1, -1};
  std::vector<int> pot_cells;      // ascending cell order
  std::vector<int> counter_cells;  // ascending cell order

  int at(int r, int c) const { return r * w + c; }
};

Layout parse_layout(const std::string& text, const std::string& context) {
  std::vector<std::string> rows;
  std::string line;
  for (char ch : text) {
    if (ch == '\n') {
      if (!line.empty()) rows.push_back(line);
      line.clear();
    } else {
      line += ch;
    }
  }
  if (!line.empty()) rows.push_back(line);
  if (rows.size() < 3) throw SchemaError(context + ": layout needs at least 3 rows");
  Layout lay;
  lay.h = int(rows.size());
  lay.w = int(rows[0].size());
  for (const auto& rrow : rows)
    if (int(rrow.size()) != lay.w)
      throw SchemaError(context + ": layout rows must all have the same width");
  lay.kind.assign(size_t(lay.h * lay.w), ' ');
  for (int r = 0; r < lay.h; ++r) {
    for (int c = 0; c < lay.w; ++c) {
      char ch = rows[size_t(r)][size_t(c)];
      int cell = lay.at(r, c);
      switch (ch) {
        case 'X': case 'O': case 'D': case 'P': case 'S':
          lay.kind[size_t(cell)] = ch;
          if (ch == 'P') lay.pot_cells.push_back(cell);
          if (ch == 'X') lay.counter_cells.push_back(cell);
          break;
        case ' ':
          lay.kind[size_t(cell)] = ' ';
          break;
        case '1': case '2': {
          int idx = ch - '1';
          if (lay.spawn[idx] != -1)
            throw SchemaError(context + ": duplicate spawn digit in layout");
          lay.spawn[idx] = cell;
          lay.kind[size_t(cell)] = ' ';  // spawns sit on floor
          break;
        }
        default:
          throw SchemaError(context + ": unknown layout character '" + std::string(1, ch) + "'");
      }
    }
  }
  if (lay.spawn[0] < 0 || lay.spawn[1] < 0)
    throw SchemaError(context + ": layout needs spawn digits 1 and 2");
  auto present = [&](char ch) {
    return std::find(lay.kind.begin(), lay.kind.end(), ch) != lay.kind.end();
  };
  if (!present('P') || !present('O') || !present('D') || !present('S'))
    throw SchemaError(context + ": layout needs at least one of each P, O, D, S");
  // agents may never walk off the map: the border must be non-floor
  for (int r = 0; r < lay.h; ++r)
    for (int c = 0; c < lay.w; ++c)
      if ((r == 0 || c == 0 || r == lay.h - 1 || c == lay.w - 1) && lay.kind[size_t(lay.at(r, c))] == ' ')
        throw SchemaError(context + ": layout border must be walls/stations, not floor");
  return lay;
}

struct KitchenState final : EnvState {
  int pos[2] = {0, 0};
  int facing[2] = {kUp, kUp};
  int held[2] = {kNone, kNone};
  std::vector<int> pot_onions;   // per pot cell, 0..3
  std::vector<int> pot_timer;    // >0 while cooking; 0 when idle or ready
  std::vector<int> counter_item; // per counter cell: kNone/kOnion/kPlate/kSoup
  int t = 0;
};

// observation planes (self-first egocentric ordering)
enum ObsPlane : int {
  kPlaneSelfPos = 0,
  kPlaneOtherPos = 1,
  kPlaneSelfFace = 2,    // 2..5, one plane per direction
  kPlaneOtherFace = 6,   // 6..9
  kPlaneCounter = 10,
  kPlaneOnionPile = 11,
  kPlanePlatePile = 12,
  kPlanePot = 13,
  kPlaneServe = 14,
  kPlanePotOnions = 15,  // onion count at pot cells
  kPlanePotTimer = 16,   // remaining cook fraction at pot cells
  kPlanePotReady = 17,
  kPlaneSelfHeld = 18,   // 18..20: onion, plate, soup
  kPlaneOtherHeld = 21,  // 21..23
  kPlaneCounterItem = 24,  // 24..26: onion, plate, soup
  kNumObsPlanes = 27,
};

class OvercookedEnv final : public Env {
 public:
  OvercookedEnv(const std::string& layout_name, const Config& config) : name_(layout_name) {
    ConfigView v(config, "overcooked_" + layout_name + "_v0");
    std::string text = v.get_string("layout", "");
    if (text.empty()) text = overcooked_layout_text(layout_name);
    max_steps_ = v.get_int("max_steps", 400);
    cook_time_ = v.get_int("cook_time", 20);
    delivery_reward_ = v.get_double("delivery_reward", 20.0);
    shaping_onion_ = v.get_double("shaping_onion", 3.0);
    shaping_plate_ = v.get_double("shaping_plate", 3.0);
    shaping_soup_ = v.get_double("shaping_soup", 5.0);
    random_conflicts_ = v.get_bool("random_conflict_resolution", false);
    v.check_no_extras();
    if (max_steps_ < 1) throw SchemaError("overcooked: max_steps must be >= 1");
    if (cook_time_ < 1) throw SchemaError("overcooked: cook_time must be >= 1");
    lay_ = parse_layout(text, "overcooked_" + layout_name + "_v0");
    agents_ = {"agent_0", "agent_1"};
  }

  std::string id() const override { return "overcooked_" + name_ + "_v0"; }

  SpaceDescriptor observation_space(const std::string&) const override {
    return SpaceDescriptor::box({obs_size()}, 0.0f, float(std::max(3, cook_time_)));
  }
  SpaceDescriptor action_space(const std::string&) const override {
    return SpaceDescriptor::discrete(6);
  }

  int max_steps() const override { return max_steps_; }
  bool cooperative() const override { return true; }

  std::pair<AgentMap<Obs>, StatePtr> reset(const PrngKey&) const override {
    // kitchens start identically every episode: spawns come from the layout
    auto s = std::make_shared<KitchenState>();
    s->pos[0] = lay_.spawn[0];
    s->pos[1] = lay_.spawn[1];
    s->facing[0] = kUp;
    s->facing[1] = kUp;
    s->pot_onions.assign(lay_.pot_cells.size(), 0);
    s->pot_timer.assign(lay_.pot_cells.size(), 0);
    s->counter_item.assign(lay_.counter_cells.size(), kNone);
    return {observe(*s), s};
  }

  StepResult step(const PrngKey& key, const EnvState& state,
                  const AgentMap<Action>& actions) const override {
    const auto& prev = dynamic_cast<const KitchenState&>(state);
    if (prev.t >= max_steps_) throw ContractError(id() + ": cannot step a terminal state");
    validate_actions(actions);

    auto s = std::make_shared<KitchenState>(prev);
    int act[2];
    for (int i = 0; i < 2; ++i) act[i] = std::get<int>(actions.at(agents_[size_t(i)]));

    // pots that were already cooking tick down first, so a pot filled this
    // step still reads the full cook time afterwards
    for (size_t p = 0; p < lay_.pot_cells.size(); ++p)
      if (s->pot_onions[p] == 3 && s->pot_timer[p] > 0) s->pot_timer[p] -= 1;

    // movement: facing always follows the attempted direction; the move
    // itself lands only on floor, and same-cell/swap conflicts hold both back
    int want[2] = {s->pos[0], s->pos[1]};
    for (int i = 0; i < 2; ++i) {
      if (act[i] > kRight) continue;  // stay/interact keep position and facing
      s->facing[i] = act[i];
      int r = s->pos[i] / lay_.w + kDr[act[i]];
      int c = s->pos[i] % lay_.w + kDc[act[i]];
      if (lay_.kind[size_t(lay_.at(r, c))] == ' ') want[i] = lay_.at(r, c);
    }
    bool swap = want[0] == prev.pos[1] && want[1] == prev.pos[0] && want[0] != prev.pos[0];
    if (want[0] == want[1] || swap) {
      if (random_conflicts_ && !swap && want[0] != prev.pos[0] && want[1] != prev.pos[1]) {
        // both racing into one empty cell: a key draw picks the winner
        int loser = prng::bernoulli(key, 0.5) ? 0 : 1;
        want[loser] = prev.pos[loser];
      } else {
        want[0] = prev.pos[0];
        want[1] = prev.pos[1];
      }
    }
    s->pos[0] = want[0];
    s->pos[1] = want[1];

    // interactions resolve in agent order on the faced cell
    double shaped[2] = {0.0, 0.0};
    int deliveries = 0;
    for (int i = 0; i < 2; ++i) {
      if (act[i] != kInteract) continue;
      int r = s->pos[i] / lay_.w + kDr[s->facing[i]];
      int c = s->pos[i] % lay_.w + kDc[s->facing[i]];
      int cell = lay_.at(r, c);
      switch (lay_.kind[size_t(cell)]) {
        case 'O':
          if (s->held[i] == kNone) s->held[i] = kOnion;
          break;
        case 'D':
          if (s->held[i] == kNone) {
            s->held[i] = kPlate;
            shaped[i] += shaping_plate_;
          }
          break;
        case 'P': {
          size_t p = pot_index(cell);
          if (s->held[i] == kOnion && s->pot_onions[p] < 3) {
            s->pot_onions[p] += 1;
            s->held[i] = kNone;
            shaped[i] += shaping_onion_;
            if (s->pot_onions[p] == 3) s->pot_timer[p] = cook_time_;  // auto-start
          } else if (s->held[i] == kPlate && s->pot_onions[p] == 3 && s->pot_timer[p] == 0) {
            s->held[i] = kSoup;
            s->pot_onions[p] = 0;
            shaped[i] += shaping_soup_;
          }
          break;
        }
        case 'S':
          if (s->held[i] == kSoup) {
            s->held[i] = kNone;
            deliveries += 1;
          }
          break;
        case 'X': {
          size_t k = counter_index(cell);
          if (s->held[i] != kNone && s->counter_item[k] == kNone) {
            s->counter_item[k] = s->held[i];
            s->held[i] = kNone;
          } else if (s->held[i] == kNone && s->counter_item[k] != kNone) {
            s->held[i] = s->counter_item[k];
            s->counter_item[k] = kNone;
          }
          break;
        }
        default:
          break;  // floor: nothing to interact with
      }
    }

    s->t = prev.t + 1;
    bool done = s->t >= max_steps_;
    double team = delivery_reward_ * deliveries;
    StepResult r;
    r.obs = observe(*s);
    r.state = s;
    for (int i = 0; i < 2; ++i) {
      r.rewards.emplace(agents_[size_t(i)], team);
      r.dones.emplace(agents_[size_t(i)], done);
      r.infos.emplace(agents_[size_t(i)], Info{{"shaped_reward", shaped[i]},
                                               {"deliveries", double(deliveries)}});
    }
    r.dones.emplace(kAllAgents, done);
    return r;
  }

  int world_state_size() const override { return obs_size(); }

  std::optional<std::vector<float>> world_state(const EnvState& state) const override {
    return encode(dynamic_cast<const KitchenState&>(state), 0);
  }

  std::string render(const EnvState& state) const override {
    const auto& s = dynamic_cast<const KitchenState&>(state);
    std::vector<std::string> grid(size_t(lay_.h));
    for (int r = 0; r < lay_.h; ++r) {
      grid[size_t(r)].resize(size_t(lay_.w));
      for (int c = 0; c < lay_.w; ++c) grid[size_t(r)][size_t(c)] = lay_.kind[size_t(lay_.at(r, c))];
    }
    const char* item_glyph = ".oup";  // none, onion, plate(u), soup(p)... see legend below
    for (size_t k = 0; k < lay_.counter_cells.size(); ++k)
      if (s.counter_item[k] != kNone)
        grid[size_t(lay_.counter_cells[k] / lay_.w)][size_t(lay_.counter_cells[k] % lay_.w)] =
            item_glyph[s.counter_item[k]];
    grid[size_t(s.pos[0] / lay_.w)][size_t(s.pos[0] % lay_.w)] = '1';
    grid[size_t(s.pos[1] / lay_.w)][size_t(s.pos[1] % lay_.w)] = '2';
    std::string out = id() + " t=" + std::to_string(s.t) + "\n";
    for (const auto& line : grid) out += line + "\n";
    const char* face_name[4] = {"up", "down", "left", "right"};
    const char* item_name[4] = {"nothing", "onion", "plate", "soup"};
    for (int i = 0; i < 2; ++i)
      out += agents_[size_t(i)] + " facing " + face_name[s.facing[i]] + " holding " +
             item_name[s.held[i]] + "\n";
    for (size_t p = 0; p < lay_.pot_cells.size(); ++p)
      out += "pot " + std::to_string(lay_.pot_cells[p]) + ": onions=" +
             std::to_string(s.pot_onions[p]) + " timer=" + std::to_string(s.pot_timer[p]) + "\n";
    return out;
  }

  uint64_t state_hash(const EnvState& state) const override {
    const auto& s = dynamic_cast<const KitchenState&>(state);
    uint64_t h = 1469598103934665603ull;
    auto mix = [&h](uint64_t v) { h = (h ^ v) * 1099511628211ull; };
    for (int i = 0; i < 2; ++i) {
      mix(uint64_t(s.pos[i]));
      mix(uint64_t(s.facing[i]));
      mix(uint64_t(s.held[i]));
    }
    for (size_t p = 0; p < s.pot_onions.size(); ++p) {
      mix(uint64_t(s.pot_onions[p]));
      mix(uint64_t(s.pot_timer[p]));
    }
    for (int item : s.counter_item) mix(uint64_t(item));
    mix(uint64_t(s.t));
    return h;
  }

  // shaping derived from the transition alone; used by step() via events and
  // re-derivable for the public helper
  AgentMap<double> shaped_from_delta(const KitchenState& prev, const KitchenState& next) const {
    AgentMap<double> out;
    for (int i = 0; i < 2; ++i) {
      double v = 0.0;
      int fr = next.pos[i] / lay_.w + kDr[next.facing[i]];
      int fc = next.pos[i] % lay_.w + kDc[next.facing[i]];
      char faced = lay_.kind[size_t(lay_.at(fr, fc))];
      if (prev.held[i] == kOnion && next.held[i] == kNone && faced == 'P') v += shaping_onion_;
      if (prev.held[i] == kNone && next.held[i] == kPlate && faced == 'D') v += shaping_plate_;
      if (prev.held[i] == kPlate && next.held[i] == kSoup) v += shaping_soup_;
      out.emplace(agents_[size_t(i)], v);
    }
    return out;
  }

 private:
  int obs_size() const { return kNumObsPlanes * lay_.h * lay_.w + 1; }

  size_t pot_index(int cell) const {
    return size_t(std::lower_bound(lay_.pot_cells.begin(), lay_.pot_cells.end(), cell) -
                  lay_.pot_cells.begin());
  }
  size_t counter_index(int cell) const {
    return size_t(std::lower_bound(lay_.counter_cells.begin(), lay_.counter_cells.end(), cell) -
                  lay_.counter_cells.begin());
  }

  std::vector<float> encode(const KitchenState& s, int me) const {
    const int cells = lay_.h * lay_.w;
    std::vector<float> o(size_t(obs_size()), 0.0f);
    auto put = [&](int plane, int cell, float v) { o[size_t(plane * cells + cell)] = v; };
    int other = 1 - me;
    put(kPlaneSelfPos, s.pos[me], 1.0f);
    put(kPlaneOtherPos, s.pos[other], 1.0f);
    put(kPlaneSelfFace + s.facing[me], s.pos[me], 1.0f);
    put(kPlaneOtherFace + s.facing[other], s.pos[other], 1.0f);
    for (int cell = 0; cell < cells; ++cell) {
      switch (lay_.kind[size_t(cell)]) {
        case 'X': put(kPlaneCounter, cell, 1.0f); break;
        case 'O': put(kPlaneOnionPile, cell, 1.0f); break;
        case 'D': put(kPlanePlatePile, cell, 1.0f); break;
        case 'P': put(kPlanePot, cell, 1.0f); break;
        case 'S': put(kPlaneServe, cell, 1.0f); break;
        default: break;
      }
    }
    for (size_t p = 0; p < lay_.pot_cells.size(); ++p) {
      int cell = lay_.pot_cells[p];
      put(kPlanePotOnions, cell, float(s.pot_onions[p]));
      put(kPlanePotTimer, cell, float(s.pot_timer[p]) / float(cook_time_));
      if (s.pot_onions[p] == 3 && s.pot_timer[p] == 0) put(kPlanePotReady, cell, 1.0f);
    }
    if (s.held[me] != kNone) put(kPlaneSelfHeld + s.held[me] - 1, s.pos[me], 1.0f);
    if (s.held[other] != kNone) put(kPlaneOtherHeld + s.held[other] - 1, s.pos[other], 1.0f);
    for (size_t k = 0; k < lay_.counter_cells.size(); ++k)
      if (s.counter_item[k] != kNone)
        put(kPlaneCounterItem + s.counter_item[k] - 1, lay_.counter_cells[k], 1.0f);
    o[size_t(kNumObsPlanes * cells)] = float(s.t) / float(max_steps_);
    return o;
  }

  AgentMap<Obs> observe(const KitchenState& s) const {
    AgentMap<Obs> obs;
    for (int i = 0; i < 2; ++i) obs.emplace(agents_[size_t(i)], encode(s, i));
    return obs;
  }

  std::string name_;
  Layout lay_;
  int max_steps_ = 400;
  int cook_time_ = 20;
  double delivery_reward_ = 20.0;
  double shaping_onion_ = 3.0, shaping_plate_ = 3.0, shaping_soup_ = 5.0;
  bool random_conflicts_ = false;
};

}  // namespace

std::vector<std::string> overcooked_layout_names() {
  std::vector<std::string> names;
  for (const auto& l : kLayouts) names.push_back(l.name);
  return names;
}

std::string overcooked_layout_text(const std::string& layout_name) {
  for (const auto& l : kLayouts)
    if (layout_name == l.name) return l.text;
  throw NotFoundError("overcooked: unknown layout '" + layout_name + "'");
}

AgentMap<double> overcooked_shaped_reward(const Env& env, const EnvState& prev,
                                          const EnvState& next) {
  const auto* oc = dynamic_cast<const OvercookedEnv*>(&env);
  if (oc == nullptr) throw ContractError("overcooked_shaped_reward: not an overcooked env");
  return oc->shaped_from_delta(dynamic_cast<const KitchenState&>(prev),
                               dynamic_cast<const KitchenState&>(next));
}

std::shared_ptr<const Env> make_overcooked(const std::string& layout_name, const Config& config) {
  return std::make_shared<OvercookedEnv>(layout_name, config);
}

}  // namespace marl::envs
