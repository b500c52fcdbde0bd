#include "marl/envs/hanabi.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "marl/errors.hpp"

namespace marl::envs {
namespace {

constexpr const char* kColorLetters = "RYGWB";

struct HanabiState : EnvState {
  std::vector<int8_t> shuffled;  // full deck in draw order; draws advance deck_pos
  int deck_pos = 0;
  std::vector<std::vector<int8_t>> hands;       // card = color * n_ranks + rank
  std::vector<std::vector<uint16_t>> color_kn;  // candidate bitmasks per slot
  std::vector<std::vector<uint16_t>> rank_kn;
  std::vector<int8_t> fireworks;  // pile height per color, 0..n_ranks
  int info = 0;
  int lives = 0;
  std::vector<int16_t> discards;  // count per (color, rank)
  int current = 0;
  int countdown = -1;  // turns left once the deck is empty; -1 while drawing
  int last_actor = -1;
  int last_action = -1;
  int t = 0;
  bool over = false;
};

class HanabiEnv : public Env {
 public:
  explicit HanabiEnv(const Config& config) {
    ConfigView v(config, "hanabi_v0");
    players_ = v.get_int("n_players", 2);
    colors_ = v.get_int("n_colors", 5);
    ranks_ = v.get_int("n_ranks", 5);
    if (players_ < 2 || players_ > 5) throw SchemaError("hanabi_v0: n_players must be in [2,5]");
    if (colors_ < 1 || colors_ > 5) throw SchemaError("hanabi_v0: n_colors must be in [1,5]");
    if (ranks_ < 1 || ranks_ > 9) throw SchemaError("hanabi_v0: n_ranks must be in [1,9]");
    hand_ = v.get_int("hand_size", players_ <= 3 ? 5 : 4);
    info_max_ = v.get_int("info_tokens", 8);
    lives_max_ = v.get_int("life_tokens", 3);
    zero_on_loss_ = v.get_bool("zero_score_on_loss", false);
    auto mult = v.get_double_list("multiplicities", {3, 2, 2, 2, 1});
    v.check_no_extras();
    if (hand_ < 1) throw SchemaError("hanabi_v0: hand_size must be >= 1");
    if (info_max_ < 1) throw SchemaError("hanabi_v0: info_tokens must be >= 1");
    if (lives_max_ < 1) throw SchemaError("hanabi_v0: life_tokens must be >= 1");
    if (int(mult.size()) != ranks_)
      throw SchemaError("hanabi_v0: multiplicities must list one count per rank");
    for (double m : mult) {
      if (m < 1 || m != int(m)) throw SchemaError("hanabi_v0: multiplicities must be integers >= 1");
      per_color_ += int(m);
      mult_.push_back(int(m));
    }
    deck_total_ = colors_ * per_color_;
    if (deck_total_ < players_ * hand_)
      throw SchemaError("hanabi_v0: deck too small for the opening deal");

    for (int i = 0; i < players_; ++i) agents_.push_back("agent_" + std::to_string(i));

    // every turn either consumes a deck card / final-round turn or burns a
    // hint token; tokens regained are bounded by discards + completed colors
    max_steps_ = (deck_total_ + players_) + (info_max_ + deck_total_ + colors_);
  }

  std::string id() const override { return "hanabi_v0"; }

  SpaceDescriptor observation_space(const std::string&) const override {
    return SpaceDescriptor::box({obs_size()}, 0.0f, float(std::max(3, deck_total_)));
  }
  SpaceDescriptor action_space(const std::string&) const override {
    return SpaceDescriptor::discrete(num_actions());
  }

  int max_steps() const override { return max_steps_; }
  bool cooperative() const override { return true; }

  int num_actions() const { return 2 * hand_ + (players_ - 1) * (colors_ + ranks_); }

  std::pair<AgentMap<Obs>, StatePtr> reset(const PrngKey& key) const override {
    auto s = std::make_shared<HanabiState>();
    // canonical deck, then a keyed shuffle fixes the whole episode's draws
    std::vector<int8_t> cards;
    for (int c = 0; c < colors_; ++c)
      for (int r = 0; r < ranks_; ++r)
        for (int m = 0; m < mult_[size_t(r)]; ++m) cards.push_back(int8_t(c * ranks_ + r));
    auto perm = prng::permutation(key, deck_total_);
    s->shuffled.resize(size_t(deck_total_));
    for (int i = 0; i < deck_total_; ++i) s->shuffled[size_t(i)] = cards[size_t(perm[size_t(i)])];

    s->hands.resize(size_t(players_));
    s->color_kn.resize(size_t(players_));
    s->rank_kn.resize(size_t(players_));
    for (int p = 0; p < players_; ++p)
      for (int h = 0; h < hand_; ++h) draw_card(*s, p);
    s->fireworks.assign(size_t(colors_), 0);
    s->info = info_max_;
    s->lives = lives_max_;
    s->discards.assign(size_t(colors_ * ranks_), 0);
    if (s->deck_pos >= deck_total_) s->countdown = players_;
    return {observe(*s), s};
  }

  std::vector<uint8_t> legal_actions(const EnvState& state,
                                     const std::string& agent) const override {
    const auto& s = dynamic_cast<const HanabiState&>(state);
    std::vector<uint8_t> mask(size_t(num_actions()), 0);
    int me = agent_index(agent);
    if (me != s.current || s.over) return mask;
    int in_hand = int(s.hands[size_t(me)].size());
    for (int h = 0; h < in_hand; ++h) {
      if (s.info < info_max_) mask[size_t(h)] = 1;  // discard
      mask[size_t(hand_ + h)] = 1;                  // play
    }
    if (s.info > 0) {
      for (int o = 1; o < players_; ++o) {
        int target = (me + o) % players_;
        for (int8_t card : s.hands[size_t(target)]) {
          mask[size_t(2 * hand_ + (o - 1) * colors_ + card / ranks_)] = 1;
          mask[size_t(2 * hand_ + (players_ - 1) * colors_ + (o - 1) * ranks_ + card % ranks_)] = 1;
        }
      }
    }
    return mask;
  }

  StepResult step(const PrngKey&, const EnvState& state,
                  const AgentMap<Action>& actions) const override {
    const auto& prev = dynamic_cast<const HanabiState&>(state);
    if (prev.over) throw ContractError("hanabi_v0: cannot step a terminal state");
    validate_actions(actions);
    int action = std::get<int>(actions.at(agents_[size_t(prev.current)]));
    auto mask = legal_actions(prev, agents_[size_t(prev.current)]);
    if (!mask[size_t(action)])
      throw ContractError("hanabi_v0: illegal action " + std::to_string(action) + " for " +
                          agents_[size_t(prev.current)]);

    auto s = std::make_shared<HanabiState>(prev);
    int me = s->current;
    double reward = 0.0;

    if (action < hand_) {  // discard
      int8_t card = take_card(*s, me, action);
      s->discards[size_t(card)] += 1;
      s->info += 1;
      draw_card(*s, me);
    } else if (action < 2 * hand_) {  // play
      int slot = action - hand_;
      int8_t card = take_card(*s, me, slot);
      int color = card / ranks_, rank = card % ranks_;
      if (s->fireworks[size_t(color)] == rank) {
        s->fireworks[size_t(color)] = int8_t(rank + 1);
        reward += 1.0;
        if (rank + 1 == ranks_ && s->info < info_max_) s->info += 1;  // color done
      } else {
        s->discards[size_t(card)] += 1;
        s->lives -= 1;
      }
      draw_card(*s, me);
    } else {  // hint
      int idx = action - 2 * hand_;
      s->info -= 1;
      if (idx < (players_ - 1) * colors_) {
        int target = (me + idx / colors_ + 1) % players_;
        int color = idx % colors_;
        auto& hand = s->hands[size_t(target)];
        for (size_t k = 0; k < hand.size(); ++k) {
          if (hand[k] / ranks_ == color)
            s->color_kn[size_t(target)][k] &= uint16_t(1u << color);
          else
            s->color_kn[size_t(target)][k] &= uint16_t(~(1u << color));
        }
      } else {
        idx -= (players_ - 1) * colors_;
        int target = (me + idx / ranks_ + 1) % players_;
        int rank = idx % ranks_;
        auto& hand = s->hands[size_t(target)];
        for (size_t k = 0; k < hand.size(); ++k) {
          if (hand[k] % ranks_ == rank)
            s->rank_kn[size_t(target)][k] &= uint16_t(1u << rank);
          else
            s->rank_kn[size_t(target)][k] &= uint16_t(~(1u << rank));
        }
      }
    }

    // final-round bookkeeping: the turn that empties the deck starts the
    // countdown; each later turn burns one of the remaining final turns
    if (s->deck_pos >= deck_total_) {
      if (s->countdown < 0)
        s->countdown = players_;
      else
        s->countdown -= 1;
    }

    s->last_actor = me;
    s->last_action = action;
    s->current = (me + 1) % players_;
    s->t = prev.t + 1;

    int score = std::accumulate(s->fireworks.begin(), s->fireworks.end(), 0);
    bool lost = s->lives <= 0;
    s->over = lost || score == colors_ * ranks_ || s->countdown == 0 || s->t >= max_steps_;
    if (lost && zero_on_loss_) reward -= double(score);  // cancel the accrued return

    StepResult r;
    r.obs = observe(*s);
    r.state = s;
    for (const auto& agent : agents_) {
      r.rewards.emplace(agent, reward);
      r.dones.emplace(agent, s->over);
      r.infos.emplace(agent, Info{{"score", double(score)},
                                  {"info_tokens", double(s->info)},
                                  {"life_tokens", double(s->lives)}});
    }
    r.dones.emplace(kAllAgents, s->over);
    return r;
  }

  int world_state_size() const override {
    return players_ * hand_ * (colors_ + ranks_) + players_ * hand_ + colors_ * (ranks_ + 1) +
           info_max_ + lives_max_ + colors_ * ranks_ + 1 + players_ + num_actions() + players_;
  }

  std::optional<std::vector<float>> world_state(const EnvState& state) const override {
    const auto& s = dynamic_cast<const HanabiState&>(state);
    std::vector<float> w(size_t(world_state_size()), 0.0f);
    size_t at = 0;
    for (int p = 0; p < players_; ++p) write_hand(w, at, s, p);
    for (int p = 0; p < players_; ++p)
      for (int h = 0; h < hand_; ++h)
        w[at++] = h < int(s.hands[size_t(p)].size()) ? 1.0f : 0.0f;
    write_common(w, at, s);
    if (s.last_actor >= 0) w[at + size_t(s.last_actor)] = 1.0f;
    at += size_t(players_);
    if (s.last_action >= 0) w[at + size_t(s.last_action)] = 1.0f;
    at += size_t(num_actions());
    w[at + size_t(s.current)] = 1.0f;
    at += size_t(players_);
    return w;
  }

  std::string render(const EnvState& state) const override {
    const auto& s = dynamic_cast<const HanabiState&>(state);
    int score = std::accumulate(s.fireworks.begin(), s.fireworks.end(), 0);
    std::string out = "hanabi_v0 t=" + std::to_string(s.t) +
                      " current=" + agents_[size_t(s.current)] +
                      " deck=" + std::to_string(deck_total_ - s.deck_pos) +
                      " info=" + std::to_string(s.info) + " lives=" + std::to_string(s.lives) +
                      " score=" + std::to_string(score) + (s.over ? " (over)" : "") + "\n";
    out += "fireworks:";
    for (int c = 0; c < colors_; ++c)
      out += std::string(" ") + kColorLetters[c] + std::to_string(int(s.fireworks[size_t(c)]));
    out += "\n";
    for (int p = 0; p < players_; ++p) {
      out += agents_[size_t(p)] + " hand:";
      for (size_t k = 0; k < s.hands[size_t(p)].size(); ++k) {
        int8_t card = s.hands[size_t(p)][k];
        out += std::string(" ") + kColorLetters[card / ranks_] + std::to_string(card % ranks_ + 1);
      }
      out += " | knows:";
      for (size_t k = 0; k < s.hands[size_t(p)].size(); ++k) {
        out += " ";
        for (int c = 0; c < colors_; ++c)
          if (s.color_kn[size_t(p)][k] & (1u << c)) out += kColorLetters[c];
        out += "/";
        for (int r = 0; r < ranks_; ++r)
          if (s.rank_kn[size_t(p)][k] & (1u << r)) out += std::to_string(r + 1);
      }
      out += "\n";
    }
    out += "discards:";
    for (int card = 0; card < colors_ * ranks_; ++card)
      for (int n = 0; n < s.discards[size_t(card)]; ++n)
        out += std::string(" ") + kColorLetters[card / ranks_] + std::to_string(card % ranks_ + 1);
    out += "\n";
    return out;
  }

  uint64_t state_hash(const EnvState& state) const override {
    const auto& s = dynamic_cast<const HanabiState&>(state);
    uint64_t h = 1469598103934665603ull;
    auto mix = [&h](uint64_t v) { h = (h ^ v) * 1099511628211ull; };
    mix(uint64_t(s.deck_pos));
    for (int8_t c : s.shuffled) mix(uint64_t(uint8_t(c)));
    for (int p = 0; p < players_; ++p) {
      mix(uint64_t(s.hands[size_t(p)].size()));
      for (size_t k = 0; k < s.hands[size_t(p)].size(); ++k) {
        mix(uint64_t(uint8_t(s.hands[size_t(p)][k])));
        mix(uint64_t(s.color_kn[size_t(p)][k]));
        mix(uint64_t(s.rank_kn[size_t(p)][k]));
      }
    }
    for (int8_t f : s.fireworks) mix(uint64_t(uint8_t(f)));
    for (int16_t d : s.discards) mix(uint64_t(uint16_t(d)));
    mix(uint64_t(s.info));
    mix(uint64_t(s.lives));
    mix(uint64_t(s.current));
    mix(uint64_t(s.countdown + 1));
    mix(uint64_t(s.last_actor + 1));
    mix(uint64_t(s.last_action + 1));
    mix(uint64_t(s.t));
    mix(uint64_t(s.over));
    return h;
  }

  StatePtr replace_card(const EnvState& state, int player, int slot, int color, int rank) const {
    const auto& prev = dynamic_cast<const HanabiState&>(state);
    if (player < 0 || player >= players_) throw ContractError("hanabi_v0: bad player");
    if (slot < 0 || slot >= int(prev.hands[size_t(player)].size()))
      throw ContractError("hanabi_v0: bad slot");
    if (color < 0 || color >= colors_ || rank < 0 || rank >= ranks_)
      throw ContractError("hanabi_v0: bad card");
    auto s = std::make_shared<HanabiState>(prev);
    s->hands[size_t(player)][size_t(slot)] = int8_t(color * ranks_ + rank);
    return s;
  }

 private:
  int agent_index(const std::string& agent) const {
    for (size_t i = 0; i < agents_.size(); ++i)
      if (agents_[i] == agent) return int(i);
    throw ContractError("hanabi_v0: unknown agent '" + agent + "'");
  }

  void draw_card(HanabiState& s, int player) const {
    if (s.deck_pos >= deck_total_) return;
    s.hands[size_t(player)].push_back(s.shuffled[size_t(s.deck_pos++)]);
    s.color_kn[size_t(player)].push_back(uint16_t((1u << colors_) - 1));
    s.rank_kn[size_t(player)].push_back(uint16_t((1u << ranks_) - 1));
  }

  int8_t take_card(HanabiState& s, int player, int slot) const {
    int8_t card = s.hands[size_t(player)][size_t(slot)];
    s.hands[size_t(player)].erase(s.hands[size_t(player)].begin() + slot);
    s.color_kn[size_t(player)].erase(s.color_kn[size_t(player)].begin() + slot);
    s.rank_kn[size_t(player)].erase(s.rank_kn[size_t(player)].begin() + slot);
    return card;
  }

  int obs_size() const {
    return (players_ - 1) * hand_ * (colors_ + ranks_) + players_ * hand_ +
           hand_ * (colors_ + ranks_) + colors_ * (ranks_ + 1) + info_max_ + lives_max_ +
           colors_ * ranks_ + 1 + players_ + num_actions() + players_;
  }

  // one player's cards as one-hot colour+rank per slot (zeros when short)
  void write_hand(std::vector<float>& w, size_t& at, const HanabiState& s, int player) const {
    for (int h = 0; h < hand_; ++h) {
      if (h < int(s.hands[size_t(player)].size())) {
        int8_t card = s.hands[size_t(player)][size_t(h)];
        w[at + size_t(card / ranks_)] = 1.0f;
        w[at + size_t(colors_ + card % ranks_)] = 1.0f;
      }
      at += size_t(colors_ + ranks_);
    }
  }

  // fireworks, tokens, discards, deck fraction (shared by obs and world state)
  void write_common(std::vector<float>& w, size_t& at, const HanabiState& s) const {
    for (int c = 0; c < colors_; ++c) {
      w[at + size_t(s.fireworks[size_t(c)])] = 1.0f;
      at += size_t(ranks_ + 1);
    }
    for (int i = 0; i < s.info; ++i) w[at + size_t(i)] = 1.0f;
    at += size_t(info_max_);
    for (int i = 0; i < s.lives; ++i) w[at + size_t(i)] = 1.0f;
    at += size_t(lives_max_);
    for (int card = 0; card < colors_ * ranks_; ++card) w[at++] = float(s.discards[size_t(card)]);
    w[at++] = float(deck_total_ - s.deck_pos) / float(deck_total_);
  }

  Obs encode(const HanabiState& s, int me) const {
    std::vector<float> w(size_t(obs_size()), 0.0f);
    size_t at = 0;
    for (int o = 1; o < players_; ++o) write_hand(w, at, s, (me + o) % players_);
    for (int o = 0; o < players_; ++o) {
      int p = (me + o) % players_;
      for (int h = 0; h < hand_; ++h) w[at++] = h < int(s.hands[size_t(p)].size()) ? 1.0f : 0.0f;
    }
    for (int h = 0; h < hand_; ++h) {
      if (h < int(s.hands[size_t(me)].size())) {
        for (int c = 0; c < colors_; ++c)
          if (s.color_kn[size_t(me)][size_t(h)] & (1u << c)) w[at + size_t(c)] = 1.0f;
        for (int r = 0; r < ranks_; ++r)
          if (s.rank_kn[size_t(me)][size_t(h)] & (1u << r)) w[at + size_t(colors_ + r)] = 1.0f;
      }
      at += size_t(colors_ + ranks_);
    }
    write_common(w, at, s);
    if (s.last_actor >= 0) w[at + size_t((s.last_actor - me + players_) % players_)] = 1.0f;
    at += size_t(players_);
    if (s.last_action >= 0) w[at + size_t(s.last_action)] = 1.0f;
    at += size_t(num_actions());
    w[at + size_t((s.current - me + players_) % players_)] = 1.0f;
    return w;
  }

  AgentMap<Obs> observe(const HanabiState& s) const {
    AgentMap<Obs> obs;
    for (int p = 0; p < players_; ++p) obs.emplace(agents_[size_t(p)], encode(s, p));
    return obs;
  }

  int players_ = 2, colors_ = 5, ranks_ = 5, hand_ = 5;
  int info_max_ = 8, lives_max_ = 3;
  bool zero_on_loss_ = false;
  std::vector<int> mult_;
  int per_color_ = 0, deck_total_ = 0;
  int max_steps_ = 0;
};

}  // namespace

std::shared_ptr<const Env> make_hanabi(const Config& config) {
  return std::make_shared<HanabiEnv>(config);
}

StatePtr hanabi_replace_card(const Env& env, const EnvState& state, const std::string& agent,
                             int slot, int color, int rank) {
  const auto* h = dynamic_cast<const HanabiEnv*>(&env);
  if (h == nullptr) throw ContractError("hanabi_replace_card: not a hanabi env");
  int player = -1;
  for (size_t i = 0; i < env.agents().size(); ++i)
    if (env.agents()[i] == agent) player = int(i);
  if (player < 0) throw ContractError("hanabi_replace_card: unknown agent '" + agent + "'");
  return h->replace_card(state, player, slot, color, rank);
}

}  // namespace marl::envs
