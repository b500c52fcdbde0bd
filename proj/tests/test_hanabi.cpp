#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "marl/envs/hanabi.hpp"
#include "marl/errors.hpp"
#include "marl/registry.hpp"

using namespace marl;

namespace {

void ensure(bool ok, const char* what) {
  if (!ok) throw std::runtime_error(std::string("invariant violated: ") + what);
}

// config mirror used by the decoders
struct Cfg {
  int P = 2, C = 5, R = 5, H = 5, I = 8, L = 3;
  std::vector<int> mult{3, 2, 2, 2, 1};
  int actions() const { return 2 * H + (P - 1) * (C + R); }
  int deck_total() const { return C * std::accumulate(mult.begin(), mult.end(), 0); }
};

// decoded world state (absolute seats, full hands)
struct HbView {
  std::vector<std::vector<int>> hands;  // card = color * R + rank, present slots only
  std::vector<int> fireworks;
  int info = 0, lives = 0;
  std::vector<int> discards;
  int deck_remaining = 0;
  int last_actor = -1, last_action = -1, current = -1;
};

HbView decode(const Env& env, const EnvState& state, const Cfg& k) {
  auto w = env.world_state(state).value();
  HbView v;
  size_t at = 0;
  std::vector<std::vector<int>> raw(size_t(k.P));
  for (int p = 0; p < k.P; ++p) {
    for (int h = 0; h < k.H; ++h) {
      int color = -1, rank = -1;
      for (int c = 0; c < k.C; ++c)
        if (w[at + size_t(c)] == 1.0f) ensure(color < 0, "two colours set"), color = c;
      for (int r = 0; r < k.R; ++r)
        if (w[at + size_t(k.C + r)] == 1.0f) ensure(rank < 0, "two ranks set"), rank = r;
      ensure((color < 0) == (rank < 0), "half-encoded card");
      raw[size_t(p)].push_back(color < 0 ? -1 : color * k.R + rank);
      at += size_t(k.C + k.R);
    }
  }
  v.hands.resize(size_t(k.P));
  for (int p = 0; p < k.P; ++p)
    for (int h = 0; h < k.H; ++h) {
      bool present = w[at++] == 1.0f;
      ensure(present == (raw[size_t(p)][size_t(h)] >= 0), "present bit vs card mismatch");
      if (present) v.hands[size_t(p)].push_back(raw[size_t(p)][size_t(h)]);
    }
  for (int c = 0; c < k.C; ++c) {
    int height = -1;
    for (int r = 0; r <= k.R; ++r)
      if (w[at + size_t(r)] == 1.0f) ensure(height < 0, "two firework heights"), height = r;
    ensure(height >= 0, "firework height missing");
    v.fireworks.push_back(height);
    at += size_t(k.R + 1);
  }
  for (int i = 0; i < k.I; ++i) v.info += w[at++] == 1.0f ? 1 : 0;
  for (int i = 0; i < k.L; ++i) v.lives += w[at++] == 1.0f ? 1 : 0;
  for (int card = 0; card < k.C * k.R; ++card) v.discards.push_back(int(w[at++]));
  v.deck_remaining = int(std::lround(double(w[at++]) * k.deck_total()));
  for (int p = 0; p < k.P; ++p)
    if (w[at + size_t(p)] == 1.0f) v.last_actor = p;
  at += size_t(k.P);
  for (int a = 0; a < k.actions(); ++a)
    if (w[at + size_t(a)] == 1.0f) v.last_action = a;
  at += size_t(k.actions());
  for (int p = 0; p < k.P; ++p)
    if (w[at + size_t(p)] == 1.0f) ensure(v.current < 0, "two current players"), v.current = p;
  at += size_t(k.P);
  ensure(at == w.size(), "world state length mismatch");
  ensure(v.current >= 0, "current player missing");
  return v;
}

// knowledge block of a player's own observation: per slot (color bits, rank bits)
std::vector<std::pair<uint32_t, uint32_t>> own_knowledge(const Obs& o, const Cfg& k) {
  size_t at = size_t((k.P - 1) * k.H * (k.C + k.R) + k.P * k.H);
  std::vector<std::pair<uint32_t, uint32_t>> kn;
  for (int h = 0; h < k.H; ++h) {
    uint32_t cb = 0, rb = 0;
    for (int c = 0; c < k.C; ++c)
      if (o[at + size_t(c)] == 1.0f) cb |= 1u << c;
    for (int r = 0; r < k.R; ++r)
      if (o[at + size_t(k.C + r)] == 1.0f) rb |= 1u << r;
    kn.emplace_back(cb, rb);
    at += size_t(k.C + k.R);
  }
  return kn;
}

int obs_size(const Cfg& k) {
  return (k.P - 1) * k.H * (k.C + k.R) + k.P * k.H + k.H * (k.C + k.R) + k.C * (k.R + 1) + k.I +
         k.L + k.C * k.R + 1 + k.P + k.actions() + k.P;
}

AgentMap<Action> turn_actions(const Env& env, int current, int action) {
  AgentMap<Action> m;
  for (int i = 0; i < env.num_agents(); ++i)
    m.emplace(env.agents()[size_t(i)], i == current ? action : 0);
  return m;
}

int pick_legal(const std::vector<uint8_t>& mask, std::mt19937& rng, bool avoid_plays = false,
               int hand = 5) {
  std::vector<int> ids;
  for (size_t i = 0; i < mask.size(); ++i)
    if (mask[i] && !(avoid_plays && int(i) >= hand && int(i) < 2 * hand)) ids.push_back(int(i));
  if (ids.empty())
    for (size_t i = 0; i < mask.size(); ++i)
      if (mask[i]) ids.push_back(int(i));
  ensure(!ids.empty(), "current player must always have a legal action");
  return ids[std::uniform_int_distribution<size_t>(0, ids.size() - 1)(rng)];
}

}  // namespace

TEST_CASE("hanabi spaces, deck composition, and config validation") {
  Cfg k;
  auto env = make_env("hanabi_v0");
  CHECK(env->num_agents() == 2);
  CHECK(env->cooperative());
  CHECK(env->action_space("agent_0").n == 20);
  CHECK(env->observation_space("agent_0").flat_size() == obs_size(k));
  CHECK(env->world_state_size() == 201);

  // 2-player game: 50-card deck, 10 cards dealt
  auto [obs, st] = env->reset(prng::key_from_seed(0));
  auto v = decode(*env, *st, k);
  CHECK(k.deck_total() == 50);
  CHECK(v.deck_remaining == 40);
  CHECK(v.hands[0].size() == 5);
  CHECK(v.hands[1].size() == 5);
  CHECK(v.info == 8);
  CHECK(v.lives == 3);
  CHECK(v.current == 0);
  CHECK(v.last_actor == -1);
  CHECK(v.last_action == -1);
  for (int f : v.fireworks) CHECK(f == 0);

  // hand size defaults: 5 up to three players, 4 beyond
  CHECK(make_env("hanabi_v0", {{"n_players", 3}})->action_space("agent_0").n == 2 * 5 + 2 * 10);
  CHECK(make_env("hanabi_v0", {{"n_players", 4}})->action_space("agent_0").n == 2 * 4 + 3 * 10);
  CHECK(make_env("hanabi_v0", {{"n_players", 5}})->action_space("agent_0").n == 2 * 4 + 4 * 10);

  CHECK_THROWS_AS((void)make_env("hanabi_v0", {{"n_players", 1}}), SchemaError);
  CHECK_THROWS_AS((void)make_env("hanabi_v0", {{"n_players", 6}}), SchemaError);
  CHECK_THROWS_AS((void)make_env("hanabi_v0", {{"n_colors", 0}}), SchemaError);
  CHECK_THROWS_AS((void)make_env("hanabi_v0", {{"n_colors", 6}}), SchemaError);
  CHECK_THROWS_AS((void)make_env("hanabi_v0", {{"n_ranks", 0}}), SchemaError);
  CHECK_THROWS_AS((void)make_env("hanabi_v0", {{"multiplicities", {3, 2, 2}}}), SchemaError);
  CHECK_THROWS_AS((void)make_env("hanabi_v0", {{"multiplicities", {3, 2, 2, 2, 0.5}}}),
                  SchemaError);
  CHECK_THROWS_AS((void)make_env("hanabi_v0", {{"info_tokens", 0}}), SchemaError);
  CHECK_THROWS_AS((void)make_env("hanabi_v0", {{"life_tokens", 0}}), SchemaError);
  CHECK_THROWS_AS((void)make_env("hanabi_v0", {{"hand_size", 0}}), SchemaError);
  CHECK_THROWS_AS((void)make_env("hanabi_v0", {{"junk", 1}}), SchemaError);
  // deck must cover the deal: 1 colour x 1 rank x 3 copies < 2 players x 2 cards
  CHECK_THROWS_AS(
      (void)make_env(
          "hanabi_v0",
          {{"n_colors", 1}, {"n_ranks", 1}, {"multiplicities", {3}}, {"hand_size", 2}}),
      SchemaError);
}

TEST_CASE("hanabi opening masks gate discards and match the partner's hand") {
  Cfg k;
  auto env = make_env("hanabi_v0");
  auto [obs, st] = env->reset(prng::key_from_seed(7));
  auto v = decode(*env, *st, k);

  auto mask = env->legal_actions(*st, "agent_0");
  REQUIRE(int(mask.size()) == 20);
  for (int h = 0; h < 5; ++h) {
    CHECK(mask[size_t(h)] == 0);      // discard illegal at full tokens
    CHECK(mask[size_t(5 + h)] == 1);  // play always legal on a full hand
  }
  for (int c = 0; c < 5; ++c) {
    bool present = false;
    for (int card : v.hands[1]) present = present || card / k.R == c;
    CHECK(mask[size_t(10 + c)] == (present ? 1 : 0));
  }
  for (int r = 0; r < 5; ++r) {
    bool present = false;
    for (int card : v.hands[1]) present = present || card % k.R == r;
    CHECK(mask[size_t(15 + r)] == (present ? 1 : 0));
  }

  // everyone not on turn gets an all-false mask
  auto off_turn = env->legal_actions(*st, "agent_1");
  CHECK(std::count(off_turn.begin(), off_turn.end(), 1) == 0);

  // resets are keyed: same key same deal, fresh key a fresh deal
  auto [o2, st2] = env->reset(prng::key_from_seed(7));
  CHECK(env->state_hash(*st) == env->state_hash(*st2));
  auto [o3, st3] = env->reset(prng::key_from_seed(8));
  CHECK(env->state_hash(*st) != env->state_hash(*st3));
}

TEST_CASE("hanabi hints collapse matching cards and exclude elsewhere") {
  Cfg k;
  auto env = make_env("hanabi_v0");
  auto key = prng::key_from_seed(11);
  auto [obs, st] = env->reset(key);
  auto v = decode(*env, *st, k);

  // agent_0 hints the colour of the partner's first card
  int hint_color = v.hands[1][0] / k.R;
  auto r = env->step(key, *st, turn_actions(*env, 0, 10 + hint_color));
  auto v1 = decode(*env, *r.state, k);
  CHECK(v1.info == 7);
  CHECK(v1.last_actor == 0);
  CHECK(v1.last_action == 10 + hint_color);
  CHECK(v1.current == 1);

  auto kn = own_knowledge(r.obs.at("agent_1"), k);
  for (size_t slot = 0; slot < v.hands[1].size(); ++slot) {
    if (v.hands[1][slot] / k.R == hint_color)
      CHECK(kn[slot].first == (1u << hint_color));  // collapsed to the hinted colour
    else
      CHECK((kn[slot].first & (1u << hint_color)) == 0);  // excluded elsewhere
    CHECK(kn[slot].second == 0x1f);                       // ranks untouched
  }

  // a rank hint back at agent_0
  auto v0 = decode(*env, *r.state, k);
  int hint_rank = v0.hands[0][2] % k.R;
  auto r2 = env->step(key, *r.state, turn_actions(*env, 1, 15 + hint_rank));
  CHECK(decode(*env, *r2.state, k).info == 6);
  auto kn0 = own_knowledge(r2.obs.at("agent_0"), k);
  for (size_t slot = 0; slot < v0.hands[0].size(); ++slot) {
    if (v0.hands[0][slot] % k.R == hint_rank)
      CHECK(kn0[slot].second == (1u << hint_rank));
    else
      CHECK((kn0[slot].second & (1u << hint_rank)) == 0);
  }

  // with tokens spent, discarding becomes legal and refunds one
  auto mask = env->legal_actions(*r2.state, "agent_0");
  CHECK(mask[0] == 1);
  auto r3 = env->step(key, *r2.state, turn_actions(*env, 0, 0));
  auto v3 = decode(*env, *r3.state, k);
  CHECK(v3.info == 7);
  CHECK(std::accumulate(v3.discards.begin(), v3.discards.end(), 0) == 1);
  CHECK(v3.hands[0].size() == 5);  // replacement drawn
  CHECK(v3.deck_remaining == 39);

  // hints at zero tokens are illegal: spend them all
  StatePtr cur = r3.state;
  int guard = 0;
  while (decode(*env, *cur, k).info > 0) {
    auto vv = decode(*env, *cur, k);
    auto m = env->legal_actions(*cur, env->agents()[size_t(vv.current)]);
    int hint = -1;
    for (int a = 10; a < 20; ++a)
      if (m[size_t(a)]) hint = a;
    REQUIRE(hint >= 0);
    cur = env->step(key, *cur, turn_actions(*env, vv.current, hint)).state;
    REQUIRE(++guard < 12);
  }
  auto vz = decode(*env, *cur, k);
  auto mz = env->legal_actions(*cur, env->agents()[size_t(vz.current)]);
  for (int a = 10; a < 20; ++a) CHECK(mz[size_t(a)] == 0);
  for (int h = 0; h < 5; ++h) CHECK(mz[size_t(h)] == 1);  // discards all legal now

  // illegal ids are rejected outright
  CHECK_THROWS_AS((void)env->step(key, *st, turn_actions(*env, 0, 0)), ContractError);
  CHECK_THROWS((void)env->step(key, *st, turn_actions(*env, 0, 20)));
  CHECK_THROWS((void)env->step(key, *st, turn_actions(*env, 0, -1)));
}

TEST_CASE("hanabi plays advance fireworks and misplays burn lives") {
  Cfg k;
  auto env = make_env("hanabi_v0");

  // find an opening where the current player holds a rank-1 card
  PrngKey key = prng::key_from_seed(0);
  int slot = -1;
  StatePtr st;
  for (uint64_t seed = 0; seed < 40 && slot < 0; ++seed) {
    key = prng::key_from_seed(seed);
    auto [o, s] = env->reset(key);
    auto v0 = decode(*env, *s, k);
    for (size_t h = 0; h < v0.hands[0].size(); ++h)
      if (v0.hands[0][h] % k.R == 0) {
        slot = int(h);
        st = s;
        break;
      }
  }
  REQUIRE(slot >= 0);

  auto v = decode(*env, *st, k);
  int color = v.hands[0][size_t(slot)] / k.R;
  auto r = env->step(key, *st, turn_actions(*env, 0, 5 + slot));
  CHECK(r.rewards.at("agent_0") == 1.0);
  CHECK(r.rewards.at("agent_1") == 1.0);  // shared signal
  auto v1 = decode(*env, *r.state, k);
  CHECK(v1.fireworks[size_t(color)] == 1);
  CHECK(v1.lives == 3);
  CHECK(r.infos.at("agent_1").at("score") == 1.0);
  CHECK(r.dones.at(kAllAgents) == 0);

  // deliberately misplay until the last life: terminal, score kept
  StatePtr cur = r.state;
  double total = 1.0;
  int guard = 0;
  while (true) {
    auto vv = decode(*env, *cur, k);
    int actor = vv.current;
    int bad = -1;
    for (size_t h = 0; h < vv.hands[size_t(actor)].size(); ++h) {
      int card = vv.hands[size_t(actor)][h];
      if (vv.fireworks[size_t(card / k.R)] != card % k.R) bad = int(h);
    }
    REQUIRE(bad >= 0);
    auto rr = env->step(key, *cur, turn_actions(*env, actor, 5 + bad));
    total += rr.rewards.at("agent_0");
    cur = rr.state;
    auto vn = decode(*env, *cur, k);
    if (vn.lives == 0) {
      CHECK(rr.dones.at(kAllAgents) != 0);
      CHECK(total == rr.infos.at("agent_0").at("score"));  // score kept on loss
      break;
    }
    CHECK(rr.dones.at(kAllAgents) == 0);
    REQUIRE(++guard < 10);
  }
  CHECK_THROWS_AS((void)env->step(key, *cur, turn_actions(*env, 0, 5)), ContractError);

  // the stricter scoring variant zeroes the return on a loss
  auto strict = make_env("hanabi_v0", {{"zero_score_on_loss", true}});
  auto [o2, st2] = strict->reset(key);
  StatePtr scur = st2;
  double stotal = 0.0;
  bool scored = false;
  guard = 0;
  while (true) {
    auto vv = decode(*strict, *scur, k);
    int actor = vv.current;
    int play = -1, bad = -1;
    for (size_t h = 0; h < vv.hands[size_t(actor)].size(); ++h) {
      int card = vv.hands[size_t(actor)][h];
      (vv.fireworks[size_t(card / k.R)] == card % k.R ? play : bad) = int(h);
    }
    int act = (!scored && play >= 0) ? play : (bad >= 0 ? bad : play);
    auto rr = strict->step(key, *scur, turn_actions(*strict, actor, 5 + act));
    if (rr.rewards.at("agent_0") > 0) scored = true;
    stotal += rr.rewards.at("agent_0");
    scur = rr.state;
    if (rr.dones.at(kAllAgents) != 0) break;
    REQUIRE(++guard < 30);
  }
  CHECK(decode(*strict, *scur, k).lives == 0);
  CHECK(scored);  // at least one point was scored, then cancelled
  CHECK(stotal == 0.0);
}

TEST_CASE("hanabi completing a colour refunds a token and ends tiny games") {
  // single colour, five ranks, two cards in hand: perfect-information play
  auto env = make_env("hanabi_v0", {{"n_colors", 1}, {"hand_size", 2}});
  Cfg k;
  k.C = 1;
  k.H = 2;
  CHECK(env->action_space("agent_0").n == 2 * 2 + 1 * (1 + 5));
  CHECK(env->observation_space("agent_0").flat_size() == obs_size(k));

  bool completed = false;
  for (uint64_t seed = 0; seed < 60 && !completed; ++seed) {
    auto key = prng::key_from_seed(seed);
    auto [obs, st] = env->reset(key);
    StatePtr cur = st;
    double total = 0.0;
    bool done = false;
    int info_before_last = -1;
    int guard = 0;
    while (!done && ++guard < 100) {
      auto v = decode(*env, *cur, k);
      int actor = v.current;
      const auto& hand = v.hands[size_t(actor)];
      int play = -1, dead = -1;
      for (size_t h = 0; h < hand.size(); ++h) {
        if (hand[h] % k.R == v.fireworks[0]) play = int(h);
        if (hand[h] % k.R < v.fireworks[0]) dead = int(h);
      }
      auto mask = env->legal_actions(*cur, env->agents()[size_t(actor)]);
      int act;
      if (play >= 0) {
        act = 2 + play;
        info_before_last = v.info;
      } else if (dead >= 0 && mask[size_t(dead)]) {
        act = dead;
      } else {
        act = -1;
        for (size_t a = 4; a < mask.size(); ++a)
          if (mask[a]) act = int(a);
        if (act < 0) act = mask[0] ? 0 : 2;  // forced discard or desperate play
      }
      auto r = env->step(key, *cur, turn_actions(*env, actor, act));
      total += r.rewards.at("agent_0");
      cur = r.state;
      done = r.dones.at(kAllAgents) != 0;
    }
    auto fin = decode(*env, *cur, k);
    if (done && fin.fireworks[0] == 5 && fin.lives > 0) {
      completed = true;
      CHECK(total == 5.0);  // return telescopes to the final score
      // playing the final rank refunded one hint token
      CHECK(fin.info == std::min(8, info_before_last + 1));
    }
  }
  REQUIRE(completed);
}

TEST_CASE("hanabi final round gives each player one turn after the deck empties") {
  // deck exactly covers the deal, so the countdown starts immediately
  auto env = make_env(
      "hanabi_v0",
      {{"n_colors", 2}, {"n_ranks", 1}, {"multiplicities", {2}}, {"hand_size", 2}});
  auto key = prng::key_from_seed(4);
  auto [obs, st] = env->reset(key);

  // both players hint (discard is illegal at full tokens, plays might end it)
  auto pick_hint = [&](const EnvState& s, const std::string& agent) {
    auto mask = env->legal_actions(s, agent);
    for (size_t a = 4; a < mask.size(); ++a)
      if (mask[a]) return int(a);
    return -1;
  };
  int h0 = pick_hint(*st, "agent_0");
  REQUIRE(h0 >= 0);
  auto r1 = env->step(key, *st, turn_actions(*env, 0, h0));
  CHECK(r1.dones.at(kAllAgents) == 0);

  int h1 = pick_hint(*r1.state, "agent_1");
  REQUIRE(h1 >= 0);
  auto r2 = env->step(key, *r1.state, turn_actions(*env, 1, h1));
  CHECK(r2.dones.at(kAllAgents) != 0);  // both final turns used
  CHECK_THROWS_AS((void)env->step(key, *r2.state, turn_actions(*env, 0, 0)), ContractError);
}

TEST_CASE("hanabi own cards are invisible to their holder") {
  Cfg k;
  auto env = make_env("hanabi_v0");
  std::mt19937 rng(3);

  for (int me = 0; me < 2; ++me) {
    // find a live mid-game state where it is `me`'s turn
    StatePtr live;
    PrngKey key = prng::key_from_seed(0);
    for (uint64_t attempt = 0; live == nullptr; ++attempt) {
      REQUIRE(attempt < 50);
      key = prng::fold_in(prng::key_from_seed(21), 100 * uint64_t(me) + attempt);
      auto [obs, st] = env->reset(key);
      StatePtr cur = st;
      bool dead = false;
      for (int t = 0; t < 4 + me; ++t) {  // turns alternate, so this lands on me
        auto v = decode(*env, *cur, k);
        auto mask = env->legal_actions(*cur, env->agents()[size_t(v.current)]);
        auto r = env->step(key, *cur, turn_actions(*env, v.current, pick_legal(mask, rng)));
        if (r.dones.at(kAllAgents) != 0) {
          dead = true;
          break;
        }
        cur = r.state;
      }
      if (!dead) live = cur;
    }

    const auto& agent = env->agents()[size_t(me)];
    const auto& partner = env->agents()[size_t(1 - me)];
    auto v = decode(*env, *live, k);
    int old_card = v.hands[size_t(me)][0];
    int new_color = (old_card / k.R + 1) % k.C;
    int new_rank = (old_card % k.R + 1) % k.R;
    auto flipped = envs::hanabi_replace_card(*env, *live, agent, 0, new_color, new_rank);

    // the flip is real: centralised views differ, and the partner could tell
    CHECK(env->world_state(*live).value() != env->world_state(*flipped).value());
    // hint legality reads the other hand only, so `me` keeps the same options
    CHECK(env->legal_actions(*live, agent) == env->legal_actions(*flipped, agent));

    // take the identical action in both worlds (play slot 1, never slot 0)
    auto ra = env->step(key, *live, turn_actions(*env, me, 5 + 1));
    auto rb = env->step(key, *flipped, turn_actions(*env, me, 5 + 1));
    CHECK(ra.obs.at(agent) == rb.obs.at(agent));      // holder sees no difference
    CHECK(ra.obs.at(partner) != rb.obs.at(partner));  // partner does
    CHECK(ra.rewards.at(agent) == rb.rewards.at(agent));
  }

  CHECK_THROWS_AS((void)envs::hanabi_replace_card(*env, *env->reset(prng::key_from_seed(0)).second,
                                                  "agent_9", 0, 0, 0),
                  ContractError);
}

TEST_CASE("hanabi random-legal self-play keeps every rule invariant") {
  Cfg k;
  auto env = make_env("hanabi_v0");
  std::mt19937 rng(12345);
  int ended_by_countdown = 0, ended_by_lives = 0, ended_by_score = 0;

  for (int ep = 0; ep < 300; ++ep) {
    auto key = prng::fold_in(prng::key_from_seed(777), uint64_t(ep));
    // a third of the episodes avoid playing cards, draining the deck instead
    bool avoid_plays = ep % 3 == 0;
    auto [obs, st] = env->reset(key);
    StatePtr cur = st;
    double total = 0.0;
    int steps = 0, empty_at = -1;
    std::vector<int> prev_fireworks(5, 0);

    while (true) {
      auto v = decode(*env, *cur, k);
      // conservation: visible cards + discards + played never exceed the print run
      int accounted = 0;
      for (int card = 0; card < 25; ++card) {
        int held = 0;
        for (int p = 0; p < 2; ++p)
          for (int c : v.hands[size_t(p)]) held += c == card ? 1 : 0;
        int played = v.fireworks[size_t(card / k.R)] > card % k.R ? 1 : 0;
        int n = held + v.discards[size_t(card)] + played;
        ensure(n <= k.mult[size_t(card % k.R)], "card count exceeds the print run");
        accounted += n;
      }
      ensure(accounted + v.deck_remaining == 50, "deck accounting broken");
      ensure(v.info >= 0 && v.info <= 8, "info tokens out of range");
      ensure(v.lives >= 0 && v.lives <= 3, "life tokens out of range");
      for (int c = 0; c < 5; ++c)
        ensure(v.fireworks[size_t(c)] >= prev_fireworks[size_t(c)], "fireworks regressed");
      prev_fireworks = v.fireworks;

      // mask sanity for both seats
      for (int p = 0; p < 2; ++p) {
        auto mask = env->legal_actions(*cur, env->agents()[size_t(p)]);
        if (p != v.current) {
          ensure(std::count(mask.begin(), mask.end(), 1) == 0, "off-turn mask not empty");
          continue;
        }
        int in_hand = int(v.hands[size_t(p)].size());
        for (int h = 0; h < 5; ++h) {
          ensure(mask[size_t(h)] == ((h < in_hand && v.info < 8) ? 1 : 0), "discard gating");
          ensure(mask[size_t(5 + h)] == (h < in_hand ? 1 : 0), "play slot gating");
        }
        if (v.info == 0)
          for (int a = 10; a < 20; ++a) ensure(mask[size_t(a)] == 0, "hint must cost a token");
      }

      auto mask = env->legal_actions(*cur, env->agents()[size_t(v.current)]);
      int act = pick_legal(mask, rng, avoid_plays);
      auto r = env->step(key, *cur, turn_actions(*env, v.current, act));
      total += r.rewards.at("agent_0");
      ensure(r.rewards.at("agent_0") == r.rewards.at("agent_1"), "reward must be shared");
      steps += 1;
      auto vn = decode(*env, *r.state, k);
      if (empty_at < 0 && vn.deck_remaining == 0) empty_at = steps;
      int score_now = std::accumulate(vn.fireworks.begin(), vn.fireworks.end(), 0);
      ensure(double(score_now) == r.infos.at("agent_0").at("score"), "score info mismatch");

      // discard histogram inside the observation matches the world state
      const auto& oo = r.obs.at("agent_0");
      size_t at = size_t(1 * 5 * 10 + 2 * 5 + 5 * 10 + 5 * 6 + 8 + 3);
      int hist = 0, want = 0;
      for (int c = 0; c < 25; ++c) hist += int(oo[at + size_t(c)]);
      for (int c = 0; c < 25; ++c) want += vn.discards[size_t(c)];
      ensure(hist == want, "obs discard histogram mismatch");

      cur = r.state;
      if (r.dones.at(kAllAgents) != 0) {
        int score = int(r.infos.at("agent_0").at("score"));
        ensure(score <= 25, "score bound exceeded");
        ensure(total == double(score), "return must telescope to the final score");
        ensure(steps <= env->max_steps(), "episode exceeded the hard cap");
        if (vn.lives == 0)
          ended_by_lives += 1;
        else if (score == 25)
          ended_by_score += 1;
        else {
          ended_by_countdown += 1;
          ensure(empty_at > 0, "countdown end without deck exhaustion");
          ensure(steps - empty_at == 2, "each player gets exactly one final turn");
        }
        break;
      }
    }
  }
  // both natural endings occur: deaths under random play, countdowns when draining
  CHECK(ended_by_lives > 100);
  CHECK(ended_by_countdown > 50);
  CHECK(ended_by_score == 0);  // random play never finishes all five colours
}

TEST_CASE("hanabi steps are pure and replayable") {
  Cfg k;
  auto env = make_env("hanabi_v0");
  std::mt19937 rng(9);
  for (int ep = 0; ep < 5; ++ep) {
    auto key = prng::fold_in(prng::key_from_seed(31), uint64_t(ep));
    auto [obs, st] = env->reset(key);
    StatePtr cur = st;
    std::vector<int> actions;
    std::vector<uint64_t> hashes;
    while (true) {
      auto v = decode(*env, *cur, k);
      int act = pick_legal(env->legal_actions(*cur, env->agents()[size_t(v.current)]), rng);
      auto before = env->state_hash(*cur);
      auto r = env->step(key, *cur, turn_actions(*env, v.current, act));
      ensure(env->state_hash(*cur) == before, "step mutated its input state");
      actions.push_back(act);
      hashes.push_back(env->state_hash(*r.state));
      cur = r.state;
      if (r.dones.at(kAllAgents) != 0) break;
    }
    // replaying the recorded ids from the same reset gives the same hash trail
    auto [obs2, st2] = env->reset(key);
    StatePtr rep = st2;
    for (size_t i = 0; i < actions.size(); ++i) {
      auto v = decode(*env, *rep, k);
      auto r = env->step(key, *rep, turn_actions(*env, v.current, actions[i]));
      ensure(env->state_hash(*r.state) == hashes[i], "replay diverged");
      rep = r.state;
    }
  }
  CHECK(true);
}

TEST_CASE("hanabi supports three to five players") {
  std::mt19937 rng(55);
  for (int players = 3; players <= 5; ++players) {
    Cfg k;
    k.P = players;
    k.H = players <= 3 ? 5 : 4;
    auto env = make_env("hanabi_v0", {{"n_players", players}});
    CHECK(env->num_agents() == players);
    CHECK(env->observation_space("agent_0").flat_size() == obs_size(k));
    CHECK(env->world_state_size() ==
          k.P * k.H * 10 + k.P * k.H + 30 + 11 + 25 + 1 + k.P + k.actions() + k.P);

    auto key = prng::key_from_seed(uint64_t(100 + players));
    auto [obs, st] = env->reset(key);
    StatePtr cur = st;
    int turn = 0;
    while (true) {
      auto v = decode(*env, *cur, k);
      ensure(v.current == turn % players, "turn order must rotate");
      int act =
          pick_legal(env->legal_actions(*cur, env->agents()[size_t(v.current)]), rng, false, k.H);
      auto r = env->step(key, *cur, turn_actions(*env, v.current, act));
      cur = r.state;
      turn += 1;
      if (r.dones.at(kAllAgents) != 0) break;
    }
    CHECK(turn <= env->max_steps());
  }
}

TEST_CASE("hanabi hint targeting reaches the right seat in larger games") {
  Cfg k;
  k.P = 3;
  auto env = make_env("hanabi_v0", {{"n_players", 3}});
  auto key = prng::key_from_seed(2);
  auto [obs, st] = env->reset(key);
  auto v = decode(*env, *st, k);

  // current player 0 hints the colour of player 2's first card (offset 2)
  int color = v.hands[2][0] / k.R;
  int action = 2 * k.H + 1 * k.C + color;  // offset index 1 = two seats ahead
  REQUIRE(env->legal_actions(*st, "agent_0")[size_t(action)] == 1);
  auto r = env->step(key, *st, turn_actions(*env, 0, action));

  auto kn2 = own_knowledge(r.obs.at("agent_2"), k);
  bool touched = false;
  for (size_t slot = 0; slot < v.hands[2].size(); ++slot) {
    if (v.hands[2][slot] / k.R == color) {
      CHECK(kn2[slot].first == (1u << color));
      touched = true;
    } else {
      CHECK((kn2[slot].first & (1u << color)) == 0);
    }
  }
  CHECK(touched);
  // the seat in between keeps full knowledge
  auto kn1 = own_knowledge(r.obs.at("agent_1"), k);
  for (const auto& [cb, rb] : kn1) {
    CHECK(cb == 0x1f);
    CHECK(rb == 0x1f);
  }
}
