#include "marl/algo/ppo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>

#include "marl/errors.hpp"
#include "marl/vector_env.hpp"

namespace marl {

using nn::Act;
using nn::Mat;

// ----------------------------------------------------------------- config ---

void PpoConfig::validate() const {
  auto bad = [](const std::string& what) { throw SchemaError("ppo config: " + what); };
  if (total_timesteps < 0) bad("total_timesteps must be >= 0");
  if (n_envs <= 0) bad("n_envs must be positive");
  if (n_rollout_steps <= 0) bad("n_rollout_steps must be positive");
  if (lr <= 0) bad("lr must be positive");
  if (update_epochs <= 0) bad("update_epochs must be positive");
  if (n_minibatches <= 0) bad("n_minibatches must be positive");
  if (gamma < 0 || gamma > 1) bad("gamma must lie in [0, 1]");
  if (gae_lambda < 0 || gae_lambda > 1) bad("gae_lambda must lie in [0, 1]");
  if (clip_eps <= 0 || clip_eps >= 1) bad("clip_eps must lie in (0, 1)");
  if (ent_coef < 0) bad("ent_coef must be >= 0");
  if (vf_coef < 0) bad("vf_coef must be >= 0");
  if (max_grad_norm <= 0) bad("max_grad_norm must be positive");
  if (activation != "tanh" && activation != "relu") bad("activation must be 'tanh' or 'relu'");
  if (n_fc_layers <= 0) bad("n_fc_layers must be positive");
  if (fc_width <= 0) bad("fc_width must be positive");
  if (hidden_width <= 0) bad("hidden_width must be positive");
}

PpoConfig PpoConfig::from_config(const Config& cfg) {
  ConfigView v(cfg, "ppo config");
  PpoConfig c;
  c.total_timesteps = v.get_int64("total_timesteps", c.total_timesteps);
  c.n_envs = v.get_int("n_envs", c.n_envs);
  c.n_rollout_steps = v.get_int("n_rollout_steps", c.n_rollout_steps);
  c.lr = v.get_double("lr", c.lr);
  c.anneal_lr = v.get_bool("anneal_lr", c.anneal_lr);
  c.update_epochs = v.get_int("update_epochs", c.update_epochs);
  c.n_minibatches = v.get_int("n_minibatches", c.n_minibatches);
  c.gamma = v.get_double("gamma", c.gamma);
  c.gae_lambda = v.get_double("gae_lambda", c.gae_lambda);
  c.clip_eps = v.get_double("clip_eps", c.clip_eps);
  c.ent_coef = v.get_double("ent_coef", c.ent_coef);
  c.vf_coef = v.get_double("vf_coef", c.vf_coef);
  c.max_grad_norm = v.get_double("max_grad_norm", c.max_grad_norm);
  c.activation = v.get_string("activation", c.activation);
  c.recurrent = v.get_bool("recurrent", c.recurrent);
  c.n_fc_layers = v.get_int("n_fc_layers", c.n_fc_layers);
  c.fc_width = v.get_int("fc_width", c.fc_width);
  c.hidden_width = v.get_int("hidden_width", c.hidden_width);
  c.shaped_rewards = v.get_bool("shaped_rewards", c.shaped_rewards);
  v.check_no_extras();
  c.validate();
  return c;
}

Config PpoConfig::to_config() const {
  return Config{{"total_timesteps", total_timesteps},
                {"n_envs", n_envs},
                {"n_rollout_steps", n_rollout_steps},
                {"lr", lr},
                {"anneal_lr", anneal_lr},
                {"update_epochs", update_epochs},
                {"n_minibatches", n_minibatches},
                {"gamma", gamma},
                {"gae_lambda", gae_lambda},
                {"clip_eps", clip_eps},
                {"ent_coef", ent_coef},
                {"vf_coef", vf_coef},
                {"max_grad_norm", max_grad_norm},
                {"activation", activation},
                {"recurrent", recurrent},
                {"n_fc_layers", n_fc_layers},
                {"fc_width", fc_width},
                {"hidden_width", hidden_width},
                {"shaped_rewards", shaped_rewards}};
}

// ------------------------------------------------------------------- nets ---

PpoNetSpec ppo_net_spec(const Env& env, const PpoConfig& cfg, bool centralized_critic) {
  auto layout = TeamLayout::from_env(env);
  PpoNetSpec s;
  s.in_dim = layout.in_dim;
  s.n_actions = layout.n_actions;
  if (centralized_critic) {
    if (env.world_state_size() <= 0)
      throw SchemaError("mappo: env '" + env.id() + "' provides no global state");
    s.critic_in = env.world_state_size();
  } else {
    s.critic_in = layout.in_dim;
  }
  s.recurrent = cfg.recurrent;
  s.act = cfg.activation == "relu" ? Act::kRelu : Act::kTanh;
  s.n_fc_layers = cfg.n_fc_layers;
  s.fc_width = cfg.fc_width;
  s.hidden_width = cfg.hidden_width;
  return s;
}

PpoNets ppo_init_nets(const PrngKey& key, const PpoNetSpec& spec) {
  PpoNets n;
  n.spec = spec;
  auto ka = prng::fold_in(key, 1), kc = prng::fold_in(key, 2);
  if (spec.recurrent) {
    n.actor_rnn = nn::rnn_init<float>(ka, spec.in_dim, spec.fc_width, spec.hidden_width,
                                      spec.n_actions, 0.01f);
    n.critic_rnn =
        nn::rnn_init<float>(kc, spec.critic_in, spec.fc_width, spec.hidden_width, 1, 1.0f);
  } else {
    n.actor_ff =
        nn::ff_init<float>(ka, spec.in_dim, spec.n_fc_layers, spec.fc_width, spec.n_actions, 0.01f);
    n.critic_ff = nn::ff_init<float>(kc, spec.critic_in, spec.n_fc_layers, spec.fc_width, 1, 1.0f);
  }
  return n;
}

std::vector<float> PpoNets::pack_actor() const {
  std::vector<float> out;
  if (spec.recurrent)
    nn::pack(actor_rnn, out);
  else
    nn::pack(actor_ff, out);
  return out;
}
std::vector<float> PpoNets::pack_critic() const {
  std::vector<float> out;
  if (spec.recurrent)
    nn::pack(critic_rnn, out);
  else
    nn::pack(critic_ff, out);
  return out;
}
void PpoNets::unpack_actor(const std::vector<float>& flat) {
  size_t off = 0;
  if (spec.recurrent)
    nn::unpack(actor_rnn, flat, off);
  else
    nn::unpack(actor_ff, flat, off);
  nn::check(off == flat.size(), "PpoNets: actor parameter count mismatch");
}
void PpoNets::unpack_critic(const std::vector<float>& flat) {
  size_t off = 0;
  if (spec.recurrent)
    nn::unpack(critic_rnn, flat, off);
  else
    nn::unpack(critic_ff, flat, off);
  nn::check(off == flat.size(), "PpoNets: critic parameter count mismatch");
}

namespace {

// ---------------------------------------------------------------- rollout ---

struct Rollout {
  int T = 0, R = 0, E = 0;  // steps, rows (=E*A), envs
  std::vector<float> obs;           // T*R*in_dim (actor input)
  std::vector<float> critic_in;     // T*R*critic_in
  std::vector<int> actions;         // T*R
  std::vector<float> rewards;       // T*R, training reward (incl. annealed shaping)
  std::vector<uint8_t> dones;       // T*R, episode-level
  std::vector<uint8_t> resets;      // T*R, hidden reset before this step
  std::vector<float> logp, value;   // T*R
  std::vector<uint8_t> legal;       // T*R*n_actions
  std::vector<float> active;        // T*R, loss weight
  std::vector<float> adv, vtarg;    // T*R, filled by GAE
  Mat<float> h0_actor, h0_critic;   // R x hidden (recurrent)
  std::vector<double> episode_returns;  // episodes finished inside the window
};

class Collector {
 public:
  Collector(std::shared_ptr<const Env> env, const PpoConfig& cfg, const PpoNetSpec& spec,
            bool centralized, const PrngKey& key)
      : env_(env),
        layout_(TeamLayout::from_env(*env)),
        spec_(spec),
        centralized_(centralized),
        shaped_rewards_(cfg.shaped_rewards),
        venv_(env, cfg.n_envs),
        act_key_(prng::fold_in(key, 2)) {
    auto [obs, state] = venv_.reset(prng::fold_in(key, 1));
    cur_obs_ = std::move(obs);
    state_ = std::move(state);
    prev_finished_.assign(size_t(cfg.n_envs), 1);  // every row starts an episode
    int rows = cfg.n_envs * layout_.n_agents();
    if (spec.recurrent) {
      h_actor_ = Mat<float>(rows, spec.hidden_width);
      h_critic_ = Mat<float>(rows, spec.hidden_width);
    }
  }

  const TeamLayout& layout() const { return layout_; }
  int rows() const { return venv_.n_envs() * layout_.n_agents(); }

  // Collects n_steps batch steps. `seq_base` makes action keys unique across
  // updates; `shaping_at(step)` scales infos["shaped_reward"].
  Rollout collect(const PpoNets& nets, int n_steps, int64_t seq_base,
                  const std::function<double(int64_t)>& shaping_at) {
    const int E = venv_.n_envs(), A = layout_.n_agents(), R = E * A;
    const int in_dim = spec_.in_dim, cin = spec_.critic_in, na = spec_.n_actions;
    Rollout ro;
    ro.T = n_steps;
    ro.R = R;
    ro.E = E;
    ro.obs.resize(size_t(n_steps) * size_t(R) * size_t(in_dim));
    ro.critic_in.resize(size_t(n_steps) * size_t(R) * size_t(cin));
    ro.actions.resize(size_t(n_steps) * size_t(R));
    ro.rewards.resize(size_t(n_steps) * size_t(R));
    ro.dones.resize(size_t(n_steps) * size_t(R));
    ro.resets.resize(size_t(n_steps) * size_t(R));
    ro.logp.resize(size_t(n_steps) * size_t(R));
    ro.value.resize(size_t(n_steps) * size_t(R));
    ro.legal.resize(size_t(n_steps) * size_t(R) * size_t(na));
    ro.active.resize(size_t(n_steps) * size_t(R));
    if (spec_.recurrent) {
      ro.h0_actor = h_actor_;
      ro.h0_critic = h_critic_;
    }

    for (int t = 0; t < n_steps; ++t) {
      size_t base = size_t(t) * size_t(R);
      std::vector<uint8_t> reset_rows(size_t(R), 0);
      for (int r = 0; r < R; ++r) reset_rows[size_t(r)] = prev_finished_[size_t(r / A)];
      std::memcpy(&ro.resets[base], reset_rows.data(), size_t(R));

      Mat<float> x(R, in_dim), xc(R, cin);
      fill_inputs(x, xc, &ro.legal[base * size_t(na)], &ro.active[base]);
      std::memcpy(&ro.obs[base * size_t(in_dim)], x.a.data(), x.a.size() * sizeof(float));
      std::memcpy(&ro.critic_in[base * size_t(cin)], xc.a.data(), xc.a.size() * sizeof(float));

      Mat<float> logits, values;
      if (spec_.recurrent) {
        logits = nn::rnn_step(nets.actor_rnn, h_actor_, x, reset_rows, spec_.act);
        values = nn::rnn_step(nets.critic_rnn, h_critic_, xc, reset_rows, spec_.act);
      } else {
        logits = nn::ff_forward(nets.actor_ff, x, spec_.act);
        values = nn::ff_forward(nets.critic_ff, xc, spec_.act);
      }

      std::vector<AgentMap<Action>> actions(static_cast<size_t>(E));
      for (int r = 0; r < R; ++r) {
        auto kk = prng::fold_in(act_key_, uint64_t(seq_base + t) * uint64_t(R) + uint64_t(r));
        double logp = 0;
        int a = nn::sample_masked(kk, &logits.a[size_t(r) * size_t(na)],
                                  &ro.legal[(base + size_t(r)) * size_t(na)], na, &logp);
        ro.actions[base + size_t(r)] = a;
        ro.logp[base + size_t(r)] = float(logp);
        ro.value[base + size_t(r)] = values(r, 0);
        actions[size_t(r / A)].emplace(layout_.agents[size_t(r % A)], a);
      }

      auto res = venv_.step(state_, actions);
      double shaping = shaping_at(seq_base + t);
      for (int r = 0; r < R; ++r) {
        int e = r / A;
        const auto& agent = layout_.agents[size_t(r % A)];
        double rew = res.rewards[size_t(e)].at(agent);
        if (shaped_rewards_ && shaping > 0.0) {
          const auto& info = res.infos[size_t(e)].at(agent);
          auto it = info.find("shaped_reward");
          if (it != info.end()) rew += shaping * it->second;
        }
        ro.rewards[base + size_t(r)] = float(rew);
        ro.dones[base + size_t(r)] = res.finished[size_t(e)];
      }
      for (int e = 0; e < E; ++e)
        if (res.finished[size_t(e)]) ro.episode_returns.push_back(res.final_returns[size_t(e)]);

      prev_finished_ = res.finished;
      cur_obs_ = std::move(res.obs);
      state_ = std::move(res.next);
    }

    // Bootstrap values for the state after the window; peeking must not
    // advance the carried hidden state.
    {
      Mat<float> x(R, in_dim), xc(R, cin);
      fill_inputs(x, xc, nullptr, nullptr);
      std::vector<uint8_t> reset_rows(size_t(R), 0);
      for (int r = 0; r < R; ++r) reset_rows[size_t(r)] = prev_finished_[size_t(r / A)];
      Mat<float> values;
      if (spec_.recurrent) {
        Mat<float> h = h_critic_;
        values = nn::rnn_step(nets.critic_rnn, h, xc, reset_rows, spec_.act);
      } else {
        values = nn::ff_forward(nets.critic_ff, xc, spec_.act);
      }
      last_value_.assign(size_t(R), 0.0f);
      for (int r = 0; r < R; ++r) last_value_[size_t(r)] = values(r, 0);
    }

    // GAE, one time series per row.
    ro.adv.resize(ro.rewards.size());
    ro.vtarg.resize(ro.rewards.size());
    std::vector<float> rew(static_cast<size_t>(n_steps)), val(static_cast<size_t>(n_steps));
    std::vector<uint8_t> don(static_cast<size_t>(n_steps), 0);
    std::vector<float> a_out, t_out;
    for (int r = 0; r < R; ++r) {
      for (int t = 0; t < n_steps; ++t) {
        size_t i = size_t(t) * size_t(R) + size_t(r);
        rew[size_t(t)] = ro.rewards[i];
        val[size_t(t)] = ro.value[i];
        don[size_t(t)] = ro.dones[i];
      }
      nn::compute_gae<float>(rew, val, don, last_value_[size_t(r)], float(gamma_), float(lambda_),
                             &a_out, &t_out);
      for (int t = 0; t < n_steps; ++t) {
        size_t i = size_t(t) * size_t(R) + size_t(r);
        ro.adv[i] = a_out[size_t(t)];
        ro.vtarg[i] = t_out[size_t(t)];
      }
    }
    return ro;
  }

  void set_gae(double gamma, double lambda) {
    gamma_ = gamma;
    lambda_ = lambda;
  }

 private:
  // Builds actor input x, critic input xc, and optional legal/active masks
  // from the current per-env observations and states.
  void fill_inputs(Mat<float>& x, Mat<float>& xc, uint8_t* legal, float* active) {
    const int E = venv_.n_envs(), A = layout_.n_agents();
    std::vector<float> ws;
    for (int e = 0; e < E; ++e) {
      const auto& state = *state_.states[size_t(e)];
      if (centralized_) {
        auto w = env_->world_state(state);
        nn::check(w.has_value() && int(w->size()) == spec_.critic_in,
                  "mappo: world_state size changed mid-run");
        ws = std::move(*w);
      }
      for (int a = 0; a < A; ++a) {
        int r = e * A + a;
        layout_.write_input(cur_obs_[size_t(e)].at(layout_.agents[size_t(a)]), a,
                            &x.a[size_t(r) * size_t(spec_.in_dim)]);
        if (centralized_)
          std::memcpy(&xc.a[size_t(r) * size_t(spec_.critic_in)], ws.data(),
                      ws.size() * sizeof(float));
        else
          std::memcpy(&xc.a[size_t(r) * size_t(spec_.critic_in)],
                      &x.a[size_t(r) * size_t(spec_.in_dim)],
                      size_t(spec_.in_dim) * sizeof(float));
        if (legal) layout_.write_legal(*env_, state, a, legal + size_t(r) * size_t(spec_.n_actions));
        if (active)
          active[r] = env_->agent_active(state, layout_.agents[size_t(a)]) ? 1.0f : 0.0f;
      }
    }
  }

  std::shared_ptr<const Env> env_;
  TeamLayout layout_;
  PpoNetSpec spec_;
  bool centralized_, shaped_rewards_;
  VectorEnv venv_;
  PrngKey act_key_;
  std::vector<AgentMap<Obs>> cur_obs_;
  BatchedState state_;
  std::vector<uint8_t> prev_finished_;
  Mat<float> h_actor_, h_critic_;
  std::vector<float> last_value_;
  double gamma_ = 0.99, lambda_ = 0.95;
};

// ------------------------------------------------------------- minibatch ----

struct MinibatchGrad {
  std::vector<float> flat;  // actor grads then critic grads
  nn::PpoRowLossResult<float> loss;
};

nn::PpoRows<float> gather_rows(const Rollout& ro, const std::vector<int>& idx, int na) {
  nn::PpoRows<float> rows;
  rows.n_actions = na;
  size_t m = idx.size();
  rows.actions.resize(m);
  rows.old_log_probs.resize(m);
  rows.advantages.resize(m);
  rows.value_targets.resize(m);
  rows.old_values.resize(m);
  rows.legal.resize(m * size_t(na));
  rows.weights.resize(m);
  for (size_t i = 0; i < m; ++i) {
    size_t s = size_t(idx[i]);
    rows.actions[i] = ro.actions[s];
    rows.old_log_probs[i] = ro.logp[s];
    rows.advantages[i] = ro.adv[s];
    rows.value_targets[i] = ro.vtarg[s];
    rows.old_values[i] = ro.value[s];
    rows.weights[i] = ro.active[s];
    std::memcpy(&rows.legal[i * size_t(na)], &ro.legal[s * size_t(na)], size_t(na));
  }
  nn::normalize_advantages(rows.advantages, rows.weights);
  return rows;
}

// Feed-forward minibatch: flat transition rows.
MinibatchGrad ff_minibatch(const PpoNets& nets, const Rollout& ro, const std::vector<int>& idx,
                           const nn::PpoLossConfig& lcfg) {
  const auto& spec = nets.spec;
  size_t m = idx.size();
  Mat<float> x(int(m), spec.in_dim), xc(int(m), spec.critic_in);
  for (size_t i = 0; i < m; ++i) {
    size_t s = size_t(idx[i]);
    std::memcpy(&x.a[i * size_t(spec.in_dim)], &ro.obs[s * size_t(spec.in_dim)],
                size_t(spec.in_dim) * sizeof(float));
    std::memcpy(&xc.a[i * size_t(spec.critic_in)], &ro.critic_in[s * size_t(spec.critic_in)],
                size_t(spec.critic_in) * sizeof(float));
  }
  auto rows = gather_rows(ro, idx, spec.n_actions);

  nn::FfCache<float> ac, cc;
  auto logits = nn::ff_forward(nets.actor_ff, x, spec.act, &ac);
  auto vmat = nn::ff_forward(nets.critic_ff, xc, spec.act, &cc);
  std::vector<float> values(m);
  for (size_t i = 0; i < m; ++i) values[i] = vmat(int(i), 0);

  auto loss = nn::ppo_row_loss(logits, values, rows, lcfg);

  auto ga = nn::ff_backward(nets.actor_ff, ac, spec.act, loss.dlogits);
  Mat<float> dv(int(m), 1);
  for (size_t i = 0; i < m; ++i) dv(int(i), 0) = loss.dvalues[i];
  auto gc = nn::ff_backward(nets.critic_ff, cc, spec.act, dv);

  MinibatchGrad out;
  nn::pack(ga, out.flat);
  nn::pack(gc, out.flat);
  out.loss = std::move(loss);
  return out;
}

// Recurrent minibatch: whole sequences for the selected rows.
MinibatchGrad rnn_minibatch(const PpoNets& nets, const Rollout& ro,
                            const std::vector<int>& row_idx, const nn::PpoLossConfig& lcfg) {
  const auto& spec = nets.spec;
  const int T = ro.T, M = int(row_idx.size()), na = spec.n_actions;

  std::vector<Mat<float>> xs(static_cast<size_t>(T)), xcs(static_cast<size_t>(T));
  std::vector<std::vector<uint8_t>> resets(static_cast<size_t>(T));
  for (int t = 0; t < T; ++t) {
    xs[size_t(t)] = Mat<float>(M, spec.in_dim);
    xcs[size_t(t)] = Mat<float>(M, spec.critic_in);
    resets[size_t(t)].resize(size_t(M));
    for (int i = 0; i < M; ++i) {
      size_t s = size_t(t) * size_t(ro.R) + size_t(row_idx[size_t(i)]);
      std::memcpy(&xs[size_t(t)].a[size_t(i) * size_t(spec.in_dim)],
                  &ro.obs[s * size_t(spec.in_dim)], size_t(spec.in_dim) * sizeof(float));
      std::memcpy(&xcs[size_t(t)].a[size_t(i) * size_t(spec.critic_in)],
                  &ro.critic_in[s * size_t(spec.critic_in)],
                  size_t(spec.critic_in) * sizeof(float));
      resets[size_t(t)][size_t(i)] = ro.resets[s];
    }
  }
  Mat<float> h0a(M, spec.hidden_width), h0c(M, spec.hidden_width);
  for (int i = 0; i < M; ++i)
    for (int c = 0; c < spec.hidden_width; ++c) {
      h0a(i, c) = ro.h0_actor(row_idx[size_t(i)], c);
      h0c(i, c) = ro.h0_critic(row_idx[size_t(i)], c);
    }

  // flat row order [t][i] for the loss
  std::vector<int> flat_idx(size_t(T) * size_t(M));
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < M; ++i)
      flat_idx[size_t(t) * size_t(M) + size_t(i)] = t * ro.R + row_idx[size_t(i)];
  auto rows = gather_rows(ro, flat_idx, na);

  nn::RnnSeqCache<float> ac, cc;
  auto logit_steps = nn::rnn_seq_forward(nets.actor_rnn, xs, resets, h0a, spec.act, &ac);
  auto value_steps = nn::rnn_seq_forward(nets.critic_rnn, xcs, resets, h0c, spec.act, &cc);

  Mat<float> logits(T * M, na);
  std::vector<float> values(size_t(T) * size_t(M));
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < M; ++i) {
      std::memcpy(&logits.a[(size_t(t) * size_t(M) + size_t(i)) * size_t(na)],
                  &logit_steps[size_t(t)].a[size_t(i) * size_t(na)], size_t(na) * sizeof(float));
      values[size_t(t) * size_t(M) + size_t(i)] = value_steps[size_t(t)](i, 0);
    }

  auto loss = nn::ppo_row_loss(logits, values, rows, lcfg);

  std::vector<Mat<float>> dlogit_steps(static_cast<size_t>(T)), dvalue_steps(static_cast<size_t>(T));
  for (int t = 0; t < T; ++t) {
    dlogit_steps[size_t(t)] = Mat<float>(M, na);
    dvalue_steps[size_t(t)] = Mat<float>(M, 1);
    for (int i = 0; i < M; ++i) {
      std::memcpy(&dlogit_steps[size_t(t)].a[size_t(i) * size_t(na)],
                  &loss.dlogits.a[(size_t(t) * size_t(M) + size_t(i)) * size_t(na)],
                  size_t(na) * sizeof(float));
      dvalue_steps[size_t(t)](i, 0) = loss.dvalues[size_t(t) * size_t(M) + size_t(i)];
    }
  }

  auto ga = nn::rnn_seq_backward(nets.actor_rnn, ac, dlogit_steps, spec.act);
  auto gc = nn::rnn_seq_backward(nets.critic_rnn, cc, dvalue_steps, spec.act);

  MinibatchGrad out;
  nn::pack(ga, out.flat);
  nn::pack(gc, out.flat);
  out.loss = std::move(loss);
  return out;
}

// ------------------------------------------------------------- train loop ---

PpoRunResult train_ppo_impl(std::shared_ptr<const Env> env, const PpoConfig& cfg,
                            const PrngKey& key, bool centralized) {
  cfg.validate();
  auto spec = ppo_net_spec(*env, cfg, centralized);
  PpoRunResult result;
  result.nets = ppo_init_nets(prng::fold_in(key, 10), spec);
  result.metrics.columns = {"step",    "update",    "mean_return", "n_episodes",
                            "loss",    "pg_loss",   "v_loss",      "entropy",
                            "approx_kl", "clip_frac", "grad_norm",   "lr"};
  result.timings.columns = {"update", "step", "rollout_seconds", "train_seconds", "sps"};

  const int64_t steps_per_update = int64_t(cfg.n_envs) * int64_t(cfg.n_rollout_steps);
  const int64_t n_updates = cfg.total_timesteps / steps_per_update;
  if (n_updates == 0) return result;

  Collector collector(env, cfg, spec, centralized, prng::fold_in(key, 11));
  collector.set_gae(cfg.gamma, cfg.gae_lambda);
  const int R = collector.rows();
  const int batch = cfg.n_rollout_steps * R;
  if (cfg.recurrent) {
    if (R % cfg.n_minibatches != 0)
      throw SchemaError("ppo: recurrent minibatches need n_envs*n_agents (" + std::to_string(R) +
                        ") divisible by n_minibatches (" + std::to_string(cfg.n_minibatches) + ")");
  } else if (batch % cfg.n_minibatches != 0) {
    throw SchemaError("ppo: batch size (" + std::to_string(batch) +
                      ") must be divisible by n_minibatches (" +
                      std::to_string(cfg.n_minibatches) + ")");
  }

  std::vector<float> params = result.nets.pack_actor();
  const size_t actor_n = params.size();
  {
    auto c = result.nets.pack_critic();
    params.insert(params.end(), c.begin(), c.end());
  }
  nn::AdamState<float> adam(params.size());
  auto apply_params = [&](const std::vector<float>& flat) {
    std::vector<float> a(flat.begin(), flat.begin() + long(actor_n));
    std::vector<float> c(flat.begin() + long(actor_n), flat.end());
    result.nets.unpack_actor(a);
    result.nets.unpack_critic(c);
  };

  nn::PpoLossConfig lcfg{cfg.clip_eps, cfg.ent_coef, cfg.vf_coef};
  auto train_key = prng::fold_in(key, 12);
  const double half_steps = 0.5 * double(cfg.total_timesteps);
  auto shaping_at = [&](int64_t seq) {
    double done = double(seq) * double(cfg.n_envs);
    return std::max(0.0, 1.0 - done / std::max(half_steps, 1.0));
  };

  double last_mean_return = 0.0;
  for (int64_t update = 0; update < n_updates; ++update) {
    double lr_u = cfg.anneal_lr
                      ? cfg.lr * (1.0 - double(update) / double(n_updates))
                      : cfg.lr;
    auto t0 = std::chrono::steady_clock::now();
    auto ro = collector.collect(result.nets, cfg.n_rollout_steps,
                                update * cfg.n_rollout_steps, shaping_at);
    auto t1 = std::chrono::steady_clock::now();

    std::vector<float> snapshot = params;
    double loss_sum = 0, pg_sum = 0, v_sum = 0, ent_sum = 0, kl_sum = 0, clip_sum = 0,
           gn_sum = 0;
    int n_mb = 0;
    bool diverged = false;
    try {
      for (int epoch = 0; epoch < cfg.update_epochs; ++epoch) {
        auto perm_key = prng::fold_in(train_key, uint64_t(update) * uint64_t(cfg.update_epochs) +
                                                     uint64_t(epoch));
        if (cfg.recurrent) {
          auto perm = prng::permutation(perm_key, R);
          int per = R / cfg.n_minibatches;
          for (int mb = 0; mb < cfg.n_minibatches; ++mb) {
            std::vector<int> idx(perm.begin() + mb * per, perm.begin() + (mb + 1) * per);
            auto g = rnn_minibatch(result.nets, ro, idx, lcfg);
            double gn = nn::clip_global_norm(g.flat, float(cfg.max_grad_norm));
            params = nn::adam_update(adam, params, g.flat, float(lr_u));
            apply_params(params);
            loss_sum += double(g.loss.loss);
            pg_sum += g.loss.pg_loss;
            v_sum += g.loss.v_loss;
            ent_sum += g.loss.entropy;
            kl_sum += g.loss.approx_kl;
            clip_sum += g.loss.clip_frac;
            gn_sum += gn;
            ++n_mb;
          }
        } else {
          auto perm = prng::permutation(perm_key, batch);
          int per = batch / cfg.n_minibatches;
          for (int mb = 0; mb < cfg.n_minibatches; ++mb) {
            std::vector<int> idx(perm.begin() + mb * per, perm.begin() + (mb + 1) * per);
            auto g = ff_minibatch(result.nets, ro, idx, lcfg);
            double gn = nn::clip_global_norm(g.flat, float(cfg.max_grad_norm));
            params = nn::adam_update(adam, params, g.flat, float(lr_u));
            apply_params(params);
            loss_sum += double(g.loss.loss);
            pg_sum += g.loss.pg_loss;
            v_sum += g.loss.v_loss;
            ent_sum += g.loss.entropy;
            kl_sum += g.loss.approx_kl;
            clip_sum += g.loss.clip_frac;
            gn_sum += gn;
            ++n_mb;
          }
        }
      }
    } catch (const DivergenceError&) {
      params = snapshot;  // roll back to the last completed update
      apply_params(params);
      diverged = true;
    }
    auto t2 = std::chrono::steady_clock::now();

    result.steps_done = (update + 1) * steps_per_update;
    if (!ro.episode_returns.empty()) {
      double s = 0;
      for (double r : ro.episode_returns) s += r;
      last_mean_return = s / double(ro.episode_returns.size());
    }
    double inv = n_mb > 0 ? 1.0 / double(n_mb) : 0.0;
    result.metrics.add_row({double(result.steps_done), double(update), last_mean_return,
                            double(ro.episode_returns.size()), loss_sum * inv, pg_sum * inv,
                            v_sum * inv, ent_sum * inv, kl_sum * inv, clip_sum * inv,
                            gn_sum * inv, lr_u});
    double roll_s = std::chrono::duration<double>(t1 - t0).count();
    double train_s = std::chrono::duration<double>(t2 - t1).count();
    double total_s = roll_s + train_s;
    result.timings.add_row({double(update), double(result.steps_done), roll_s, train_s,
                            total_s > 0 ? double(steps_per_update) / total_s : 0.0});
    if (diverged) {
      result.diverged = true;
      break;
    }
  }
  return result;
}

}  // namespace

PpoRunResult train_ippo(std::shared_ptr<const Env> env, const PpoConfig& cfg, const PrngKey& key) {
  return train_ppo_impl(std::move(env), cfg, key, false);
}

PpoRunResult train_mappo(std::shared_ptr<const Env> env, const PpoConfig& cfg, const PrngKey& key) {
  return train_ppo_impl(std::move(env), cfg, key, true);
}

// ------------------------------------------------------------------ actor ---

PpoActor::PpoActor(std::shared_ptr<const Env> env, PpoNets nets)
    : env_(std::move(env)), nets_(std::move(nets)), layout_(TeamLayout::from_env(*env_)) {
  if (layout_.in_dim != nets_.spec.in_dim || layout_.n_actions != nets_.spec.n_actions)
    throw ContractError("PpoActor: checkpoint dimensions do not match env '" + env_->id() + "'");
  begin_episode();
}

void PpoActor::begin_episode() {
  if (nets_.spec.recurrent)
    hidden_ = Mat<float>(layout_.n_agents(), nets_.spec.hidden_width);
}

AgentMap<Action> PpoActor::act(const EnvState& state, const AgentMap<Obs>& obs, const PrngKey& key,
                               bool greedy) {
  const int A = layout_.n_agents(), na = nets_.spec.n_actions;
  Mat<float> x(A, nets_.spec.in_dim);
  std::vector<uint8_t> legal(size_t(A) * size_t(na));
  for (int a = 0; a < A; ++a) {
    layout_.write_input(obs.at(layout_.agents[size_t(a)]), a,
                        &x.a[size_t(a) * size_t(nets_.spec.in_dim)]);
    layout_.write_legal(*env_, state, a, &legal[size_t(a) * size_t(na)]);
  }
  Mat<float> logits;
  if (nets_.spec.recurrent) {
    std::vector<uint8_t> no_reset(size_t(A), 0);
    logits = nn::rnn_step(nets_.actor_rnn, hidden_, x, no_reset, nets_.spec.act);
  } else {
    logits = nn::ff_forward(nets_.actor_ff, x, nets_.spec.act);
  }
  AgentMap<Action> out;
  for (int a = 0; a < A; ++a) {
    const float* row = &logits.a[size_t(a) * size_t(na)];
    const uint8_t* mask = &legal[size_t(a) * size_t(na)];
    int pick = greedy ? nn::argmax_masked(row, mask, na)
                      : nn::sample_masked(prng::fold_in(key, uint64_t(a)), row, mask, na);
    out.emplace(layout_.agents[size_t(a)], pick);
  }
  return out;
}

}  // namespace marl
