#pragma once

// Policy/value network compositions and the PPO loss math, templated on the
// scalar type: trainers instantiate float, gradient tests instantiate double
// and validate every path against central finite differences.
//
// Two network shapes are provided. Feed-forward: activated MLP torso followed
// by a linear head. Recurrent: one activated embedding layer, a GRU, one
// activated post layer, then a linear head; the hidden state is zeroed at
// episode boundaries via per-row reset flags, and training replays whole
// sequences so backpropagation-through-time sees the same resets.

#include <cmath>
#include <cstdint>
#include <vector>

#include "marl/errors.hpp"
#include "marl/nn.hpp"
#include "marl/prng.hpp"

namespace marl::nn {

// ------------------------------------------------------------ feed-forward --

template <typename T>
struct FfBranch {
  MlpParams<T> torso;  // every layer activated
  DenseParams<T> head;  // linear
};

template <typename T>
struct FfCache {
  MlpCache<T> torso;
  DenseCache<T> head;
};

template <typename T>
FfBranch<T> ff_init(const PrngKey& key, int in, int n_layers, int width, int out, T head_gain) {
  check(n_layers >= 1, "ff_init: need at least one torso layer");
  std::vector<int> widths{in};
  for (int l = 0; l < n_layers; ++l) widths.push_back(width);
  FfBranch<T> b;
  b.torso = mlp_init<T>(prng::fold_in(key, 1), widths, T(std::sqrt(2.0)));
  b.head = dense_init<T>(prng::fold_in(key, 2), out, width, head_gain);
  return b;
}

template <typename T>
Mat<T> ff_forward(const FfBranch<T>& b, const Mat<T>& x, Act act, FfCache<T>* cache = nullptr) {
  auto h = mlp_forward(b.torso, x, act, cache ? &cache->torso : nullptr);
  return dense_forward(b.head, h, cache ? &cache->head : nullptr);
}

template <typename T>
FfBranch<T> ff_backward(const FfBranch<T>& b, const FfCache<T>& cache, Act act, const Mat<T>& dy,
                        Mat<T>* dx = nullptr) {
  FfBranch<T> g;
  Mat<T> dh;
  g.head = dense_backward(b.head, cache.head, dy, &dh);
  g.torso = mlp_backward(b.torso, cache.torso, act, dh, dx);
  return g;
}

template <typename T>
void pack(const FfBranch<T>& b, std::vector<T>& out) {
  pack(b.torso, out);
  pack(b.head, out);
}
template <typename T>
void unpack(FfBranch<T>& b, const std::vector<T>& in, size_t& off) {
  unpack(b.torso, in, off);
  unpack(b.head, in, off);
}

// --------------------------------------------------------------- recurrent --

template <typename T>
struct RnnBranch {
  MlpParams<T> embed;  // one activated layer: in -> fc width
  GruParams<T> gru;    // fc width -> hidden
  MlpParams<T> post;   // one activated layer: hidden -> fc width
  DenseParams<T> head;
};

template <typename T>
RnnBranch<T> rnn_init(const PrngKey& key, int in, int fc_width, int hidden, int out, T head_gain) {
  RnnBranch<T> b;
  b.embed = mlp_init<T>(prng::fold_in(key, 1), {in, fc_width}, T(std::sqrt(2.0)));
  b.gru = gru_init<T>(prng::fold_in(key, 2), hidden, fc_width);
  b.post = mlp_init<T>(prng::fold_in(key, 3), {hidden, fc_width}, T(std::sqrt(2.0)));
  b.head = dense_init<T>(prng::fold_in(key, 4), out, fc_width, head_gain);
  return b;
}

template <typename T>
int rnn_hidden_size(const RnnBranch<T>& b) {
  return b.gru.un.rows;
}

// Zeroes rows of h flagged in `reset` (1 = episode boundary before this step).
template <typename T>
void apply_reset(Mat<T>& h, const std::vector<uint8_t>& reset) {
  check(size_t(h.rows) == reset.size(), "apply_reset: row count mismatch");
  for (int r = 0; r < h.rows; ++r)
    if (reset[size_t(r)])
      for (int c = 0; c < h.cols; ++c) h(r, c) = T(0);
}

// Single acting step: consumes and updates `h` in place, returns head output.
template <typename T>
Mat<T> rnn_step(const RnnBranch<T>& b, Mat<T>& h, const Mat<T>& x,
                const std::vector<uint8_t>& reset, Act act) {
  apply_reset(h, reset);
  auto e = mlp_forward(b.embed, x, act);
  h = gru_step(b.gru, h, e);
  auto p = mlp_forward(b.post, h, act);
  return dense_forward(b.head, p);
}

template <typename T>
struct RnnSeqCache {
  std::vector<MlpCache<T>> embed;
  std::vector<GruCache<T>> gru;
  std::vector<MlpCache<T>> post;
  std::vector<DenseCache<T>> head;
  std::vector<std::vector<uint8_t>> resets;  // copy of the forward reset flags
};

// Full-sequence forward: xs[t] is rows x in, resets[t] flags rows whose hidden
// state must be zeroed before step t. Returns per-step head outputs; the
// cache enables exact backpropagation through time with the same resets.
template <typename T>
std::vector<Mat<T>> rnn_seq_forward(const RnnBranch<T>& b, const std::vector<Mat<T>>& xs,
                                    const std::vector<std::vector<uint8_t>>& resets,
                                    const Mat<T>& h0, Act act, RnnSeqCache<T>* cache = nullptr,
                                    Mat<T>* h_final = nullptr) {
  check(xs.size() == resets.size(), "rnn_seq_forward: steps mismatch");
  size_t n = xs.size();
  if (cache) {
    cache->embed.resize(n);
    cache->gru.resize(n);
    cache->post.resize(n);
    cache->head.resize(n);
    cache->resets = resets;
  }
  std::vector<Mat<T>> ys(n);
  Mat<T> h = h0;
  for (size_t t = 0; t < n; ++t) {
    apply_reset(h, resets[t]);
    auto e = mlp_forward(b.embed, xs[t], act, cache ? &cache->embed[t] : nullptr);
    h = gru_step(b.gru, h, e, cache ? &cache->gru[t] : nullptr);
    auto p = mlp_forward(b.post, h, act, cache ? &cache->post[t] : nullptr);
    ys[t] = dense_forward(b.head, p, cache ? &cache->head[t] : nullptr);
  }
  if (h_final) *h_final = std::move(h);
  return ys;
}

// Backward through the whole sequence; dys[t] matches the forward outputs.
// Gradients accumulate over steps; the hidden chain is cut at resets exactly
// as the forward zeroed it.
template <typename T>
RnnBranch<T> rnn_seq_backward(const RnnBranch<T>& b, const RnnSeqCache<T>& cache,
                              const std::vector<Mat<T>>& dys, Act act) {
  size_t n = dys.size();
  check(n == cache.gru.size(), "rnn_seq_backward: cache/dys length mismatch");
  RnnBranch<T> g;
  g.embed = MlpParams<T>{};
  for (const auto& l : b.embed.layers) g.embed.layers.emplace_back(l.w.rows, l.w.cols);
  g.gru = GruParams<T>(b.gru.un.rows, b.gru.wz.cols);
  g.post = MlpParams<T>{};
  for (const auto& l : b.post.layers) g.post.layers.emplace_back(l.w.rows, l.w.cols);
  g.head = DenseParams<T>(b.head.w.rows, b.head.w.cols);

  Mat<T> dh;  // gradient wrt hidden state flowing backwards
  for (size_t ti = n; ti-- > 0;) {
    Mat<T> dp;
    auto ghead = dense_backward(b.head, cache.head[ti], dys[ti], &dp);
    axpy_params(g.head, ghead, T(1));
    Mat<T> dh_step;
    auto gpost = mlp_backward(b.post, cache.post[ti], act, dp, &dh_step);
    axpy_params(g.post, gpost, T(1));
    if (dh.rows == dh_step.rows && dh.cols == dh_step.cols)
      for (size_t i = 0; i < dh.a.size(); ++i) dh_step.a[i] += dh.a[i];
    Mat<T> de, dh_prev;
    auto ggru = gru_backward(b.gru, cache.gru[ti], dh_step, &de, &dh_prev);
    axpy_params(g.gru, ggru, T(1));
    auto gembed = mlp_backward(b.embed, cache.embed[ti], act, de);
    axpy_params(g.embed, gembed, T(1));
    apply_reset(dh_prev, cache.resets[ti]);  // no gradient across episode cuts
    dh = std::move(dh_prev);
  }
  return g;
}

template <typename T>
void pack(const RnnBranch<T>& b, std::vector<T>& out) {
  pack(b.embed, out);
  pack(b.gru, out);
  pack(b.post, out);
  pack(b.head, out);
}
template <typename T>
void unpack(RnnBranch<T>& b, const std::vector<T>& in, size_t& off) {
  unpack(b.embed, in, off);
  unpack(b.gru, in, off);
  unpack(b.post, in, off);
  unpack(b.head, in, off);
}

// -------------------------------------------------- masked categorical math --

inline constexpr double kMaskedLogProb = -1e30;

// Log-probabilities over the legal subset; illegal entries get kMaskedLogProb.
// Accumulates in double regardless of T for numerical stability.
template <typename T>
void masked_log_probs(const T* logits, const uint8_t* legal, int n, double* out) {
  double mx = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i)
    if (legal[i]) mx = std::max(mx, double(logits[i]));
  check(std::isfinite(mx) || mx == -std::numeric_limits<double>::infinity(),
        "masked_log_probs: non-finite logits");
  if (mx == -std::numeric_limits<double>::infinity())
    throw ContractError("masked_log_probs: no legal action");
  double denom = 0.0;
  for (int i = 0; i < n; ++i)
    if (legal[i]) denom += std::exp(double(logits[i]) - mx);
  double log_denom = std::log(denom);
  for (int i = 0; i < n; ++i)
    out[i] = legal[i] ? double(logits[i]) - mx - log_denom : kMaskedLogProb;
}

template <typename T>
double masked_entropy(const T* logits, const uint8_t* legal, int n) {
  std::vector<double> lp(size_t(n), 0.0);
  masked_log_probs(logits, legal, n, lp.data());
  double h = 0.0;
  for (int i = 0; i < n; ++i)
    if (legal[i]) h -= std::exp(lp[size_t(i)]) * lp[size_t(i)];
  return h;
}

// Draws one action from the masked softmax via a single uniform variate and a
// CDF walk (deterministic given the key).
template <typename T>
int sample_masked(const PrngKey& key, const T* logits, const uint8_t* legal, int n,
                  double* log_prob = nullptr) {
  std::vector<double> lp(size_t(n), 0.0);
  masked_log_probs(logits, legal, n, lp.data());
  double u = prng::uniform1(key);
  double cum = 0.0;
  int pick = -1;
  for (int i = 0; i < n; ++i) {
    if (!legal[i]) continue;
    pick = i;
    cum += std::exp(lp[size_t(i)]);
    if (u < cum) break;
  }
  if (log_prob) *log_prob = lp[size_t(pick)];
  return pick;
}

template <typename T>
int argmax_masked(const T* values, const uint8_t* legal, int n) {
  int best = -1;
  for (int i = 0; i < n; ++i) {
    if (!legal[i]) continue;
    if (best < 0 || double(values[i]) > double(values[best])) best = i;
  }
  check(best >= 0, "argmax_masked: no legal action");
  return best;
}

// ------------------------------------------------------------------- GAE ----

// Generalized advantage estimation over one time series:
//   delta_t = r_t + gamma * v_{t+1} * (1 - done_t) - v_t
//   A_t     = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}
// with v beyond the window supplied as last_value. value_targets = A + v.
template <typename T>
void compute_gae(const std::vector<T>& rewards, const std::vector<T>& values,
                 const std::vector<uint8_t>& dones, T last_value, T gamma, T lambda,
                 std::vector<T>* advantages, std::vector<T>* value_targets) {
  size_t n = rewards.size();
  check(values.size() == n && dones.size() == n, "compute_gae: shape mismatch");
  advantages->assign(n, T(0));
  if (value_targets) value_targets->assign(n, T(0));
  T next_adv = T(0);
  T next_value = last_value;
  for (size_t t = n; t-- > 0;) {
    T not_done = dones[t] ? T(0) : T(1);
    T delta = rewards[t] + gamma * next_value * not_done - values[t];
    next_adv = delta + gamma * lambda * not_done * next_adv;
    (*advantages)[t] = next_adv;
    if (value_targets) (*value_targets)[t] = next_adv + values[t];
    next_value = values[t];
  }
}

// -------------------------------------------------------------- PPO loss ----

struct PpoLossConfig {
  double clip_eps = 0.2;
  double ent_coef = 0.01;
  double vf_coef = 0.5;
};

// Per-row minibatch data for the surrogate loss. Rows with weight 0 (padding,
// dead units) contribute nothing; advantages are expected pre-normalized.
template <typename T>
struct PpoRows {
  int n_actions = 0;
  std::vector<int> actions;
  std::vector<T> old_log_probs;
  std::vector<T> advantages;
  std::vector<T> value_targets;
  std::vector<T> old_values;
  std::vector<uint8_t> legal;  // rows x n_actions
  std::vector<T> weights;      // 0/1 loss mask
};

template <typename T>
struct PpoRowLossResult {
  T loss = T(0);
  Mat<T> dlogits;
  std::vector<T> dvalues;
  double pg_loss = 0, v_loss = 0, entropy = 0, approx_kl = 0, clip_frac = 0;
};

// Clipped-surrogate PPO loss given precomputed logits and values:
//   L = -E[min(rho A, clip(rho, 1 +- eps) A)]
//       + vf_coef * E[0.5 * max((v - targ)^2, (v_clipped - targ)^2)]
//       - ent_coef * E[entropy]
// with v_clipped = v_old + clip(v - v_old, +-eps). Expectations are weighted
// means; gradients flow only through each min/max's selected branch (a
// saturated clip contributes zero gradient). Throws DivergenceError on a
// non-finite loss.
template <typename T>
PpoRowLossResult<T> ppo_row_loss(const Mat<T>& logits, const std::vector<T>& values,
                                 const PpoRows<T>& rows, const PpoLossConfig& cfg) {
  int n = logits.rows, na = logits.cols;
  check(na == rows.n_actions, "ppo_row_loss: action-width mismatch");
  check(int(values.size()) == n && int(rows.actions.size()) == n, "ppo_row_loss: row mismatch");
  check(rows.legal.size() == size_t(n) * size_t(na), "ppo_row_loss: legal mask size");

  PpoRowLossResult<T> out;
  out.dlogits = Mat<T>(n, na);
  out.dvalues.assign(size_t(n), T(0));
  double total_w = 0.0;
  for (T w : rows.weights) total_w += double(w);
  if (total_w <= 0.0) return out;  // fully masked minibatch: zero loss, zero grads

  double loss = 0, pg = 0, vl = 0, ent = 0, kl = 0, clipped_n = 0;
  std::vector<double> lp(size_t(na), 0.0);
  for (int r = 0; r < n; ++r) {
    double w = double(rows.weights[size_t(r)]);
    if (w == 0.0) continue;
    const uint8_t* legal = &rows.legal[size_t(r) * size_t(na)];
    masked_log_probs(&logits.a[size_t(r) * size_t(na)], legal, na, lp.data());
    int a = rows.actions[size_t(r)];
    check(a >= 0 && a < na && legal[a], "ppo_row_loss: stored action not legal");

    double logp = lp[size_t(a)];
    double ratio = std::exp(logp - double(rows.old_log_probs[size_t(r)]));
    double adv = double(rows.advantages[size_t(r)]);
    double unclipped = ratio * adv;
    double rho_c = std::min(std::max(ratio, 1.0 - cfg.clip_eps), 1.0 + cfg.clip_eps);
    double clipped = rho_c * adv;
    double surr = std::min(unclipped, clipped);
    // gradient of -surr wrt logp: only the unclipped branch depends on logp
    double dsurr_dlogp = unclipped <= clipped ? ratio * adv : 0.0;

    double entropy = 0.0;
    for (int i = 0; i < na; ++i)
      if (legal[i]) entropy -= std::exp(lp[size_t(i)]) * lp[size_t(i)];

    // d(-surr)/dz and d(-ent_coef*H)/dz, z = logits
    for (int i = 0; i < na; ++i) {
      if (!legal[i]) continue;
      double pi = std::exp(lp[size_t(i)]);
      double dlogp_dz = (i == a ? 1.0 : 0.0) - pi;
      double dH_dz = -pi * (lp[size_t(i)] + entropy);
      double g = -dsurr_dlogp * dlogp_dz - cfg.ent_coef * dH_dz;
      out.dlogits(r, i) = T(w / total_w * g);
    }

    double v = double(values[size_t(r)]);
    double targ = double(rows.value_targets[size_t(r)]);
    double v_old = double(rows.old_values[size_t(r)]);
    double v_clip = v_old + std::min(std::max(v - v_old, -cfg.clip_eps), cfg.clip_eps);
    double sq = (v - targ) * (v - targ), sq_c = (v_clip - targ) * (v_clip - targ);
    double v_term = 0.5 * std::max(sq, sq_c);
    out.dvalues[size_t(r)] = T(w / total_w * cfg.vf_coef * (sq >= sq_c ? (v - targ) : 0.0));

    loss += w * (-surr + cfg.vf_coef * v_term - cfg.ent_coef * entropy);
    pg += w * -surr;
    vl += w * v_term;
    ent += w * entropy;
    kl += w * (ratio - 1.0 - std::log(ratio));
    clipped_n += w * (std::abs(ratio - 1.0) > cfg.clip_eps ? 1.0 : 0.0);
  }
  out.loss = T(loss / total_w);
  if (!std::isfinite(double(out.loss)))
    throw DivergenceError("ppo_row_loss: non-finite loss, training diverged");
  out.pg_loss = pg / total_w;
  out.v_loss = vl / total_w;
  out.entropy = ent / total_w;
  out.approx_kl = kl / total_w;
  out.clip_frac = clipped_n / total_w;
  return out;
}

// In-place advantage normalization over weighted rows: mean 0, std 1.
template <typename T>
void normalize_advantages(std::vector<T>& adv, const std::vector<T>& weights) {
  check(adv.size() == weights.size(), "normalize_advantages: size mismatch");
  double sum = 0, n = 0;
  for (size_t i = 0; i < adv.size(); ++i) {
    sum += double(weights[i]) * double(adv[i]);
    n += double(weights[i]);
  }
  if (n <= 0) return;
  double mean = sum / n;
  double var = 0;
  for (size_t i = 0; i < adv.size(); ++i) {
    double d = double(adv[i]) - mean;
    var += double(weights[i]) * d * d;
  }
  double std = std::sqrt(var / n);
  for (size_t i = 0; i < adv.size(); ++i)
    adv[i] = weights[i] == T(0) ? T(0) : T((double(adv[i]) - mean) / (std + 1e-8));
}

}  // namespace marl::nn
