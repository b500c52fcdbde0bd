#pragma once
// Minimal neural toolkit with exact hand-derived gradients: dense layers,
// relu/tanh activations, a GRU cell, bias-corrected Adam, global-norm
// clipping, and orthogonal initialization. There is no autodiff graph —
// every op has a fixed topology with a matching *_backward that returns
// exact reverse-mode gradients (validated against finite differences in the
// tests). Parameter structs double as gradient holders.
//
// Everything is templated on the scalar type: trainers run float, gradient
// checks run double. All ops are batched (matrix rows = batch entries) and
// pure: parameters are immutable values and updates return new values.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "marl/errors.hpp"
#include "marl/prng.hpp"

namespace marl::nn {

template <typename T>
struct Mat {
  int rows = 0, cols = 0;
  std::vector<T> a;  // row-major

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(size_t(r) * size_t(c), T(0)) {}

  T& operator()(int r, int c) { return a[size_t(r) * size_t(cols) + size_t(c)]; }
  const T& operator()(int r, int c) const { return a[size_t(r) * size_t(cols) + size_t(c)]; }
  size_t size() const { return a.size(); }
};

inline void check(bool ok, const char* what) {
  if (!ok) throw ContractError(std::string("nn: ") + what);
}

// y = x * W^T  (x: B x in, w: out x in, y: B x out)
template <typename T>
Mat<T> matmul_nt(const Mat<T>& x, const Mat<T>& w) {
  check(x.cols == w.cols, "matmul_nt: inner dimensions disagree");
  Mat<T> y(x.rows, w.rows);
  for (int b = 0; b < x.rows; ++b)
    for (int o = 0; o < w.rows; ++o) {
      T acc = 0;
      const T* xa = &x.a[size_t(b) * size_t(x.cols)];
      const T* wa = &w.a[size_t(o) * size_t(w.cols)];
      for (int i = 0; i < x.cols; ++i) acc += xa[i] * wa[i];
      y(b, o) = acc;
    }
  return y;
}

// y = g^T * x  (g: B x out, x: B x in, y: out x in) — weight gradients
template <typename T>
Mat<T> matmul_tn(const Mat<T>& g, const Mat<T>& x) {
  check(g.rows == x.rows, "matmul_tn: batch sizes disagree");
  Mat<T> y(g.cols, x.cols);
  for (int b = 0; b < g.rows; ++b)
    for (int o = 0; o < g.cols; ++o) {
      T gv = g(b, o);
      if (gv == T(0)) continue;
      T* ya = &y.a[size_t(o) * size_t(x.cols)];
      const T* xa = &x.a[size_t(b) * size_t(x.cols)];
      for (int i = 0; i < x.cols; ++i) ya[i] += gv * xa[i];
    }
  return y;
}

// y = g * W  (g: B x out, w: out x in, y: B x in) — input gradients
template <typename T>
Mat<T> matmul_nn(const Mat<T>& g, const Mat<T>& w) {
  check(g.cols == w.rows, "matmul_nn: inner dimensions disagree");
  Mat<T> y(g.rows, w.cols);
  for (int b = 0; b < g.rows; ++b)
    for (int o = 0; o < g.cols; ++o) {
      T gv = g(b, o);
      if (gv == T(0)) continue;
      T* ya = &y.a[size_t(b) * size_t(w.cols)];
      const T* wa = &w.a[size_t(o) * size_t(w.cols)];
      for (int i = 0; i < w.cols; ++i) ya[i] += gv * wa[i];
    }
  return y;
}

// ---------------------------------------------------------------- dense ---

template <typename T>
struct DenseParams {
  Mat<T> w;           // out x in
  std::vector<T> b;   // out

  DenseParams() = default;
  DenseParams(int out, int in) : w(out, in), b(size_t(out), T(0)) {}
  int in() const { return w.cols; }
  int out() const { return w.rows; }
};

template <typename T>
struct DenseCache {
  Mat<T> x;  // forward input, needed for the weight gradient
};

// y = x W^T + b
template <typename T>
Mat<T> dense_forward(const DenseParams<T>& p, const Mat<T>& x, DenseCache<T>* cache = nullptr) {
  check(x.cols == p.in(), "dense_forward: input width mismatch");
  Mat<T> y = matmul_nt(x, p.w);
  for (int r = 0; r < y.rows; ++r)
    for (int c = 0; c < y.cols; ++c) y(r, c) += p.b[size_t(c)];
  if (cache) cache->x = x;
  return y;
}

// returns gradients for (w, b) and the input; dy: B x out
template <typename T>
DenseParams<T> dense_backward(const DenseParams<T>& p, const DenseCache<T>& cache,
                              const Mat<T>& dy, Mat<T>* dx = nullptr) {
  check(dy.cols == p.out(), "dense_backward: output width mismatch");
  check(dy.rows == cache.x.rows, "dense_backward: cache does not match this gradient");
  DenseParams<T> g(p.out(), p.in());
  g.w = matmul_tn(dy, cache.x);
  for (int r = 0; r < dy.rows; ++r)
    for (int c = 0; c < dy.cols; ++c) g.b[size_t(c)] += dy(r, c);
  if (dx) *dx = matmul_nn(dy, p.w);
  return g;
}

// ----------------------------------------------------------- activations ---

enum class Act { kRelu, kTanh };

template <typename T>
void act_inplace(Mat<T>& m, Act act) {
  for (T& v : m.a) v = act == Act::kRelu ? (v > T(0) ? v : T(0)) : std::tanh(v);
}

// derivative expressed through the activated output y = act(z)
template <typename T>
T act_grad_from_output(T y, Act act) {
  return act == Act::kRelu ? (y > T(0) ? T(1) : T(0)) : T(1) - y * y;
}

// ------------------------------------------------------------------ mlp ---

// affine + activation after every layer (linear heads are separate Dense ops)
template <typename T>
struct MlpParams {
  std::vector<DenseParams<T>> layers;
};

template <typename T>
struct MlpCache {
  std::vector<DenseCache<T>> inputs;  // per-layer forward inputs
  std::vector<Mat<T>> outputs;        // per-layer activated outputs
};

template <typename T>
Mat<T> mlp_forward(const MlpParams<T>& p, const Mat<T>& x, Act act,
                   MlpCache<T>* cache = nullptr) {
  check(!p.layers.empty(), "mlp_forward: no layers");
  if (cache) {
    cache->inputs.assign(p.layers.size(), DenseCache<T>{});
    cache->outputs.assign(p.layers.size(), Mat<T>{});
  }
  Mat<T> h = x;
  for (size_t l = 0; l < p.layers.size(); ++l) {
    h = dense_forward(p.layers[l], h, cache ? &cache->inputs[l] : nullptr);
    act_inplace(h, act);
    if (cache) cache->outputs[l] = h;
  }
  return h;
}

template <typename T>
MlpParams<T> mlp_backward(const MlpParams<T>& p, const MlpCache<T>& cache, Act act,
                          const Mat<T>& dy, Mat<T>* dx = nullptr) {
  check(cache.inputs.size() == p.layers.size(), "mlp_backward: cache does not match this net");
  MlpParams<T> g;
  g.layers.resize(p.layers.size());
  Mat<T> grad = dy;
  for (size_t l = p.layers.size(); l-- > 0;) {
    const Mat<T>& y = cache.outputs[l];
    check(grad.rows == y.rows && grad.cols == y.cols, "mlp_backward: gradient shape mismatch");
    for (int r = 0; r < grad.rows; ++r)
      for (int c = 0; c < grad.cols; ++c) grad(r, c) *= act_grad_from_output(y(r, c), act);
    Mat<T> dinput;
    g.layers[l] = dense_backward(p.layers[l], cache.inputs[l], grad,
                                 (l > 0 || dx) ? &dinput : nullptr);
    grad = std::move(dinput);
  }
  if (dx) *dx = std::move(grad);
  return g;
}

// ------------------------------------------------------------------ gru ---

// z = sigmoid(x Wz^T + bzx + h Uz^T + bzh)        update gate
// r = sigmoid(x Wr^T + brx + h Ur^T + brh)        reset gate
// c = tanh(x Wn^T + bnx + r o (h Un^T + bnh))     candidate
// h' = z o h + (1 - z) o c                        carry when z -> 1
template <typename T>
struct GruParams {
  Mat<T> wz, wr, wn;          // input path, hidden x in
  Mat<T> uz, ur, un;          // hidden path, hidden x hidden
  std::vector<T> bzx, brx, bnx;  // input-path biases
  std::vector<T> bzh, brh, bnh;  // hidden-path biases

  GruParams() = default;
  GruParams(int hidden, int in)
      : wz(hidden, in), wr(hidden, in), wn(hidden, in),
        uz(hidden, hidden), ur(hidden, hidden), un(hidden, hidden),
        bzx(size_t(hidden), T(0)), brx(size_t(hidden), T(0)), bnx(size_t(hidden), T(0)),
        bzh(size_t(hidden), T(0)), brh(size_t(hidden), T(0)), bnh(size_t(hidden), T(0)) {}
  int in() const { return wz.cols; }
  int hidden() const { return wz.rows; }
};

template <typename T>
struct GruCache {
  Mat<T> x, h;          // forward inputs
  Mat<T> z, r, c, ah;   // gates, candidate, and the pre-gate hidden path
};

template <typename T>
Mat<T> gru_step(const GruParams<T>& p, const Mat<T>& h, const Mat<T>& x,
                GruCache<T>* cache = nullptr) {
  check(x.cols == p.in(), "gru_step: input width mismatch");
  check(h.cols == p.hidden(), "gru_step: hidden width mismatch");
  check(h.rows == x.rows, "gru_step: batch sizes disagree");
  auto gate = [&](const Mat<T>& wx, const std::vector<T>& bx, const Mat<T>& uh,
                  const std::vector<T>& bh) {
    Mat<T> m = matmul_nt(x, wx);
    Mat<T> mh = matmul_nt(h, uh);
    for (int r = 0; r < m.rows; ++r)
      for (int c = 0; c < m.cols; ++c)
        m(r, c) += bx[size_t(c)] + mh(r, c) + bh[size_t(c)];
    return m;
  };
  Mat<T> z = gate(p.wz, p.bzx, p.uz, p.bzh);
  Mat<T> r = gate(p.wr, p.brx, p.ur, p.brh);
  for (T& v : z.a) v = T(1) / (T(1) + std::exp(-v));
  for (T& v : r.a) v = T(1) / (T(1) + std::exp(-v));

  Mat<T> ah = matmul_nt(h, p.un);  // hidden path of the candidate, pre reset
  for (int b = 0; b < ah.rows; ++b)
    for (int c = 0; c < ah.cols; ++c) ah(b, c) += p.bnh[size_t(c)];
  Mat<T> cand = matmul_nt(x, p.wn);
  for (int b = 0; b < cand.rows; ++b)
    for (int c = 0; c < cand.cols; ++c)
      cand(b, c) = std::tanh(cand(b, c) + p.bnx[size_t(c)] + r(b, c) * ah(b, c));

  Mat<T> hn(h.rows, h.cols);
  for (int b = 0; b < h.rows; ++b)
    for (int c = 0; c < h.cols; ++c)
      hn(b, c) = z(b, c) * h(b, c) + (T(1) - z(b, c)) * cand(b, c);
  if (cache) {
    cache->x = x;
    cache->h = h;
    cache->z = z;
    cache->r = r;
    cache->c = cand;
    cache->ah = ah;
  }
  return hn;
}

// gradients w.r.t. parameters plus the forward inputs (dx, dh)
template <typename T>
GruParams<T> gru_backward(const GruParams<T>& p, const GruCache<T>& cache, const Mat<T>& dhn,
                          Mat<T>* dx = nullptr, Mat<T>* dh = nullptr) {
  check(dhn.rows == cache.h.rows && dhn.cols == cache.h.cols,
        "gru_backward: gradient shape mismatch");
  int B = dhn.rows, H = dhn.cols;
  Mat<T> daz(B, H), dar(B, H), dac(B, H), dah(B, H), dh_acc(B, H);
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < H; ++c) {
      T g = dhn(b, c);
      T z = cache.z(b, c), r = cache.r(b, c), cd = cache.c(b, c);
      T dz = g * (cache.h(b, c) - cd);
      T dc = g * (T(1) - z);
      dac(b, c) = dc * (T(1) - cd * cd);
      dah(b, c) = dac(b, c) * r;
      T dr = dac(b, c) * cache.ah(b, c);
      dar(b, c) = dr * r * (T(1) - r);
      daz(b, c) = dz * z * (T(1) - z);
      dh_acc(b, c) = g * z;  // the carry path; gate paths are added below
    }

  GruParams<T> grads(p.hidden(), p.in());
  grads.wz = matmul_tn(daz, cache.x);
  grads.wr = matmul_tn(dar, cache.x);
  grads.wn = matmul_tn(dac, cache.x);
  grads.uz = matmul_tn(daz, cache.h);
  grads.ur = matmul_tn(dar, cache.h);
  grads.un = matmul_tn(dah, cache.h);
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < H; ++c) {
      grads.bzx[size_t(c)] += daz(b, c);
      grads.bzh[size_t(c)] += daz(b, c);
      grads.brx[size_t(c)] += dar(b, c);
      grads.brh[size_t(c)] += dar(b, c);
      grads.bnx[size_t(c)] += dac(b, c);
      grads.bnh[size_t(c)] += dah(b, c);
    }
  if (dx) {
    *dx = matmul_nn(daz, p.wz);
    Mat<T> t1 = matmul_nn(dar, p.wr), t2 = matmul_nn(dac, p.wn);
    for (size_t i = 0; i < dx->a.size(); ++i) dx->a[i] += t1.a[i] + t2.a[i];
  }
  if (dh) {
    *dh = dh_acc;
    Mat<T> t1 = matmul_nn(daz, p.uz), t2 = matmul_nn(dar, p.ur), t3 = matmul_nn(dah, p.un);
    for (size_t i = 0; i < dh->a.size(); ++i) dh->a[i] += t1.a[i] + t2.a[i] + t3.a[i];
  }
  return grads;
}

// --------------------------------------------------- flatten / optimizer ---

// pack/unpack give every parameter struct a stable flat order so clipping and
// Adam can treat a whole model as one vector
template <typename T>
void pack(const Mat<T>& m, std::vector<T>& out) {
  out.insert(out.end(), m.a.begin(), m.a.end());
}
template <typename T>
void pack(const std::vector<T>& v, std::vector<T>& out) {
  out.insert(out.end(), v.begin(), v.end());
}
template <typename T>
void pack(const DenseParams<T>& p, std::vector<T>& out) {
  pack(p.w, out);
  pack(p.b, out);
}
template <typename T>
void pack(const MlpParams<T>& p, std::vector<T>& out) {
  for (const auto& l : p.layers) pack(l, out);
}
template <typename T>
void pack(const GruParams<T>& p, std::vector<T>& out) {
  pack(p.wz, out);
  pack(p.wr, out);
  pack(p.wn, out);
  pack(p.uz, out);
  pack(p.ur, out);
  pack(p.un, out);
  pack(p.bzx, out);
  pack(p.brx, out);
  pack(p.bnx, out);
  pack(p.bzh, out);
  pack(p.brh, out);
  pack(p.bnh, out);
}

template <typename T>
void unpack(Mat<T>& m, const std::vector<T>& in, size_t& off) {
  check(off + m.a.size() <= in.size(), "unpack: flat vector too short");
  std::copy(in.begin() + long(off), in.begin() + long(off + m.a.size()), m.a.begin());
  off += m.a.size();
}
template <typename T>
void unpack(std::vector<T>& v, const std::vector<T>& in, size_t& off) {
  check(off + v.size() <= in.size(), "unpack: flat vector too short");
  std::copy(in.begin() + long(off), in.begin() + long(off + v.size()), v.begin());
  off += v.size();
}
template <typename T>
void unpack(DenseParams<T>& p, const std::vector<T>& in, size_t& off) {
  unpack(p.w, in, off);
  unpack(p.b, in, off);
}
template <typename T>
void unpack(MlpParams<T>& p, const std::vector<T>& in, size_t& off) {
  for (auto& l : p.layers) unpack(l, in, off);
}
template <typename T>
void unpack(GruParams<T>& p, const std::vector<T>& in, size_t& off) {
  unpack(p.wz, in, off);
  unpack(p.wr, in, off);
  unpack(p.wn, in, off);
  unpack(p.uz, in, off);
  unpack(p.ur, in, off);
  unpack(p.un, in, off);
  unpack(p.bzx, in, off);
  unpack(p.brx, in, off);
  unpack(p.bnx, in, off);
  unpack(p.bzh, in, off);
  unpack(p.brh, in, off);
  unpack(p.bnh, in, off);
}

// accumulate a gradient struct into another (same shapes)
template <typename T, typename P>
void axpy_params(P& into, const P& from, T scale) {
  std::vector<T> a, b;
  pack(into, a);
  pack(from, b);
  check(a.size() == b.size(), "axpy_params: shapes disagree");
  for (size_t i = 0; i < a.size(); ++i) a[i] += scale * b[i];
  size_t off = 0;
  unpack(into, a, off);
}

template <typename T>
struct AdamState {
  std::vector<T> m, v;  // first and second moments, flat parameter order
  int64_t t = 0;
  T beta1 = T(0.9), beta2 = T(0.999), eps = T(1e-8);

  explicit AdamState(size_t n = 0) : m(n, T(0)), v(n, T(0)) {}
};

// bias-corrected Adam; throws DivergenceError on non-finite gradients
template <typename T>
std::vector<T> adam_update(AdamState<T>& state, const std::vector<T>& params,
                           const std::vector<T>& grads, T lr) {
  check(params.size() == grads.size(), "adam_update: gradient size mismatch");
  check(params.size() == state.m.size(), "adam_update: state size mismatch");
  for (T g : grads)
    if (!std::isfinite(double(g)))
      throw DivergenceError("adam_update: non-finite gradient, training diverged");
  state.t += 1;
  T c1 = T(1) - std::pow(state.beta1, T(state.t));
  T c2 = T(1) - std::pow(state.beta2, T(state.t));
  std::vector<T> out(params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (T(1) - state.beta1) * grads[i];
    state.v[i] = state.beta2 * state.v[i] + (T(1) - state.beta2) * grads[i] * grads[i];
    T mhat = state.m[i] / c1;
    T vhat = state.v[i] / c2;
    out[i] = params[i] - lr * mhat / (std::sqrt(vhat) + state.eps);
  }
  return out;
}

// scale the whole gradient vector so its L2 norm never exceeds max_norm;
// returns the pre-clip norm
template <typename T>
T clip_global_norm(std::vector<T>& grads, T max_norm) {
  check(max_norm > T(0), "clip_global_norm: max_norm must be positive");
  double sq = 0.0;
  for (T g : grads) sq += double(g) * double(g);
  T norm = T(std::sqrt(sq));
  if (norm > max_norm) {
    T scale = max_norm / norm;
    for (T& g : grads) g *= scale;
  }
  return norm;
}

// ----------------------------------------------------------------- init ---

// orthogonal weight block (rows x cols) scaled by gain: the smaller dimension
// is orthonormal (W W^T = gain^2 I when wide, W^T W = gain^2 I when tall)
template <typename T>
Mat<T> orthogonal(const PrngKey& key, int rows, int cols, T gain) {
  int big = std::max(rows, cols), small = std::min(rows, cols);
  // modified Gram-Schmidt on a big x small standard-normal draw
  auto draws = prng::normal(key, size_t(big) * size_t(small));
  std::vector<std::vector<double>> q(size_t(small), std::vector<double>(size_t(big), 0.0));
  for (int c = 0; c < small; ++c)
    for (int r = 0; r < big; ++r) q[size_t(c)][size_t(r)] = draws[size_t(r) * size_t(small) + size_t(c)];
  for (int c = 0; c < small; ++c) {
    auto& col = q[size_t(c)];
    for (int prev = 0; prev < c; ++prev) {
      const auto& p = q[size_t(prev)];
      double dot = 0.0;
      for (int r = 0; r < big; ++r) dot += col[size_t(r)] * p[size_t(r)];
      for (int r = 0; r < big; ++r) col[size_t(r)] -= dot * p[size_t(r)];
    }
    double nrm = 0.0;
    for (double v : col) nrm += v * v;
    nrm = std::sqrt(nrm);
    check(nrm > 1e-12, "orthogonal: degenerate draw");
    for (double& v : col) v /= nrm;
  }
  Mat<T> w(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      double v = rows >= cols ? q[size_t(c)][size_t(r)] : q[size_t(r)][size_t(c)];
      w(r, c) = T(double(gain) * v);
    }
  return w;
}

// standard policy-gradient initialization: orthogonal hidden layers with
// gain sqrt(2) (relu) and small/unit heads are built by the caller via `gain`
template <typename T>
DenseParams<T> dense_init(const PrngKey& key, int out, int in, T gain) {
  DenseParams<T> p(out, in);
  p.w = orthogonal(key, out, in, gain);
  return p;
}

template <typename T>
MlpParams<T> mlp_init(const PrngKey& key, const std::vector<int>& widths, T gain) {
  check(widths.size() >= 2, "mlp_init: need at least input and output widths");
  MlpParams<T> p;
  for (size_t l = 0; l + 1 < widths.size(); ++l)
    p.layers.push_back(
        dense_init(prng::fold_in(key, uint64_t(l)), widths[l + 1], widths[l], gain));
  return p;
}

template <typename T>
GruParams<T> gru_init(const PrngKey& key, int hidden, int in) {
  GruParams<T> p(hidden, in);
  p.wz = orthogonal(prng::fold_in(key, 0), hidden, in, T(1));
  p.wr = orthogonal(prng::fold_in(key, 1), hidden, in, T(1));
  p.wn = orthogonal(prng::fold_in(key, 2), hidden, in, T(1));
  p.uz = orthogonal(prng::fold_in(key, 3), hidden, hidden, T(1));
  p.ur = orthogonal(prng::fold_in(key, 4), hidden, hidden, T(1));
  p.un = orthogonal(prng::fold_in(key, 5), hidden, hidden, T(1));
  return p;
}

}  // namespace marl::nn
