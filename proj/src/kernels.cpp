#include "rdpg/kernels.hpp"

#include <cmath>
#include <limits>

namespace rdpg {

double apply_act(Act a, double x) {
  switch (a) {
    case Act::identity: return x;
    case Act::relu: return x > 0.0 ? x : 0.0;
    case Act::tanh: return std::tanh(x);
  }
  return x;
}

double act_grad_from_out(Act a, double y) {
  switch (a) {
    case Act::identity: return 1.0;
    case Act::relu: return y > 0.0 ? 1.0 : 0.0;
    case Act::tanh: return 1.0 - y * y;
  }
  return 1.0;
}

static inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

namespace kern {

void dense(const Array& x, const Array& W, const Array& b, Act act, Array& y) {
  if (W.ndim() != 2) throw ConfigError("dense: W must be 2-d");
  const int out = W.shape[0], in = W.shape[1];
  if (x.numel() != in) throw ConfigError("dense: input size mismatch");
  if (b.numel() != out) throw ConfigError("dense: bias size mismatch");
  y.shape = {out};
  y.data.resize(out);
  const double* xv = x.data.data();
  for (int r = 0; r < out; ++r) {
    const double* w = &W.data[static_cast<size_t>(r) * in];
    double acc = b.data[r];
    for (int c = 0; c < in; ++c) acc += w[c] * xv[c];
    y.data[r] = apply_act(act, acc);
  }
}

void lstm_step(const Array& x, const Array& h, const Array& c,
               const Array& Wx, const Array& Wh, const Array& b,
               Array& h_out, Array& c_out, LstmCache* cache) {
  const int H = h.numel();
  const int in = x.numel();
  if (c.numel() != H) throw ConfigError("lstm: h/c size mismatch");
  if (Wx.ndim() != 2 || Wx.shape[0] != 4 * H || Wx.shape[1] != in)
    throw ConfigError("lstm: Wx shape mismatch");
  if (Wh.ndim() != 2 || Wh.shape[0] != 4 * H || Wh.shape[1] != H)
    throw ConfigError("lstm: Wh shape mismatch");
  if (b.numel() != 4 * H) throw ConfigError("lstm: bias size mismatch");

  std::vector<double> z(static_cast<size_t>(4) * H);
  const double* xv = x.data.data();
  const double* hv = h.data.data();
  for (int r = 0; r < 4 * H; ++r) {
    const double* wx = &Wx.data[static_cast<size_t>(r) * in];
    const double* wh = &Wh.data[static_cast<size_t>(r) * H];
    double acc = b.data[r];
    for (int k = 0; k < in; ++k) acc += wx[k] * xv[k];
    for (int k = 0; k < H; ++k) acc += wh[k] * hv[k];
    z[r] = acc;
  }

  if (cache) {
    cache->i = Array::zeros({H});
    cache->f = Array::zeros({H});
    cache->g = Array::zeros({H});
    cache->o = Array::zeros({H});
  }
  h_out.shape = {H};
  h_out.data.resize(H);
  c_out.shape = {H};
  c_out.data.resize(H);
  for (int k = 0; k < H; ++k) {
    const double gi = sigmoid(z[k]);
    const double gf = sigmoid(z[H + k]);
    const double gg = std::tanh(z[2 * H + k]);
    const double go = sigmoid(z[3 * H + k]);
    const double cn = gf * c.data[k] + gi * gg;  // reads c before writing c_out
    c_out.data[k] = cn;
    h_out.data[k] = go * std::tanh(cn);
    if (cache) {
      cache->i.data[k] = gi;
      cache->f.data[k] = gf;
      cache->g.data[k] = gg;
      cache->o.data[k] = go;
    }
  }
}

void conv1d_pool(const Array& x, const Array& W, const Array& b,
                 Array& y, std::vector<int>* argmax) {
  if (W.ndim() != 2) throw ConfigError("conv1d: W must be [channels x width]");
  const int K = x.numel();
  const int C = W.shape[0], fw = W.shape[1];
  if (K < fw) throw ConfigError("conv1d: signal shorter than filter");
  if (b.numel() != C) throw ConfigError("conv1d: bias size mismatch");
  const int L = K - fw + 1;
  y.shape = {C};
  y.data.resize(C);
  if (argmax) argmax->assign(C, 0);
  for (int ch = 0; ch < C; ++ch) {
    const double* w = &W.data[static_cast<size_t>(ch) * fw];
    double best = -std::numeric_limits<double>::infinity();
    int bi = 0;
    for (int j = 0; j < L; ++j) {
      double s = b.data[ch];
      for (int k = 0; k < fw; ++k) s += w[k] * x.data[j + k];
      if (s > best) { best = s; bi = j; }
    }
    y.data[ch] = best > 0.0 ? best : 0.0;
    if (argmax) (*argmax)[ch] = bi;
  }
}

}  // namespace kern
}  // namespace rdpg
