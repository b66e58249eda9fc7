#include "rdpg/tape.hpp"

#include <cmath>
#include <memory>

namespace rdpg {

int Tape::push(Array v) {
  slots_.push_back(Slot{std::move(v), Array{}});
  return static_cast<int>(slots_.size()) - 1;
}

Array& Tape::g(int id) {
  Slot& s = slots_[id];
  if (s.grad.data.empty() && s.value.numel() > 0) s.grad = Array::zeros(s.value.shape);
  return s.grad;
}

const Array& Tape::gc(int id) const { return slots_[id].grad; }

Value Tape::constant(Array v) { return Value{push(std::move(v))}; }

Value Tape::param(const std::string& name, const Array& v) {
  for (const auto& [n, id] : params_)
    if (n == name) throw UsageError("Tape: duplicate parameter name " + name);
  int id = push(v);
  params_.emplace_back(name, id);
  return Value{id};
}

const Array& Tape::val(Value v) const {
  if (!v.ok()) throw UsageError("Tape: invalid value handle");
  return slots_[v.id].value;
}

void Tape::seed(Value v, const Array& gseed) {
  if (!v.ok()) throw UsageError("Tape: invalid value handle");
  if (!gseed.same_shape(slots_[v.id].value))
    throw ConfigError("Tape::seed: shape mismatch");
  Array& dst = g(v.id);
  for (int i = 0; i < dst.numel(); ++i) dst.data[i] += gseed.data[i];
}

void Tape::seed(Value v, double gs) {
  if (!v.ok()) throw UsageError("Tape: invalid value handle");
  if (slots_[v.id].value.numel() != 1)
    throw ConfigError("Tape::seed: scalar seed on non-scalar value");
  g(v.id).data[0] += gs;
}

void Tape::backward() {
  if (ran_) throw UsageError("Tape: backward already ran");
  ran_ = true;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

const Array& Tape::grad(Value v) {
  if (!v.ok()) throw UsageError("Tape: invalid value handle");
  return g(v.id);
}

ParamSet Tape::param_grads() const {
  ParamSet out;
  for (const auto& [name, id] : params_) {
    const Array& gr = gc(id);
    if (gr.data.empty())
      out.add(name, Array::zeros(slots_[id].value.shape));
    else
      out.add(name, gr);
  }
  return out;
}

ParamSet Tape::param_grads_like(const ParamSet& like) const {
  ParamSet own = param_grads();
  ParamSet out;
  for (const auto& [name, a] : like.items()) {
    if (own.has(name))
      out.add(name, own.at(name));
    else
      out.add(name, Array::zeros(a.shape));
  }
  return out;
}

Value Tape::dense(Value xv, Value Wv, Value bv, Act act) {
  Array y;
  kern::dense(val(xv), val(Wv), val(bv), act, y);
  Value yv{push(std::move(y))};
  ops_.push_back([this, xv, Wv, bv, yv, act]() {
    const Array& gy = gc(yv.id);
    if (gy.data.empty()) return;
    const Array& y = slots_[yv.id].value;
    const Array& x = slots_[xv.id].value;
    const Array& W = slots_[Wv.id].value;
    Array& gx = g(xv.id);
    Array& gW = g(Wv.id);
    Array& gb = g(bv.id);
    const int out = W.shape[0], in = W.shape[1];
    for (int r = 0; r < out; ++r) {
      const double d = gy.data[r] * act_grad_from_out(act, y.data[r]);
      if (d == 0.0) continue;
      gb.data[r] += d;
      const double* w = &W.data[static_cast<size_t>(r) * in];
      double* gwr = &gW.data[static_cast<size_t>(r) * in];
      for (int c = 0; c < in; ++c) {
        gwr[c] += d * x.data[c];
        gx.data[c] += d * w[c];
      }
    }
  });
  return yv;
}

Value Tape::lstm_step(Value xv, Value hv, Value cv,
                      Value Wxv, Value Whv, Value bv, Value* c_out) {
  Array h_new, c_new;
  auto cache = std::make_shared<kern::LstmCache>();
  kern::lstm_step(val(xv), val(hv), val(cv), val(Wxv), val(Whv), val(bv),
                  h_new, c_new, cache.get());
  Value hov{push(std::move(h_new))};
  Value cov{push(std::move(c_new))};
  if (c_out) *c_out = cov;
  ops_.push_back([this, xv, hv, cv, Wxv, Whv, bv, hov, cov, cache]() {
    const Array& gh = gc(hov.id);
    const Array& gcell = gc(cov.id);
    if (gh.data.empty() && gcell.data.empty()) return;
    const Array& x = slots_[xv.id].value;
    const Array& hp = slots_[hv.id].value;
    const Array& cp = slots_[cv.id].value;
    const Array& cn = slots_[cov.id].value;
    const Array& Wx = slots_[Wxv.id].value;
    const Array& Wh = slots_[Whv.id].value;
    const int H = hp.numel();
    const int in = x.numel();

    std::vector<double> dz(static_cast<size_t>(4) * H);
    Array& gcp = g(cv.id);
    for (int k = 0; k < H; ++k) {
      const double dh = gh.data.empty() ? 0.0 : gh.data[k];
      double dc = gcell.data.empty() ? 0.0 : gcell.data[k];
      const double tc = std::tanh(cn.data[k]);
      const double gi = cache->i.data[k];
      const double gf = cache->f.data[k];
      const double gg = cache->g.data[k];
      const double go = cache->o.data[k];
      const double d_o = dh * tc;
      dc += dh * go * (1.0 - tc * tc);
      const double d_i = dc * gg;
      const double d_g = dc * gi;
      const double d_f = dc * cp.data[k];
      gcp.data[k] += dc * gf;
      dz[k] = d_i * gi * (1.0 - gi);
      dz[H + k] = d_f * gf * (1.0 - gf);
      dz[2 * H + k] = d_g * (1.0 - gg * gg);
      dz[3 * H + k] = d_o * go * (1.0 - go);
    }

    Array& gWx = g(Wxv.id);
    Array& gWh = g(Whv.id);
    Array& gb = g(bv.id);
    Array& gx = g(xv.id);
    Array& ghp = g(hv.id);
    for (int r = 0; r < 4 * H; ++r) {
      const double d = dz[r];
      gb.data[r] += d;
      if (d == 0.0) continue;
      double* gwx = &gWx.data[static_cast<size_t>(r) * in];
      const double* wx = &Wx.data[static_cast<size_t>(r) * in];
      for (int k = 0; k < in; ++k) {
        gwx[k] += d * x.data[k];
        gx.data[k] += d * wx[k];
      }
      double* gwh = &gWh.data[static_cast<size_t>(r) * H];
      const double* wh = &Wh.data[static_cast<size_t>(r) * H];
      for (int k = 0; k < H; ++k) {
        gwh[k] += d * hp.data[k];
        ghp.data[k] += d * wh[k];
      }
    }
  });
  return hov;
}

Value Tape::conv1d_pool(Value xv, Value Wv, Value bv) {
  Array y;
  auto argmax = std::make_shared<std::vector<int>>();
  kern::conv1d_pool(val(xv), val(Wv), val(bv), y, argmax.get());
  Value yv{push(std::move(y))};
  ops_.push_back([this, xv, Wv, bv, yv, argmax]() {
    const Array& gy = gc(yv.id);
    if (gy.data.empty()) return;
    const Array& y = slots_[yv.id].value;
    const Array& x = slots_[xv.id].value;
    const Array& W = slots_[Wv.id].value;
    Array& gx = g(xv.id);
    Array& gW = g(Wv.id);
    Array& gb = g(bv.id);
    const int C = W.shape[0], fw = W.shape[1];
    for (int ch = 0; ch < C; ++ch) {
      const double d = gy.data[ch] * (y.data[ch] > 0.0 ? 1.0 : 0.0);
      if (d == 0.0) continue;
      const int j = (*argmax)[ch];
      gb.data[ch] += d;
      const double* w = &W.data[static_cast<size_t>(ch) * fw];
      double* gw = &gW.data[static_cast<size_t>(ch) * fw];
      for (int k = 0; k < fw; ++k) {
        gw[k] += d * x.data[j + k];
        gx.data[j + k] += d * w[k];
      }
    }
  });
  return yv;
}

Value Tape::concat(const std::vector<Value>& xs) {
  int total = 0;
  for (Value v : xs) total += val(v).numel();
  Array y = Array::zeros({total});
  int off = 0;
  for (Value v : xs) {
    const Array& a = val(v);
    for (int i = 0; i < a.numel(); ++i) y.data[off + i] = a.data[i];
    off += a.numel();
  }
  Value yv{push(std::move(y))};
  auto parts = xs;
  ops_.push_back([this, parts, yv]() {
    const Array& gy = gc(yv.id);
    if (gy.data.empty()) return;
    int off = 0;
    for (Value v : parts) {
      Array& gp = g(v.id);
      for (int i = 0; i < gp.numel(); ++i) gp.data[i] += gy.data[off + i];
      off += gp.numel();
    }
  });
  return yv;
}

ParamSet backprop(Tape& tape, Value output, const Array& loss_grad, const ParamSet& params) {
  if (tape.empty()) throw UsageError("backprop: empty tape");
  tape.seed(output, loss_grad);
  tape.backward();
  return tape.param_grads_like(params);
}

Array finite_diff_grad(const std::function<double(const Array&)>& f,
                       const Array& x, double eps) {
  Array g = Array::zeros(x.shape);
  Array p = x;
  for (int i = 0; i < x.numel(); ++i) {
    const double orig = p.data[i];
    p.data[i] = orig + eps;
    const double fp = f(p);
    p.data[i] = orig - eps;
    const double fm = f(p);
    p.data[i] = orig;
    g.data[i] = (fp - fm) / (2.0 * eps);
  }
  return g;
}

}  // namespace rdpg
