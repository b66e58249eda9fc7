#include "rdpg/params.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace rdpg {

void ParamSet::add(const std::string& name, Array a) {
  if (has(name)) throw UsageError("ParamSet: duplicate parameter " + name);
  index_[name] = items_.size();
  items_.emplace_back(name, std::move(a));
}

Array& ParamSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("ParamSet: missing parameter " + name);
  return items_[it->second].second;
}

const Array& ParamSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("ParamSet: missing parameter " + name);
  return items_[it->second].second;
}

bool ParamSet::same_layout(const ParamSet& o) const {
  if (items_.size() != o.items_.size()) return false;
  for (size_t i = 0; i < items_.size(); ++i) {
    if (items_[i].first != o.items_[i].first) return false;
    if (items_[i].second.shape != o.items_[i].second.shape) return false;
  }
  return true;
}

bool ParamSet::bit_equal(const ParamSet& o) const {
  if (!same_layout(o) || meta != o.meta) return false;
  for (size_t i = 0; i < items_.size(); ++i)
    if (!items_[i].second.bit_equal(o.items_[i].second)) return false;
  return true;
}

bool ParamSet::finite() const {
  for (const auto& [name, a] : items_)
    if (!a.finite()) return false;
  return true;
}

double ParamSet::l2_norm() const {
  double s = 0.0;
  for (const auto& [name, a] : items_)
    for (double v : a.data) s += v * v;
  return std::sqrt(s);
}

void ParamSet::scale(double s) {
  for (auto& [name, a] : items_)
    for (double& v : a.data) v *= s;
}

ParamSet zeros_like(const ParamSet& ps) {
  ParamSet out;
  for (const auto& [name, a] : ps.items()) out.add(name, Array::zeros(a.shape));
  return out;
}

void accumulate(ParamSet& into, const ParamSet& g) {
  if (!into.same_layout(g)) throw ConfigError("accumulate: layout mismatch");
  for (size_t i = 0; i < into.items().size(); ++i) {
    auto& dst = into.items()[i].second;
    const auto& src = g.items()[i].second;
    for (int k = 0; k < dst.numel(); ++k) dst.data[k] += src.data[k];
  }
}

void soft_update(ParamSet& target, const ParamSet& source, double tau) {
  if (!target.same_layout(source)) throw ConfigError("soft_update: layout mismatch");
  for (size_t i = 0; i < target.items().size(); ++i) {
    auto& t = target.items()[i].second;
    const auto& s = source.items()[i].second;
    for (int k = 0; k < t.numel(); ++k)
      t.data[k] = tau * s.data[k] + (1.0 - tau) * t.data[k];
  }
}

double clip_global_norm(ParamSet& grads, double max_norm) {
  double norm = grads.l2_norm();
  if (!std::isfinite(norm)) throw NumericsError("clip_global_norm: non-finite gradient norm");
  if (norm > max_norm && norm > 0.0) grads.scale(max_norm / norm);
  return norm;
}

AdamState make_adam_state(const Array& like, double alpha,
                          double beta1, double beta2, double eps) {
  AdamState s;
  s.m = Array::zeros(like.shape);
  s.v = Array::zeros(like.shape);
  s.alpha = alpha;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps = eps;
  return s;
}

void adam_step(Array& p, const Array& g, AdamState& s) {
  if (!p.same_shape(g) || !p.same_shape(s.m))
    throw ConfigError("adam_step: shape mismatch");
  if (!g.finite()) throw NumericsError("adam_step: non-finite gradient");
  s.t += 1;
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
  for (int k = 0; k < p.numel(); ++k) {
    s.m.data[k] = s.beta1 * s.m.data[k] + (1.0 - s.beta1) * g.data[k];
    s.v.data[k] = s.beta2 * s.v.data[k] + (1.0 - s.beta2) * g.data[k] * g.data[k];
    const double mhat = s.m.data[k] / bc1;
    const double vhat = s.v.data[k] / bc2;
    p.data[k] -= s.alpha * mhat / (std::sqrt(vhat) + s.eps);
  }
}

AdamOpt::AdamOpt(const ParamSet& ps, double alpha, double beta1, double beta2, double eps) {
  for (const auto& [name, a] : ps.items())
    states_.emplace_back(name, make_adam_state(a, alpha, beta1, beta2, eps));
}

void AdamOpt::step(ParamSet& ps, const ParamSet& grads) {
  if (states_.size() != ps.count()) throw ConfigError("AdamOpt: layout mismatch");
  for (auto& [name, st] : states_)
    adam_step(ps.at(name), grads.at(name), st);
}

int64_t AdamOpt::steps_taken() const {
  return states_.empty() ? 0 : states_.front().second.t;
}

bool AdamOpt::bit_equal(const AdamOpt& o) const {
  if (states_.size() != o.states_.size()) return false;
  for (size_t i = 0; i < states_.size(); ++i) {
    const auto& [an, a] = states_[i];
    const auto& [bn, b] = o.states_[i];
    if (an != bn || a.t != b.t) return false;
    if (a.alpha != b.alpha || a.beta1 != b.beta1 || a.beta2 != b.beta2 || a.eps != b.eps)
      return false;
    if (!a.m.bit_equal(b.m) || !a.v.bit_equal(b.v)) return false;
  }
  return true;
}

namespace bin {

void w_u8(std::ostream& os, uint8_t v) { os.put(static_cast<char>(v)); }

void w_u32(std::ostream& os, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

void w_u64(std::ostream& os, uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

void w_i64(std::ostream& os, int64_t v) { w_u64(os, static_cast<uint64_t>(v)); }

void w_f64(std::ostream& os, double v) { w_u64(os, std::bit_cast<uint64_t>(v)); }

void w_str(std::ostream& os, const std::string& s) {
  w_u32(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

uint8_t r_u8(std::istream& is) {
  int c = is.get();
  if (c == EOF) throw IoError("unexpected end of stream");
  return static_cast<uint8_t>(c);
}

uint32_t r_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw IoError("unexpected end of stream");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

uint64_t r_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw IoError("unexpected end of stream");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

int64_t r_i64(std::istream& is) { return static_cast<int64_t>(r_u64(is)); }

double r_f64(std::istream& is) { return std::bit_cast<double>(r_u64(is)); }

std::string r_str(std::istream& is) {
  uint32_t n = r_u32(is);
  if (n > (1u << 20)) throw IoError("corrupt string length");
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw IoError("unexpected end of stream");
  return s;
}

void w_array(std::ostream& os, const Array& a) {
  w_u32(os, static_cast<uint32_t>(a.shape.size()));
  for (int d : a.shape) w_u64(os, static_cast<uint64_t>(d));
  for (double v : a.data) w_f64(os, v);
}

Array r_array(std::istream& is) {
  uint32_t nd = r_u32(is);
  if (nd > 8) throw IoError("corrupt array rank");
  std::vector<int> shape(nd);
  size_t n = 1;
  for (uint32_t i = 0; i < nd; ++i) {
    uint64_t d = r_u64(is);
    if (d > (1u << 28)) throw IoError("corrupt array dimension");
    shape[i] = static_cast<int>(d);
    n *= d;
  }
  Array a;
  a.shape = std::move(shape);
  a.data.resize(n);
  for (size_t i = 0; i < n; ++i) a.data[i] = r_f64(is);
  return a;
}

void w_magic(std::ostream& os, const char tag[8]) { os.write(tag, 8); }

void expect_magic(std::istream& is, const char tag[8], const std::string& what) {
  char b[8];
  is.read(b, 8);
  if (!is || std::memcmp(b, tag, 8) != 0)
    throw IoError("not a " + what + " file (bad magic)");
}

}  // namespace bin

static constexpr char kParamMagic[8] = {'R', 'D', 'P', 'G', 'P', 'S', 'E', '1'};

void ParamSet::write(std::ostream& os) const {
  bin::w_u32(os, static_cast<uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    bin::w_str(os, k);
    bin::w_i64(os, v);
  }
  bin::w_u32(os, static_cast<uint32_t>(items_.size()));
  for (const auto& [name, a] : items_) {
    bin::w_str(os, name);
    bin::w_array(os, a);
  }
}

ParamSet ParamSet::read(std::istream& is) {
  ParamSet ps;
  uint32_t nm = bin::r_u32(is);
  for (uint32_t i = 0; i < nm; ++i) {
    std::string k = bin::r_str(is);
    ps.meta[k] = bin::r_i64(is);
  }
  uint32_t np = bin::r_u32(is);
  for (uint32_t i = 0; i < np; ++i) {
    std::string name = bin::r_str(is);
    ps.add(name, bin::r_array(is));
  }
  return ps;
}

void ParamSet::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  bin::w_magic(os, kParamMagic);
  bin::w_u32(os, 1);  // version
  write(os);
  if (!os) throw IoError("write failed: " + path);
}

ParamSet ParamSet::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  bin::expect_magic(is, kParamMagic, "parameter");
  uint32_t version = bin::r_u32(is);
  if (version != 1) throw IoError("unsupported parameter file version");
  return read(is);
}

void AdamOpt::write(std::ostream& os) const {
  bin::w_u32(os, static_cast<uint32_t>(states_.size()));
  for (const auto& [name, s] : states_) {
    bin::w_str(os, name);
    bin::w_f64(os, s.alpha);
    bin::w_f64(os, s.beta1);
    bin::w_f64(os, s.beta2);
    bin::w_f64(os, s.eps);
    bin::w_i64(os, s.t);
    bin::w_array(os, s.m);
    bin::w_array(os, s.v);
  }
}

AdamOpt AdamOpt::read(std::istream& is) {
  AdamOpt opt;
  uint32_t n = bin::r_u32(is);
  for (uint32_t i = 0; i < n; ++i) {
    std::string name = bin::r_str(is);
    AdamState s;
    s.alpha = bin::r_f64(is);
    s.beta1 = bin::r_f64(is);
    s.beta2 = bin::r_f64(is);
    s.eps = bin::r_f64(is);
    s.t = bin::r_i64(is);
    s.m = bin::r_array(is);
    s.v = bin::r_array(is);
    opt.states_.emplace_back(name, std::move(s));
  }
  return opt;
}

}  // namespace rdpg
