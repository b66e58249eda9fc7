#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <utility>
#include <vector>

#include "rdpg/array.hpp"

namespace rdpg {

// Ordered name -> Array container used for weights, gradients and checkpoints.
// Iteration order is insertion order everywhere, which keeps reductions and
// optimizer sweeps deterministic.
class ParamSet {
 public:
  void add(const std::string& name, Array a);
  bool has(const std::string& name) const { return index_.count(name) != 0; }
  Array& at(const std::string& name);
  const Array& at(const std::string& name) const;
  std::vector<std::pair<std::string, Array>>& items() { return items_; }
  const std::vector<std::pair<std::string, Array>>& items() const { return items_; }
  size_t count() const { return items_.size(); }

  // widths, seeds and similar small facts; serialized with the tensors
  std::map<std::string, int64_t> meta;

  bool same_layout(const ParamSet& o) const;
  bool bit_equal(const ParamSet& o) const;
  bool finite() const;
  double l2_norm() const;
  void scale(double s);

  void write(std::ostream& os) const;
  static ParamSet read(std::istream& is);
  void save(const std::string& path) const;
  static ParamSet load(const std::string& path);

 private:
  std::vector<std::pair<std::string, Array>> items_;
  std::map<std::string, size_t> index_;
};

ParamSet zeros_like(const ParamSet& ps);
void accumulate(ParamSet& into, const ParamSet& g);
// target <- tau*source + (1-tau)*target, layouts must match
void soft_update(ParamSet& target, const ParamSet& source, double tau);
// scales grads in place so the concatenated L2 norm is at most max_norm;
// returns the pre-clip norm
double clip_global_norm(ParamSet& grads, double max_norm);

struct AdamState {
  Array m, v;
  int64_t t = 0;
  double alpha = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

AdamState make_adam_state(const Array& like, double alpha,
                          double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

// One bias-corrected ADAM descent step in place. Non-finite gradients abort.
void adam_step(Array& p, const Array& g, AdamState& s);

// Per-parameter ADAM moments for a whole ParamSet, stepped in container order.
class AdamOpt {
 public:
  AdamOpt() = default;
  AdamOpt(const ParamSet& ps, double alpha,
          double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(ParamSet& ps, const ParamSet& grads);
  int64_t steps_taken() const;
  bool bit_equal(const AdamOpt& o) const;

  std::vector<std::pair<std::string, AdamState>>& states() { return states_; }
  const std::vector<std::pair<std::string, AdamState>>& states() const { return states_; }

  void write(std::ostream& os) const;
  static AdamOpt read(std::istream& is);

 private:
  std::vector<std::pair<std::string, AdamState>> states_;
};

// little-endian binary primitives shared by all file formats
namespace bin {
void w_u8(std::ostream& os, uint8_t v);
void w_u32(std::ostream& os, uint32_t v);
void w_u64(std::ostream& os, uint64_t v);
void w_i64(std::ostream& os, int64_t v);
void w_f64(std::ostream& os, double v);
void w_str(std::ostream& os, const std::string& s);
uint8_t r_u8(std::istream& is);
uint32_t r_u32(std::istream& is);
uint64_t r_u64(std::istream& is);
int64_t r_i64(std::istream& is);
double r_f64(std::istream& is);
std::string r_str(std::istream& is);
void w_array(std::ostream& os, const Array& a);
Array r_array(std::istream& is);
void w_magic(std::ostream& os, const char tag[8]);
void expect_magic(std::istream& is, const char tag[8], const std::string& what);
}  // namespace bin

}  // namespace rdpg
