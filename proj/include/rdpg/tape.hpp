#pragma once

#include <functional>

#include "rdpg/kernels.hpp"
#include "rdpg/params.hpp"

namespace rdpg {

struct Value {
  int id = -1;
  bool ok() const { return id >= 0; }
};

// Reverse-mode tape over the layer kernels plus concat. Forward calls append
// backward closures; backward() runs them in exact reverse order and
// gradients accumulate additively into per-value slots. Constants get slots
// too, so input gradients (e.g. dQ/da) are readable after backward.
class Tape {
 public:
  Value constant(Array v);
  Value param(const std::string& name, const Array& v);  // names must be unique per tape

  Value dense(Value x, Value W, Value b, Act act);
  // returns h'; c' comes out through c_out
  Value lstm_step(Value x, Value h, Value c,
                  Value Wx, Value Wh, Value b, Value* c_out);
  Value conv1d_pool(Value x, Value W, Value b);
  Value concat(const std::vector<Value>& xs);

  const Array& val(Value v) const;
  // accumulate a loss-gradient seed on any value
  void seed(Value v, const Array& g);
  void seed(Value v, double g);  // single-element convenience
  void backward();               // runs once per tape
  const Array& grad(Value v);    // zeros if the value was never reached
  // named gradients for every param() leaf touched by this tape
  ParamSet param_grads() const;
  // same, but emitting zero gradients for parameters of `like` absent here
  ParamSet param_grads_like(const ParamSet& like) const;
  bool empty() const { return ops_.empty(); }

 private:
  struct Slot {
    Array value;
    Array grad;  // empty until touched; empty means zero
  };
  int push(Array v);
  Array& g(int id);
  const Array& gc(int id) const;

  std::vector<Slot> slots_;
  std::vector<std::function<void()>> ops_;
  std::vector<std::pair<std::string, int>> params_;
  bool ran_ = false;
};

// Convenience wrapper: seed the final output with loss_grad, run backward,
// return gradients for every parameter of `params` (zeros where untouched).
ParamSet backprop(Tape& tape, Value output, const Array& loss_grad, const ParamSet& params);

// Central-difference gradient oracle.
Array finite_diff_grad(const std::function<double(const Array&)>& f,
                       const Array& x, double eps = 1e-5);

}  // namespace rdpg
