#pragma once

#include "rdpg/array.hpp"

namespace rdpg {

enum class Act { identity, relu, tanh };

double apply_act(Act a, double x);
// derivative expressed through the activation output
double act_grad_from_out(Act a, double y);

namespace kern {

// y = act(W x + b), W is [out x in]. y must not alias x.
void dense(const Array& x, const Array& W, const Array& b, Act act, Array& y);

struct LstmCache {
  Array i, f, g, o;  // gate activations
};

// Standard LSTM cell. Gate blocks packed along rows of Wx/Wh/b in order
// [input, forget, candidate, output]; forget uses sigmoid, candidate tanh.
// h_out/c_out may alias h/c (in-place state advance).
void lstm_step(const Array& x, const Array& h, const Array& c,
               const Array& Wx, const Array& Wh, const Array& b,
               Array& h_out, Array& c_out, LstmCache* cache);

// Valid 1-d convolution (C filters of width fw over a K-long signal),
// global max-pool per channel, then relu. First maximum wins ties.
void conv1d_pool(const Array& x, const Array& W, const Array& b,
                 Array& y, std::vector<int>* argmax);

}  // namespace kern
}  // namespace rdpg
