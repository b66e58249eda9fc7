#pragma once

#include "rdpg/params.hpp"

namespace rdpg {

// Ornstein-Uhlenbeck action noise:
//   x <- x + theta (mu - x) dt + sigma sqrt(dt) N(0, I)
struct OuProcess {
  double theta = 0.15, sigma = 0.2, mu = 0.0, dt = 0.02;
  Array x;

  OuProcess(int dim, double theta_, double sigma_, double mu_, double dt_);
  void reset();  // back to mu at episode start
  const Array& step(Rng& rng);
  // long-run variance of the discrete AR(1) recursion
  double stationary_variance() const;
};

// Bit-exact stash/restore around additive Gaussian parameter noise.
struct ParamNoiseStash {
  ParamSet clean;
  bool active = false;
};

void apply_param_noise(ParamSet& params, double sigma_p, Rng& rng, ParamNoiseStash& stash);
void remove_param_noise(ParamSet& params, ParamNoiseStash& stash);

}  // namespace rdpg
