#pragma once

#include "rdpg/tdlearn.hpp"

namespace rdpg {

struct GradCheck {
  std::string name;
  double rel_err = 0.0;
  bool pass = false;
};

// Analytic gradients vs central finite differences for every layer kernel,
// both network heads, and the assembled critic loss / actor objective on
// width-4 networks (l=3, u=2, lambda=0.9). Deterministic given the seed.
std::vector<GradCheck> run_gradient_checks(uint64_t seed, double tol = 1e-4);

bool all_pass(const std::vector<GradCheck>& checks);

}  // namespace rdpg
