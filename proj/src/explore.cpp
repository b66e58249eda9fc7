#include "rdpg/explore.hpp"

#include <cmath>

namespace rdpg {

OuProcess::OuProcess(int dim, double theta_, double sigma_, double mu_, double dt_)
    : theta(theta_), sigma(sigma_), mu(mu_), dt(dt_) {
  if (dim <= 0) throw ConfigError("OuProcess: dim must be positive");
  if (dt <= 0.0) throw ConfigError("OuProcess: dt must be positive");
  x = Array::zeros({dim});
  reset();
}

void OuProcess::reset() { x.fill(mu); }

const Array& OuProcess::step(Rng& rng) {
  const double sdt = sigma * std::sqrt(dt);
  for (double& xi : x.data) xi += theta * (mu - xi) * dt + sdt * rng.normal();
  return x;
}

double OuProcess::stationary_variance() const {
  const double phi = 1.0 - theta * dt;  // AR(1) coefficient
  if (std::abs(phi) >= 1.0) throw ConfigError("OuProcess: theta*dt out of stable range");
  return sigma * sigma * dt / (1.0 - phi * phi);
}

void apply_param_noise(ParamSet& params, double sigma_p, Rng& rng, ParamNoiseStash& stash) {
  if (stash.active) throw UsageError("apply_param_noise: noise already active");
  stash.clean = params;
  stash.active = true;
  for (auto& [name, a] : params.items())
    for (double& w : a.data) w += sigma_p * rng.normal();
}

void remove_param_noise(ParamSet& params, ParamNoiseStash& stash) {
  if (!stash.active) throw UsageError("remove_param_noise: no noise active");
  params = stash.clean;
  stash.active = false;
}

}  // namespace rdpg
