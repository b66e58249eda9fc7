#include "rdpg/array.hpp"

#include <cmath>
#include <cstring>

namespace rdpg {

Array Array::zeros(std::vector<int> shp) {
  Array a;
  size_t n = 1;
  for (int d : shp) {
    if (d < 0) throw ConfigError("Array: negative dimension");
    n *= static_cast<size_t>(d);
  }
  a.shape = std::move(shp);
  a.data.assign(n, 0.0);
  return a;
}

Array Array::of(std::vector<double> v) {
  Array a;
  a.shape = {static_cast<int>(v.size())};
  a.data = std::move(v);
  return a;
}

Array Array::matrix(int rows, int cols, std::vector<double> v) {
  if (static_cast<size_t>(rows) * cols != v.size())
    throw ConfigError("Array::matrix: size mismatch");
  Array a;
  a.shape = {rows, cols};
  a.data = std::move(v);
  return a;
}

bool Array::bit_equal(const Array& o) const {
  if (shape != o.shape) return false;
  return std::memcmp(data.data(), o.data.data(), data.size() * sizeof(double)) == 0;
}

bool Array::finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

void Array::fill(double v) {
  for (double& x : data) x = v;
}

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng Rng::derive(uint64_t master, uint64_t stream) {
  return Rng(splitmix64(master ^ splitmix64(stream * 0x9e3779b97f4a7c15ULL + 1)));
}

double Rng::u01() {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double a, double b) {
  return a + (b - a) * u01();
}

double Rng::normal() {
  // Box-Muller; u1 drawn from (0,1] so the log is finite
  double u1 = static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
  double u2 = u01();
  constexpr double two_pi = 6.283185307179586476925286766559;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

int Rng::uniform_int(int lo, int hi) {
  if (hi < lo) throw UsageError("Rng::uniform_int: empty range");
  uint64_t span = static_cast<uint64_t>(hi) - static_cast<uint64_t>(lo) + 1;
  uint64_t r = next();
  uint64_t idx = static_cast<uint64_t>((static_cast<unsigned __int128>(r) * span) >> 64);
  return lo + static_cast<int>(idx);
}

}  // namespace rdpg
