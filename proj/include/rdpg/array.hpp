#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace rdpg {

struct ConfigError : std::runtime_error { using std::runtime_error::runtime_error; };
struct UsageError : std::runtime_error { using std::runtime_error::runtime_error; };
struct NumericsError : std::runtime_error { using std::runtime_error::runtime_error; };
struct IoError : std::runtime_error { using std::runtime_error::runtime_error; };

// Dense row-major tensor of doubles. Everything in this codebase is rank 1 or 2.
struct Array {
  std::vector<int> shape;
  std::vector<double> data;

  Array() = default;

  static Array zeros(std::vector<int> shp);
  static Array of(std::vector<double> v);                    // 1-d literal
  static Array matrix(int rows, int cols, std::vector<double> v);

  int ndim() const { return static_cast<int>(shape.size()); }
  int numel() const { return static_cast<int>(data.size()); }
  int rows() const { return shape.at(0); }
  int cols() const { return shape.at(1); }

  double& operator[](int i) { return data[i]; }
  double operator[](int i) const { return data[i]; }
  double& at2(int r, int c) { return data[static_cast<size_t>(r) * shape[1] + c]; }
  double at2(int r, int c) const { return data[static_cast<size_t>(r) * shape[1] + c]; }

  bool same_shape(const Array& o) const { return shape == o.shape; }
  bool bit_equal(const Array& o) const;
  bool finite() const;
  void fill(double v);
};

// Deterministic RNG with fully specified mappings (no std::*_distribution,
// whose sequences are implementation defined).
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  // independent stream derived from a master seed
  static Rng derive(uint64_t master, uint64_t stream);

  uint64_t next() { return eng_(); }
  double u01();                        // [0, 1)
  double uniform(double a, double b);  // [a, b)
  double normal();                     // Box-Muller
  int uniform_int(int lo, int hi);     // inclusive bounds

 private:
  std::mt19937_64 eng_;
};

uint64_t splitmix64(uint64_t x);

}  // namespace rdpg
