#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace ranlin {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Symmetric second-derivative tensor: comp[out] is the d x d Hessian of
// the out-th component.
struct SymTensor {
  std::vector<Mat> comp;

  SymTensor() = default;
  SymTensor(int d_out, int d_in) : comp(d_out, Mat::Zero(d_in, d_in)) {}

  int dim_out() const { return static_cast<int>(comp.size()); }

  Vec apply(const Vec& a, const Vec& b) const {
    Vec r(dim_out());
    for (int j = 0; j < dim_out(); ++j) r[j] = a.dot(comp[j] * b);
    return r;
  }
  double norm() const {
    double s = 0.0;
    for (const Mat& m : comp) s += m.squaredNorm();
    return std::sqrt(s);
  }
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PreconditionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// splitmix64, used as a seedable stateless generator: independent calls for
// different counters give independent streams under the same seed.
inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline double uniform01(std::uint64_t seed, std::uint64_t counter) {
  const std::uint64_t x = splitmix64(splitmix64(seed) ^ counter);
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

// Halton low-discrepancy sequence, one value per (index, base).
inline double halton(std::uint64_t index, unsigned base) {
  double f = 1.0, r = 0.0;
  while (index > 0) {
    f /= base;
    r += f * static_cast<double>(index % base);
    index /= base;
  }
  return r;
}

// Halton point in the sup-norm ball of given radius (component-wise in
// (-radius, radius)), indices start at 1.
inline Vec halton_point(std::uint64_t index, int dim, double radius) {
  static const unsigned primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};
  if (dim > 10) throw PreconditionError("halton_point: dimension > 10");
  Vec x(dim);
  for (int i = 0; i < dim; ++i)
    x[i] = radius * (2.0 * halton(index, primes[i]) - 1.0);
  return x;
}

inline void parallel_for(long n, int workers, const std::function<void(long)>& body) {
  if (workers <= 1 || n < 2) {
    for (long i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<long> next{0};
  const int k = std::min<long>(workers, n);
  pool.reserve(k);
  for (int t = 0; t < k; ++t)
    pool.emplace_back([&] {
      for (long i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace ranlin
