#pragma once

// Small SVM problems shared by the unit and acceptance suites.

#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"

namespace fixtures {

struct NamedProblem {
  std::string name;
  oracle::SvmProblem problem;
};

// Two Gaussian blobs at +-shift along a random direction.
inline oracle::SvmProblem blobs(std::size_t n, std::size_t dim, double shift, double C, std::uint64_t seed,
                                double positive_share = 0.5) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  std::vector<double> dir(dim);
  double nrm = 0.0;
  for (auto& v : dir) {
    v = nd(gen);
    nrm += v * v;
  }
  for (auto& v : dir) v /= std::sqrt(nrm);
  oracle::SvmProblem p;
  p.C = C;
  const auto n_pos = static_cast<std::size_t>(positive_share * static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const int y = i < n_pos ? 1 : -1;
    std::vector<double> x(dim);
    for (std::size_t j = 0; j < dim; ++j) x[j] = nd(gen) + y * shift * dir[j];
    p.X.push_back(std::move(x));
    p.y.push_back(y);
  }
  return p;
}

// Separable in 2-D: classes on either side of a line with a gap.
inline oracle::SvmProblem separable_2d(std::size_t n, double C, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  oracle::SvmProblem p;
  p.C = C;
  while (p.X.size() < n) {
    const double a = u(gen), b = u(gen);
    const double s = a + 0.5 * b - 0.3;
    if (std::abs(s) < 0.4) continue;
    p.X.push_back({a, b});
    p.y.push_back(s > 0 ? 1 : -1);
  }
  return p;
}

// One negative point sits inside the positive class.
inline oracle::SvmProblem overlapping_4() {
  oracle::SvmProblem p;
  p.C = 1.0;
  p.X = {{1.0, 1.0}, {2.0, 2.0}, {-1.0, -1.0}, {1.5, 1.5}};
  p.y = {1, 1, -1, -1};
  return p;
}

inline std::vector<NamedProblem> svm_suite() {
  return {
      {"separable-2d-20", separable_2d(20, 100.0, 1)},
      {"overlapping-2d-4", overlapping_4()},
      {"overlapping-8d-40", blobs(40, 8, 0.5, 1.0, 2)},
      {"separable-16d-50", blobs(50, 16, 4.0, 10.0, 3)},
      {"overlapping-5d-30", blobs(30, 5, 0.3, 0.1, 4)},
      {"imbalanced-3d-25", blobs(25, 3, 1.0, 5.0, 5, 0.28)},
  };
}

}  // namespace fixtures
