#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace hzsl {

using Rng = std::mt19937_64;

// Entries uniform in [-scale, scale].
inline Eigen::MatrixXd uniform_matrix(Eigen::Index rows, Eigen::Index cols,
                                      double scale, Rng& rng) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
  }
  return m;
}

inline Eigen::VectorXd normal_vector(Eigen::Index n, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = dist(rng);
  return v;
}

inline std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

}  // namespace hzsl
