#pragma once

// Composed reference network and gradient checker shared by the unit and
// acceptance tests.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "gyrocal/nn.hpp"
#include "oracles.hpp"

namespace nnref {

using gyrocal::Matrix;
using gyrocal::TrainingExample;
using gyrocal::nn::NetworkConfig;
using gyrocal::nn::NetworkParams;

inline Matrix random_matrix(std::mt19937_64& eng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = d(eng);
  }
  return m;
}

inline std::vector<double> random_vec(std::mt19937_64& eng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = d(eng);
  return v;
}

inline NetworkParams random_params(std::mt19937_64& eng, const NetworkConfig& cfg) {
  NetworkParams p = NetworkParams::zeros(cfg);
  for (auto* t : p.tensors()) {
    for (double& x : *t) x = std::normal_distribution<double>(0.0, 0.5)(eng);
  }
  return p;
}

inline oracle::Grid to_grid(const Matrix& m) {
  oracle::Grid g(m.rows(), std::vector<double>(m.cols()));
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) g[r][c] = m(r, c);
  }
  return g;
}

inline std::vector<std::vector<std::vector<double>>> kernels_of(const NetworkParams& p, const NetworkConfig& cfg) {
  std::vector<std::vector<std::vector<double>>> w(cfg.filters,
                                                  std::vector<std::vector<double>>(cfg.in_channels, std::vector<double>(cfg.kernel)));
  std::size_t i = 0;
  for (auto& f : w) {
    for (auto& c : f) {
      for (double& v : c) v = p.conv_w[i++];
    }
  }
  return w;
}

// Straight-line evaluation of the whole network.
inline std::vector<double> reference_forward(const NetworkParams& p, const NetworkConfig& cfg, const Matrix& window) {
  auto z = oracle::conv(to_grid(window), kernels_of(p, cfg), p.conv_b, cfg.stride);
  for (auto& row : z) {
    for (double& v : row) v = oracle::lrelu(v);
  }
  const auto pooled = oracle::pool(z, cfg.pool);
  std::vector<double> flat;
  for (const auto& row : pooled) flat.insert(flat.end(), row.begin(), row.end());
  std::vector<double> h(cfg.hidden);
  for (std::size_t k = 0; k < cfg.hidden; ++k) {
    double acc = p.b1[k];
    for (std::size_t i = 0; i < flat.size(); ++i) acc += flat[i] * p.w1[i * cfg.hidden + k];
    h[k] = oracle::lrelu(acc);
  }
  std::vector<double> y(cfg.out_dim());
  for (std::size_t o = 0; o < y.size(); ++o) {
    double acc = p.b2[o];
    for (std::size_t k = 0; k < cfg.hidden; ++k) acc += h[k] * p.w2[k * y.size() + o];
    y[o] = acc;
  }
  return y;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

inline std::vector<TrainingExample> random_batch(std::mt19937_64& eng, const NetworkConfig& cfg, std::size_t n) {
  std::vector<TrainingExample> batch;
  for (std::size_t i = 0; i < n; ++i) {
    TrainingExample ex;
    ex.window = random_matrix(eng, cfg.in_channels, cfg.window_len);
    ex.label = random_vec(eng, cfg.out_dim());
    batch.push_back(std::move(ex));
  }
  return batch;
}

inline double batch_loss(const NetworkParams& p, const NetworkConfig& cfg, const std::vector<TrainingExample>& batch) {
  std::vector<double> pred;
  std::vector<double> target;
  for (const auto& ex : batch) {
    const auto y = gyrocal::nn::forward(p, cfg, ex.window);
    pred.insert(pred.end(), y.begin(), y.end());
    target.insert(target.end(), ex.label.begin(), ex.label.end());
  }
  return gyrocal::nn::mse_loss(pred, target);
}

/// Largest per-tensor error of analytic vs central-difference gradients,
/// normalised by the tensor's largest gradient magnitude.
inline double gradient_check(const NetworkConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  NetworkParams p = random_params(eng, cfg);
  const auto batch = random_batch(eng, cfg, 3);
  const auto analytic = gyrocal::nn::backward(p, cfg, batch).grads;
  const double h = 1e-6;
  double worst = 0.0;
  auto ts = p.tensors();
  const auto gs = analytic.tensors();
  for (std::size_t t = 0; t < ts.size(); ++t) {
    double scale = 0.0;
    double err = 0.0;
    for (std::size_t i = 0; i < ts[t]->size(); ++i) {
      double& x = (*ts[t])[i];
      const double saved = x;
      x = saved + h;
      const double up = batch_loss(p, cfg, batch);
      x = saved - h;
      const double down = batch_loss(p, cfg, batch);
      x = saved;
      const double numeric = (up - down) / (2.0 * h);
      scale = std::max({scale, std::abs(numeric), std::abs((*gs[t])[i])});
      err = std::max(err, std::abs(numeric - (*gs[t])[i]));
    }
    if (scale > 0.0) worst = std::max(worst, err / scale);
  }
  return worst;
}

}  // namespace nnref
