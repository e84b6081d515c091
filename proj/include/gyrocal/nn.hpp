#pragma once

// Convolutional bias regressor:
//   conv1d -> leaky_relu -> max_pool -> flatten -> fc1 -> leaky_relu -> fc2
// Everything is float64 and single-threaded, so training is bit-reproducible
// for a given seed.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gyrocal/dataset.hpp"
#include "gyrocal/matrix.hpp"
#include "gyrocal/predictor.hpp"

namespace gyrocal::nn {

inline constexpr double kLeakySlope = 0.1;

struct NetworkConfig {
  std::size_t in_channels = 3;
  std::size_t window_len = 1500;
  std::size_t filters = 16;
  std::size_t kernel = 7;
  std::size_t stride = 1;
  bool conv_bias = true;
  double leaky_slope = kLeakySlope;
  std::size_t pool = 4;
  std::size_t hidden = 64;

  std::size_t out_dim() const { return in_channels; }
  std::size_t conv_len() const;    // floor((S - m) / s) + 1
  std::size_t pooled_len() const;  // floor(conv_len / P)
  std::size_t flat_len() const { return filters * pooled_len(); }

  /// Throws std::invalid_argument when any derived length drops below 1.
  void validate() const;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

/// Parameter tensors, row-major:
///   conv_w [F][C][m], conv_b [F] (empty without conv bias),
///   w1 [F*L2][H] with flatten index f*L2 + j, b1 [H], w2 [H][out], b2 [out].
struct NetworkParams {
  std::vector<double> conv_w;
  std::vector<double> conv_b;
  std::vector<double> w1;
  std::vector<double> b1;
  std::vector<double> w2;
  std::vector<double> b2;

  static constexpr std::array<const char*, 6> kNames{"conv_w", "conv_b", "w1", "b1", "w2", "b2"};

  std::array<std::vector<double>*, 6> tensors();
  std::array<const std::vector<double>*, 6> tensors() const;
  std::size_t count() const;

  static NetworkParams zeros(const NetworkConfig& config);

  friend bool operator==(const NetworkParams&, const NetworkParams&) = default;
};

/// Uniform in +-1/sqrt(fan_in) per layer (weights and biases), tensor i drawn
/// from RandomStream(derive_seed({seed, kInitStream, i})).
NetworkParams initial_params(const NetworkConfig& config, std::uint64_t seed);
inline constexpr std::uint64_t kInitStream = 0x1417ULL;
inline constexpr std::uint64_t kShuffleStream = 0x5A0FULL;

// --- layers --------------------------------------------------------------------

/// Strided cross-correlation summed over channels:
///   out[f][t] = b[f] + sum_c sum_j x[c][t*s + j] * w[f][c][j]
/// `kernels` is [F][C][m]; `biases` is empty or length F.
Matrix conv1d_forward(const Matrix& input, std::span<const double> kernels, std::span<const double> biases,
                      std::size_t filters, std::size_t kernel, std::size_t stride);

inline double leaky_relu(double x, double slope = kLeakySlope) { return x >= 0.0 ? x : slope * x; }
void leaky_relu_inplace(std::span<double> x, double slope = kLeakySlope);

/// Non-overlapping max over windows of P, stride P; a trailing remainder
/// shorter than P is dropped. `argmax`, if given, receives the first maximal
/// column per output cell.
Matrix max_pool1d(const Matrix& x, std::size_t pool, std::vector<std::size_t>* argmax = nullptr);

std::vector<double> forward(const NetworkParams& params, const NetworkConfig& config, const Matrix& window);

/// Mean of squared differences over all elements.
double mse_loss(std::span<const double> pred, std::span<const double> target);

struct Gradients {
  NetworkParams grads;
  double loss = 0.0;  // mse over the whole batch
};

/// Exact gradients of the batch MSE. leaky_relu'(0) = 1; pool ties route to
/// the first maximal index.
Gradients backward(const NetworkParams& params, const NetworkConfig& config,
                   std::span<const TrainingExample> batch);

// --- optimizer -----------------------------------------------------------------

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  NetworkParams m;
  NetworkParams v;

  static AdamState zeros(const NetworkConfig& config);
};

/// Bias-corrected Adam update at step t >= 1.
void adam_step(NetworkParams& params, const NetworkParams& grads, AdamState& state, std::size_t t,
               double lr, const AdamConfig& adam = {});

// --- training ------------------------------------------------------------------

struct TrainConfig {
  std::size_t batch_size = 64;
  double learning_rate = 1e-4;
  double lr_decay = 0.1;
  std::size_t decay_every = 200;  // epochs
  std::size_t epochs = 1200;
  AdamConfig adam;
  std::uint64_t seed = 0;

  void validate() const;
  /// Step-decayed rate for a 0-based epoch.
  double lr_at(std::size_t epoch) const;
};

struct EpochStat {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double lr = 0.0;
};

struct TrainReport {
  std::vector<EpochStat> epochs;
  NetworkParams params;
  double wall_time_s = 0.0;
  std::uint64_t seed = 0;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Seeded mini-batch Adam with step decay. Each epoch reshuffles with
/// RandomStream(derive_seed({seed, kShuffleStream, epoch})).
TrainReport train(std::span<const TrainingExample> train_set, const NetworkConfig& net,
                  const TrainConfig& config, const std::function<void(const EpochStat&)>& on_epoch = {});

/// `epoch,train_loss,lr`
void write_training_log(const TrainReport& report, const std::filesystem::path& path);

// --- model + checkpoint ----------------------------------------------------------

class CnnModel : public BiasPredictor {
 public:
  CnnModel(NetworkConfig config, NetworkParams params);

  std::size_t in_channels() const override { return config_.in_channels; }
  std::size_t window_len() const override { return config_.window_len; }
  std::vector<double> predict(const Matrix& window) const override;

  const NetworkConfig& config() const { return config_; }
  const NetworkParams& params() const { return params_; }

 private:
  NetworkConfig config_;
  NetworkParams params_;
};

inline constexpr const char* kCheckpointFormat = "gyrocal-cnn-checkpoint/1";

struct Checkpoint {
  NetworkConfig config;
  NetworkParams params;
  std::uint64_t seed = 0;
  double window_s = 0.0;
  double sample_rate_hz = 0.0;
};

/// Single JSON document: format tag, config, seed, and every tensor as a flat
/// array in the row-major orders listed on NetworkParams.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace gyrocal::nn
