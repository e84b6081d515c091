#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gyrocal {

/// Angular velocity in deg/s.
struct AngularRate {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double& operator[](std::size_t axis) { return axis == 0 ? x : (axis == 1 ? y : z); }
  double operator[](std::size_t axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }

  bool is_finite() const;

  friend bool operator==(const AngularRate&, const AngularRate&) = default;
};

AngularRate operator+(const AngularRate& a, const AngularRate& b);
AngularRate operator-(const AngularRate& a, const AngularRate& b);
AngularRate operator*(double s, const AngularRate& a);

using Matrix3 = std::array<std::array<double, 3>, 3>;

inline constexpr Matrix3 kIdentity3{{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}}};

/// Measurement error model: measured = M * true + bias + white noise.
/// The diagonal of M holds scale factors, the off-diagonal terms misalignment.
struct ErrorModelParams {
  Matrix3 m_matrix = kIdentity3;
  AngularRate bias;
  AngularRate noise_std;  // per-axis, deg/s

  void validate() const;
};

/// Distribution that per-power-cycle biases are drawn from.
struct BiasPrior {
  enum class Kind { kUniform, kGaussian };

  Kind kind = Kind::kUniform;
  // uniform: [lo, hi] per axis
  AngularRate lo;
  AngularRate hi;
  // gaussian
  AngularRate mean;
  AngularRate std;

  static BiasPrior uniform(AngularRate lo, AngularRate hi);
  static BiasPrior gaussian(AngularRate mean, AngularRate std);

  void validate() const;
};

enum class Provenance { kReal, kVirtual };

std::string to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

/// One stationary recording of a 3-axis gyroscope unit.
struct GyroRecording {
  std::vector<AngularRate> samples;
  double sample_rate_hz = 0.0;
  std::string gyro_id;
  std::size_t recording_index = 0;
  Provenance provenance = Provenance::kReal;
  std::optional<std::uint64_t> seed;
  // Externally supplied ground truth (manifest); computed from samples when absent.
  std::optional<AngularRate> gt_bias;

  std::size_t size() const { return samples.size(); }
  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate_hz; }
  std::string id() const;

  void validate() const;
};

/// Number of samples covered by a window of `window_s` seconds.
std::size_t window_samples(double window_s, double sample_rate_hz);

}  // namespace gyrocal
