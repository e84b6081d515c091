#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "gyrocal/types.hpp"

namespace gyrocal {

/// Running per-axis estimate over time.
struct ConvergenceCurve {
  std::vector<double> times;  // seconds, strictly increasing
  std::vector<AngularRate> values;

  std::size_t size() const { return times.size(); }
};

/// Per-axis mean of the first n samples via the incremental recurrence, so a
/// constant signal yields its value exactly.
AngularRate mean_of_first(const GyroRecording& recording, std::size_t n);

/// Zero-order bias estimate: per-axis mean of the first round(window_s * rate)
/// samples. Throws std::invalid_argument if the window is empty or longer than
/// the recording.
AngularRate zero_order_bias(const GyroRecording& recording, double window_s);

/// Cumulative mean after each sample; point k sits at time k / rate.
/// Uses the incremental recurrence c[k] = c[k-1] + (x[k] - c[k-1]) / (k + 1).
ConvergenceCurve running_average_curve(const GyroRecording& recording);

/// Running average of the across-gyro mean signal of N synchronized
/// recordings. Converges to the mean of the member biases.
ConvergenceCurve mg_running_average(std::span<const GyroRecording> recordings);

/// `time_s,x_dps,y_dps,z_dps`
void write_convergence_csv(const ConvergenceCurve& curve, const std::filesystem::path& path);

}  // namespace gyrocal
