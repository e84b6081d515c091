#include "gyrocal/calib.hpp"

#include <fstream>
#include <stdexcept>
#include <string>

#include "gyrocal/format.hpp"

namespace gyrocal {

AngularRate mean_of_first(const GyroRecording& recording, std::size_t n) {
  if (n == 0 || n > recording.samples.size()) {
    throw std::invalid_argument("mean_of_first: need 1 <= n <= " +
                                std::to_string(recording.samples.size()) + ", got " +
                                std::to_string(n));
  }
  AngularRate mean;
  for (std::size_t i = 0; i < n; ++i) {
    const double k = static_cast<double>(i + 1);
    for (std::size_t a = 0; a < 3; ++a) mean[a] += (recording.samples[i][a] - mean[a]) / k;
  }
  return mean;
}

AngularRate zero_order_bias(const GyroRecording& recording, double window_s) {
  recording.validate();
  const std::size_t n = window_samples(window_s, recording.sample_rate_hz);
  if (n > recording.size()) {
    throw std::invalid_argument("zero_order_bias: window of " + std::to_string(n) +
                                " samples exceeds recording " + recording.id() + " (" +
                                std::to_string(recording.size()) + " samples)");
  }
  return mean_of_first(recording, n);
}

namespace {

ConvergenceCurve running_mean(std::span<const AngularRate> signal, double rate) {
  ConvergenceCurve curve;
  curve.times.reserve(signal.size());
  curve.values.reserve(signal.size());
  AngularRate mean;
  for (std::size_t k = 0; k < signal.size(); ++k) {
    const double n = static_cast<double>(k + 1);
    for (std::size_t a = 0; a < 3; ++a) mean[a] += (signal[k][a] - mean[a]) / n;
    curve.times.push_back(static_cast<double>(k) / rate);
    curve.values.push_back(mean);
  }
  return curve;
}

}  // namespace

ConvergenceCurve running_average_curve(const GyroRecording& recording) {
  recording.validate();
  return running_mean(recording.samples, recording.sample_rate_hz);
}

ConvergenceCurve mg_running_average(std::span<const GyroRecording> recordings) {
  if (recordings.empty()) throw std::invalid_argument("mg_running_average: no recordings");
  const auto& first = recordings.front();
  first.validate();
  for (const auto& r : recordings) {
    if (r.size() != first.size() || r.sample_rate_hz != first.sample_rate_hz) {
      throw std::invalid_argument("mg_running_average: recordings differ in length or rate (" +
                                  r.id() + " vs " + first.id() + ")");
    }
  }
  if (recordings.size() == 1) return running_average_curve(first);

  const double inv_n = 1.0 / static_cast<double>(recordings.size());
  std::vector<AngularRate> fused(first.size());
  for (std::size_t i = 0; i < fused.size(); ++i) {
    AngularRate sum;
    for (const auto& r : recordings) sum = sum + r.samples[i];
    fused[i] = inv_n * sum;
  }
  return running_mean(fused, first.sample_rate_hz);
}

void write_convergence_csv(const ConvergenceCurve& curve, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "time_s,x_dps,y_dps,z_dps\n";
  for (std::size_t k = 0; k < curve.size(); ++k) {
    out << format_double(curve.times[k]) << ',' << format_double(curve.values[k].x) << ','
        << format_double(curve.values[k].y) << ',' << format_double(curve.values[k].z) << '\n';
  }
}

}  // namespace gyrocal
