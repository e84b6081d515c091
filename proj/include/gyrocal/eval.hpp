#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gyrocal/dataset.hpp"
#include "gyrocal/predictor.hpp"
#include "gyrocal/types.hpp"

namespace gyrocal {

/// sqrt(mean((est - gt)^2)) over every component.
double rmse(std::span<const double> estimates, std::span<const double> ground_truths);

/// Pooled RMSE of the zero-order estimate against ground truth, per window
/// length. Point k covers n = k + 1 samples and sits at time n / rate.
struct RmseCurve {
  std::vector<double> times;
  std::vector<double> rmse;

  std::size_t size() const { return times.size(); }
  /// Linear interpolation; throws std::out_of_range outside [times.front(), times.back()].
  double value_at(double t) const;
};

/// Running RMSE of zero_order_bias(rec, t) against label_of(rec), pooled over
/// all test recordings and axes. Recordings must share rate and length.
RmseCurve model_based_rmse_curve(std::span<const GyroRecording> test_recordings);

/// RMSE of model predictions against the example labels.
double nn_rmse(const BiasPredictor& model, std::span<const TrainingExample> test_set);

/// Windows the test recordings at `window_s` and scores the model. Throws
/// std::invalid_argument if the window length does not match the model input.
double nn_rmse_at_window(const BiasPredictor& model, std::span<const GyroRecording> test_recordings,
                         double window_s, ChannelMode mode = ChannelMode::kPerImu,
                         const std::vector<std::vector<std::string>>& groups = {});

/// Earliest time at which the curve reaches `target_rmse`, linearly
/// interpolated between the bracketing points; nullopt if never reached.
std::optional<double> crossing_time(const RmseCurve& curve, double target_rmse);

struct ComparisonReport {
  double window_s = 0.0;
  double nn_rmse = 0.0;
  double model_based_rmse_at_window = 0.0;
  std::optional<double> crossing_time_s;
  std::optional<double> time_improvement_pct;  // nullopt: curve never reaches nn_rmse
  double accuracy_improvement_pct = 0.0;
};

/// time improvement     = 100 (t_cross - window) / t_cross
/// accuracy improvement = 100 (curve(window) - nn_rmse) / curve(window)
ComparisonReport improvement_report(double nn_window_s, double nn_rmse, const RmseCurve& curve);

nlohmann::json to_json(const ComparisonReport& report);
ComparisonReport report_from_json(const nlohmann::json& j);

/// Fixed-width text table, one row per report.
std::string render_table(std::span<const ComparisonReport> reports);

/// `time_s,rmse_dps`
void write_rmse_curve_csv(const RmseCurve& curve, const std::filesystem::path& path);

/// Posterior mean of the bias given a window of stationary samples with known
/// white-noise std. Gaussian prior: closed-form shrinkage. Uniform prior:
/// composite Simpson quadrature of the truncated likelihood.
AngularRate bayes_posterior_mean(std::span<const AngularRate> window, const AngularRate& noise_std,
                                 const BiasPrior& prior);

}  // namespace gyrocal
