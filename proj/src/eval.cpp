#include "gyrocal/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>

#include "gyrocal/format.hpp"

namespace gyrocal {

using nlohmann::json;

double rmse(std::span<const double> estimates, std::span<const double> ground_truths) {
  if (estimates.size() != ground_truths.size()) throw std::invalid_argument("rmse: length mismatch");
  if (estimates.empty()) throw std::invalid_argument("rmse: empty input");
  double sum = 0.0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const double d = estimates[i] - ground_truths[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(estimates.size()));
}

double RmseCurve::value_at(double t) const {
  if (times.empty()) throw std::out_of_range("RmseCurve::value_at: empty curve");
  if (t < times.front() || t > times.back()) {
    throw std::out_of_range("RmseCurve::value_at: t = " + format_double(t) + " s outside [" +
                            format_double(times.front()) + ", " + format_double(times.back()) + "]");
  }
  const auto it = std::lower_bound(times.begin(), times.end(), t);
  const auto k = static_cast<std::size_t>(it - times.begin());
  if (*it == t || k == 0) return rmse[k];
  const double frac = (t - times[k - 1]) / (times[k] - times[k - 1]);
  return rmse[k - 1] + frac * (rmse[k] - rmse[k - 1]);
}

RmseCurve model_based_rmse_curve(std::span<const GyroRecording> test_recordings) {
  if (test_recordings.empty()) throw std::invalid_argument("model_based_rmse_curve: empty test set");
  const auto& first = test_recordings.front();
  first.validate();
  const std::size_t len = first.size();
  for (const auto& r : test_recordings) {
    if (r.size() != len || r.sample_rate_hz != first.sample_rate_hz) {
      throw std::invalid_argument("model_based_rmse_curve: recordings differ in length or rate (" + r.id() +
                                  " vs " + first.id() + ")");
    }
  }

  std::vector<double> sq(len, 0.0);
  for (const auto& r : test_recordings) {
    const AngularRate gt = label_of(r);
    // Same recurrence as zero_order_bias, so each point matches it exactly.
    AngularRate est;
    for (std::size_t k = 0; k < len; ++k) {
      const double n = static_cast<double>(k + 1);
      for (std::size_t a = 0; a < 3; ++a) {
        est[a] += (r.samples[k][a] - est[a]) / n;
        const double d = est[a] - gt[a];
        sq[k] += d * d;
      }
    }
  }

  RmseCurve curve;
  curve.times.resize(len);
  curve.rmse.resize(len);
  const double denom = 3.0 * static_cast<double>(test_recordings.size());
  for (std::size_t k = 0; k < len; ++k) {
    curve.times[k] = static_cast<double>(k + 1) / first.sample_rate_hz;
    curve.rmse[k] = std::sqrt(sq[k] / denom);
  }
  return curve;
}

double nn_rmse(const BiasPredictor& model, std::span<const TrainingExample> test_set) {
  if (test_set.empty()) throw std::invalid_argument("nn_rmse: empty test set");
  std::vector<double> est;
  std::vector<double> gt;
  for (const auto& ex : test_set) {
    const auto pred = model.predict(ex.window);
    if (pred.size() != ex.label.size()) throw std::invalid_argument("nn_rmse: prediction/label size mismatch");
    est.insert(est.end(), pred.begin(), pred.end());
    gt.insert(gt.end(), ex.label.begin(), ex.label.end());
  }
  return rmse(est, gt);
}

double nn_rmse_at_window(const BiasPredictor& model, std::span<const GyroRecording> test_recordings,
                         double window_s, ChannelMode mode,
                         const std::vector<std::vector<std::string>>& groups) {
  if (test_recordings.empty()) throw std::invalid_argument("nn_rmse_at_window: empty test set");
  const std::size_t s = window_samples(window_s, test_recordings.front().sample_rate_hz);
  if (s != model.window_len()) {
    throw std::invalid_argument("window/model mismatch: " + format_double(window_s) + " s is " + std::to_string(s) +
                                " samples, model expects " + std::to_string(model.window_len()));
  }
  const auto examples = make_windows(test_recordings, window_s, mode, groups);
  if (!examples.empty() && examples.front().window.rows() != model.in_channels()) {
    throw std::invalid_argument("window/model mismatch: " + std::to_string(examples.front().window.rows()) +
                                " channels, model expects " + std::to_string(model.in_channels()));
  }
  return nn_rmse(model, examples);
}

std::optional<double> crossing_time(const RmseCurve& curve, double target_rmse) {
  for (std::size_t k = 0; k < curve.size(); ++k) {
    if (curve.rmse[k] <= target_rmse) {
      if (k == 0) return curve.times[0];
      const double hi = curve.rmse[k - 1];
      const double lo = curve.rmse[k];
      const double frac = (hi - target_rmse) / (hi - lo);
      return curve.times[k - 1] + frac * (curve.times[k] - curve.times[k - 1]);
    }
  }
  return std::nullopt;
}

ComparisonReport improvement_report(double nn_window_s, double nn_rmse_value, const RmseCurve& curve) {
  if (curve.size() == 0) throw std::invalid_argument("improvement_report: empty curve");
  ComparisonReport r;
  r.window_s = nn_window_s;
  r.nn_rmse = nn_rmse_value;
  r.model_based_rmse_at_window = curve.value_at(nn_window_s);
  r.crossing_time_s = crossing_time(curve, nn_rmse_value);
  if (r.crossing_time_s && *r.crossing_time_s > 0.0) {
    r.time_improvement_pct = 100.0 * (*r.crossing_time_s - nn_window_s) / *r.crossing_time_s;
  }
  const double base = r.model_based_rmse_at_window;
  r.accuracy_improvement_pct = base > 0.0 ? 100.0 * (base - nn_rmse_value) / base
                                          : (nn_rmse_value == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity());
  return r;
}

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

json to_json(const ComparisonReport& r) {
  return {{"window_s", r.window_s},
          {"nn_rmse_dps", r.nn_rmse},
          {"model_based_rmse_at_window_dps", r.model_based_rmse_at_window},
          {"crossing_time_s", opt(r.crossing_time_s)},
          {"time_improvement_pct", opt(r.time_improvement_pct)},
          {"time_improvement_reached", r.time_improvement_pct.has_value()},
          {"accuracy_improvement_pct", r.accuracy_improvement_pct}};
}

ComparisonReport report_from_json(const json& j) {
  ComparisonReport r;
  r.window_s = j.at("window_s").get<double>();
  r.nn_rmse = j.at("nn_rmse_dps").get<double>();
  r.model_based_rmse_at_window = j.at("model_based_rmse_at_window_dps").get<double>();
  r.crossing_time_s = opt_from(j, "crossing_time_s");
  r.time_improvement_pct = opt_from(j, "time_improvement_pct");
  r.accuracy_improvement_pct = j.at("accuracy_improvement_pct").get<double>();
  return r;
}

std::string render_table(std::span<const ComparisonReport> reports) {
  std::ostringstream os;
  os << std::left << std::setw(12) << "Window [s]" << std::setw(18) << "NN RMSE [deg/s]" << std::setw(22)
     << "Model RMSE [deg/s]" << std::setw(20) << "Crossing time [s]" << std::setw(38)
     << "Calibration time (same performance)" << "Accuracy improvement (same calibration time)\n";
  os << std::fixed;
  for (const auto& r : reports) {
    os << std::setw(12) << std::setprecision(2) << r.window_s << std::setw(18) << std::setprecision(6) << r.nn_rmse
       << std::setw(22) << r.model_based_rmse_at_window;
    if (r.crossing_time_s) {
      os << std::setw(20) << std::setprecision(2) << *r.crossing_time_s;
    } else {
      os << std::setw(20) << "not reached";
    }
    if (r.time_improvement_pct) {
      std::ostringstream pct;
      pct << std::fixed << std::setprecision(1) << *r.time_improvement_pct << "%";
      os << std::setw(38) << pct.str();
    } else {
      os << std::setw(38) << "not reached";
    }
    os << std::setprecision(1) << r.accuracy_improvement_pct << "%\n";
  }
  return os.str();
}

void write_rmse_curve_csv(const RmseCurve& curve, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "time_s,rmse_dps\n";
  for (std::size_t k = 0; k < curve.size(); ++k) {
    out << format_double(curve.times[k]) << ',' << format_double(curve.rmse[k]) << '\n';
  }
}

namespace {

// Posterior mean of b under N(xbar; b, s^2) restricted to [lo, hi].
double uniform_posterior_mean(double xbar, double s, double lo, double hi) {
  if (lo == hi) return lo;
  double a = std::max(lo, xbar - 12.0 * s);
  double b = std::min(hi, xbar + 12.0 * s);
  if (a >= b) {
    // Sample mean far outside the support: mass piles up against the nearest
    // edge with exponential decay length s^2 / distance.
    if (xbar < lo) {
      a = lo;
      b = std::min(hi, lo + std::min(12.0 * s, 40.0 * s * s / (lo - xbar)));
    } else {
      b = hi;
      a = std::max(lo, hi - std::min(12.0 * s, 40.0 * s * s / (xbar - hi)));
    }
  }
  constexpr int kPanels = 4000;  // even
  const double h = (b - a) / kPanels;
  const double peak = std::clamp(xbar, a, b);
  const double peak_log = -0.5 * (peak - xbar) * (peak - xbar) / (s * s);
  double num = 0.0;
  double den = 0.0;
  for (int i = 0; i <= kPanels; ++i) {
    const double x = a + h * i;
    const double w = (i == 0 || i == kPanels) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    const double lik = std::exp(-0.5 * (x - xbar) * (x - xbar) / (s * s) - peak_log);
    num += w * x * lik;
    den += w * lik;
  }
  return num / den;
}

}  // namespace

AngularRate bayes_posterior_mean(std::span<const AngularRate> window, const AngularRate& noise_std,
                                 const BiasPrior& prior) {
  if (window.empty()) throw std::invalid_argument("bayes_posterior_mean: empty window");
  prior.validate();
  const auto n = static_cast<double>(window.size());
  AngularRate sum;
  for (const auto& s : window) sum = sum + s;
  const AngularRate xbar = (1.0 / n) * sum;

  AngularRate out;
  for (std::size_t a = 0; a < 3; ++a) {
    const double sigma = noise_std[a];
    if (!(sigma > 0.0)) throw std::invalid_argument("bayes_posterior_mean: noise std must be > 0");
    if (prior.kind == BiasPrior::Kind::kGaussian) {
      const double tau = prior.std[a];
      if (std::isinf(tau)) {
        out[a] = xbar[a];
      } else {
        const double nt2 = n * tau * tau;
        out[a] = (nt2 * xbar[a] + sigma * sigma * prior.mean[a]) / (nt2 + sigma * sigma);
      }
    } else {
      out[a] = uniform_posterior_mean(xbar[a], sigma / std::sqrt(n), prior.lo[a], prior.hi[a]);
    }
  }
  return out;
}

}  // namespace gyrocal
