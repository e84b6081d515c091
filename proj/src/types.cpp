#include "gyrocal/types.hpp"

#include <cmath>

namespace gyrocal {

bool AngularRate::is_finite() const {
  return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
}

AngularRate operator+(const AngularRate& a, const AngularRate& b) {
  return {a.x + b.x, a.y + b.y, a.z + b.z};
}

AngularRate operator-(const AngularRate& a, const AngularRate& b) {
  return {a.x - b.x, a.y - b.y, a.z - b.z};
}

AngularRate operator*(double s, const AngularRate& a) { return {s * a.x, s * a.y, s * a.z}; }

void ErrorModelParams::validate() const {
  for (const auto& row : m_matrix) {
    for (double v : row) {
      if (!std::isfinite(v)) throw std::invalid_argument("error model: non-finite M entry");
    }
  }
  if (!bias.is_finite()) throw std::invalid_argument("error model: non-finite bias");
  for (std::size_t a = 0; a < 3; ++a) {
    if (!(noise_std[a] >= 0.0) || !std::isfinite(noise_std[a])) {
      throw std::invalid_argument("error model: noise_std must be finite and >= 0");
    }
  }
}

BiasPrior BiasPrior::uniform(AngularRate lo, AngularRate hi) {
  BiasPrior p;
  p.kind = Kind::kUniform;
  p.lo = lo;
  p.hi = hi;
  p.validate();
  return p;
}

BiasPrior BiasPrior::gaussian(AngularRate mean, AngularRate std) {
  BiasPrior p;
  p.kind = Kind::kGaussian;
  p.mean = mean;
  p.std = std;
  p.validate();
  return p;
}

void BiasPrior::validate() const {
  for (std::size_t a = 0; a < 3; ++a) {
    if (kind == Kind::kUniform) {
      if (!std::isfinite(lo[a]) || !std::isfinite(hi[a]) || lo[a] > hi[a]) {
        throw std::invalid_argument("bias prior: uniform bounds need finite lo <= hi");
      }
    } else {
      // std = +inf is accepted as the flat-prior limit
      if (!std::isfinite(mean[a]) || std::isnan(std[a]) || std[a] < 0.0) {
        throw std::invalid_argument("bias prior: gaussian needs finite mean and std >= 0");
      }
    }
  }
}

std::string to_string(Provenance p) { return p == Provenance::kReal ? "real" : "virtual"; }

Provenance provenance_from_string(const std::string& s) {
  if (s == "real") return Provenance::kReal;
  if (s == "virtual") return Provenance::kVirtual;
  throw std::invalid_argument("unknown provenance '" + s + "'");
}

std::string GyroRecording::id() const { return gyro_id + "/" + std::to_string(recording_index); }

void GyroRecording::validate() const {
  if (samples.empty()) throw std::invalid_argument("recording " + id() + ": no samples");
  if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz)) {
    throw std::invalid_argument("recording " + id() + ": sample rate must be > 0");
  }
}

std::size_t window_samples(double window_s, double sample_rate_hz) {
  if (!(window_s > 0.0) || !(sample_rate_hz > 0.0)) {
    throw std::invalid_argument("window and sample rate must be positive");
  }
  const double n = std::round(window_s * sample_rate_hz);
  if (n < 1.0) throw std::invalid_argument("window shorter than one sample");
  return static_cast<std::size_t>(n);
}

}  // namespace gyrocal
