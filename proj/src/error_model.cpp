#include "gyrocal/error_model.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

#include "gyrocal/rng.hpp"
#include "gyrocal/stats.hpp"

namespace gyrocal {

namespace {

std::array<RandomStream, 3> axis_streams(std::uint64_t seed) {
  return {RandomStream(derive_seed({seed, 0})), RandomStream(derive_seed({seed, 1})),
          RandomStream(derive_seed({seed, 2}))};
}

}  // namespace

std::vector<AngularRate> apply_error_model(std::span<const AngularRate> true_rates,
                                           const ErrorModelParams& params, std::uint64_t seed) {
  if (true_rates.empty()) throw std::invalid_argument("apply_error_model: empty input");
  params.validate();
  auto streams = axis_streams(seed);
  const auto& m = params.m_matrix;

  std::vector<AngularRate> out;
  out.reserve(true_rates.size());
  for (const AngularRate& w : true_rates) {
    AngularRate v;
    for (std::size_t a = 0; a < 3; ++a) {
      const double noise = params.noise_std[a] * streams[a].normal();
      v[a] = m[a][0] * w.x + m[a][1] * w.y + m[a][2] * w.z + params.bias[a] + noise;
    }
    out.push_back(v);
  }
  return out;
}

GyroRecording simulate_stationary_recording(const AngularRate& bias, const AngularRate& noise_std,
                                            std::size_t n_samples, double sample_rate_hz,
                                            std::uint64_t seed, std::string gyro_id,
                                            std::size_t recording_index) {
  if (n_samples == 0) throw std::invalid_argument("simulate: n_samples must be >= 1");
  if (!(sample_rate_hz > 0.0)) throw std::invalid_argument("simulate: sample rate must be > 0");
  if (!bias.is_finite()) throw std::invalid_argument("simulate: non-finite bias");
  for (std::size_t a = 0; a < 3; ++a) {
    if (!(noise_std[a] >= 0.0) || !std::isfinite(noise_std[a])) {
      throw std::invalid_argument("simulate: noise_std must be finite and >= 0");
    }
  }

  GyroRecording rec;
  rec.sample_rate_hz = sample_rate_hz;
  rec.gyro_id = std::move(gyro_id);
  rec.recording_index = recording_index;
  rec.provenance = Provenance::kVirtual;
  rec.seed = seed;
  rec.samples.resize(n_samples);

  auto streams = axis_streams(seed);
  for (std::size_t a = 0; a < 3; ++a) {
    for (auto& s : rec.samples) s[a] = bias[a] + noise_std[a] * streams[a].normal();
  }
  return rec;
}

AngularRate sample_virtual_bias(const BiasPrior& prior, std::uint64_t seed) {
  prior.validate();
  if (prior.kind == BiasPrior::Kind::kGaussian && !prior.std.is_finite()) {
    throw std::invalid_argument("sample_virtual_bias: cannot sample a flat prior");
  }
  auto streams = axis_streams(seed);
  AngularRate b;
  for (std::size_t a = 0; a < 3; ++a) {
    if (prior.kind == BiasPrior::Kind::kUniform) {
      b[a] = prior.lo[a] + (prior.hi[a] - prior.lo[a]) * streams[a].uniform01();
    } else {
      b[a] = prior.mean[a] + prior.std[a] * streams[a].normal();
    }
  }
  return b;
}

GyroRecording calibrate(const GyroRecording& recording, const AngularRate& bias_estimate) {
  GyroRecording out = recording;
  for (auto& s : out.samples) s = s - bias_estimate;
  if (out.gt_bias) out.gt_bias = *out.gt_bias - bias_estimate;
  return out;
}

AngularRate estimate_noise_std(const GyroRecording& recording) {
  if (recording.samples.size() < 2) {
    throw std::invalid_argument("estimate_noise_std: need at least two samples");
  }
  AngularRate out;
  for (std::size_t a = 0; a < 3; ++a) {
    RunningStat stat;
    for (const auto& s : recording.samples) stat.push(s[a]);
    out[a] = stat.stddev();
  }
  return out;
}

}  // namespace gyrocal
