#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gyrocal/types.hpp"

namespace gyrocal {

/// measured = M * true + bias + w, w ~ N(0, noise_std^2) i.i.d. per axis.
/// Axis a draws its noise from RandomStream(derive_seed({seed, a})).
std::vector<AngularRate> apply_error_model(std::span<const AngularRate> true_rates,
                                           const ErrorModelParams& params, std::uint64_t seed);

/// Stationary virtual recording: samples ~ N(bias, noise_std^2) per axis,
/// axis a drawn from RandomStream(derive_seed({seed, a})).
GyroRecording simulate_stationary_recording(const AngularRate& bias, const AngularRate& noise_std,
                                            std::size_t n_samples, double sample_rate_hz,
                                            std::uint64_t seed, std::string gyro_id = "virtual",
                                            std::size_t recording_index = 0);

/// One 3-axis bias from the prior; axis a uses RandomStream(derive_seed({seed, a})).
AngularRate sample_virtual_bias(const BiasPrior& prior, std::uint64_t seed);

/// Subtracts the bias estimate from every sample. Metadata is kept.
GyroRecording calibrate(const GyroRecording& recording, const AngularRate& bias_estimate);

/// Per-axis sample standard deviation after mean removal (n - 1 denominator).
/// Used to configure virtual noise from ingested real recordings.
AngularRate estimate_noise_std(const GyroRecording& recording);

}  // namespace gyrocal
