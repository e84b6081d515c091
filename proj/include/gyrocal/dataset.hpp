#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gyrocal/matrix.hpp"
#include "gyrocal/types.hpp"

namespace gyrocal {

/// Failure while reading a manifest or recording file. `line` is 1-based,
/// 0 when the error is not tied to a line.
class LoadError : public std::runtime_error {
 public:
  LoadError(std::filesystem::path file, std::size_t line, const std::string& what);

  const std::filesystem::path& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  std::filesystem::path file_;
  std::size_t line_;
};

/// A set of recordings from one brand at one sample rate. Recordings are kept
/// grouped by gyro (in first-appearance order), then by recording index.
struct Dataset {
  std::string brand;
  double sample_rate_hz = 0.0;
  Provenance provenance = Provenance::kReal;
  std::optional<AngularRate> noise_std;
  std::optional<std::uint64_t> master_seed;
  std::vector<GyroRecording> recordings;

  bool empty() const { return recordings.empty(); }
  std::vector<std::string> gyro_ids() const;
  std::vector<GyroRecording> recordings_of(const std::string& gyro_id) const;
  double total_hours() const;
};

// --- on-disk format -------------------------------------------------------
//
// <root>/<brand>/manifest.json
// <root>/<brand>/<gyro_id>/recording_<k>.csv   header t_s,gyro_x_dps,gyro_y_dps,gyro_z_dps
//
// Manifest: {"brand", "sample_rate_hz", "gyros": [{"gyro_id", "recordings": [paths]}],
//            optional "noise_std_dps": [x, y, z], "provenance", "master_seed",
//            per gyro optional "recording_seeds" and "gt_bias_dps"}.
// Paths are relative to the manifest's directory.

std::filesystem::path manifest_path_for(const std::filesystem::path& root, const std::string& brand);

/// Writes the dataset tree and returns the manifest path.
std::filesystem::path write_dataset(const Dataset& dataset, const std::filesystem::path& root);

/// Loads every recording listed in a manifest. Throws LoadError naming the file
/// (and line for CSV content problems).
Dataset ingest_csv(const std::filesystem::path& manifest_path);

/// Parses one recording CSV. Timestamps must be strictly increasing.
std::vector<AngularRate> read_recording_csv(const std::filesystem::path& path);

// --- labels and windows ----------------------------------------------------

/// Per-axis mean over the full recording.
AngularRate ground_truth_bias(const GyroRecording& recording);

/// Manifest-supplied ground truth when present, otherwise ground_truth_bias.
AngularRate label_of(const GyroRecording& recording);

enum class ChannelMode {
  kPerImu,   // one 3-channel example per recording
  kStacked,  // one 3N-channel example per synchronized group recording
};

/// Fixed-length window plus its bias label. Channel order is gyro-major,
/// axis-minor: g1x, g1y, g1z, g2x, ...
struct TrainingExample {
  Matrix window;  // channels x S, deg/s
  std::vector<double> label;
  std::vector<std::string> source_ids;
};

/// One window per recording (or group), taken from the first
/// round(window_s * rate) samples. `groups` lists gyro ids per stacked group
/// and is only used in kStacked mode.
std::vector<TrainingExample> make_windows(std::span<const GyroRecording> recordings, double window_s,
                                          ChannelMode mode,
                                          const std::vector<std::vector<std::string>>& groups = {});

/// Consecutive groups of `imus_per_group` gyro ids; the count must divide evenly.
std::vector<std::vector<std::string>> group_consecutive(const std::vector<std::string>& gyro_ids,
                                                        std::size_t imus_per_group);

// --- virtual data ------------------------------------------------------------

struct VirtualDatasetConfig {
  std::string brand = "virtual";
  std::size_t n_gyros = 24;
  std::size_t recordings_per_gyro = 100;
  std::size_t n_samples = 13000;
  BiasPrior prior;
  AngularRate noise_std{0.04, 0.04, 0.04};
  double sample_rate_hz = 150.0;
  std::string gyro_prefix = "v";
};

/// Each virtual gyro g draws one bias with seed derive_seed({master, g, kBiasStream})
/// and reuses it for all its recordings; recording r is simulated with
/// seed derive_seed({master, g, r}).
Dataset generate_virtual_dataset(const VirtualDatasetConfig& config, std::uint64_t master_seed);

inline constexpr std::uint64_t kBiasStream = 0xB1A5ULL;

/// Union of both sets with provenance preserved. An empty side is the identity.
Dataset merge(const Dataset& real, const Dataset& virtual_set);

/// First `n` gyros (dataset order) with all their recordings.
Dataset select_gyros(const Dataset& dataset, std::size_t n);

// --- train/test split ------------------------------------------------------

struct SplitPolicy {
  double train_fraction = 0.9;
  // Explicit recording indices (per gyro) to hold out; overrides the fraction.
  std::optional<std::vector<std::size_t>> test_indices;
  std::uint64_t seed = 0;
  // Virtual recordings stay in training unless this is set, which is only
  // meant for all-synthetic experiments that stand in for real data.
  bool virtual_in_test = false;
};

/// Recording-level partition, decided per gyro.
std::pair<Dataset, Dataset> split_train_test(const Dataset& dataset, const SplitPolicy& policy);

}  // namespace gyrocal
