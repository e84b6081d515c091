#pragma once

// Experiment runs: a JSON spec names the data, protocol, windows and model
// settings; each command writes only inside the run's output directory.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gyrocal/dataset.hpp"
#include "gyrocal/eval.hpp"
#include "gyrocal/nn.hpp"

namespace gyrocal {

/// Bad spec, bad flags or data that does not fit the requested run.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Protocol { kReal2Real, kRealPlusVirtual2Real, kStackedChannels };

std::string to_string(Protocol p);
Protocol protocol_from_string(const std::string& s);

/// Where one data role comes from: an on-disk manifest or an in-spec generator.
struct DataSource {
  std::optional<std::filesystem::path> manifest;
  std::optional<VirtualDatasetConfig> simulate;
  std::optional<std::uint64_t> seed;  // generator seed; derived from the master seed if absent
};

struct ExperimentSpec {
  Protocol protocol = Protocol::kReal2Real;
  // "real" is the test source; "virtual" only ever adds training data.
  std::optional<DataSource> real;
  std::optional<DataSource> virtual_data;
  std::optional<std::size_t> n_real_gyros;     // first N real gyros
  std::optional<std::size_t> n_virtual_gyros;  // first N virtual gyros
  std::size_t imus_per_group = 1;              // stacked_channels only
  std::vector<double> window_s;
  SplitPolicy split;
  bool split_seed_set = false;
  nn::NetworkConfig network;  // in_channels and window_len are filled per run
  nn::TrainConfig training;   // seed is derived from the master seed
  std::uint64_t seed = 0;
  std::filesystem::path out = "run";

  /// Throws ConfigError on anything inconsistent.
  void validate() const;
};

/// Parses a spec; relative paths resolve against `base_dir`.
ExperimentSpec spec_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentSpec load_spec(const std::filesystem::path& path);
/// Fully resolved form (absolute paths, every default spelled out).
nlohmann::json spec_to_json(const ExperimentSpec& spec);

/// Role-specific seeds derived from the master seed.
std::uint64_t data_seed(const ExperimentSpec& spec, const std::string& role);
std::uint64_t split_seed(const ExperimentSpec& spec);
std::uint64_t training_seed(const ExperimentSpec& spec);

struct ExperimentData {
  Dataset real;
  Dataset virtual_data;
};

/// Loads or generates both roles and applies the gyro-count limits.
ExperimentData load_data(const ExperimentSpec& spec);

/// Recording-level partition plus the channel layout for the protocol.
struct Partition {
  std::vector<GyroRecording> train;
  std::vector<GyroRecording> test;
  ChannelMode mode = ChannelMode::kPerImu;
  std::vector<std::vector<std::string>> groups;  // stacked only
  double sample_rate_hz = 0.0;
  std::size_t channels = 3;
};

Partition make_partition(const ExperimentSpec& spec, const ExperimentData& data);

/// Network shape for one window length.
nn::NetworkConfig network_for(const ExperimentSpec& spec, const Partition& part, double window_s);

struct TrainedModel {
  double window_s = 0.0;
  nn::Checkpoint checkpoint;
  nn::TrainReport report;
};

TrainedModel train_window(const ExperimentSpec& spec, const Partition& part, double window_s,
                          const std::function<void(const nn::EpochStat&)>& on_epoch = {});

struct EvalResult {
  RmseCurve curve;
  std::vector<ComparisonReport> reports;  // one per window, spec order
};

/// Scores one predictor per window against the test recordings.
EvalResult evaluate(const Partition& part, const std::vector<double>& windows,
                    const std::vector<const BiasPredictor*>& models);

// --- commands ---------------------------------------------------------------

struct SimulateSummary {
  struct Entry {
    std::string role;
    std::filesystem::path manifest;
    std::size_t gyros = 0;
    std::size_t recordings = 0;
    double hours = 0.0;
  };
  std::vector<Entry> entries;
};

/// Writes every spec-generated role to <out>/data/<role>/.
SimulateSummary run_simulate(const ExperimentSpec& spec);

struct IngestSummary {
  std::string brand;
  double sample_rate_hz = 0.0;
  std::size_t gyros = 0;
  std::size_t recordings = 0;
  double hours = 0.0;
  AngularRate noise_std;  // pooled per-axis estimate
};

IngestSummary run_ingest(const std::filesystem::path& manifest);

/// Trains one model per window; writes checkpoints, logs and the frozen spec.
std::vector<TrainedModel> run_train(const ExperimentSpec& spec, bool verbose = false);

/// Loads the checkpoints from the output directory and writes the reports.
EvalResult run_eval(const ExperimentSpec& spec);

/// Writes curve, NN points, report JSON and table. Everything is rendered in
/// memory first so a failure leaves no partial output.
void write_eval_outputs(const EvalResult& result, const std::filesystem::path& out);

/// Side-by-side table of report.json files from several run directories.
std::string run_compare(const std::vector<std::filesystem::path>& run_dirs);

/// File names inside a run directory.
std::filesystem::path checkpoint_path(const std::filesystem::path& out, double window_s);
std::filesystem::path training_log_path(const std::filesystem::path& out, double window_s);
inline constexpr const char* kFrozenSpecName = "spec.resolved.json";
inline constexpr const char* kReportName = "report.json";

}  // namespace gyrocal
