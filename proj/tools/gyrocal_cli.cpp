// gyrocal: simulate, ingest, train, eval and compare calibration experiments.
//
// Exit codes: 0 success, 1 user or configuration error, 2 internal failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gyrocal/experiment.hpp"
#include "gyrocal/format.hpp"

namespace fs = std::filesystem;
using namespace gyrocal;

namespace {

constexpr int kOk = 0;
constexpr int kUserError = 1;
constexpr int kInternalError = 2;

struct Overrides {
  std::string spec;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::vector<double> windows;
};

void add_common(CLI::App* cmd, Overrides& o, bool needs_windows) {
  cmd->add_option("--spec", o.spec, "experiment spec (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "master seed override");
  cmd->add_option("--out", o.out, "output directory override");
  if (needs_windows) cmd->add_option("--window-s", o.windows, "window lengths in seconds (override)");
}

ExperimentSpec resolve(const Overrides& o) {
  ExperimentSpec spec = load_spec(o.spec);
  if (o.seed) spec.seed = *o.seed;
  if (o.out) spec.out = fs::absolute(*o.out).lexically_normal();
  if (!o.windows.empty()) spec.window_s = o.windows;
  spec.validate();
  return spec;
}

std::string hours(double h) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", h);
  return buf;
}

int cmd_simulate(const Overrides& o) {
  const auto summary = run_simulate(resolve(o));
  for (const auto& e : summary.entries) {
    std::cout << e.role << ": " << e.gyros << " gyros, " << e.recordings << " recordings, " << hours(e.hours)
              << " h -> " << e.manifest.string() << '\n';
  }
  return kOk;
}

int cmd_ingest(const std::string& manifest, const std::optional<std::string>& out) {
  const auto s = run_ingest(manifest);
  std::cout << "brand " << s.brand << " @ " << format_double(s.sample_rate_hz) << " Hz: " << s.gyros << " gyros, "
            << s.recordings << " recordings, " << hours(s.hours) << " h\n"
            << "noise std (deg/s): " << format_double(s.noise_std.x) << ' ' << format_double(s.noise_std.y) << ' '
            << format_double(s.noise_std.z) << '\n';
  if (out) {
    fs::create_directories(*out);
    const nlohmann::json j{{"brand", s.brand},
                           {"sample_rate_hz", s.sample_rate_hz},
                           {"gyros", s.gyros},
                           {"recordings", s.recordings},
                           {"hours", s.hours},
                           {"noise_std_dps", {s.noise_std.x, s.noise_std.y, s.noise_std.z}}};
    std::ofstream(fs::path(*out) / "ingest_summary.json") << j.dump(2) << '\n';
  }
  return kOk;
}

int cmd_train(const Overrides& o, bool quiet) {
  const ExperimentSpec spec = resolve(o);
  const auto models = run_train(spec, !quiet);
  for (const auto& m : models) {
    std::cout << "window " << format_double(m.window_s) << " s: " << m.report.epochs.size() << " epochs, final loss "
              << format_double(m.report.epochs.back().train_loss) << ", " << hours(m.report.wall_time_s) << " s -> "
              << checkpoint_path(spec.out, m.window_s).string() << '\n';
  }
  return kOk;
}

int cmd_eval(const Overrides& o) {
  const ExperimentSpec spec = resolve(o);
  const auto res = run_eval(spec);
  std::cout << render_table(res.reports) << "reports written to " << spec.out.string() << '\n';
  return kOk;
}

int cmd_compare(const std::vector<std::string>& dirs, const std::optional<std::string>& out) {
  std::vector<fs::path> paths(dirs.begin(), dirs.end());
  const std::string table = run_compare(paths);
  std::cout << table;
  if (out) {
    fs::create_directories(*out);
    std::ofstream(fs::path(*out) / "comparison.txt") << table;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gyroscope rapid-calibration experiments"};
  app.require_subcommand(1);

  Overrides sim;
  add_common(app.add_subcommand("simulate", "generate the simulated datasets named in the experiment file"), sim, false);

  std::string ingest_manifest;
  std::optional<std::string> ingest_out;
  auto* ingest = app.add_subcommand("ingest", "load and validate a recorded dataset");
  ingest->add_option("manifest", ingest_manifest, "dataset manifest.json")->required();
  ingest->add_option("--out", ingest_out, "write ingest_summary.json here");

  Overrides tr;
  bool quiet = false;
  auto* train = app.add_subcommand("train", "train one model per window");
  add_common(train, tr, true);
  train->add_flag("--quiet", quiet, "no per-epoch progress");

  Overrides ev;
  add_common(app.add_subcommand("eval", "score checkpoints against the model-based baseline"), ev, true);

  std::vector<std::string> runs;
  std::optional<std::string> compare_out;
  auto* compare = app.add_subcommand("compare", "tabulate reports from several runs");
  compare->add_option("runs", runs, "run directories containing report.json")->required();
  compare->add_option("--out", compare_out, "write comparison.txt here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUserError;
  }

  try {
    if (*app.get_subcommand("simulate")) return cmd_simulate(sim);
    if (*ingest) return cmd_ingest(ingest_manifest, ingest_out);
    if (*train) return cmd_train(tr, quiet);
    if (*app.get_subcommand("eval")) return cmd_eval(ev);
    if (*compare) return cmd_compare(runs, compare_out);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUserError;
  } catch (const LoadError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUserError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUserError;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUserError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternalError;
  }
  return kInternalError;
}
