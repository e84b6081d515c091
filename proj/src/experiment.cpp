#include "gyrocal/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "gyrocal/error_model.hpp"
#include "gyrocal/format.hpp"
#include "gyrocal/rng.hpp"
#include "gyrocal/stats.hpp"

namespace gyrocal {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kRealRole = 0x5EA1ULL;
constexpr std::uint64_t kVirtualRole = 0x0F1CULL;
constexpr std::uint64_t kSplitRole = 0x5B17ULL;
constexpr std::uint64_t kTrainRole = 0x7EA1ULL;

// --- strict JSON helpers ---------------------------------------------------------

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok |= key == a;
    if (!ok) throw ConfigError(where + ": unknown field '" + key + "'");
  }
}

template <typename T>
T get(const json& j, const std::string& where, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": missing or wrong type");
  }
}

template <typename T>
void maybe(const json& j, const std::string& where, const char* key, T& dst) {
  if (j.contains(key)) dst = get<T>(j, where, key);
}

std::size_t get_count(const json& j, const std::string& where, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError(where + "." + key + ": expected a non-negative integer");
  return v.get<std::size_t>();
}

void maybe_count(const json& j, const std::string& where, const char* key, std::size_t& dst) {
  if (j.contains(key)) dst = get_count(j, where, key);
}

AngularRate get_rate3(const json& j, const std::string& where, const char* key) {
  const auto& v = j.at(key);
  if (v.is_number()) {
    const double x = v.get<double>();
    return {x, x, x};
  }
  if (v.is_array() && v.size() == 3 && v[0].is_number() && v[1].is_number() && v[2].is_number()) {
    return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
  }
  throw ConfigError(where + "." + key + ": expected a number or [x, y, z]");
}

json rate3(const AngularRate& r) { return json::array({r.x, r.y, r.z}); }

fs::path resolve(const fs::path& base, const fs::path& p) {
  if (p.is_absolute() || base.empty()) return fs::absolute(p).lexically_normal();
  return fs::absolute(base / p).lexically_normal();
}

BiasPrior parse_prior(const json& j, const std::string& where) {
  const auto kind = get<std::string>(j, where, "kind");
  try {
    if (kind == "uniform") {
      only_keys(j, where, {"kind", "lo", "hi"});
      return BiasPrior::uniform(get_rate3(j, where, "lo"), get_rate3(j, where, "hi"));
    }
    if (kind == "gaussian") {
      only_keys(j, where, {"kind", "mean", "std"});
      return BiasPrior::gaussian(get_rate3(j, where, "mean"), get_rate3(j, where, "std"));
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
  throw ConfigError(where + ".kind: expected 'uniform' or 'gaussian', got '" + kind + "'");
}

json prior_json(const BiasPrior& p) {
  if (p.kind == BiasPrior::Kind::kUniform) return {{"kind", "uniform"}, {"lo", rate3(p.lo)}, {"hi", rate3(p.hi)}};
  return {{"kind", "gaussian"}, {"mean", rate3(p.mean)}, {"std", rate3(p.std)}};
}

VirtualDatasetConfig parse_simulate(const json& j, const std::string& where, const std::string& default_prefix) {
  only_keys(j, where,
            {"brand", "n_gyros", "recordings_per_gyro", "n_samples", "sample_rate_hz", "noise_std_dps", "prior",
             "gyro_prefix"});
  VirtualDatasetConfig c;
  c.gyro_prefix = default_prefix;
  maybe(j, where, "brand", c.brand);
  maybe_count(j, where, "n_gyros", c.n_gyros);
  maybe_count(j, where, "recordings_per_gyro", c.recordings_per_gyro);
  maybe_count(j, where, "n_samples", c.n_samples);
  maybe(j, where, "sample_rate_hz", c.sample_rate_hz);
  if (j.contains("noise_std_dps")) c.noise_std = get_rate3(j, where, "noise_std_dps");
  if (!j.contains("prior")) throw ConfigError(where + ".prior: required (bias prior bounds have no default)");
  c.prior = parse_prior(j.at("prior"), where + ".prior");
  maybe(j, where, "gyro_prefix", c.gyro_prefix);
  return c;
}

json simulate_json(const VirtualDatasetConfig& c) {
  return {{"brand", c.brand},
          {"n_gyros", c.n_gyros},
          {"recordings_per_gyro", c.recordings_per_gyro},
          {"n_samples", c.n_samples},
          {"sample_rate_hz", c.sample_rate_hz},
          {"noise_std_dps", rate3(c.noise_std)},
          {"prior", prior_json(c.prior)},
          {"gyro_prefix", c.gyro_prefix}};
}

DataSource parse_source(const json& j, const std::string& where, const fs::path& base,
                        const std::string& default_prefix) {
  only_keys(j, where, {"manifest", "simulate", "seed"});
  DataSource s;
  if (j.contains("manifest")) s.manifest = resolve(base, get<std::string>(j, where, "manifest"));
  if (j.contains("simulate")) s.simulate = parse_simulate(j.at("simulate"), where + ".simulate", default_prefix);
  if (j.contains("seed")) s.seed = get<std::uint64_t>(j, where, "seed");
  if (s.manifest.has_value() == s.simulate.has_value()) {
    throw ConfigError(where + ": give exactly one of 'manifest' or 'simulate'");
  }
  return s;
}

json source_json(const DataSource& s) {
  json j = json::object();
  if (s.manifest) j["manifest"] = s.manifest->string();
  if (s.simulate) j["simulate"] = simulate_json(*s.simulate);
  if (s.seed) j["seed"] = *s.seed;
  return j;
}

std::string window_tag(double window_s) { return format_double(window_s); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
  if (!out) throw ConfigError("failed writing " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("cannot create output directory " + dir.string());
}

Dataset load_role(const ExperimentSpec& spec, const DataSource& src, const std::string& role) {
  if (src.manifest) {
    if (!fs::exists(*src.manifest)) throw ConfigError(role + " manifest not found: " + src.manifest->string());
    return ingest_csv(*src.manifest);
  }
  try {
    return generate_virtual_dataset(*src.simulate, data_seed(spec, role));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(role + ".simulate: " + e.what());
  }
}

}  // namespace

// --- protocol names ----------------------------------------------------------------

std::string to_string(Protocol p) {
  switch (p) {
    case Protocol::kReal2Real:
      return "real2real";
    case Protocol::kRealPlusVirtual2Real:
      return "real_plus_virtual2real";
    case Protocol::kStackedChannels:
      return "stacked_channels";
  }
  return "?";
}

Protocol protocol_from_string(const std::string& s) {
  if (s == "real2real") return Protocol::kReal2Real;
  if (s == "real_plus_virtual2real") return Protocol::kRealPlusVirtual2Real;
  if (s == "stacked_channels") return Protocol::kStackedChannels;
  throw ConfigError("unknown protocol '" + s + "' (expected real2real, real_plus_virtual2real or stacked_channels)");
}

// --- spec ---------------------------------------------------------------------------

void ExperimentSpec::validate() const {
  if (!real) throw ConfigError("spec: a 'real' data source is required (it provides the test set)");
  if (window_s.empty()) throw ConfigError("spec: window_s must list at least one window");
  std::set<double> seen;
  for (double w : window_s) {
    if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("spec: window lengths must be > 0, got " + format_double(w));
    if (!seen.insert(w).second) throw ConfigError("spec: duplicate window " + format_double(w));
  }
  switch (protocol) {
    case Protocol::kReal2Real:
      if (virtual_data) throw ConfigError("spec: real2real takes no 'virtual' source");
      break;
    case Protocol::kRealPlusVirtual2Real:
      if (!virtual_data) throw ConfigError("spec: real_plus_virtual2real needs a 'virtual' source");
      break;
    case Protocol::kStackedChannels:
      if (virtual_data) throw ConfigError("spec: stacked_channels takes no 'virtual' source");
      if (imus_per_group < 1) throw ConfigError("spec: imus_per_group must be >= 1");
      break;
  }
  if (protocol != Protocol::kStackedChannels && imus_per_group != 1) {
    throw ConfigError("spec: imus_per_group only applies to stacked_channels");
  }
  if (n_virtual_gyros && !virtual_data) throw ConfigError("spec: n_virtual_gyros given without a 'virtual' source");
  if (n_real_gyros && *n_real_gyros == 0) throw ConfigError("spec: n_real_gyros must be >= 1");
  if (!split.test_indices && !(split.train_fraction > 0.0 && split.train_fraction < 1.0)) {
    throw ConfigError("spec: split.train_fraction must lie in (0, 1)");
  }
  const auto& n = network;
  if (n.filters == 0 || n.hidden == 0 || n.kernel == 0 || n.stride == 0 || n.pool == 0 || !(n.leaky_slope > 0.0)) {
    throw ConfigError("spec: network sizes must be >= 1 and the leaky slope > 0");
  }
  try {
    training.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("spec: ") + e.what());
  }
}

ExperimentSpec spec_from_json(const json& j, const fs::path& base_dir) {
  only_keys(j, "spec",
            {"protocol", "seed", "out", "window_s", "real", "virtual", "n_real_gyros", "n_virtual_gyros",
             "imus_per_group", "split", "network", "training"});
  ExperimentSpec s;
  s.protocol = protocol_from_string(get<std::string>(j, "spec", "protocol"));
  maybe(j, "spec", "seed", s.seed);
  if (j.contains("out")) s.out = resolve(base_dir, get<std::string>(j, "spec", "out"));
  else s.out = resolve(base_dir, s.out);
  if (j.contains("window_s")) {
    const auto& w = j.at("window_s");
    if (w.is_number()) s.window_s = {w.get<double>()};
    else s.window_s = get<std::vector<double>>(j, "spec", "window_s");
  }
  if (j.contains("real")) s.real = parse_source(j.at("real"), "spec.real", base_dir, "r");
  if (j.contains("virtual")) s.virtual_data = parse_source(j.at("virtual"), "spec.virtual", base_dir, "v");
  if (j.contains("n_real_gyros")) s.n_real_gyros = get_count(j, "spec", "n_real_gyros");
  if (j.contains("n_virtual_gyros")) s.n_virtual_gyros = get_count(j, "spec", "n_virtual_gyros");
  maybe_count(j, "spec", "imus_per_group", s.imus_per_group);

  if (j.contains("split")) {
    const auto& sp = j.at("split");
    only_keys(sp, "spec.split", {"train_fraction", "test_indices", "seed", "virtual_in_test"});
    maybe(sp, "spec.split", "train_fraction", s.split.train_fraction);
    if (sp.contains("test_indices")) s.split.test_indices = get<std::vector<std::size_t>>(sp, "spec.split", "test_indices");
    if (sp.contains("seed")) {
      s.split.seed = get<std::uint64_t>(sp, "spec.split", "seed");
      s.split_seed_set = true;
    }
    maybe(sp, "spec.split", "virtual_in_test", s.split.virtual_in_test);
  }
  if (j.contains("network")) {
    const auto& n = j.at("network");
    only_keys(n, "spec.network", {"filters", "kernel", "stride", "conv_bias", "leaky_slope", "pool", "hidden"});
    maybe_count(n, "spec.network", "filters", s.network.filters);
    maybe_count(n, "spec.network", "kernel", s.network.kernel);
    maybe_count(n, "spec.network", "stride", s.network.stride);
    maybe(n, "spec.network", "conv_bias", s.network.conv_bias);
    maybe(n, "spec.network", "leaky_slope", s.network.leaky_slope);
    maybe_count(n, "spec.network", "pool", s.network.pool);
    maybe_count(n, "spec.network", "hidden", s.network.hidden);
  }
  if (j.contains("training")) {
    const auto& t = j.at("training");
    only_keys(t, "spec.training", {"batch_size", "learning_rate", "lr_decay", "decay_every", "epochs", "adam"});
    maybe_count(t, "spec.training", "batch_size", s.training.batch_size);
    maybe(t, "spec.training", "learning_rate", s.training.learning_rate);
    maybe(t, "spec.training", "lr_decay", s.training.lr_decay);
    maybe_count(t, "spec.training", "decay_every", s.training.decay_every);
    maybe_count(t, "spec.training", "epochs", s.training.epochs);
    if (t.contains("adam")) {
      const auto& a = t.at("adam");
      only_keys(a, "spec.training.adam", {"beta1", "beta2", "epsilon"});
      maybe(a, "spec.training.adam", "beta1", s.training.adam.beta1);
      maybe(a, "spec.training.adam", "beta2", s.training.adam.beta2);
      maybe(a, "spec.training.adam", "epsilon", s.training.adam.epsilon);
    }
  }
  return s;
}

ExperimentSpec load_spec(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open spec " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("spec " + path.string() + " is not valid JSON: " + e.what());
  }
  return spec_from_json(j, fs::absolute(path).parent_path());
}

json spec_to_json(const ExperimentSpec& s) {
  json j;
  j["protocol"] = to_string(s.protocol);
  j["seed"] = s.seed;
  j["out"] = fs::absolute(s.out).lexically_normal().string();
  j["window_s"] = s.window_s;
  if (s.real) j["real"] = source_json(*s.real);
  if (s.virtual_data) j["virtual"] = source_json(*s.virtual_data);
  if (s.n_real_gyros) j["n_real_gyros"] = *s.n_real_gyros;
  if (s.n_virtual_gyros) j["n_virtual_gyros"] = *s.n_virtual_gyros;
  j["imus_per_group"] = s.imus_per_group;
  json split{{"train_fraction", s.split.train_fraction}, {"virtual_in_test", s.split.virtual_in_test}};
  if (s.split.test_indices) split["test_indices"] = *s.split.test_indices;
  if (s.split_seed_set) split["seed"] = s.split.seed;
  j["split"] = split;
  j["network"] = {{"filters", s.network.filters}, {"kernel", s.network.kernel},
                  {"stride", s.network.stride},   {"conv_bias", s.network.conv_bias},
                  {"leaky_slope", s.network.leaky_slope}, {"pool", s.network.pool},
                  {"hidden", s.network.hidden}};
  j["training"] = {{"batch_size", s.training.batch_size},
                   {"learning_rate", s.training.learning_rate},
                   {"lr_decay", s.training.lr_decay},
                   {"decay_every", s.training.decay_every},
                   {"epochs", s.training.epochs},
                   {"adam",
                    {{"beta1", s.training.adam.beta1},
                     {"beta2", s.training.adam.beta2},
                     {"epsilon", s.training.adam.epsilon}}}};
  return j;
}

std::uint64_t data_seed(const ExperimentSpec& spec, const std::string& role) {
  const DataSource* src = role == "real" ? (spec.real ? &*spec.real : nullptr)
                                         : (spec.virtual_data ? &*spec.virtual_data : nullptr);
  if (src && src->seed) return *src->seed;
  return derive_seed({spec.seed, role == "real" ? kRealRole : kVirtualRole});
}

std::uint64_t split_seed(const ExperimentSpec& spec) {
  return spec.split_seed_set ? spec.split.seed : derive_seed({spec.seed, kSplitRole});
}

std::uint64_t training_seed(const ExperimentSpec& spec) { return derive_seed({spec.seed, kTrainRole}); }

// --- data and partition -----------------------------------------------------------------

ExperimentData load_data(const ExperimentSpec& spec) {
  spec.validate();
  ExperimentData d;
  d.real = load_role(spec, *spec.real, "real");
  if (spec.n_real_gyros) {
    if (*spec.n_real_gyros > d.real.gyro_ids().size()) {
      throw ConfigError("n_real_gyros = " + std::to_string(*spec.n_real_gyros) + " but the real set has " +
                        std::to_string(d.real.gyro_ids().size()) + " gyros");
    }
    d.real = select_gyros(d.real, *spec.n_real_gyros);
  }
  if (spec.virtual_data) {
    d.virtual_data = load_role(spec, *spec.virtual_data, "virtual");
    if (spec.n_virtual_gyros) {
      if (*spec.n_virtual_gyros > d.virtual_data.gyro_ids().size()) {
        throw ConfigError("n_virtual_gyros = " + std::to_string(*spec.n_virtual_gyros) + " but the virtual set has " +
                          std::to_string(d.virtual_data.gyro_ids().size()) + " gyros");
      }
      d.virtual_data = select_gyros(d.virtual_data, *spec.n_virtual_gyros);
    }
  }
  return d;
}

Partition make_partition(const ExperimentSpec& spec, const ExperimentData& data) {
  if (data.real.empty()) throw ConfigError("the real data source has no recordings");
  const bool has_real = std::any_of(data.real.recordings.begin(), data.real.recordings.end(),
                                    [](const GyroRecording& r) { return r.provenance == Provenance::kReal; });
  if (!has_real && !spec.split.virtual_in_test) {
    throw ConfigError("the real source holds only simulated recordings; set split.virtual_in_test to test on them");
  }

  SplitPolicy policy = spec.split;
  policy.seed = split_seed(spec);
  Partition part;
  part.sample_rate_hz = data.real.sample_rate_hz;

  if (spec.protocol == Protocol::kStackedChannels) {
    part.mode = ChannelMode::kStacked;
    try {
      part.groups = group_consecutive(data.real.gyro_ids(), spec.imus_per_group);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    part.channels = 3 * spec.imus_per_group;
    // Synchronized groups must lose the same recordings, so the held-out
    // indices are drawn once (from the first gyro) and applied to all.
    if (!policy.test_indices) {
      const Dataset lead = select_gyros(data.real, 1);
      try {
        const auto [tr, te] = split_train_test(lead, policy);
        std::vector<std::size_t> held;
        for (const auto& r : te.recordings) held.push_back(r.recording_index);
        policy.test_indices = held;
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
  }

  try {
    auto [train, test] = split_train_test(data.real, policy);
    const Dataset pool = merge(train, data.virtual_data);
    part.train = pool.recordings;
    part.test = std::move(test.recordings);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (part.test.empty()) throw ConfigError("no test recordings");
  return part;
}

nn::NetworkConfig network_for(const ExperimentSpec& spec, const Partition& part, double window_s) {
  nn::NetworkConfig c = spec.network;
  c.in_channels = part.channels;
  try {
    c.window_len = window_samples(window_s, part.sample_rate_hz);
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("window " + format_double(window_s) + " s: " + e.what());
  }
  return c;
}

namespace {

std::vector<TrainingExample> windows_for(const Partition& part, std::span<const GyroRecording> recs, double w) {
  try {
    return make_windows(recs, w, part.mode, part.groups);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("window " + format_double(w) + " s: " + e.what());
  }
}

}  // namespace

TrainedModel train_window(const ExperimentSpec& spec, const Partition& part, double window_s,
                          const std::function<void(const nn::EpochStat&)>& on_epoch) {
  const nn::NetworkConfig net = network_for(spec, part, window_s);
  const auto examples = windows_for(part, part.train, window_s);
  nn::TrainConfig tc = spec.training;
  tc.seed = training_seed(spec);
  TrainedModel m;
  m.window_s = window_s;
  m.report = nn::train(examples, net, tc, on_epoch);
  m.checkpoint = nn::Checkpoint{net, m.report.params, tc.seed, window_s, part.sample_rate_hz};
  return m;
}

EvalResult evaluate(const Partition& part, const std::vector<double>& windows,
                    const std::vector<const BiasPredictor*>& models) {
  if (part.test.empty()) throw ConfigError("no test recordings to evaluate");
  if (windows.size() != models.size()) throw std::logic_error("evaluate: one model per window expected");
  EvalResult res;
  res.curve = model_based_rmse_curve(part.test);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    double nn = 0.0;
    try {
      nn = nn_rmse_at_window(*models[i], part.test, windows[i], part.mode, part.groups);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("window " + format_double(windows[i]) + " s: " + e.what());
    }
    if (windows[i] < res.curve.times.front() || windows[i] > res.curve.times.back()) {
      throw ConfigError("window " + format_double(windows[i]) + " s lies outside the test recordings");
    }
    res.reports.push_back(improvement_report(windows[i], nn, res.curve));
  }
  return res;
}

// --- commands ----------------------------------------------------------------------

fs::path checkpoint_path(const fs::path& out, double window_s) {
  return out / ("model_w" + window_tag(window_s) + ".json");
}

fs::path training_log_path(const fs::path& out, double window_s) {
  return out / ("train_log_w" + window_tag(window_s) + ".csv");
}

SimulateSummary run_simulate(const ExperimentSpec& spec) {
  SimulateSummary summary;
  const std::pair<const char*, const std::optional<DataSource>*> roles[] = {{"real", &spec.real},
                                                                             {"virtual", &spec.virtual_data}};
  for (const auto& [role, src] : roles) {
    if (!*src || !(*src)->simulate) continue;
    Dataset ds;
    try {
      ds = generate_virtual_dataset(*(*src)->simulate, data_seed(spec, role));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string(role) + ".simulate: " + e.what());
    }
    const fs::path root = spec.out / "data" / role;
    ensure_dir(root);
    SimulateSummary::Entry e;
    e.role = role;
    try {
      e.manifest = write_dataset(ds, root);
    } catch (const std::exception& ex) {
      throw ConfigError(std::string("cannot write dataset: ") + ex.what());
    }
    e.gyros = ds.gyro_ids().size();
    e.recordings = ds.recordings.size();
    e.hours = ds.total_hours();
    summary.entries.push_back(e);
  }
  if (summary.entries.empty()) throw ConfigError("spec has no 'simulate' source to generate");
  return summary;
}

IngestSummary run_ingest(const fs::path& manifest) {
  const Dataset ds = ingest_csv(manifest);
  IngestSummary s;
  s.brand = ds.brand;
  s.sample_rate_hz = ds.sample_rate_hz;
  s.gyros = ds.gyro_ids().size();
  s.recordings = ds.recordings.size();
  s.hours = ds.total_hours();
  // Pooled within-recording variance, so per-recording bias offsets do not inflate it.
  double ss[3] = {0, 0, 0};
  double dof = 0.0;
  for (const auto& r : ds.recordings) {
    if (r.size() < 2) continue;
    const AngularRate sd = estimate_noise_std(r);
    const double k = static_cast<double>(r.size() - 1);
    for (std::size_t a = 0; a < 3; ++a) ss[a] += sd[a] * sd[a] * k;
    dof += k;
  }
  if (dof > 0) {
    for (std::size_t a = 0; a < 3; ++a) s.noise_std[a] = std::sqrt(ss[a] / dof);
  }
  return s;
}

std::vector<TrainedModel> run_train(const ExperimentSpec& spec, bool verbose) {
  const ExperimentData data = load_data(spec);
  const Partition part = make_partition(spec, data);
  // Shape problems surface here, before any training time is spent.
  for (double w : spec.window_s) {
    network_for(spec, part, w);
    windows_for(part, part.train, w);
    windows_for(part, part.test, w);
  }
  ensure_dir(spec.out);
  write_text(spec.out / kFrozenSpecName, spec_to_json(spec).dump(2) + "\n");

  std::vector<TrainedModel> models;
  for (double w : spec.window_s) {
    auto progress = [&](const nn::EpochStat& e) {
      if (verbose && (e.epoch == 1 || e.epoch % 50 == 0 || e.epoch == spec.training.epochs)) {
        std::cerr << "  window " << format_double(w) << " s  epoch " << e.epoch << "  loss "
                  << format_double(e.train_loss) << "  lr " << format_double(e.lr) << '\n';
      }
    };
    TrainedModel m = train_window(spec, part, w, progress);
    nn::save_checkpoint(m.checkpoint, checkpoint_path(spec.out, w));
    nn::write_training_log(m.report, training_log_path(spec.out, w));
    models.push_back(std::move(m));
  }
  return models;
}

EvalResult run_eval(const ExperimentSpec& spec) {
  const ExperimentData data = load_data(spec);
  const Partition part = make_partition(spec, data);

  std::vector<nn::CnnModel> models;
  for (double w : spec.window_s) {
    const fs::path path = checkpoint_path(spec.out, w);
    if (!fs::exists(path)) throw ConfigError("no checkpoint for window " + format_double(w) + " s at " + path.string());
    nn::Checkpoint ck;
    try {
      ck = nn::load_checkpoint(path);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
    const nn::NetworkConfig expected = network_for(spec, part, w);
    if (!(ck.config == expected) || ck.sample_rate_hz != part.sample_rate_hz || ck.window_s != w) {
      throw ConfigError("checkpoint " + path.string() + " does not match the experiment's window, channel and network settings");
    }
    models.emplace_back(ck.config, ck.params);
  }
  std::vector<const BiasPredictor*> ptrs;
  for (const auto& m : models) ptrs.push_back(&m);
  EvalResult res = evaluate(part, spec.window_s, ptrs);
  write_eval_outputs(res, spec.out);
  return res;
}

void write_eval_outputs(const EvalResult& result, const fs::path& out) {
  std::ostringstream curve;
  curve << "time_s,rmse_dps\n";
  for (std::size_t k = 0; k < result.curve.size(); ++k) {
    curve << format_double(result.curve.times[k]) << ',' << format_double(result.curve.rmse[k]) << '\n';
  }
  std::ostringstream points;
  points << "window_s,nn_rmse_dps,model_based_rmse_dps,crossing_time_s\n";
  json reports = json::array();
  for (const auto& r : result.reports) {
    points << format_double(r.window_s) << ',' << format_double(r.nn_rmse) << ','
           << format_double(r.model_based_rmse_at_window) << ','
           << (r.crossing_time_s ? format_double(*r.crossing_time_s) : std::string()) << '\n';
    reports.push_back(to_json(r));
  }
  const json report{{"reports", reports}};
  const std::string table = render_table(result.reports);

  ensure_dir(out);
  write_text(out / "mb_rmse_curve.csv", curve.str());
  write_text(out / "nn_points.csv", points.str());
  write_text(out / kReportName, report.dump(2) + "\n");
  write_text(out / "report.txt", table);
}

std::string run_compare(const std::vector<fs::path>& run_dirs) {
  if (run_dirs.empty()) throw ConfigError("compare: give at least one run directory");
  std::ostringstream os;
  for (const auto& dir : run_dirs) {
    const fs::path path = dir / kReportName;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("compare: no report at " + path.string() + " (run eval first)");
    std::vector<ComparisonReport> reports;
    try {
      const json j = json::parse(in);
      for (const auto& r : j.at("reports")) reports.push_back(report_from_json(r));
    } catch (const json::exception& e) {
      throw ConfigError("compare: malformed report " + path.string() + ": " + e.what());
    }
    os << "== " << dir.string() << '\n' << render_table(reports) << '\n';
  }
  return os.str();
}

}  // namespace gyrocal
