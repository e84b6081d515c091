#include "gyrocal/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "gyrocal/calib.hpp"
#include "gyrocal/error_model.hpp"
#include "gyrocal/format.hpp"
#include "gyrocal/rng.hpp"

namespace gyrocal {

namespace fs = std::filesystem;
using nlohmann::json;

LoadError::LoadError(fs::path file, std::size_t line, const std::string& what)
    : std::runtime_error(file.string() + (line ? ":" + std::to_string(line) : std::string()) +
                         ": " + what),
      file_(std::move(file)),
      line_(line) {}

std::vector<std::string> Dataset::gyro_ids() const {
  std::vector<std::string> ids;
  for (const auto& r : recordings) {
    if (std::find(ids.begin(), ids.end(), r.gyro_id) == ids.end()) ids.push_back(r.gyro_id);
  }
  return ids;
}

std::vector<GyroRecording> Dataset::recordings_of(const std::string& gyro_id) const {
  std::vector<GyroRecording> out;
  for (const auto& r : recordings) {
    if (r.gyro_id == gyro_id) out.push_back(r);
  }
  return out;
}

double Dataset::total_hours() const {
  double s = 0.0;
  for (const auto& r : recordings) s += r.duration_s();
  return s / 3600.0;
}

// --- CSV / manifest ----------------------------------------------------------

namespace {

constexpr const char* kCsvHeader = "t_s,gyro_x_dps,gyro_y_dps,gyro_z_dps";

std::string recording_filename(std::size_t index) {
  return "recording_" + std::to_string(index) + ".csv";
}

std::optional<std::size_t> index_from_filename(const fs::path& p) {
  const std::string stem = p.stem().string();
  const std::string prefix = "recording_";
  if (stem.rfind(prefix, 0) != 0 || stem.size() == prefix.size()) return std::nullopt;
  std::size_t idx = 0;
  for (char c : stem.substr(prefix.size())) {
    if (c < '0' || c > '9') return std::nullopt;
    idx = idx * 10 + static_cast<std::size_t>(c - '0');
  }
  return idx;
}

json rate_to_json(const AngularRate& r) { return json::array({r.x, r.y, r.z}); }

AngularRate rate_from_json(const json& j, const fs::path& file, const char* field) {
  if (!j.is_array() || j.size() != 3) throw LoadError(file, 0, std::string(field) + " must be [x, y, z]");
  AngularRate r;
  for (std::size_t a = 0; a < 3; ++a) {
    if (!j[a].is_number()) throw LoadError(file, 0, std::string(field) + " must be numeric");
    r[a] = j[a].get<double>();
  }
  return r;
}

void write_recording_csv(const GyroRecording& rec, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kCsvHeader << '\n';
  for (std::size_t k = 0; k < rec.samples.size(); ++k) {
    const auto& s = rec.samples[k];
    out << format_double(static_cast<double>(k) / rec.sample_rate_hz) << ',' << format_double(s.x)
        << ',' << format_double(s.y) << ',' << format_double(s.z) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

struct CsvRows {
  std::vector<double> times;
  std::vector<AngularRate> samples;
};

CsvRows read_csv_rows(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(path, 0, "cannot open file");
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw LoadError(path, 1, "missing header");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (line != kCsvHeader) {
    throw LoadError(path, 1, "expected header '" + std::string(kCsvHeader) + "', got '" + line + "'");
  }

  static const char* kColumns[] = {"t_s", "gyro_x_dps", "gyro_y_dps", "gyro_z_dps"};
  CsvRows rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    double fields[4];
    std::size_t start = 0;
    for (std::size_t c = 0; c < 4; ++c) {
      const std::size_t comma = line.find(',', start);
      const bool last = c == 3;
      if (last != (comma == std::string::npos)) {
        throw LoadError(path, line_no, "expected 4 comma-separated fields");
      }
      const std::string_view cell(line.data() + start,
                                  (last ? line.size() : comma) - start);
      try {
        fields[c] = parse_double(cell);
      } catch (const std::invalid_argument&) {
        throw LoadError(path, line_no, std::string("column ") + kColumns[c] + ": not a number '" +
                                           std::string(cell) + "'");
      }
      if (!std::isfinite(fields[c])) {
        throw LoadError(path, line_no, std::string("column ") + kColumns[c] + ": non-finite value");
      }
      start = comma + 1;
    }
    if (!rows.times.empty() && !(fields[0] > rows.times.back())) {
      throw LoadError(path, line_no, "timestamps not strictly increasing");
    }
    rows.times.push_back(fields[0]);
    rows.samples.push_back({fields[1], fields[2], fields[3]});
  }
  if (rows.samples.empty()) throw LoadError(path, line_no, "no samples");
  return rows;
}

}  // namespace

std::vector<AngularRate> read_recording_csv(const fs::path& path) {
  return read_csv_rows(path).samples;
}

fs::path manifest_path_for(const fs::path& root, const std::string& brand) {
  return root / brand / "manifest.json";
}

fs::path write_dataset(const Dataset& dataset, const fs::path& root) {
  if (dataset.brand.empty()) throw std::invalid_argument("write_dataset: brand is empty");
  const fs::path brand_dir = root / dataset.brand;
  fs::create_directories(brand_dir);

  json manifest;
  manifest["brand"] = dataset.brand;
  manifest["sample_rate_hz"] = dataset.sample_rate_hz;
  manifest["provenance"] = to_string(dataset.provenance);
  if (dataset.noise_std) manifest["noise_std_dps"] = rate_to_json(*dataset.noise_std);
  if (dataset.master_seed) manifest["master_seed"] = *dataset.master_seed;

  json gyros = json::array();
  for (const auto& gyro_id : dataset.gyro_ids()) {
    fs::create_directories(brand_dir / gyro_id);
    json entry;
    entry["gyro_id"] = gyro_id;
    json paths = json::array();
    json seeds = json::array();
    json gts = json::array();
    bool any_seed = false;
    bool any_gt = false;
    for (const auto& rec : dataset.recordings) {
      if (rec.gyro_id != gyro_id) continue;
      if (rec.sample_rate_hz != dataset.sample_rate_hz) {
        throw std::invalid_argument("write_dataset: recording " + rec.id() +
                                    " rate differs from dataset rate");
      }
      const fs::path rel = fs::path(gyro_id) / recording_filename(rec.recording_index);
      write_recording_csv(rec, brand_dir / rel);
      paths.push_back(rel.generic_string());
      seeds.push_back(rec.seed ? json(*rec.seed) : json(nullptr));
      gts.push_back(rec.gt_bias ? rate_to_json(*rec.gt_bias) : json(nullptr));
      any_seed = any_seed || rec.seed.has_value();
      any_gt = any_gt || rec.gt_bias.has_value();
    }
    entry["recordings"] = std::move(paths);
    if (any_seed) entry["recording_seeds"] = std::move(seeds);
    if (any_gt) entry["gt_bias_dps"] = std::move(gts);
    gyros.push_back(std::move(entry));
  }
  manifest["gyros"] = std::move(gyros);

  const fs::path mpath = brand_dir / "manifest.json";
  std::ofstream out(mpath, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + mpath.string());
  out << manifest.dump(2) << '\n';
  return mpath;
}

Dataset ingest_csv(const fs::path& manifest_path) {
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw LoadError(manifest_path, 0, "cannot open manifest");
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::parse_error& e) {
    throw LoadError(manifest_path, 0, std::string("invalid JSON: ") + e.what());
  }

  Dataset ds;
  try {
    ds.brand = manifest.at("brand").get<std::string>();
    ds.sample_rate_hz = manifest.at("sample_rate_hz").get<double>();
    if (manifest.contains("provenance")) {
      ds.provenance = provenance_from_string(manifest["provenance"].get<std::string>());
    }
    if (manifest.contains("master_seed")) ds.master_seed = manifest["master_seed"].get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw LoadError(manifest_path, 0, std::string("bad manifest field: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw LoadError(manifest_path, 0, e.what());
  }
  if (manifest.contains("noise_std_dps")) {
    ds.noise_std = rate_from_json(manifest["noise_std_dps"], manifest_path, "noise_std_dps");
  }
  if (!(ds.sample_rate_hz > 0.0)) throw LoadError(manifest_path, 0, "sample_rate_hz must be > 0");
  if (!manifest.contains("gyros") || !manifest["gyros"].is_array()) {
    throw LoadError(manifest_path, 0, "missing 'gyros' array");
  }

  const fs::path base = manifest_path.parent_path();
  std::set<std::string> seen;
  for (const auto& entry : manifest["gyros"]) {
    std::string gyro_id;
    json recs;
    try {
      gyro_id = entry.at("gyro_id").get<std::string>();
      recs = entry.at("recordings");
    } catch (const json::exception& e) {
      throw LoadError(manifest_path, 0, std::string("bad gyro entry: ") + e.what());
    }
    if (!seen.insert(gyro_id).second) {
      throw LoadError(manifest_path, 0, "duplicate gyro_id '" + gyro_id + "'");
    }
    const json seeds = entry.value("recording_seeds", json::array());
    const json gts = entry.value("gt_bias_dps", json::array());

    std::set<std::size_t> indices;
    for (std::size_t k = 0; k < recs.size(); ++k) {
      const fs::path rel = recs[k].get<std::string>();
      const fs::path file = base / rel;
      if (!fs::exists(file)) throw LoadError(file, 0, "listed in manifest but not found");

      const CsvRows rows = read_csv_rows(file);
      if (rows.times.size() >= 2) {
        const double dt = (rows.times.back() - rows.times.front()) /
                          static_cast<double>(rows.times.size() - 1);
        const double expected = 1.0 / ds.sample_rate_hz;
        if (std::abs(dt - expected) > 0.05 * expected) {
          throw LoadError(file, 0, "mean sample period " + format_double(dt) +
                                       " s disagrees with manifest rate " +
                                       format_double(ds.sample_rate_hz) + " Hz");
        }
      }

      GyroRecording rec;
      rec.samples = rows.samples;
      rec.sample_rate_hz = ds.sample_rate_hz;
      rec.gyro_id = gyro_id;
      rec.recording_index = index_from_filename(rel).value_or(k);
      rec.provenance = ds.provenance;
      if (!indices.insert(rec.recording_index).second) {
        throw LoadError(manifest_path, 0, "duplicate recording index for gyro " + gyro_id);
      }
      if (k < seeds.size() && !seeds[k].is_null()) rec.seed = seeds[k].get<std::uint64_t>();
      if (k < gts.size() && !gts[k].is_null()) rec.gt_bias = rate_from_json(gts[k], manifest_path, "gt_bias_dps");
      ds.recordings.push_back(std::move(rec));
    }
  }
  return ds;
}

// --- labels and windows ----------------------------------------------------------

AngularRate ground_truth_bias(const GyroRecording& recording) {
  if (recording.samples.empty()) {
    throw std::invalid_argument("ground_truth_bias: empty recording " + recording.id());
  }
  return mean_of_first(recording, recording.size());
}

AngularRate label_of(const GyroRecording& recording) {
  return recording.gt_bias ? *recording.gt_bias : ground_truth_bias(recording);
}

std::vector<std::vector<std::string>> group_consecutive(const std::vector<std::string>& gyro_ids,
                                                        std::size_t imus_per_group) {
  if (imus_per_group == 0 || gyro_ids.size() % imus_per_group != 0) {
    throw std::invalid_argument("cannot split " + std::to_string(gyro_ids.size()) +
                                " gyros into groups of " + std::to_string(imus_per_group));
  }
  std::vector<std::vector<std::string>> groups;
  for (std::size_t i = 0; i < gyro_ids.size(); i += imus_per_group) {
    groups.emplace_back(gyro_ids.begin() + static_cast<std::ptrdiff_t>(i),
                        gyro_ids.begin() + static_cast<std::ptrdiff_t>(i + imus_per_group));
  }
  return groups;
}

std::vector<TrainingExample> make_windows(std::span<const GyroRecording> recordings, double window_s,
                                          ChannelMode mode,
                                          const std::vector<std::vector<std::string>>& groups) {
  std::vector<TrainingExample> out;
  if (recordings.empty()) return out;

  auto check_len = [&](const GyroRecording& r) {
    r.validate();
    const std::size_t s = window_samples(window_s, r.sample_rate_hz);
    if (s > r.size()) {
      throw std::invalid_argument("window of " + std::to_string(s) + " samples is longer than recording " +
                                  r.id() + " (" + std::to_string(r.size()) + " samples)");
    }
    return s;
  };

  if (mode == ChannelMode::kPerImu) {
    for (const auto& r : recordings) {
      const std::size_t s = check_len(r);
      TrainingExample ex;
      ex.window = Matrix(3, s);
      for (std::size_t a = 0; a < 3; ++a) {
        for (std::size_t k = 0; k < s; ++k) ex.window(a, k) = r.samples[k][a];
      }
      const AngularRate gt = label_of(r);
      ex.label = {gt.x, gt.y, gt.z};
      ex.source_ids = {r.id()};
      out.push_back(std::move(ex));
    }
    return out;
  }

  if (groups.empty()) throw std::invalid_argument("stacked windows need at least one gyro group");
  // gyro id -> recording index -> recording
  std::map<std::string, std::map<std::size_t, const GyroRecording*>> by_gyro;
  for (const auto& r : recordings) by_gyro[r.gyro_id][r.recording_index] = &r;

  for (const auto& group : groups) {
    if (group.empty()) throw std::invalid_argument("empty gyro group");
    const auto lead = by_gyro.find(group.front());
    if (lead == by_gyro.end()) throw std::invalid_argument("group member '" + group.front() + "' has no recordings");
    for (const auto& [index, lead_rec] : lead->second) {
      std::vector<const GyroRecording*> members;
      for (const auto& gid : group) {
        const auto g = by_gyro.find(gid);
        if (g == by_gyro.end() || !g->second.contains(index)) {
          throw std::invalid_argument("gyro '" + gid + "' lacks recording " + std::to_string(index) +
                                      " present for '" + group.front() + "'");
        }
        const GyroRecording* m = g->second.at(index);
        if (m->size() != lead_rec->size() || m->sample_rate_hz != lead_rec->sample_rate_hz) {
          throw std::invalid_argument("mismatched group lengths: " + m->id() + " vs " + lead_rec->id());
        }
        members.push_back(m);
      }
      const std::size_t s = check_len(*lead_rec);
      TrainingExample ex;
      ex.window = Matrix(3 * members.size(), s);
      for (std::size_t g = 0; g < members.size(); ++g) {
        const AngularRate gt = label_of(*members[g]);
        for (std::size_t a = 0; a < 3; ++a) {
          for (std::size_t k = 0; k < s; ++k) ex.window(3 * g + a, k) = members[g]->samples[k][a];
          ex.label.push_back(gt[a]);
        }
        ex.source_ids.push_back(members[g]->id());
      }
      out.push_back(std::move(ex));
    }
  }
  return out;
}

// --- virtual data --------------------------------------------------------------

Dataset generate_virtual_dataset(const VirtualDatasetConfig& config, std::uint64_t master_seed) {
  if (config.n_gyros == 0 || config.recordings_per_gyro == 0 || config.n_samples == 0) {
    throw std::invalid_argument("generate_virtual_dataset: counts must be >= 1");
  }
  config.prior.validate();

  Dataset ds;
  ds.brand = config.brand;
  ds.sample_rate_hz = config.sample_rate_hz;
  ds.provenance = Provenance::kVirtual;
  ds.noise_std = config.noise_std;
  ds.master_seed = master_seed;
  ds.recordings.reserve(config.n_gyros * config.recordings_per_gyro);

  const int width = config.n_gyros > 100 ? static_cast<int>(std::to_string(config.n_gyros - 1).size()) : 2;
  for (std::size_t g = 0; g < config.n_gyros; ++g) {
    std::ostringstream id;
    id << config.gyro_prefix;
    id.width(width);
    id.fill('0');
    id << g;
    const AngularRate bias = sample_virtual_bias(config.prior, derive_seed({master_seed, g, kBiasStream}));
    for (std::size_t r = 0; r < config.recordings_per_gyro; ++r) {
      ds.recordings.push_back(simulate_stationary_recording(bias, config.noise_std, config.n_samples,
                                                            config.sample_rate_hz,
                                                            derive_seed({master_seed, g, r}), id.str(), r));
    }
  }
  return ds;
}

Dataset merge(const Dataset& real, const Dataset& virtual_set) {
  if (virtual_set.empty()) return real;
  if (real.empty()) return virtual_set;
  if (real.sample_rate_hz != virtual_set.sample_rate_hz) {
    throw std::invalid_argument("merge: sample rates differ (" + format_double(real.sample_rate_hz) +
                                " Hz vs " + format_double(virtual_set.sample_rate_hz) + " Hz)");
  }
  const auto real_ids = real.gyro_ids();
  for (const auto& id : virtual_set.gyro_ids()) {
    if (std::find(real_ids.begin(), real_ids.end(), id) != real_ids.end()) {
      throw std::invalid_argument("merge: gyro id '" + id + "' present in both datasets");
    }
  }
  Dataset out = real;
  out.recordings.insert(out.recordings.end(), virtual_set.recordings.begin(), virtual_set.recordings.end());
  return out;
}

Dataset select_gyros(const Dataset& dataset, std::size_t n) {
  const auto ids = dataset.gyro_ids();
  if (n > ids.size()) {
    throw std::invalid_argument("select_gyros: asked for " + std::to_string(n) + " gyros, dataset has " +
                                std::to_string(ids.size()));
  }
  const std::set<std::string> keep(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n));
  Dataset out = dataset;
  out.recordings.clear();
  for (const auto& r : dataset.recordings) {
    if (keep.contains(r.gyro_id)) out.recordings.push_back(r);
  }
  return out;
}

// --- split -----------------------------------------------------------------------

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::pair<Dataset, Dataset> split_train_test(const Dataset& dataset, const SplitPolicy& policy) {
  if (!policy.test_indices && !(policy.train_fraction > 0.0 && policy.train_fraction < 1.0)) {
    throw std::invalid_argument("split: train fraction must lie in (0, 1)");
  }
  Dataset train = dataset;
  Dataset test = dataset;
  train.recordings.clear();
  test.recordings.clear();

  for (const auto& gyro_id : dataset.gyro_ids()) {
    std::vector<const GyroRecording*> recs;
    for (const auto& r : dataset.recordings) {
      if (r.gyro_id == gyro_id) recs.push_back(&r);
    }
    const bool virtual_gyro = recs.front()->provenance == Provenance::kVirtual;
    if (virtual_gyro && !policy.virtual_in_test) {
      for (const auto* r : recs) train.recordings.push_back(*r);
      continue;
    }

    std::vector<bool> is_test(recs.size(), false);
    if (policy.test_indices) {
      const std::set<std::size_t> held(policy.test_indices->begin(), policy.test_indices->end());
      for (std::size_t i = 0; i < recs.size(); ++i) is_test[i] = held.contains(recs[i]->recording_index);
    } else {
      const std::size_t n = recs.size();
      const auto n_train = static_cast<std::size_t>(std::llround(policy.train_fraction * static_cast<double>(n)));
      if (n_train == 0 || n_train >= n) {
        throw std::invalid_argument("split: fraction " + format_double(policy.train_fraction) + " leaves gyro '" +
                                    gyro_id + "' (" + std::to_string(n) + " recordings) with an empty " +
                                    (n_train == 0 ? "train" : "test") + " set");
      }
      std::vector<std::size_t> order(n);
      for (std::size_t i = 0; i < n; ++i) order[i] = i;
      RandomStream rng(derive_seed({policy.seed, fnv1a(gyro_id)}));
      for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
      for (std::size_t i = n_train; i < n; ++i) is_test[order[i]] = true;
    }
    for (std::size_t i = 0; i < recs.size(); ++i) {
      (is_test[i] ? test : train).recordings.push_back(*recs[i]);
    }
  }
  if (test.empty()) throw std::invalid_argument("split: test set is empty");
  return {std::move(train), std::move(test)};
}

}  // namespace gyrocal
