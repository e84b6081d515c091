#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "gyrocal/dataset.hpp"
#include "gyrocal/error_model.hpp"
#include "gyrocal/rng.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace gyrocal;
using testutil::TempDir;

namespace {

const char* kHeader = "t_s,gyro_x_dps,gyro_y_dps,gyro_z_dps\n";

std::filesystem::path write_manifest(const TempDir& dir, const std::string& csv_body, double rate = 100.0) {
  testutil::write_file(dir / "b/g1/recording_0.csv", std::string(kHeader) + csv_body);
  const std::string manifest = R"({"brand": "b", "sample_rate_hz": )" + std::to_string(rate) +
                               R"(, "gyros": [{"gyro_id": "g1", "recordings": ["g1/recording_0.csv"]}]})";
  testutil::write_file(dir / "b/manifest.json", manifest);
  return dir / "b/manifest.json";
}

VirtualDatasetConfig small_config(std::size_t gyros, std::size_t recs, std::size_t n) {
  VirtualDatasetConfig c;
  c.n_gyros = gyros;
  c.recordings_per_gyro = recs;
  c.n_samples = n;
  c.prior = BiasPrior::uniform({-0.5, -0.5, -0.5}, {0.5, 0.5, 0.5});
  c.sample_rate_hz = 150.0;
  return c;
}

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("ingest a two-row recording") {
    TempDir dir;
    const auto ds = ingest_csv(write_manifest(dir, "0,0.1,0.2,0.3\n0.01,0.1,0.2,0.3\n"));
    REQUIRE(ds.recordings.size() == 1);
    const auto& r = ds.recordings[0];
    CHECK(r.size() == 2);
    CHECK(r.samples[0] == AngularRate{0.1, 0.2, 0.3});
    CHECK(r.samples[1] == r.samples[0]);
    CHECK(r.gyro_id == "g1");
    CHECK(r.sample_rate_hz == 100.0);
    CHECK(ds.brand == "b");
    CHECK(r.provenance == Provenance::kReal);
  }

  TEST_CASE("malformed cell is reported with its line") {
    TempDir dir;
    const auto manifest = write_manifest(dir, "0,0.1,0.2,0.3\n0.01,0.1,0.2,abc\n");
    try {
      ingest_csv(manifest);
      FAIL("expected LoadError");
    } catch (const LoadError& e) {
      CHECK(e.line() == 3);
      CHECK(e.file().filename() == "recording_0.csv");
      CHECK(std::string(e.what()).find("gyro_z_dps") != std::string::npos);
    }
  }

  TEST_CASE("load errors: missing file, bad header, time going backwards, wrong rate") {
    TempDir dir;
    testutil::write_file(dir / "m.json",
                         R"({"brand": "b", "sample_rate_hz": 100, "gyros": [{"gyro_id": "g", "recordings": ["nope.csv"]}]})");
    CHECK_THROWS_AS(ingest_csv(dir / "m.json"), LoadError);
    CHECK_THROWS_AS(ingest_csv(dir / "absent.json"), LoadError);

    TempDir d2;
    testutil::write_file(d2 / "b/g1/recording_0.csv", "time,x,y,z\n0,1,2,3\n");
    testutil::write_file(d2 / "b/manifest.json",
                         R"({"brand": "b", "sample_rate_hz": 100, "gyros": [{"gyro_id": "g1", "recordings": ["g1/recording_0.csv"]}]})");
    CHECK_THROWS_AS(ingest_csv(d2 / "b/manifest.json"), LoadError);

    TempDir d3;
    try {
      ingest_csv(write_manifest(d3, "0,1,1,1\n0.01,1,1,1\n0.01,1,1,1\n"));
      FAIL("expected LoadError");
    } catch (const LoadError& e) {
      CHECK(e.line() == 4);
    }

    TempDir d4;
    CHECK_THROWS_AS(ingest_csv(write_manifest(d4, "0,1,1,1\n0.5,1,1,1\n")), LoadError);

    TempDir d5;
    CHECK_THROWS_AS(ingest_csv(write_manifest(d5, "0,1,1\n")), LoadError);
  }

  TEST_CASE("duplicate gyro ids are rejected") {
    TempDir dir;
    testutil::write_file(dir / "b/g/recording_0.csv", std::string(kHeader) + "0,1,1,1\n");
    testutil::write_file(dir / "b/manifest.json", R"({"brand": "b", "sample_rate_hz": 100, "gyros": [
        {"gyro_id": "g", "recordings": ["g/recording_0.csv"]},
        {"gyro_id": "g", "recordings": ["g/recording_0.csv"]}]})");
    CHECK_THROWS_AS(ingest_csv(dir / "b/manifest.json"), LoadError);
  }

  TEST_CASE("serialize then ingest preserves samples and metadata") {
    TempDir dir;
    const auto ds = generate_virtual_dataset(small_config(3, 4, 300), 17);
    const auto manifest = write_dataset(ds, dir.path());
    CHECK(manifest == manifest_path_for(dir.path(), "virtual"));
    const auto back = ingest_csv(manifest);

    CHECK(back.brand == ds.brand);
    CHECK(back.sample_rate_hz == ds.sample_rate_hz);
    CHECK(back.provenance == Provenance::kVirtual);
    CHECK(back.noise_std == ds.noise_std);
    CHECK(back.master_seed == ds.master_seed);
    CHECK(back.gyro_ids() == ds.gyro_ids());
    REQUIRE(back.recordings.size() == ds.recordings.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < ds.recordings.size(); ++i) {
      const auto& a = ds.recordings[i];
      const auto& b = back.recordings[i];
      CHECK(a.id() == b.id());
      CHECK(a.seed == b.seed);
      REQUIRE(a.size() == b.size());
      for (std::size_t k = 0; k < a.size(); ++k) {
        for (std::size_t ax = 0; ax < 3; ++ax) worst = std::max(worst, std::abs(a.samples[k][ax] - b.samples[k][ax]));
      }
    }
    CHECK(worst <= 1e-9);
  }

  TEST_CASE("ground truth is the per-axis mean") {
    GyroRecording r;
    r.sample_rate_hz = 10;
    r.samples.assign(7, {0.5, -0.1, 0});
    CHECK(ground_truth_bias(r) == AngularRate{0.5, -0.1, 0});

    r.samples = {{1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
    CHECK(ground_truth_bias(r).x == 2.0);

    r.samples.clear();
    CHECK_THROWS_AS(ground_truth_bias(r), std::invalid_argument);
  }

  TEST_CASE("ground truth agrees with compensated summation") {
    const auto rec = simulate_stationary_recording({0.2, -0.3, 0.01}, {0.04, 0.04, 0.04}, 13000, 150.0, 555);
    const AngularRate gt = ground_truth_bias(rec);
    for (std::size_t a = 0; a < 3; ++a) {
      std::vector<double> xs;
      for (const auto& s : rec.samples) xs.push_back(s[a]);
      CHECK(std::abs(gt[a] - oracle::compensated_mean(xs)) < 1e-12);
    }
  }

  TEST_CASE("per-IMU windowing at full scale") {
    const auto rec = simulate_stationary_recording({0.1, 0.2, 0.3}, {0.04, 0.04, 0.04}, 13000, 150.0, 1, "g", 0);
    const std::vector<GyroRecording> recs{rec};
    const auto ex = make_windows(recs, 10.0, ChannelMode::kPerImu);
    REQUIRE(ex.size() == 1);
    CHECK(ex[0].window.rows() == 3);
    CHECK(ex[0].window.cols() == 1500);
    const AngularRate gt = ground_truth_bias(rec);
    CHECK(ex[0].label == std::vector<double>{gt.x, gt.y, gt.z});
    for (std::size_t k = 0; k < 1500; ++k) {
      for (std::size_t a = 0; a < 3; ++a) CHECK_EQ(ex[0].window(a, k), rec.samples[k][a]);
    }
  }

  TEST_CASE("stacked windowing: 4 IMUs give 12 channels in gyro-major order") {
    auto ds = generate_virtual_dataset(small_config(4, 2, 200), 3);
    const auto groups = group_consecutive(ds.gyro_ids(), 4);
    const auto ex = make_windows(ds.recordings, 1.0, ChannelMode::kStacked, groups);
    REQUIRE(ex.size() == 2);
    CHECK(ex[0].window.rows() == 12);
    CHECK(ex[0].label.size() == 12);
    CHECK(ex[0].window.cols() == 150);
    const auto ids = ds.gyro_ids();
    for (std::size_t g = 0; g < 4; ++g) {
      const auto rec = ds.recordings_of(ids[g])[1];
      const AngularRate gt = ground_truth_bias(rec);
      for (std::size_t a = 0; a < 3; ++a) {
        CHECK(ex[1].label[3 * g + a] == gt[a]);
        CHECK(ex[1].window(3 * g + a, 17) == rec.samples[17][a]);
      }
    }

    // permuting the IMU order permutes channel blocks the same way
    std::vector<std::vector<std::string>> swapped{{ids[2], ids[0], ids[3], ids[1]}};
    const auto ex2 = make_windows(ds.recordings, 1.0, ChannelMode::kStacked, swapped);
    const std::size_t perm[4] = {2, 0, 3, 1};
    for (std::size_t g = 0; g < 4; ++g) {
      for (std::size_t a = 0; a < 3; ++a) {
        CHECK(ex2[0].label[3 * g + a] == ex[0].label[3 * perm[g] + a]);
        CHECK(ex2[0].window.row(3 * g + a)[5] == ex[0].window.row(3 * perm[g] + a)[5]);
      }
    }
  }

  TEST_CASE("full-length window: label equals the window mean") {
    const auto rec = simulate_stationary_recording({0.1, 0.2, 0.3}, {0.04, 0.04, 0.04}, 300, 150.0, 9);
    const std::vector<GyroRecording> recs{rec};
    const auto ex = make_windows(recs, 2.0, ChannelMode::kPerImu);
    REQUIRE(ex[0].window.cols() == 300);
    for (std::size_t a = 0; a < 3; ++a) {
      double s = 0.0;
      for (double v : ex[0].window.row(a)) s += v;
      CHECK(ex[0].label[a] == doctest::Approx(s / 300).epsilon(1e-12));
    }
  }

  TEST_CASE("windowing errors") {
    const auto rec = simulate_stationary_recording({}, {0.04, 0.04, 0.04}, 100, 100.0, 9, "a", 0);
    auto other = simulate_stationary_recording({}, {0.04, 0.04, 0.04}, 90, 100.0, 9, "b", 0);
    const std::vector<GyroRecording> recs{rec, other};
    CHECK_THROWS_AS(make_windows(recs, 1.5, ChannelMode::kPerImu), std::invalid_argument);
    CHECK_THROWS_AS(make_windows(recs, 0.5, ChannelMode::kStacked, {{"a", "b"}}), std::invalid_argument);
    CHECK_THROWS_AS(make_windows(recs, 0.5, ChannelMode::kStacked), std::invalid_argument);
    CHECK_THROWS_AS(group_consecutive({"a", "b", "c"}, 2), std::invalid_argument);
  }

  TEST_CASE("virtual dataset shape and bias reuse") {
    const auto ds = generate_virtual_dataset(small_config(5, 3, 50), 21);
    CHECK(ds.recordings.size() == 15);
    CHECK(ds.gyro_ids().size() == 5);
    for (const auto& id : ds.gyro_ids()) {
      const auto recs = ds.recordings_of(id);
      CHECK(recs.size() == 3);
      CHECK(recs[0].samples != recs[1].samples);
    }

    auto cfg = small_config(1, 1, 10);
    cfg.noise_std = {0, 0, 0};
    const auto flat = generate_virtual_dataset(cfg, 5);
    const AngularRate bias = sample_virtual_bias(cfg.prior, derive_seed({5, 0, kBiasStream}));
    for (const auto& s : flat.recordings[0].samples) CHECK(s == bias);
  }

  TEST_CASE("full-scale virtual configuration size") {
    // 24 gyros x 100 recordings x 13,000 samples; counted without generating.
    const VirtualDatasetConfig cfg;
    CHECK(cfg.n_gyros * cfg.recordings_per_gyro * cfg.n_samples == 31'200'000u);
  }

  TEST_CASE("virtual generation is byte-identical for one seed") {
    TempDir a;
    TempDir b;
    write_dataset(generate_virtual_dataset(small_config(2, 2, 64), 42), a.path());
    write_dataset(generate_virtual_dataset(small_config(2, 2, 64), 42), b.path());
    CHECK(testutil::tree_bytes(a.path()) == testutil::tree_bytes(b.path()));
  }

  TEST_CASE("merge real and virtual pools") {
    auto real_cfg = small_config(3, 4, 20);
    real_cfg.brand = "sparkfun";
    real_cfg.gyro_prefix = "r";
    auto real = generate_virtual_dataset(real_cfg, 1);
    real.provenance = Provenance::kReal;
    for (auto& r : real.recordings) r.provenance = Provenance::kReal;
    const auto virt = generate_virtual_dataset(small_config(24, 2, 20), 2);

    const auto merged = merge(real, virt);
    CHECK(merged.gyro_ids().size() == 27);
    CHECK(merged.recordings.size() == real.recordings.size() + virt.recordings.size());
    CHECK(merged.recordings.front().provenance == Provenance::kReal);
    CHECK(merged.recordings.back().provenance == Provenance::kVirtual);

    const auto same = merge(real, Dataset{});
    CHECK(same.recordings.size() == real.recordings.size());
    CHECK(same.gyro_ids() == real.gyro_ids());

    auto other_rate = small_config(1, 1, 20);
    other_rate.sample_rate_hz = 120.0;
    CHECK_THROWS_AS(merge(real, generate_virtual_dataset(other_rate, 3)), std::invalid_argument);
  }

  TEST_CASE("split: 94/6 per gyro, disjoint, reproducible") {
    auto cfg = small_config(2, 100, 5);
    auto ds = generate_virtual_dataset(cfg, 8);
    for (auto& r : ds.recordings) r.provenance = Provenance::kReal;

    SplitPolicy policy;
    policy.train_fraction = 0.94;
    policy.seed = 3;
    const auto [train, test] = split_train_test(ds, policy);
    for (const auto& id : ds.gyro_ids()) {
      CHECK(train.recordings_of(id).size() == 94);
      CHECK(test.recordings_of(id).size() == 6);
    }
    std::set<std::string> train_ids;
    for (const auto& r : train.recordings) train_ids.insert(r.id());
    for (const auto& r : test.recordings) CHECK_FALSE(train_ids.contains(r.id()));

    const auto [train2, test2] = split_train_test(ds, policy);
    REQUIRE(test2.recordings.size() == test.recordings.size());
    for (std::size_t i = 0; i < test.recordings.size(); ++i) CHECK(test.recordings[i].id() == test2.recordings[i].id());

    policy.seed = 4;
    const auto [train3, test3] = split_train_test(ds, policy);
    bool differs = false;
    for (std::size_t i = 0; i < test.recordings.size(); ++i) differs |= test.recordings[i].id() != test3.recordings[i].id();
    CHECK(differs);
  }

  TEST_CASE("split rejects degenerate fractions") {
    auto ds = generate_virtual_dataset(small_config(1, 10, 5), 8);
    for (auto& r : ds.recordings) r.provenance = Provenance::kReal;
    SplitPolicy p;
    p.train_fraction = 0.99;  // rounds to 10 of 10
    CHECK_THROWS_AS(split_train_test(ds, p), std::invalid_argument);
    p.train_fraction = 1.0;
    CHECK_THROWS_AS(split_train_test(ds, p), std::invalid_argument);
    p.train_fraction = 0.0;
    CHECK_THROWS_AS(split_train_test(ds, p), std::invalid_argument);
  }

  TEST_CASE("virtual recordings never reach the test set") {
    auto real_cfg = small_config(2, 10, 5);
    real_cfg.gyro_prefix = "r";
    auto real = generate_virtual_dataset(real_cfg, 1);
    real.provenance = Provenance::kReal;
    for (auto& r : real.recordings) r.provenance = Provenance::kReal;
    const auto merged = merge(real, generate_virtual_dataset(small_config(3, 10, 5), 2));

    SplitPolicy p;
    p.train_fraction = 0.8;
    const auto [train, test] = split_train_test(merged, p);
    for (const auto& r : test.recordings) CHECK(r.provenance == Provenance::kReal);
    CHECK(test.recordings.size() == 4);
    CHECK(train.recordings.size() == 16 + 30);

    p.test_indices = std::vector<std::size_t>{0, 9};
    const auto [tr2, te2] = split_train_test(merged, p);
    CHECK(te2.recordings.size() == 4);
    for (const auto& r : te2.recordings) CHECK((r.recording_index == 0 || r.recording_index == 9));
  }
}
