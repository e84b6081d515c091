#include <doctest.h>

#include <cmath>
#include <vector>

#include "gyrocal/calib.hpp"
#include "gyrocal/dataset.hpp"
#include "gyrocal/error_model.hpp"
#include "gyrocal/rng.hpp"
#include "gyrocal/stats.hpp"
#include "test_util.hpp"

using namespace gyrocal;

namespace {

GyroRecording from_x(const std::vector<double>& xs, double rate = 1.0) {
  GyroRecording r;
  r.sample_rate_hz = rate;
  r.gyro_id = "g";
  for (double x : xs) r.samples.push_back({x, 0.0, 0.0});
  return r;
}

}  // namespace

TEST_SUITE("calib") {
  TEST_CASE("zero-order bias on simple inputs") {
    GyroRecording c;
    c.sample_rate_hz = 100;
    c.samples.assign(500, {0.5, 0.5, 0.5});
    CHECK(zero_order_bias(c, 0.3) == AngularRate{0.5, 0.5, 0.5});
    CHECK(zero_order_bias(c, 5.0) == AngularRate{0.5, 0.5, 0.5});

    CHECK(zero_order_bias(from_x({1, 2, 3, 4}), 4.0).x == 2.5);
    CHECK(zero_order_bias(from_x({1, 2, 3, 4}), 2.0).x == 1.5);
  }

  TEST_CASE("window outside the recording is rejected") {
    const auto r = from_x({1, 2, 3, 4});
    CHECK_THROWS_AS(zero_order_bias(r, 4.6), std::invalid_argument);
    CHECK_THROWS_AS(zero_order_bias(r, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(zero_order_bias(r, -1.0), std::invalid_argument);
  }

  TEST_CASE("full-duration estimate equals ground truth exactly") {
    const auto rec = simulate_stationary_recording({0.2, -0.1, 0.3}, {0.04, 0.04, 0.04}, 13000, 150.0, 4);
    CHECK(zero_order_bias(rec, rec.duration_s()) == ground_truth_bias(rec));
  }

  TEST_CASE("estimate spread at a 10% window matches the standard error") {
    RunningStat err;
    for (std::uint64_t k = 0; k < 100; ++k) {
      const auto rec =
          simulate_stationary_recording({0.1, 0.1, 0.1}, {0.04, 0.04, 0.04}, 13000, 150.0, derive_seed({12, k}));
      err.push(zero_order_bias(rec, 1300.0 / 150.0).x - 0.1);
    }
    const double expected = 0.04 / std::sqrt(1300.0);
    CHECK(std::abs(err.stddev() - expected) < 0.15 * expected);
  }

  TEST_CASE("running average of [1, 2, 3]") {
    const auto curve = running_average_curve(from_x({1, 2, 3}, 2.0));
    REQUIRE(curve.size() == 3);
    CHECK(curve.values[0].x == 1.0);
    CHECK(curve.values[1].x == 1.5);
    CHECK(curve.values[2].x == 2.0);
    CHECK(curve.times == std::vector<double>{0.0, 0.5, 1.0});
  }

  TEST_CASE("constant recording gives a constant curve") {
    GyroRecording c;
    c.sample_rate_hz = 10;
    c.samples.assign(50, {0.25, -1.5, 3.0});
    for (const auto& v : running_average_curve(c).values) CHECK(v == AngularRate{0.25, -1.5, 3.0});
  }

  TEST_CASE("running average: recurrence, endpoint, shift equivariance") {
    const auto rec = simulate_stationary_recording({0.2, -0.1, 0.3}, {0.04, 0.04, 0.04}, 13000, 150.0, 6);
    const auto curve = running_average_curve(rec);
    const AngularRate gt = ground_truth_bias(rec);
    for (std::size_t a = 0; a < 3; ++a) CHECK(std::abs(curve.values.back()[a] - gt[a]) < 1e-12);

    double worst = 0.0;
    for (std::size_t k = 1; k < curve.size(); ++k) {
      for (std::size_t a = 0; a < 3; ++a) {
        const double expected =
            curve.values[k - 1][a] + (rec.samples[k][a] - curve.values[k - 1][a]) / static_cast<double>(k + 1);
        worst = std::max(worst, std::abs(curve.values[k][a] - expected));
      }
    }
    CHECK(worst <= 1e-12);

    // Adding c to every sample shifts the estimates by c (up to rounding).
    const AngularRate c{0.75, 0.75, 0.75};
    auto shifted = rec;
    for (auto& s : shifted.samples) s = s + c;
    const auto curve2 = running_average_curve(shifted);
    double drift = 0.0;
    for (std::size_t k = 0; k < curve.size(); k += 97) {
      for (std::size_t a = 0; a < 3; ++a) drift = std::max(drift, std::abs(curve2.values[k][a] - curve.values[k][a] - c[a]));
    }
    CHECK(drift < 1e-12);
    const AngularRate z1 = zero_order_bias(shifted, 3.0);
    const AngularRate z0 = zero_order_bias(rec, 3.0);
    for (std::size_t a = 0; a < 3; ++a) CHECK(std::abs(z1[a] - z0[a] - c[a]) < 1e-12);
  }

  TEST_CASE("MG average with one gyro equals the single-gyro curve") {
    const auto rec = simulate_stationary_recording({0.2, -0.1, 0.3}, {0.04, 0.04, 0.04}, 500, 150.0, 6);
    const std::vector<GyroRecording> one{rec};
    const auto mg = mg_running_average(one);
    const auto single = running_average_curve(rec);
    CHECK(mg.times == single.times);
    CHECK(mg.values == single.values);
  }

  TEST_CASE("MG average of identical noise-free gyros") {
    GyroRecording c;
    c.sample_rate_hz = 10;
    c.samples.assign(30, {0.1, 0.2, 0.3});
    const std::vector<GyroRecording> ten(10, c);
    const auto mg = mg_running_average(ten);
    for (const auto& v : mg.values) {
      CHECK(v.x == doctest::Approx(0.1).epsilon(1e-14));
      CHECK(v.y == doctest::Approx(0.2).epsilon(1e-14));
      CHECK(v.z == doctest::Approx(0.3).epsilon(1e-14));
    }
  }

  TEST_CASE("MG average converges to the mean of member biases") {
    std::vector<GyroRecording> recs;
    recs.push_back(simulate_stationary_recording({0.1, 0, 0}, {0, 0, 0}, 10, 10.0, 1));
    recs.push_back(simulate_stationary_recording({0.3, 0, 0}, {0, 0, 0}, 10, 10.0, 2));
    CHECK(mg_running_average(recs).values.back().x == doctest::Approx(0.2).epsilon(1e-14));
  }

  TEST_CASE("MG rejects mismatched inputs") {
    std::vector<GyroRecording> recs;
    recs.push_back(simulate_stationary_recording({}, {0, 0, 0}, 10, 10.0, 1));
    recs.push_back(simulate_stationary_recording({}, {0, 0, 0}, 11, 10.0, 2));
    CHECK_THROWS_AS(mg_running_average(recs), std::invalid_argument);
    CHECK_THROWS_AS(mg_running_average(std::span<const GyroRecording>{}), std::invalid_argument);
    recs[1] = simulate_stationary_recording({}, {0, 0, 0}, 10, 20.0, 2);
    CHECK_THROWS_AS(mg_running_average(recs), std::invalid_argument);
  }

  TEST_CASE("MG variance scales as 1/(N n)") {
    const double sigma = 0.04;
    const std::size_t n_t = 150;  // curve value at t = 1 s
    for (std::size_t n_gyros : {1u, 4u, 10u}) {
      RunningStat stat;
      for (std::uint64_t trial = 0; trial < 200; ++trial) {
        std::vector<GyroRecording> recs;
        for (std::uint64_t g = 0; g < n_gyros; ++g) {
          recs.push_back(simulate_stationary_recording({0.2, 0.2, 0.2}, {sigma, sigma, sigma}, n_t, 150.0,
                                                       derive_seed({77, n_gyros, trial, g})));
        }
        stat.push(mg_running_average(recs).values[n_t - 1].x);
      }
      const double expected = sigma / std::sqrt(static_cast<double>(n_gyros * n_t));
      CAPTURE(n_gyros);
      CHECK(std::abs(stat.stddev() - expected) < 0.2 * expected);
    }
  }

  TEST_CASE("convergence CSV export") {
    testutil::TempDir dir;
    write_convergence_csv(running_average_curve(from_x({1, 2}, 2.0)), dir / "c.csv");
    CHECK(testutil::slurp(dir / "c.csv") == "time_s,x_dps,y_dps,z_dps\n0,1,0,0\n0.5,1.5,0,0\n");
  }
}
