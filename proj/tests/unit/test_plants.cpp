#include <algorithm>
#include <cmath>

#include "doctest.h"

#include "bilipren/dataset.hpp"
#include "bilipren/errors.hpp"
#include "bilipren/plants.hpp"

using namespace bilipren;

TEST_CASE("spring characteristic") {
  CHECK(bilipren::gamma(0.5) == doctest::Approx(0.125));
  CHECK(bilipren::gamma(2.0) == doctest::Approx(1.25));
  CHECK(bilipren::gamma(-1.0) == doctest::Approx(-0.25));
  CHECK(bilipren::gamma(-1.0 - 1e-12) == doctest::Approx(-0.25));
  CHECK(bilipren::gamma(1.0 + 1e-12) == doctest::Approx(0.25));
}

TEST_CASE("msd at rest stays at rest") {
  const MsdConfig c;
  const MsdResult r = msd_simulate(c, Mat::Zero(c.samples(), 1));
  CHECK(r.y.norm() == 0.0);
  CHECK(r.y.rows() == 1000);
}

TEST_CASE("msd settles at the static force balance") {
  // Only the wall spring carries a constant force on cart 1: Gamma(d) = F.
  auto balance = [](double F) {
    double lo = -100.0, hi = 100.0;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (bilipren::gamma(mid) < F ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };
  MsdConfig c;
  c.duration = 400.0;
  for (double F : {1.0, -0.5, 2.0}) {
    const MsdResult r = msd_simulate(c, Mat::Constant(c.samples(), 1, F));
    CHECK(r.y(r.y.rows() - 1, 0) == doctest::Approx(balance(F)).epsilon(1e-4));
    CHECK((r.y.array() * F).minCoeff() >= -1e-12);
  }
}

TEST_CASE("msd halved step agrees") {
  const MsdConfig c;
  const Mat u = piecewise_input({20.0, 3.0, 0}, c.duration, c.dt);
  MsdConfig fine = c;
  fine.substeps = 2;
  CHECK((msd_simulate(c, u).y - msd_simulate(fine, u).y).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("msd golden trajectory") {
  MsdConfig c;
  c.duration = 2.0;
  const Mat u = piecewise_input({20.0, 3.0, 0}, c.duration, c.dt);
  const Mat y = msd_simulate(c, u).y;
  const double golden[4] = {8.421145315494524e-06, 0.00022782536230387646, 0.0014617961364138217,
                           0.0052027771479403115};
  const Eigen::Index idx[4] = {24, 49, 74, 99};
  for (int i = 0; i < 4; ++i) CHECK(y(idx[i], 0) == doctest::Approx(golden[i]).epsilon(1e-10));
}

TEST_CASE("delay plant basics") {
  const DelayPlantConfig c;
  CHECK(c.samples() == 100);
  CHECK(c.delay_steps() == 100);
  CHECK(delay_simulate(c, Mat::Zero(100, 1)).norm() == 0.0);

  Mat impulse = Mat::Zero(100, 1);
  impulse(0, 0) = 1.0;
  const Mat y = delay_simulate(c, impulse);
  CHECK(y.topRows(10).norm() == 0.0);
  CHECK(y(10, 0) > 0.0);
  CHECK_THROWS_AS(delay_simulate(c, Mat::Zero(50, 2)), ArgumentError);
}

TEST_CASE("delay plant halved step agrees") {
  DelayPlantConfig c;
  const Mat u = gaussian_input(c.samples(), 1, 1.0, 3);
  DelayPlantConfig fine = c;
  fine.dt = 0.005;
  CHECK((delay_simulate(c, u) - delay_simulate(fine, u)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("piecewise signal statistics") {
  const SignalConfig s{20.0, 3.0, 42};
  CHECK(piecewise_input(s, 100.0, 0.1) == piecewise_input(s, 100.0, 0.1));
  const PiecewiseSignal p = piecewise_signal(s, 11000.0, 1.0);
  REQUIRE(p.levels.size() >= 1000);
  const auto n = static_cast<double>(p.levels.size());
  double mean = 0.0, var = 0.0;
  for (double l : p.levels) mean += l / n;
  for (double l : p.levels) var += (l - mean) * (l - mean) / (n - 1);
  CHECK(std::abs(std::sqrt(var) - 3.0) < 0.3);

  std::vector<double> h(p.holds.begin(), p.holds.end() - 1);
  std::sort(h.begin(), h.end());
  double ks = 0.0;
  const auto k = static_cast<double>(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double F = h[i] / 20.0;
    ks = std::max({ks, std::abs(F - static_cast<double>(i) / k), std::abs(F - static_cast<double>(i + 1) / k)});
  }
  CHECK(ks < 1.63 / std::sqrt(k));
}

TEST_CASE("measurement noise at a given SNR") {
  const Mat y = piecewise_input({5.0, 2.0, 1}, 50.0, 0.02);
  const Mat noisy = add_noise_snr(y, 30.0, 7);
  const double rms = y.norm() / std::sqrt(static_cast<double>(y.size()));
  const double noise_rms = (noisy - y).norm() / std::sqrt(static_cast<double>(y.size()));
  CHECK(noise_rms == doctest::Approx(rms / std::pow(10.0, 1.5)).epsilon(1e-12));
  CHECK(add_noise_snr(y, std::nullopt, 7) == y);
  CHECK(add_noise_snr(y, 30.0, 7) == noisy);
  CHECK(add_noise_snr(y, 30.0, 8) != noisy);
}

TEST_CASE("gaussian input is seeded") {
  CHECK(gaussian_input(10, 2, 1.0, 1) == gaussian_input(10, 2, 1.0, 1));
  CHECK(gaussian_input(10, 2, 1.0, 1) != gaussian_input(10, 2, 1.0, 2));
}
