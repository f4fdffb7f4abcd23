#include "bilipren/plants.hpp"

#include <cmath>
#include <random>

#include "bilipren/errors.hpp"

namespace bilipren {

double gamma(double d) {
  if (d <= -1.0) return d + 0.75;
  if (d >= 1.0) return d - 0.75;
  return 0.25 * d;
}

namespace {

/// Number of whole steps of length h in span, tolerating round-off.
Eigen::Index whole_steps(double span, double h, const char* what) {
  const double r = span / h;
  const double k = std::round(r);
  if (std::abs(r - k) > 1e-9 * std::max(1.0, r)) {
    throw ArgumentError(std::string(what) + " must be an integer multiple of the step");
  }
  return static_cast<Eigen::Index>(k);
}

template <class F>
Vec rk4(const F& f, const Vec& x, double u, double h) {
  const Vec k1 = f(x, u);
  const Vec k2 = f(x + 0.5 * h * k1, u);
  const Vec k3 = f(x + 0.5 * h * k2, u);
  const Vec k4 = f(x + h * k3, u);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

void check_input(const Mat& u_seq, const char* who) {
  if (u_seq.cols() != 1) throw ArgumentError(std::string(who) + ": input must be T x 1");
  if (!u_seq.allFinite()) throw ArgumentError(std::string(who) + ": input not finite");
}

}  // namespace

void MsdConfig::validate() const {
  if (n_carts < 1) throw ArgumentError("MsdConfig: need at least one cart");
  if (masses.size() != n_carts || spring_consts.size() != n_carts ||
      damping_consts.size() != n_carts) {
    throw ArgumentError("MsdConfig: one mass, spring and damper per cart");
  }
  if (!((masses.array() > 0).all() && (spring_consts.array() > 0).all() &&
        (damping_consts.array() > 0).all())) {
    throw ArgumentError("MsdConfig: physical constants must be positive");
  }
  if (!(dt > 0.0) || !(duration > 0.0) || substeps < 1) {
    throw ArgumentError("MsdConfig: dt, duration and substeps must be positive");
  }
}

Eigen::Index MsdConfig::samples() const { return whole_steps(duration, dt, "MSD duration"); }

MsdResult msd_simulate(const MsdConfig& cfg, const Mat& u_seq) {
  cfg.validate();
  check_input(u_seq, "msd_simulate");
  const int N = cfg.n_carts;
  auto f = [&](const Vec& s, double u) {
    Vec ds(2 * N);
    // Spring/damper i connects cart i to cart i-1 (or the wall for i = 0).
    Vec link_force(N);
    for (int i = 0; i < N; ++i) {
      const double d = s(i) - (i > 0 ? s(i - 1) : 0.0);
      const double v = s(N + i) - (i > 0 ? s(N + i - 1) : 0.0);
      link_force(i) = cfg.spring_consts(i) * gamma(d) + cfg.damping_consts(i) * v;
    }
    for (int i = 0; i < N; ++i) {
      double F = -link_force(i);
      if (i + 1 < N) F += link_force(i + 1);
      if (i == 0) F += u;
      ds(i) = s(N + i);
      ds(N + i) = F / cfg.masses(i);
    }
    return ds;
  };

  const Eigen::Index T = u_seq.rows();
  const double h = cfg.dt / cfg.substeps;
  MsdResult r{Mat(T, 1), Mat(T + 1, 2 * N)};
  Vec s = Vec::Zero(2 * N);
  r.x.row(0) = s.transpose();
  for (Eigen::Index t = 0; t < T; ++t) {
    for (int k = 0; k < cfg.substeps; ++k) s = rk4(f, s, u_seq(t, 0), h);
    if (!s.allFinite()) {
      throw SimulationError("msd_simulate: state left the finite range", static_cast<std::size_t>(t));
    }
    r.x.row(t + 1) = s.transpose();
    r.y(t, 0) = s(N - 1);
  }
  return r;
}

void DelayPlantConfig::validate() const {
  if (!(dt > 0.0) || !(sample_period > 0.0) || !(duration > 0.0) || !(delay >= 0.0)) {
    throw ArgumentError("DelayPlantConfig: dt, sample_period, duration must be positive");
  }
  if (!std::isfinite(gain) || !std::isfinite(x0)) {
    throw ArgumentError("DelayPlantConfig: gain and x0 must be finite");
  }
  substeps();
  delay_steps();
  samples();
}

Eigen::Index DelayPlantConfig::samples() const {
  return whole_steps(duration, sample_period, "delay-plant duration");
}

Eigen::Index DelayPlantConfig::substeps() const {
  const Eigen::Index k = whole_steps(sample_period, dt, "sample period");
  if (k < 1) throw ArgumentError("DelayPlantConfig: sample period shorter than dt");
  return k;
}

Eigen::Index DelayPlantConfig::delay_steps() const {
  return whole_steps(delay, dt, "delay");
}

Mat delay_simulate(const DelayPlantConfig& cfg, const Mat& u_seq) {
  cfg.validate();
  check_input(u_seq, "delay_simulate");
  const Eigen::Index T = u_seq.rows();
  const Eigen::Index S = cfg.substeps();
  const Eigen::Index D = cfg.delay_steps();
  // Ring buffer of the fine-grid input; the delayed input is constant over
  // each integration step because the delay is a whole number of steps.
  std::vector<double> ring(static_cast<std::size_t>(D + 1), 0.0);
  std::size_t head = 0;
  auto f = [&](const Vec& x, double u) {
    Vec dx(1);
    dx(0) = cfg.gain * std::tanh(x(0)) + u;
    return dx;
  };
  Mat y(T, 1);
  Vec x = Vec::Constant(1, cfg.x0);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index k = 0; k < S; ++k) {
      ring[head] = u_seq(t, 0);
      const double delayed = ring[(head + 1) % ring.size()];
      head = (head + 1) % ring.size();
      x = rk4(f, x, D == 0 ? u_seq(t, 0) : delayed, cfg.dt);
    }
    if (!x.allFinite()) {
      throw SimulationError("delay_simulate: state left the finite range",
                            static_cast<std::size_t>(t));
    }
    y(t, 0) = x(0);
  }
  return y;
}

void SignalConfig::validate() const {
  if (!(tau > 0.0) || !(sigma > 0.0)) throw ArgumentError("SignalConfig: tau, sigma positive");
}

PiecewiseSignal piecewise_signal(const SignalConfig& cfg, double duration, double dt) {
  cfg.validate();
  if (!(dt > 0.0) || !(duration > 0.0)) throw ArgumentError("piecewise_input: bad grid");
  const Eigen::Index T = whole_steps(duration, dt, "signal duration");
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> hold(0.0, cfg.tau);
  std::normal_distribution<double> level(0.0, cfg.sigma);
  PiecewiseSignal s;
  s.u.resize(T, 1);
  double t_next = 0.0;
  double value = 0.0;
  for (Eigen::Index t = 0; t < T; ++t) {
    const double now = static_cast<double>(t) * dt;
    while (now >= t_next) {
      value = level(rng);
      const double len = hold(rng);
      s.levels.push_back(value);
      s.holds.push_back(len);
      t_next += len;
    }
    s.u(t, 0) = value;
  }
  return s;
}

Mat piecewise_input(const SignalConfig& cfg, double duration, double dt) {
  return piecewise_signal(cfg, duration, dt).u;
}

Mat gaussian_input(Eigen::Index T, Eigen::Index m, double sigma, std::uint64_t seed) {
  if (T < 0 || m < 1 || !(sigma > 0.0)) throw ArgumentError("gaussian_input: bad arguments");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  Mat u(T, m);
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index j = 0; j < m; ++j) u(t, j) = normal(rng);
  return u;
}

Mat add_noise_snr(const Mat& y, std::optional<double> snr_db, std::uint64_t seed) {
  if (!snr_db) return y;
  if (!std::isfinite(*snr_db)) throw ArgumentError("add_noise_snr: snr must be finite");
  if (y.size() == 0) throw ArgumentError("add_noise_snr: empty signal");
  const double power = y.squaredNorm() / static_cast<double>(y.size());
  if (!(power > 0.0)) throw ArgumentError("add_noise_snr: signal is identically zero");
  const double noise_power = power / std::pow(10.0, *snr_db / 10.0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat noise(y.rows(), y.cols());
  for (Eigen::Index i = 0; i < noise.rows(); ++i)
    for (Eigen::Index j = 0; j < noise.cols(); ++j) noise(i, j) = normal(rng);
  // Rescale the realized noise so the SNR holds for this draw, not just in
  // expectation.
  noise *= std::sqrt(noise_power * static_cast<double>(y.size()) / noise.squaredNorm());
  Mat out = y + noise;
  return out;
}

}  // namespace bilipren
