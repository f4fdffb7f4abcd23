// bilipren command-line tool.
//
//   bilipren gen-data  [--config FILE] [--out-dir DIR] [--seed N]
//   bilipren train     [--config FILE] [--out-dir DIR] [--seed N]
//   bilipren verify    MODEL [--out-dir DIR] [--seed N]
//   bilipren invert    [MODEL] [--config FILE] [--out-dir DIR] [--seed N]
//   bilipren factorize [--config FILE] [--out-dir DIR] [--seed N]
//
// --config takes a JSON file or "preset:NAME" (msd, delay, smoke,
// factorization). A file may name a base preset under "preset"; its other
// keys are merged over it.
//
// Exit codes: 0 success, 2 config error, 3 certificate failure,
// 4 numerical failure.

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "bilipren/dataset.hpp"
#include "bilipren/errors.hpp"
#include "bilipren/learn.hpp"
#include "bilipren/probes.hpp"
#include "bilipren/serialize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace bilipren;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr int kConfigError = 2;
constexpr int kCertificateError = 3;
constexpr int kNumericalError = 4;

json preset(const std::string& name) {
  const json msd_data = {{"plant", "msd"},
                         {"batches", 1},
                         {"duration", 20.0},
                         {"dt", 0.02},
                         {"substeps", 1},
                         {"signal", {{"tau", 20.0}, {"sigma", 3.0}}},
                         {"noise_snr_db", nullptr}};
  const json delay_data = {{"plant", "delay"},
                           {"batches", 100},
                           {"duration", 10.0},
                           {"dt", 0.01},
                           {"sample_period", 0.1},
                           {"delay", 1.0},
                           {"gain", 0.9},
                           {"input_std", 1.0}};
  const json invert = {{"batch", 0},
                       {"noise_snr_db", 30.0},
                       {"init_gap", 0.1},
                       {"gain_samples", 100},
                       {"random_probes", 100},
                       {"pgd",
                        {{"init_radius", 0.1},
                         {"pert_radius", 1.0},
                         {"steps", 200},
                         {"step_size", 0.05},
                         {"restarts", 5}}}};
  if (name == "msd") {
    return {{"seed", 0},
            {"data", msd_data},
            {"architecture",
             {{"dims", {{"n", 50}, {"q", 60}, {"m", 1}}},
              {"depth", 4},
              {"mu", 0.1},
              {"nu", 5.0},
              {"activation", "relu"}}},
            {"train", {{"optimizer", "adam"}, {"learning_rate", 0.01}, {"steps", 200}}},
            {"invert", invert}};
  }
  if (name == "delay") return {{"seed", 0}, {"data", delay_data}};
  if (name == "smoke") {
    json data = msd_data;
    data["duration"] = 1.0;
    data["batches"] = 2;
    return {{"seed", 0},
            {"data", data},
            {"architecture",
             {{"dims", {{"n", 2}, {"q", 4}, {"m", 1}}},
              {"depth", 1},
              {"mu", 0.1},
              {"nu", 5.0},
              {"activation", "relu"}}},
            {"train", {{"optimizer", "adam"}, {"learning_rate", 0.01}, {"steps", 100}}},
            {"invert", invert}};
  }
  if (name == "factorization") {
    return {{"seed", 0},
            {"data", delay_data},
            {"architecture",
             {{"dims", {{"n", 3}, {"q", 30}, {"m", 1}}},
              {"depth", 1},
              {"mu", 0.1},
              {"nu", 5.0},
              {"activation", "relu"},
              {"inner_states", 30}}},
            {"train",
             {{"optimizer", "adam"}, {"learning_rate", 0.02}, {"batch_size", 20}, {"steps", 2000}}},
            {"factorize",
             {{"held_out_batches", 20},
              {"nse_threshold", 0.3},
              {"impulse_horizon", 200000},
              {"impulse_csv_samples", 500},
              {"max_lag", 30}}}};
  }
  throw ArgumentError("unknown preset '" + name + "'");
}

json load_config(const std::string& spec, const std::string& fallback_preset) {
  if (spec.empty()) return preset(fallback_preset);
  if (spec.rfind("preset:", 0) == 0) return preset(spec.substr(7));
  json file = load_json(spec);
  if (!file.is_object()) throw ArgumentError("config must be a JSON object");
  if (!file.contains("preset")) return file;
  json base = preset(file.at("preset").get<std::string>());
  file.erase("preset");
  base.merge_patch(file);
  return base;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void write_manifest(const fs::path& dir, const std::string& command, const json& config,
                    std::uint64_t seed) {
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx",
                static_cast<unsigned long long>(fnv1a(config.dump())));
  const json m = {{"command", command},
                  {"config", config},
                  {"config_hash", std::string("fnv1a64:") + hash},
                  {"seed", seed},
                  {"versions",
                   {{"bilipren", kVersion},
                    {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                  std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                  std::to_string(EIGEN_MINOR_VERSION)},
                    {"compiler", __VERSION__}}}};
  save_json(m, dir / "manifest.json");
}

std::uint64_t resolve_seed(json& config, const std::optional<std::uint64_t>& override_seed) {
  if (override_seed) config["seed"] = *override_seed;
  return config.value("seed", std::uint64_t{0});
}

Dataset generate(const json& d, std::uint64_t seed, int batches_override = -1) {
  const std::string plant = d.value("plant", std::string("msd"));
  const int batches = batches_override > 0 ? batches_override : d.value("batches", 1);
  if (plant == "msd") {
    MsdDataConfig c;
    c.plant.duration = d.value("duration", c.plant.duration);
    c.plant.dt = d.value("dt", c.plant.dt);
    c.plant.substeps = d.value("substeps", c.plant.substeps);
    if (d.contains("signal")) {
      c.signal.tau = d["signal"].value("tau", c.signal.tau);
      c.signal.sigma = d["signal"].value("sigma", c.signal.sigma);
    }
    if (d.contains("noise_snr_db") && !d["noise_snr_db"].is_null()) {
      c.noise_snr_db = d["noise_snr_db"].get<double>();
    }
    c.batches = batches;
    c.seed = seed;
    return generate_msd_dataset(c);
  }
  if (plant == "delay") {
    DelayDataConfig c;
    c.plant.duration = d.value("duration", c.plant.duration);
    c.plant.dt = d.value("dt", c.plant.dt);
    c.plant.sample_period = d.value("sample_period", c.plant.sample_period);
    c.plant.delay = d.value("delay", c.plant.delay);
    c.plant.gain = d.value("gain", c.plant.gain);
    c.input_std = d.value("input_std", c.input_std);
    c.batches = batches;
    c.seed = seed;
    return generate_delay_dataset(c);
  }
  throw ArgumentError("unknown plant '" + plant + "'");
}

// "dataset": {"dir", "stem"} reads from disk; otherwise "data" is generated.
Dataset training_data(const json& config, std::uint64_t seed) {
  if (config.contains("dataset")) {
    const json& ds = config["dataset"];
    return read_dataset(ds.at("dir").get<std::string>(), ds.value("stem", std::string("data")));
  }
  return generate(config.at("data"), seed);
}

TrainConfig train_config(const json& t, std::uint64_t seed) {
  TrainConfig c;
  c.optimizer = optimizer_from_string(t.value("optimizer", std::string(to_string(c.optimizer))));
  c.gradient_mode =
      gradient_mode_from_string(t.value("gradient_mode", std::string(to_string(c.gradient_mode))));
  c.learning_rate = t.value("learning_rate", c.learning_rate);
  c.steps = t.value("steps", c.steps);
  c.batch_size = t.value("batch_size", c.batch_size);
  c.fd_step = t.value("fd_step", c.fd_step);
  c.max_halvings = t.value("max_halvings", c.max_halvings);
  c.beta1 = t.value("beta1", c.beta1);
  c.beta2 = t.value("beta2", c.beta2);
  c.checkpoint_every = t.value("checkpoint_every", c.checkpoint_every);
  c.seed = seed;
  c.validate();
  return c;
}

void write_history(const std::vector<double>& history, const fs::path& file) {
  std::ofstream out(file);
  if (!out) throw ArgumentError("cannot write " + file.string());
  out << "step,loss\n";
  for (std::size_t k = 0; k < history.size(); ++k) out << k << "," << format_double(history[k]) << "\n";
}

void write_curve(const BoundReport& rep, const fs::path& file) {
  std::ofstream out(file);
  if (!out) throw ArgumentError("cannot write " + file.string());
  out << "T,measured,theoretical\n";
  for (std::size_t i = 0; i < rep.horizons.size(); ++i) {
    out << rep.horizons[i] << "," << format_double(rep.measured[i]) << ","
        << format_double(rep.theoretical[i]) << "\n";
  }
}

struct Trained {
  Architecture arch;
  TrainResult result;
  Dataset data;
};

Trained run_training(const json& config, std::uint64_t seed, const fs::path& out) {
  Trained t;
  t.arch = architecture_from_json(config.at("architecture"));
  const TrainConfig tc = train_config(config.value("train", json::object()), seed);
  t.data = training_data(config, seed);
  const double scale = config.value("init_scale", 0.1);
  const int report_every = std::max(1, tc.steps / 10);
  t.result = train(t.arch, init_theta(t.arch, seed, scale), t.data, tc, [&](int step, double loss) {
    if (step % report_every == 0) std::fprintf(stderr, "step %d loss %.6g\n", step, loss);
  });
  const double cert = min_block_certificate(t.result.model);
  if (!(cert > 0.0)) {
    throw CertificateError("trained model failed its certificate (min LMI eigenvalue " +
                           std::to_string(cert) + ")");
  }
  save_json(model_to_json(t.result.model, &t.arch, &t.result.theta), out / "model.json");
  write_history(t.result.history, out / "history.csv");
  return t;
}

json checkpoints_json(const TrainResult& r) {
  json c = json::array();
  for (const Checkpoint& k : r.checkpoints) {
    c.push_back({{"step", k.step}, {"loss", k.loss}, {"min_lmi_eig", k.min_lmi_eig}});
  }
  return c;
}

int cmd_gen_data(json config, const fs::path& out, const std::optional<std::uint64_t>& seed_arg) {
  const std::uint64_t seed = resolve_seed(config, seed_arg);
  const Dataset ds = generate(config.at("data"), seed);
  const std::string stem = config.value("stem", std::string("data"));
  write_dataset(ds, out, stem);
  write_manifest(out, "gen-data", config, seed);
  std::printf("wrote %zu batches of %ld samples to %s\n", ds.batches.size(),
              static_cast<long>(ds.batches[0].u.rows()), (out / stem).string().c_str());
  return 0;
}

int cmd_train(json config, const fs::path& out, const std::optional<std::uint64_t>& seed_arg) {
  const std::uint64_t seed = resolve_seed(config, seed_arg);
  const Trained t = run_training(config, seed, out);
  const json summary = {{"final_loss", t.result.history.back()},
                        {"nse", nse(t.result.model, t.data.batches)},
                        {"min_lmi_eig", min_block_certificate(t.result.model)},
                        {"checkpoints", checkpoints_json(t.result)}};
  save_json(summary, out / "summary.json");
  write_manifest(out, "train", config, seed);
  std::printf("%s\n", summary.dump(2).c_str());
  return 0;
}

int cmd_verify(const fs::path& model_file, const fs::path& out, std::uint64_t seed) {
  const Model model = model_from_json(load_json(model_file));
  bool pass = true;
  json blocks = json::array();
  for (const RenBlock& b : model.sandwich.blocks) {
    const RenWeights& w = b.model.weights;
    json e = {{"bilipschitz", b.bilipschitz}, {"kappa", b.cert.kappa}, {"alpha_bar", b.cert.alpha_bar}};
    if (b.bilipschitz) {
      const double eig = verify_lmi(w, b.cert.P, b.cert.Lambda(), b.cert.mu, b.cert.nu, b.cert.alpha_bar);
      const double inv = verify_inverse_lmi(w, b.cert);
      e["mu"] = b.cert.mu;
      e["nu"] = b.cert.nu;
      e["lmi_min_eig"] = eig;
      e["inverse_lmi_min_eig"] = inv;
      pass = pass && eig > 0.0 && inv > 0.0;
    } else {
      const double eig = verify_contraction_lmi(w, b.cert.P, b.cert.Lambda(), b.cert.alpha_bar);
      e["lmi_min_eig"] = eig;
      pass = pass && eig > 0.0;
    }
    blocks.push_back(e);
  }
  json report = {{"blocks", blocks}};
  double orth = 0.0;
  for (const StaticOrtho& o : model.sandwich.ortho) {
    orth = std::max(orth, (o.P.transpose() * o.P - Mat::Identity(o.width(), o.width())).cwiseAbs().maxCoeff());
  }
  if (model.inner) {
    const Mat Q = model.inner->Q();
    orth = std::max(orth, (Q.transpose() * Q - Mat::Identity(Q.rows(), Q.cols())).cwiseAbs().maxCoeff());
  }
  report["orthogonality_error"] = orth;
  pass = pass && orth <= 1e-10;

  const bool all_bilip = std::all_of(model.sandwich.blocks.begin(), model.sandwich.blocks.end(),
                                     [](const RenBlock& b) { return b.bilipschitz; });
  const RatioInterval probe = empirical_bilip_probe(model, 100, 30, seed);
  report["probe"] = {{"ratio_min", probe.ratio_min}, {"ratio_max", probe.ratio_max}};
  if (all_bilip) {
    const Bounds b = composed_bounds(model.sandwich);
    report["mu"] = b.mu;
    report["nu"] = b.nu;
    pass = pass && probe.ratio_min >= b.mu * (1 - 1e-6) && probe.ratio_max <= b.nu * (1 + 1e-6);
  }
  report["pass"] = pass;
  std::printf("%s\n", report.dump(2).c_str());
  if (!out.empty()) save_json(report, out / "verify.json");
  return pass ? 0 : kCertificateError;
}

int cmd_invert(json config, const std::string& model_arg, const fs::path& out,
               const std::optional<std::uint64_t>& seed_arg) {
  const std::uint64_t seed = resolve_seed(config, seed_arg);
  const std::string model_file = !model_arg.empty() ? model_arg : config.value("model", std::string());
  if (model_file.empty()) throw ArgumentError("invert: no model given");
  config["model"] = model_file;
  const Model model = model_from_json(load_json(model_file));
  if (!(min_block_certificate(model) > 0.0)) throw CertificateError("invert: model is not certified");
  if (model.sandwich.blocks.size() != 1) {
    throw ArgumentError("invert: the inversion bound needs a single REN block");
  }
  const json inv = config.value("invert", json::object());
  const Dataset data = config.contains("dataset") ? training_data(config, seed)
                                                  : generate(config.at("data"), seed + 1000);
  const std::size_t batch = inv.value("batch", std::size_t{0});
  if (batch >= data.batches.size()) throw ArgumentError("invert: batch index out of range");
  const Mat& u = data.batches[batch].u;

  const RenModel& ren = model.sandwich.blocks[0].model;
  const Eigen::Index n = ren.weights.dims.n;
  const OutputGains gains = output_layer_bilip(ren, u, inv.value("gain_samples", 100), seed);
  const BoundConstants bc = bound_constants(model.sandwich, gains);

  const Vec a = Vec::Zero(n);
  Vec b = a;
  const double gap = inv.value("init_gap", 0.1);
  if (n > 0 && gap > 0.0) {
    const Vec dir = Eigen::Map<const Vec>(gaussian_input(n, 1, 1.0, seed + 1).data(), n);
    b = a + gap * dir / dir.norm();
  }
  std::optional<double> snr;
  if (inv.contains("noise_snr_db") && !inv["noise_snr_db"].is_null()) snr = inv["noise_snr_db"].get<double>();
  const Mat delta = add_noise_snr(u, snr, seed + 2) - u;
  const BoundReport nominal = reconstruction_error_curve(model.sandwich, u, delta, a, b, bc);
  write_curve(nominal, out / "bound.csv");

  const json pj = inv.value("pgd", json::object());
  PgdConfig pc;
  pc.init_radius = pj.value("init_radius", pc.init_radius);
  pc.pert_radius = pj.value("pert_radius", pc.pert_radius);
  pc.steps = pj.value("steps", pc.steps);
  pc.step_size = pj.value("step_size", pc.step_size);
  pc.restarts = pj.value("restarts", pc.restarts);
  pc.seed = seed;
  pc.validate();
  const PgdResult worst = pgd_worst_case(model.sandwich, pc, u, a, bc);
  const BoundReport worst_curve =
      reconstruction_error_curve(model.sandwich, worst.u, worst.delta_u, a, worst.b, bc);
  write_curve(worst_curve, out / "pgd_bound.csv");
  const double probe = random_probe_max(model.sandwich, pc, u, a, inv.value("random_probes", 100));

  const bool holds = nominal.holds() && worst_curve.holds();
  const json summary = {
      {"constants",
       {{"kappa", bc.kappa1},
        {"kappa_metric", bc.kappa_metric},
        {"alpha_bar", bc.alpha1},
        {"gamma_min", gains.gamma_min},
        {"gamma_max", gains.gamma_max},
        {"mu", bc.mu},
        {"nu", bc.nu},
        {"input_state_gain", bc.input_state_gain()}}},
      {"nominal",
       {{"state_gap", nominal.state_gap},
        {"perturbation_norm", nominal.perturbation_norm},
        {"final_measured", nominal.measured.back()},
        {"final_theoretical", nominal.theoretical.back()},
        {"holds", nominal.holds()}}},
      {"pgd",
       {{"error", worst.error},
        {"theoretical", worst.theoretical},
        {"restart_errors", worst.restart_errors},
        {"random_probe_max", probe},
        {"holds", worst_curve.holds()}}}};
  save_json(summary, out / "summary.json");
  write_manifest(out, "invert", config, seed);
  std::printf("%s\n", summary.dump(2).c_str());
  return holds ? 0 : kCertificateError;
}

int cmd_factorize(json config, const fs::path& out, const std::optional<std::uint64_t>& seed_arg) {
  const std::uint64_t seed = resolve_seed(config, seed_arg);
  const Trained t = run_training(config, seed, out);
  const json fj = config.value("factorize", json::object());
  const Dataset held = generate(config.at("data"), seed + 1000, fj.value("held_out_batches", 20));
  const double held_nse = nse(t.result.model, held.batches);
  const FactorModel f = t.result.model.factor();

  const Eigen::Index horizon = fj.value("impulse_horizon", Eigen::Index{200000});
  const Eigen::Index m = f.inner.width();
  DynOrtho lin = f.inner;
  lin.d.setZero();
  lin.w.setZero();
  std::vector<double> energy(static_cast<std::size_t>(m));
  Mat impulse_head;
  for (Eigen::Index c = 0; c < m; ++c) {
    Mat e = Mat::Zero(horizon, m);
    e(0, c) = 1.0;
    const Mat y = dyn_forward(lin, Vec::Zero(lin.state_size()), e).y;
    energy[static_cast<std::size_t>(c)] = y.squaredNorm();
    if (c == 0) impulse_head = y.topRows(std::min<Eigen::Index>(horizon, fj.value("impulse_csv_samples", 500)));
  }
  {
    std::ofstream csv(out / "inner_impulse.csv");
    csv << "t";
    for (Eigen::Index c = 0; c < m; ++c) csv << ",y_" << c + 1;
    csv << "\n";
    for (Eigen::Index k = 0; k < impulse_head.rows(); ++k) {
      csv << k;
      for (Eigen::Index c = 0; c < m; ++c) csv << "," << format_double(impulse_head(k, c));
      csv << "\n";
    }
  }

  const Batch& hb = held.batches[0];
  const FactorResponse resp = factor_trace(f, zero_states(f), hb.u);
  {
    std::ofstream csv(out / "responses.csv");
    csv << "t,u,plant,composed,outer\n";
    for (Eigen::Index k = 0; k < hb.u.rows(); ++k) {
      csv << format_double(static_cast<double>(k) / held.sample_rate) << "," << format_double(hb.u(k, 0))
          << "," << format_double(hb.y(k, 0)) << "," << format_double(resp.y(k, 0)) << ","
          << format_double(resp.outer(k, 0)) << "\n";
    }
  }
  const int lag = cross_correlation_lag(resp.outer, resp.y, fj.value("max_lag", 30));
  const double threshold = fj.value("nse_threshold", 0.3);
  const json summary = {{"final_loss", t.result.history.back()},
                        {"train_nse", nse(t.result.model, t.data.batches)},
                        {"held_out_nse", held_nse},
                        {"nse_threshold", threshold},
                        {"nse_ok", held_nse <= threshold},
                        {"inner_impulse_energy", energy},
                        {"outer_to_composed_lag", lag},
                        {"checkpoints", checkpoints_json(t.result)}};
  save_json(summary, out / "summary.json");
  write_manifest(out, "factorize", config, seed);
  std::printf("%s\n", summary.dump(2).c_str());
  if (!(held_nse <= threshold)) {
    std::fprintf(stderr, "warning: held-out NSE %.3f above threshold %.3f\n", held_nse, threshold);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bi-Lipschitz recurrent equilibrium networks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::string config_spec;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::string model_path;

  const auto common = [&](CLI::App* sub, bool with_config) {
    if (with_config) sub->add_option("--config", config_spec, "JSON config file or preset:NAME");
    sub->add_option("--out-dir", out_dir, "Output directory");
    sub->add_option("--seed", seed, "Seed override");
  };
  CLI::App* gen = app.add_subcommand("gen-data", "Generate plant datasets");
  common(gen, true);
  CLI::App* tr = app.add_subcommand("train", "Train a model");
  common(tr, true);
  CLI::App* ver = app.add_subcommand("verify", "Check a model's certificates");
  ver->add_option("model", model_path, "Model JSON file")->required();
  common(ver, false);
  CLI::App* inv = app.add_subcommand("invert", "Robust-inversion error curves");
  inv->add_option("model", model_path, "Model JSON file");
  common(inv, true);
  CLI::App* fac = app.add_subcommand("factorize", "Train an inner-outer factorization");
  common(fac, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    const fs::path out(out_dir);
    fs::create_directories(out);
    if (*gen) return cmd_gen_data(load_config(config_spec, "msd"), out, seed);
    if (*tr) return cmd_train(load_config(config_spec, "smoke"), out, seed);
    if (*ver) return cmd_verify(model_path, out, seed.value_or(0));
    if (*inv) return cmd_invert(load_config(config_spec, "smoke"), model_path, out, seed);
    if (*fac) return cmd_factorize(load_config(config_spec, "factorization"), out, seed);
  } catch (const ArgumentError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const CertificateError& e) {
    std::fprintf(stderr, "certificate failure: %s\n", e.what());
    return kCertificateError;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kNumericalError;
  }
  return kConfigError;
}
