#include "bilipren/dataset.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "bilipren/errors.hpp"

namespace bilipren {

using nlohmann::json;

Eigen::Index Dataset::width() const {
  if (batches.empty()) throw ArgumentError("Dataset: no batches");
  return batches.front().u.cols();
}

void Dataset::validate() const {
  if (batches.empty()) throw ArgumentError("Dataset: no batches");
  const Eigen::Index m = width();
  for (const Batch& b : batches) {
    if (b.u.rows() != b.y.rows()) throw ArgumentError("Dataset: u and y lengths differ");
    if (b.u.cols() != m || b.y.cols() != m) throw ArgumentError("Dataset: width mismatch");
    if (b.u.rows() == 0) throw ArgumentError("Dataset: empty batch");
  }
  if (!(sample_rate > 0.0)) throw ArgumentError("Dataset: sample rate must be positive");
}

namespace {

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

json to_json(const MsdConfig& c) {
  return {{"n_carts", c.n_carts},         {"masses", vec_json(c.masses)},
          {"spring_consts", vec_json(c.spring_consts)},
          {"damping_consts", vec_json(c.damping_consts)},
          {"dt", c.dt},                   {"duration", c.duration},
          {"substeps", c.substeps}};
}

json to_json(const DelayPlantConfig& c) {
  return {{"gain", c.gain},         {"delay", c.delay},       {"dt", c.dt},
          {"sample_period", c.sample_period}, {"duration", c.duration}, {"x0", c.x0}};
}

json to_json(const SignalConfig& c) {
  return {{"tau", c.tau}, {"sigma", c.sigma}, {"seed", c.seed}};
}

Dataset generate_msd_dataset(const MsdDataConfig& cfg) {
  cfg.plant.validate();
  cfg.signal.validate();
  if (cfg.batches < 1) throw ArgumentError("generate_msd_dataset: need at least one batch");
  Dataset ds;
  ds.sample_rate = 1.0 / cfg.plant.dt;
  ds.noise_snr_db = cfg.noise_snr_db;
  for (int b = 0; b < cfg.batches; ++b) {
    SignalConfig sc = cfg.signal;
    sc.seed = cfg.seed + static_cast<std::uint64_t>(b);
    const Mat u = piecewise_input(sc, cfg.plant.duration, cfg.plant.dt);
    const Mat y = msd_simulate(cfg.plant, u).y;
    ds.batches.push_back({u, add_noise_snr(y, cfg.noise_snr_db,
                                           cfg.seed + 1000003 + static_cast<std::uint64_t>(b))});
  }
  ds.provenance = {{"plant", "msd"},
                   {"config", to_json(cfg.plant)},
                   {"signal", to_json(cfg.signal)},
                   {"batches", cfg.batches},
                   {"seed", cfg.seed}};
  return ds;
}

Dataset generate_delay_dataset(const DelayDataConfig& cfg) {
  cfg.plant.validate();
  if (cfg.batches < 1 || !(cfg.input_std > 0.0)) {
    throw ArgumentError("generate_delay_dataset: need batches >= 1 and input_std > 0");
  }
  Dataset ds;
  ds.sample_rate = 1.0 / cfg.plant.sample_period;
  const Eigen::Index T = cfg.plant.samples();
  for (int b = 0; b < cfg.batches; ++b) {
    const Mat u = gaussian_input(T, 1, cfg.input_std, cfg.seed + static_cast<std::uint64_t>(b));
    ds.batches.push_back({u, delay_simulate(cfg.plant, u)});
  }
  ds.provenance = {{"plant", "delay"},
                   {"config", to_json(cfg.plant)},
                   {"input_std", cfg.input_std},
                   {"batches", cfg.batches},
                   {"seed", cfg.seed}};
  return ds;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_batch_csv(const Batch& b, double sample_rate, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw ArgumentError("cannot write " + file.string());
  const Eigen::Index m = b.u.cols();
  out << "t";
  for (Eigen::Index j = 0; j < m; ++j) out << ",u_" << j + 1;
  for (Eigen::Index j = 0; j < m; ++j) out << ",y_" << j + 1;
  out << "\n";
  for (Eigen::Index t = 0; t < b.u.rows(); ++t) {
    out << format_double(static_cast<double>(t) / sample_rate);
    for (Eigen::Index j = 0; j < m; ++j) out << ',' << format_double(b.u(t, j));
    for (Eigen::Index j = 0; j < m; ++j) out << ',' << format_double(b.y(t, j));
    out << "\n";
  }
  if (!out) throw ArgumentError("failed writing " + file.string());
}

Batch read_batch_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ArgumentError("cannot read " + file.string());
  std::string line;
  if (!std::getline(in, line)) throw ArgumentError(file.string() + ": missing header");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 3 || header[0] != "t" || (header.size() - 1) % 2 != 0) {
    throw ArgumentError(file.string() + ": header must be t,u_1..u_m,y_1..y_m");
  }
  const std::size_t m = (header.size() - 1) / 2;
  for (std::size_t j = 0; j < m; ++j) {
    if (header[1 + j] != "u_" + std::to_string(j + 1) ||
        header[1 + m + j] != "y_" + std::to_string(j + 1)) {
      throw ArgumentError(file.string() + ": unexpected column names");
    }
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> r;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size()) {
        throw ArgumentError(file.string() + ": bad number '" + cell + "'");
      }
      r.push_back(v);
    }
    if (r.size() != header.size()) throw ArgumentError(file.string() + ": ragged row");
    rows.push_back(std::move(r));
  }
  const auto T = static_cast<Eigen::Index>(rows.size());
  const auto mm = static_cast<Eigen::Index>(m);
  Batch b{Mat(T, mm), Mat(T, mm)};
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index j = 0; j < mm; ++j) {
      b.u(t, j) = rows[t][1 + j];
      b.y(t, j) = rows[t][1 + m + j];
    }
  return b;
}

void write_dataset(const Dataset& ds, const std::filesystem::path& dir, const std::string& stem) {
  ds.validate();
  std::filesystem::create_directories(dir);
  json side = {{"batches", ds.batches.size()},
               {"sample_rate", ds.sample_rate},
               {"noise_snr_db", ds.noise_snr_db ? json(*ds.noise_snr_db) : json(nullptr)},
               {"provenance", ds.provenance},
               {"files", json::array()}};
  for (std::size_t b = 0; b < ds.batches.size(); ++b) {
    const std::string name = stem + "_" + std::to_string(b) + ".csv";
    write_batch_csv(ds.batches[b], ds.sample_rate, dir / name);
    side["files"].push_back(name);
  }
  std::ofstream out(dir / (stem + ".json"));
  if (!out) throw ArgumentError("cannot write sidecar in " + dir.string());
  out << side.dump(2) << "\n";
}

Dataset read_dataset(const std::filesystem::path& dir, const std::string& stem) {
  std::ifstream in(dir / (stem + ".json"));
  if (!in) throw ArgumentError("cannot read " + (dir / (stem + ".json")).string());
  json side;
  try {
    in >> side;
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("dataset sidecar: ") + e.what());
  }
  Dataset ds;
  try {
    ds.sample_rate = side.at("sample_rate").get<double>();
    if (!side.at("noise_snr_db").is_null()) ds.noise_snr_db = side["noise_snr_db"].get<double>();
    ds.provenance = side.value("provenance", json::object());
    for (const auto& f : side.at("files")) {
      ds.batches.push_back(read_batch_csv(dir / f.get<std::string>()));
    }
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("dataset sidecar: ") + e.what());
  }
  ds.validate();
  return ds;
}

}  // namespace bilipren
