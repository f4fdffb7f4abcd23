#pragma once

// Batched input/output sequences, generators for both plants, and the
// on-disk format: one CSV per batch (t,u_1..u_m,y_1..y_m) plus a JSON
// sidecar.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "bilipren/plants.hpp"

namespace bilipren {

struct Batch {
  Mat u;  ///< T x m
  Mat y;  ///< T x m
};

struct Dataset {
  std::vector<Batch> batches;
  double sample_rate = 1.0;
  std::optional<double> noise_snr_db;
  /// Config snapshot used to generate the data.
  nlohmann::json provenance = nlohmann::json::object();

  Eigen::Index width() const;
  void validate() const;
};

struct MsdDataConfig {
  MsdConfig plant;
  SignalConfig signal;
  int batches = 1;
  std::optional<double> noise_snr_db;
  std::uint64_t seed = 0;
};

/// Batch b uses signal seed seed + b and noise seed seed + 1000003 + b.
Dataset generate_msd_dataset(const MsdDataConfig& cfg);

struct DelayDataConfig {
  DelayPlantConfig plant;
  double input_std = 1.0;
  int batches = 100;
  std::uint64_t seed = 0;
};

Dataset generate_delay_dataset(const DelayDataConfig& cfg);

nlohmann::json to_json(const MsdConfig& c);
nlohmann::json to_json(const DelayPlantConfig& c);
nlohmann::json to_json(const SignalConfig& c);

/// Writes <stem>_<b>.csv for every batch and <stem>.json.
void write_dataset(const Dataset& ds, const std::filesystem::path& dir, const std::string& stem);
Dataset read_dataset(const std::filesystem::path& dir, const std::string& stem);

/// CSV surface of a single batch; values are printed with 17 significant
/// digits so that reading back is exact.
void write_batch_csv(const Batch& b, double sample_rate, const std::filesystem::path& file);
Batch read_batch_csv(const std::filesystem::path& file);

std::string format_double(double v);

}  // namespace bilipren
