#include <filesystem>
#include <fstream>
#include <limits>

#include "doctest.h"

#include "bilipren/dataset.hpp"
#include "bilipren/errors.hpp"
#include "bilipren/serialize.hpp"
#include "support.hpp"

using namespace bilipren;
using testing_support::random_mat;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("bilipren_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("batch csv round trip is bitwise") {
  Batch b{random_mat(20, 2, 1), random_mat(20, 2, 2)};
  b.u(0, 0) = std::numeric_limits<double>::denorm_min();
  b.u(1, 1) = -0.1;
  b.y(2, 0) = 1e300;
  const auto file = scratch("csv") / "b.csv";
  write_batch_csv(b, 50.0, file);
  const Batch r = read_batch_csv(file);
  CHECK(r.u == b.u);
  CHECK(r.y == b.y);
}

TEST_CASE("dataset generation is deterministic and round trips") {
  MsdDataConfig cfg;
  cfg.plant.duration = 2.0;
  cfg.batches = 2;
  cfg.noise_snr_db = 30.0;
  cfg.seed = 5;
  const Dataset a = generate_msd_dataset(cfg);
  const Dataset b = generate_msd_dataset(cfg);
  REQUIRE(a.batches.size() == 2);
  CHECK(a.batches[0].y == b.batches[0].y);
  CHECK(a.sample_rate == doctest::Approx(50.0));

  const auto dir = scratch("ds");
  write_dataset(a, dir, "msd");
  const Dataset r = read_dataset(dir, "msd");
  CHECK(r.batches[1].u == a.batches[1].u);
  CHECK(r.batches[1].y == a.batches[1].y);
  CHECK(r.noise_snr_db == a.noise_snr_db);
  CHECK(r.provenance == a.provenance);

  DelayDataConfig dc;
  dc.batches = 3;
  const Dataset d = generate_delay_dataset(dc);
  CHECK(d.batches.size() == 3);
  CHECK(d.batches[0].u.rows() == 100);
}

TEST_CASE("model json round trip") {
  Architecture a;
  a.dims = {3, 4, 2};
  a.depth = 2;
  a.inner_states = 3;
  a.act = Activation::kTanh;
  const Vec theta = init_theta(a, 7, 0.5);
  const Model m = build_model(a, theta);
  const nlohmann::json j = model_to_json(m, &a, &theta);
  const auto file = scratch("model") / "model.json";
  save_json(j, file);
  const Model r = model_from_json(load_json(file));
  const Mat u = random_mat(15, 2, 8);
  CHECK(r.simulate(u) == m.simulate(u));
  CHECK(architecture_from_json(j.at("architecture")).depth == 2);
  CHECK(r.sandwich.blocks[1].cert.lmi_min_eig == m.sandwich.blocks[1].cert.lmi_min_eig);
  CHECK(j.at("sandwich").at("mu").get<double>() == doctest::Approx(a.mu));
}

TEST_CASE("malformed documents are rejected") {
  CHECK_THROWS_AS(model_from_json(nlohmann::json{{"kind", "sandwich"}}), ArgumentError);
  CHECK_THROWS_AS(mat_from_json(nlohmann::json{{"rows", 2}, {"cols", 2}, {"data", {1, 2, 3}}}),
                  ArgumentError);
  CHECK_THROWS_AS(equilibrium_from_json(nlohmann::json{{"mode", "bogus"}}), ArgumentError);
  const auto file = scratch("bad") / "bad.json";
  std::ofstream(file) << "{ not json";
  CHECK_THROWS_AS(load_json(file), ArgumentError);
}
