#pragma once

// Helpers shared by the unit and acceptance tests.

#include <cstdint>
#include <random>

#include "bilipren/bilip.hpp"
#include "bilipren/composition.hpp"
#include "bilipren/orthogonal.hpp"

namespace testing_support {

using bilipren::Mat;
using bilipren::Vec;

inline Mat random_mat(Eigen::Index r, Eigen::Index c, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  Mat M(r, c);
  for (Eigen::Index i = 0; i < M.size(); ++i) M.data()[i] = n(rng);
  return M;
}

inline Vec random_vec(Eigen::Index n, std::uint64_t seed, double scale = 1.0) {
  return random_mat(n, 1, seed, scale);
}

inline bilipren::RenBlock make_block(const bilipren::BiLipHyper& h, const Vec& theta,
                                     bilipren::Activation act) {
  const bilipren::ParameterizedRen p = bilipren::direct_parameterize(theta, h);
  bilipren::RenBlock b;
  b.model.weights = p.weights;
  b.model.act = act;
  b.cert = p.certificate;
  return b;
}

/// Random sandwich O_{K+1} G_K ... G_1 O_1 with per-block bounds (mu, nu).
inline bilipren::SandwichModel random_sandwich(int depth, const bilipren::RenDims& dims,
                                               double mu, double nu, bilipren::Activation act,
                                               std::uint64_t seed, double scale = 1.0) {
  bilipren::BiLipHyper h;
  h.dims = dims;
  h.mu = mu;
  h.nu = nu;
  const Eigen::Index size = bilipren::ThetaLayout::bilipschitz(dims).size();
  bilipren::SandwichModel s;
  std::uint64_t k = seed * 1000;
  for (int i = 0; i <= depth; ++i) {
    s.ortho.push_back(bilipren::make_static(random_mat(dims.m, dims.m, ++k),
                                            random_vec(dims.m, ++k, 0.1)));
    if (i < depth) s.blocks.push_back(make_block(h, random_vec(size, ++k, scale), act));
  }
  return s;
}

inline std::vector<Vec> random_states(const bilipren::SandwichModel& s, std::uint64_t seed,
                                      double scale = 1.0) {
  std::vector<Vec> x;
  for (const auto& b : s.blocks) x.push_back(random_vec(b.model.weights.dims.n, seed++, scale));
  return x;
}

}  // namespace testing_support
