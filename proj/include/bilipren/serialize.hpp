#pragma once

// JSON documents for weights, certificates, layers and whole models.
// Matrices are {rows, cols, data} with data in row-major order. Every layer
// document carries a "kind" tag: "ren", "static_ortho", "dyn_ortho".

#include <filesystem>

#include "json.hpp"

#include "bilipren/parametric.hpp"

namespace bilipren {

nlohmann::json mat_to_json(const Mat& M);
Mat mat_from_json(const nlohmann::json& j);
nlohmann::json vec_to_json(const Vec& v);
Vec vec_from_json(const nlohmann::json& j);

nlohmann::json to_json(const RenDims& d);
RenDims dims_from_json(const nlohmann::json& j);

nlohmann::json to_json(const EquilibriumConfig& c);
EquilibriumConfig equilibrium_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Certificate& c);
Certificate certificate_from_json(const nlohmann::json& j);

/// {"kind": "ren", dims, activation, acyclic, A..D22, bx, bv, by,
///  equilibrium, bilipschitz, certificate}
nlohmann::json to_json(const RenBlock& b);
RenBlock ren_block_from_json(const nlohmann::json& j);

nlohmann::json to_json(const StaticOrtho& s);
StaticOrtho static_ortho_from_json(const nlohmann::json& j);

nlohmann::json to_json(const DynOrtho& d);
DynOrtho dyn_ortho_from_json(const nlohmann::json& j);

/// {"kind": "sandwich", "layers": [...], "mu", "nu", "allocation"}
nlohmann::json to_json(const SandwichModel& s);
SandwichModel sandwich_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Architecture& a);
Architecture architecture_from_json(const nlohmann::json& j);

/// {"kind": "model", "sandwich", "inner", optionally "architecture" and "theta"}
nlohmann::json model_to_json(const Model& m, const Architecture* arch = nullptr,
                             const Vec* theta = nullptr);
Model model_from_json(const nlohmann::json& j);

void save_json(const nlohmann::json& j, const std::filesystem::path& file);
/// Throws ArgumentError on unreadable or malformed files.
nlohmann::json load_json(const std::filesystem::path& file);

}  // namespace bilipren
