#include "bilipren/serialize.hpp"

#include <fstream>

#include "bilipren/errors.hpp"

namespace bilipren {

using nlohmann::json;

namespace {

template <class F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ArgumentError(std::string(what) + ": " + e.what());
  }
}

void expect_kind(const json& j, const char* kind) {
  const std::string k = j.at("kind").get<std::string>();
  if (k != kind) throw ArgumentError("expected a '" + std::string(kind) + "' document, got '" + k + "'");
}

EquilibriumMode mode_from_string(const std::string& s) {
  if (s == "acyclic") return EquilibriumMode::kAcyclicExact;
  if (s == "fixed_point") return EquilibriumMode::kFixedPoint;
  throw ArgumentError("unknown equilibrium mode '" + s + "'");
}

}  // namespace

json mat_to_json(const Mat& M) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(M.size()));
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = 0; j < M.cols(); ++j) data.push_back(M(i, j));
  return {{"rows", M.rows()}, {"cols", M.cols()}, {"data", data}};
}

Mat mat_from_json(const json& j) {
  return guarded("matrix", [&] {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols) {
      throw ArgumentError("matrix: data length does not match rows x cols");
    }
    Mat M(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index k = 0; k < cols; ++k) M(i, k) = data[static_cast<std::size_t>(i * cols + k)];
    if (!M.allFinite()) throw ArgumentError("matrix: non-finite entry");
    return M;
  });
}

json vec_to_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec vec_from_json(const json& j) {
  return guarded("vector", [&] {
    const auto data = j.get<std::vector<double>>();
    Vec v = Eigen::Map<const Vec>(data.data(), static_cast<Eigen::Index>(data.size()));
    if (!v.allFinite()) throw ArgumentError("vector: non-finite entry");
    return v;
  });
}

json to_json(const RenDims& d) { return {{"n", d.n}, {"q", d.q}, {"m", d.m}}; }

RenDims dims_from_json(const json& j) {
  return guarded("dims", [&] {
    RenDims d{j.at("n").get<int>(), j.at("q").get<int>(), j.at("m").get<int>()};
    d.validate();
    return d;
  });
}

json to_json(const EquilibriumConfig& c) {
  return {{"mode", c.mode == EquilibriumMode::kAcyclicExact ? "acyclic" : "fixed_point"},
          {"max_iters", c.max_iters},
          {"tol", c.tol},
          {"damping", c.damping},
          {"newton_fallback", c.newton_fallback}};
}

EquilibriumConfig equilibrium_from_json(const json& j) {
  return guarded("equilibrium", [&] {
    EquilibriumConfig c;
    c.mode = mode_from_string(j.at("mode").get<std::string>());
    c.max_iters = j.value("max_iters", c.max_iters);
    c.tol = j.value("tol", c.tol);
    c.damping = j.value("damping", c.damping);
    c.newton_fallback = j.value("newton_fallback", c.newton_fallback);
    c.validate();
    return c;
  });
}

json to_json(const Certificate& c) {
  return {{"P", mat_to_json(c.P)},         {"Lambda", vec_to_json(c.lambda)},
          {"lmi_min_eig", c.lmi_min_eig},  {"kappa", c.kappa},
          {"alpha_bar", c.alpha_bar},      {"mu", c.mu},
          {"nu", c.nu}};
}

Certificate certificate_from_json(const json& j) {
  return guarded("certificate", [&] {
    Certificate c;
    c.P = mat_from_json(j.at("P"));
    c.lambda = vec_from_json(j.at("Lambda"));
    c.lmi_min_eig = j.at("lmi_min_eig").get<double>();
    c.kappa = j.at("kappa").get<double>();
    c.alpha_bar = j.at("alpha_bar").get<double>();
    c.mu = j.at("mu").get<double>();
    c.nu = j.at("nu").get<double>();
    return c;
  });
}

json to_json(const RenBlock& b) {
  const RenWeights& w = b.model.weights;
  return {{"kind", "ren"},
          {"dims", to_json(w.dims)},
          {"activation", to_string(b.model.act)},
          {"acyclic", w.acyclic},
          {"bilipschitz", b.bilipschitz},
          {"equilibrium", to_json(b.model.eq)},
          {"A", mat_to_json(w.A)},
          {"B1", mat_to_json(w.B1)},
          {"B2", mat_to_json(w.B2)},
          {"C1", mat_to_json(w.C1)},
          {"D11", mat_to_json(w.D11)},
          {"D12", mat_to_json(w.D12)},
          {"C2", mat_to_json(w.C2)},
          {"D21", mat_to_json(w.D21)},
          {"D22", mat_to_json(w.D22)},
          {"bx", vec_to_json(w.bx)},
          {"bv", vec_to_json(w.bv)},
          {"by", vec_to_json(w.by)},
          {"certificate", to_json(b.cert)}};
}

RenBlock ren_block_from_json(const json& j) {
  return guarded("ren", [&] {
    expect_kind(j, "ren");
    RenBlock b;
    RenWeights& w = b.model.weights;
    w.dims = dims_from_json(j.at("dims"));
    w.acyclic = j.at("acyclic").get<bool>();
    w.A = mat_from_json(j.at("A"));
    w.B1 = mat_from_json(j.at("B1"));
    w.B2 = mat_from_json(j.at("B2"));
    w.C1 = mat_from_json(j.at("C1"));
    w.D11 = mat_from_json(j.at("D11"));
    w.D12 = mat_from_json(j.at("D12"));
    w.C2 = mat_from_json(j.at("C2"));
    w.D21 = mat_from_json(j.at("D21"));
    w.D22 = mat_from_json(j.at("D22"));
    w.bx = vec_from_json(j.at("bx"));
    w.bv = vec_from_json(j.at("bv"));
    w.by = vec_from_json(j.at("by"));
    w.validate();
    b.model.act = activation_from_string(j.at("activation").get<std::string>());
    b.model.eq = equilibrium_from_json(j.at("equilibrium"));
    b.bilipschitz = j.value("bilipschitz", true);
    b.cert = certificate_from_json(j.at("certificate"));
    return b;
  });
}

json to_json(const StaticOrtho& s) {
  return {{"kind", "static_ortho"}, {"P", mat_to_json(s.P)}, {"q", vec_to_json(s.q)}};
}

StaticOrtho static_ortho_from_json(const json& j) {
  return guarded("static_ortho", [&] {
    expect_kind(j, "static_ortho");
    StaticOrtho s{mat_from_json(j.at("P")), vec_from_json(j.at("q"))};
    s.validate();
    return s;
  });
}

json to_json(const DynOrtho& d) {
  return {{"kind", "dyn_ortho"},      {"A", mat_to_json(d.A)}, {"B", mat_to_json(d.B)},
          {"C", mat_to_json(d.C)},    {"D", mat_to_json(d.D)}, {"d", vec_to_json(d.d)},
          {"w", vec_to_json(d.w)}};
}

DynOrtho dyn_ortho_from_json(const json& j) {
  return guarded("dyn_ortho", [&] {
    expect_kind(j, "dyn_ortho");
    DynOrtho d{mat_from_json(j.at("A")), mat_from_json(j.at("B")), mat_from_json(j.at("C")),
               mat_from_json(j.at("D")), vec_from_json(j.at("d")), vec_from_json(j.at("w"))};
    d.validate();
    return d;
  });
}

json to_json(const SandwichModel& s) {
  json layers = json::array();
  json per_block = json::array();
  bool all_bilip = true;
  for (std::size_t k = 0; k < s.ortho.size(); ++k) {
    layers.push_back(to_json(s.ortho[k]));
    if (k < s.blocks.size()) {
      layers.push_back(to_json(s.blocks[k]));
      per_block.push_back({s.blocks[k].cert.mu, s.blocks[k].cert.nu});
      all_bilip = all_bilip && s.blocks[k].bilipschitz;
    }
  }
  json j = {{"kind", "sandwich"}, {"layers", layers}};
  if (all_bilip) {
    const Bounds b = composed_bounds(s);
    j["mu"] = b.mu;
    j["nu"] = b.nu;
    j["allocation"] = {{"rule", "geometric"}, {"per_block", per_block}};
  } else {
    j["mu"] = nullptr;
    j["nu"] = nullptr;
  }
  return j;
}

SandwichModel sandwich_from_json(const json& j) {
  return guarded("sandwich", [&] {
    expect_kind(j, "sandwich");
    SandwichModel s;
    const json& layers = j.at("layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (i % 2 == 0) {
        s.ortho.push_back(static_ortho_from_json(layers[i]));
      } else {
        s.blocks.push_back(ren_block_from_json(layers[i]));
      }
    }
    s.validate();
    return s;
  });
}

json to_json(const Architecture& a) {
  return {{"dims", to_json(a.dims)},
          {"depth", a.depth},
          {"mu", a.mu},
          {"nu", a.nu},
          {"alpha_bar", a.alpha_bar},
          {"eps", a.eps},
          {"d22_margin", a.d22_margin},
          {"activation", to_string(a.act)},
          {"block_kind", to_string(a.kind)},
          {"learn_ortho", a.learn_ortho},
          {"inner_states", a.inner_states}};
}

Architecture architecture_from_json(const json& j) {
  return guarded("architecture", [&] {
    Architecture a;
    a.dims = dims_from_json(j.at("dims"));
    a.depth = j.value("depth", a.depth);
    a.mu = j.value("mu", a.mu);
    a.nu = j.value("nu", a.nu);
    a.alpha_bar = j.value("alpha_bar", a.alpha_bar);
    a.eps = j.value("eps", a.eps);
    a.d22_margin = j.value("d22_margin", a.d22_margin);
    a.act = activation_from_string(j.value("activation", std::string(to_string(a.act))));
    a.kind = block_kind_from_string(j.value("block_kind", std::string(to_string(a.kind))));
    a.learn_ortho = j.value("learn_ortho", a.learn_ortho);
    a.inner_states = j.value("inner_states", a.inner_states);
    a.validate();
    return a;
  });
}

json model_to_json(const Model& m, const Architecture* arch, const Vec* theta) {
  json j = {{"kind", "model"},
            {"sandwich", to_json(m.sandwich)},
            {"inner", m.inner ? to_json(*m.inner) : json(nullptr)}};
  if (arch != nullptr) j["architecture"] = to_json(*arch);
  if (theta != nullptr) j["theta"] = vec_to_json(*theta);
  return j;
}

Model model_from_json(const json& j) {
  return guarded("model", [&] {
    expect_kind(j, "model");
    Model m;
    m.sandwich = sandwich_from_json(j.at("sandwich"));
    if (j.contains("inner") && !j["inner"].is_null()) m.inner = dyn_ortho_from_json(j["inner"]);
    if (m.inner && m.inner->width() != m.sandwich.width()) {
      throw ArgumentError("model: inner layer width mismatch");
    }
    return m;
  });
}

void save_json(const json& j, const std::filesystem::path& file) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file);
  if (!out) throw ArgumentError("cannot write " + file.string());
  out << j.dump(2) << "\n";
  if (!out) throw ArgumentError("failed writing " + file.string());
}

json load_json(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ArgumentError("cannot read " + file.string());
  return guarded(file.string().c_str(), [&] { return json::parse(in); });
}

}  // namespace bilipren
