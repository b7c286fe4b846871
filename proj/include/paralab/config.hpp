#pragma once

#include "paralab/calculus.hpp"
#include "paralab/core.hpp"
#include "paralab/operators.hpp"
#include "paralab/quadrature.hpp"
#include "paralab/sampling.hpp"
#include "paralab/space.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace paralab {

using Json = nlohmann::json;

enum class ExperimentKind { verify_assumptions, decomposition, carre_split, leibniz_sweep, proposition_norms, estimate_suite };

inline const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::verify_assumptions: return "verify_assumptions";
    case ExperimentKind::decomposition: return "decomposition";
    case ExperimentKind::carre_split: return "carre_split";
    case ExperimentKind::leibniz_sweep: return "leibniz_sweep";
    case ExperimentKind::proposition_norms: return "proposition_norms";
    case ExperimentKind::estimate_suite: return "estimate_suite";
  }
  return "unknown";
}

namespace detail {

inline Error config_error(const std::string& path, const std::string& what) {
  return Error(ErrorKind::config, "config field '" + path + "': " + what);
}

inline const Json& field(const Json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) throw config_error(path + key, "missing");
  return obj.at(key);
}

template <class T>
T get_as(const Json& v, const std::string& path) {
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw config_error(path, "has the wrong type");
  }
}

template <class T>
T value_or(const Json& obj, const std::string& key, const std::string& path, T fallback) {
  if (!obj.is_object() || !obj.contains(key)) return fallback;
  return get_as<T>(obj.at(key), path + key);
}

inline std::string read_text(const std::filesystem::path& p, const std::string& path) {
  std::ifstream in(p);
  if (!in) throw Error(ErrorKind::io, "cannot read '" + p.string() + "' (config field '" + path + "')");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<double> read_numbers(const std::filesystem::path& p, const std::string& path) {
  std::istringstream in(read_text(p, path));
  std::vector<double> out;
  double v;
  while (in >> v) out.push_back(v);
  if (!in.eof()) throw Error(ErrorKind::io, "non-numeric token in '" + p.string() + "'");
  return out;
}

}  // namespace detail

struct SpaceSpec {
  std::string kind = "grid";
  std::vector<Index> dims;
  double h = 1.0;
  bool periodic = false;
  std::vector<Edge> edges;
  std::optional<RVec> mu;
};

/// Coefficient profile 1 + amplitude * sin(2 pi x_0 / length) along the first axis.
struct SmoothProfile {
  double amplitude = 0.0;
};

struct OperatorSpec {
  std::string kind = "graph_laplacian";
  /// divergence form: one d x d matrix per cell, or a constant
  std::vector<CMat> A;
  std::optional<CMat> A_constant;
  std::optional<SmoothProfile> A_smooth;
  /// delta_a: one value per point, or a constant
  std::optional<Field> a;
  std::optional<Complex> a_constant;
  std::optional<SmoothProfile> a_smooth;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  ExperimentKind experiment = ExperimentKind::verify_assumptions;
  SpaceSpec space;
  OperatorSpec op;
  std::optional<int> D;
  bool strict = false;
  QuadratureSpec quadrature;
  std::vector<double> p_grid{2.0};
  std::vector<double> alpha_grid{0.5};
  double p0 = 2.0;
  SamplerKind sampler = SamplerKind::spectral_bandlimited;
  Index sample_count = 16;
  std::string out_dir = "out";
  Json estimates = Json::object();
  Json raw;
};

namespace detail {

inline CMat parse_matrix(const Json& v, Index d, const std::string& path) {
  if (!v.is_array() || Index(v.size()) != d) throw config_error(path, "expected " + std::to_string(d) + " rows");
  CMat m(d, d);
  for (Index i = 0; i < d; ++i) {
    const Json& row = v[std::size_t(i)];
    if (!row.is_array() || Index(row.size()) != d)
      throw config_error(path, "row " + std::to_string(i) + " needs " + std::to_string(d) + " entries");
    for (Index j = 0; j < d; ++j) {
      const Json& e = row[std::size_t(j)];
      const std::string ep = path + "[" + std::to_string(i) + "][" + std::to_string(j) + "]";
      if (e.is_number())
        m(i, j) = get_as<double>(e, ep);
      else if (e.is_array() && e.size() == 2)
        m(i, j) = Complex(get_as<double>(e[0], ep), get_as<double>(e[1], ep));
      else
        throw config_error(ep, "expected a number or [re, im]");
    }
  }
  return m;
}

inline Complex parse_complex(const Json& e, const std::string& path) {
  if (e.is_number()) return get_as<double>(e, path);
  if (e.is_array() && e.size() == 2) return Complex(get_as<double>(e[0], path), get_as<double>(e[1], path));
  throw config_error(path, "expected a number or [re, im]");
}

inline std::vector<Edge> parse_edge_file(const std::filesystem::path& p, const std::string& path) {
  const auto nums = read_numbers(p, path);
  if (nums.size() % 3 != 0) throw Error(ErrorKind::io, "edge file '" + p.string() + "' needs 'i j weight' triples");
  std::vector<Edge> out;
  for (std::size_t k = 0; k < nums.size(); k += 3) {
    if (nums[k] < 0 || nums[k + 1] < 0 || nums[k] != std::floor(nums[k]) || nums[k + 1] != std::floor(nums[k + 1]))
      throw Error(ErrorKind::io, "edge file '" + p.string() + "' has a non-integer vertex index");
    out.push_back({Index(nums[k]), Index(nums[k + 1]), nums[k + 2]});
  }
  return out;
}

inline std::vector<double> number_list(const Json& obj, const std::string& key, const std::string& path,
                                       std::vector<double> fallback) {
  if (!obj.is_object() || !obj.contains(key)) return fallback;
  const Json& v = obj.at(key);
  if (!v.is_array() || v.empty()) throw config_error(path + key, "expected a nonempty list of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(get_as<double>(v[i], path + key + "[" + std::to_string(i) + "]"));
  return out;
}

}  // namespace detail

inline ExperimentKind experiment_kind_from_string(const std::string& s, const std::string& path = "experiment") {
  for (auto k : {ExperimentKind::verify_assumptions, ExperimentKind::decomposition, ExperimentKind::carre_split,
                 ExperimentKind::leibniz_sweep, ExperimentKind::proposition_norms, ExperimentKind::estimate_suite})
    if (s == to_string(k)) return k;
  throw detail::config_error(path, "unknown experiment '" + s + "'");
}

/// Parse and validate a config document. Relative file paths resolve against base_dir.
inline ExperimentConfig parse_config(const Json& j, const std::filesystem::path& base_dir = ".") {
  using namespace detail;
  if (!j.is_object()) throw config_error("", "top level must be an object");
  ExperimentConfig c;
  c.raw = j;
  const Json& seed = field(j, "seed", "");
  if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<long long>() >= 0))
    throw config_error("seed", "must be a nonnegative integer");
  c.seed = seed.get<std::uint64_t>();
  c.experiment = experiment_kind_from_string(get_as<std::string>(field(j, "experiment", ""), "experiment"));

  const Json& sp = field(j, "space", "");
  c.space.kind = get_as<std::string>(field(sp, "kind", "space."), "space.kind");
  if (c.space.kind == "grid") {
    const Json& dims = field(sp, "dims", "space.");
    if (!dims.is_array() || dims.empty() || dims.size() > 3) throw config_error("space.dims", "needs 1 to 3 entries");
    for (std::size_t i = 0; i < dims.size(); ++i) {
      const auto v = get_as<long long>(dims[i], "space.dims[" + std::to_string(i) + "]");
      if (v < 1) throw config_error("space.dims[" + std::to_string(i) + "]", "must be positive");
      c.space.dims.push_back(Index(v));
    }
    c.space.h = value_or<double>(sp, "h", "space.", 1.0);
    if (!(c.space.h > 0)) throw config_error("space.h", "must be positive");
    c.space.periodic = value_or<bool>(sp, "periodic", "space.", false);
  } else if (c.space.kind == "graph") {
    if (sp.contains("edges_file")) {
      c.space.edges = parse_edge_file(base_dir / get_as<std::string>(sp.at("edges_file"), "space.edges_file"),
                                      "space.edges_file");
    } else {
      const Json& e = field(sp, "edges", "space.");
      if (!e.is_array() || e.empty()) throw config_error("space.edges", "expected a nonempty list");
      for (std::size_t i = 0; i < e.size(); ++i) {
        const std::string ep = "space.edges[" + std::to_string(i) + "]";
        if (!e[i].is_array() || e[i].size() != 3) throw config_error(ep, "expected [i, j, weight]");
        c.space.edges.push_back({Index(get_as<long long>(e[i][0], ep)), Index(get_as<long long>(e[i][1], ep)),
                                 get_as<double>(e[i][2], ep)});
      }
    }
    if (sp.contains("mu")) {
      const auto m = number_list(sp, "mu", "space.", {});
      c.space.mu = Eigen::Map<const RVec>(m.data(), Index(m.size()));
    }
  } else {
    throw config_error("space.kind", "unknown space kind '" + c.space.kind + "'");
  }

  const Json& op = field(j, "operator", "");
  c.op.kind = get_as<std::string>(field(op, "kind", "operator."), "operator.kind");
  if (c.op.kind == "divergence_form") {
    if (c.space.kind != "grid") throw config_error("operator.kind", "divergence_form needs a grid space");
    const Index d = Index(c.space.dims.size());
    if (op.contains("A_file")) {
      const auto nums = read_numbers(base_dir / get_as<std::string>(op.at("A_file"), "operator.A_file"), "operator.A_file");
      const std::size_t per = std::size_t(2 * d * d);
      if (nums.empty() || nums.size() % per != 0)
        throw Error(ErrorKind::io, "coefficient file needs 2*d*d reals per cell");
      for (std::size_t k = 0; k < nums.size(); k += per) {
        CMat m(d, d);
        for (Index r = 0; r < d; ++r)
          for (Index s = 0; s < d; ++s) {
            const std::size_t o = k + std::size_t(2 * (r * d + s));
            m(r, s) = Complex(nums[o], nums[o + 1]);
          }
        c.op.A.push_back(m);
      }
    } else if (op.contains("A")) {
      c.op.A_constant = parse_matrix(op.at("A"), d, "operator.A");
    } else if (op.contains("A_smooth")) {
      c.op.A_smooth = SmoothProfile{value_or<double>(op.at("A_smooth"), "amplitude", "operator.A_smooth.", 0.5)};
    } else {
      c.op.A_constant = CMat::Identity(d, d);
    }
  } else if (c.op.kind == "delta_a") {
    if (c.space.kind != "grid") throw config_error("operator.kind", "delta_a needs a grid space");
    if (op.contains("a_file")) {
      const auto nums = read_numbers(base_dir / get_as<std::string>(op.at("a_file"), "operator.a_file"), "operator.a_file");
      if (nums.empty() || nums.size() % 2 != 0) throw Error(ErrorKind::io, "coefficient file needs 're im' pairs");
      Field a(Index(nums.size() / 2));
      for (Index i = 0; i < a.size(); ++i) a(i) = Complex(nums[std::size_t(2 * i)], nums[std::size_t(2 * i + 1)]);
      c.op.a = a;
    } else if (op.contains("a")) {
      c.op.a_constant = parse_complex(op.at("a"), "operator.a");
    } else if (op.contains("a_smooth")) {
      c.op.a_smooth = SmoothProfile{value_or<double>(op.at("a_smooth"), "amplitude", "operator.a_smooth.", 0.5)};
    } else {
      c.op.a_constant = Complex(1.0);
    }
  } else if (c.op.kind != "graph_laplacian") {
    throw config_error("operator.kind", "unknown operator kind '" + c.op.kind + "'");
  }

  if (j.contains("calculus")) {
    const Json& cal = j.at("calculus");
    if (cal.contains("D")) {
      const int D = get_as<int>(cal.at("D"), "calculus.D");
      if (D < 1) throw config_error("calculus.D", "must be positive");
      c.D = D;
    }
    c.strict = value_or<bool>(cal, "strict", "calculus.", false);
  }
  if (j.contains("quadrature")) {
    const Json& q = j.at("quadrature");
    c.quadrature.t_min_factor = value_or<double>(q, "t_min_factor", "quadrature.", c.quadrature.t_min_factor);
    c.quadrature.t_max_factor = value_or<double>(q, "t_max_factor", "quadrature.", c.quadrature.t_max_factor);
    c.quadrature.nodes_per_decade = value_or<int>(q, "nodes_per_decade", "quadrature.", c.quadrature.nodes_per_decade);
    if (c.quadrature.nodes_per_decade < 8) throw config_error("quadrature.nodes_per_decade", "must be at least 8");
    if (!(c.quadrature.t_min_factor > 0) || !(c.quadrature.t_max_factor > 0))
      throw config_error("quadrature", "factors must be positive");
  }
  if (j.contains("grids")) {
    c.p_grid = number_list(j.at("grids"), "p", "grids.", c.p_grid);
    c.alpha_grid = number_list(j.at("grids"), "alpha", "grids.", c.alpha_grid);
  }
  for (std::size_t i = 0; i < c.p_grid.size(); ++i)
    if (!(c.p_grid[i] > 1)) throw config_error("grids.p[" + std::to_string(i) + "]", "must exceed 1");
  for (std::size_t i = 0; i < c.alpha_grid.size(); ++i)
    if (!(c.alpha_grid[i] > 0 && c.alpha_grid[i] <= 1))
      throw config_error("grids.alpha[" + std::to_string(i) + "]", "must lie in (0,1]");
  c.p0 = value_or<double>(j, "p0", "", 2.0);
  if (!(c.p0 >= 2)) throw config_error("p0", "must be at least 2");
  if (j.contains("sampler")) {
    const Json& s = j.at("sampler");
    if (s.contains("kind")) {
      try {
        c.sampler = sampler_kind_from_string(get_as<std::string>(s.at("kind"), "sampler.kind"));
      } catch (const Error& e) {
        throw config_error("sampler.kind", e.what());
      }
    }
    const auto count = value_or<long long>(s, "count", "sampler.", 16);
    if (count < 1) throw config_error("sampler.count", "must be positive");
    c.sample_count = Index(count);
  }
  if (j.contains("output")) c.out_dir = value_or<std::string>(j.at("output"), "dir", "output.", c.out_dir);
  if (j.contains("estimates")) {
    if (!j.at("estimates").is_object()) throw config_error("estimates", "must be an object");
    c.estimates = j.at("estimates");
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  const std::string text = detail::read_text(path, "<config>");
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::config, std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

inline SpacePtr build_space(const SpaceSpec& s) {
  if (s.kind == "grid") return build_grid_space(s.dims, s.h, s.periodic);
  Index n = 0;
  for (const auto& e : s.edges) n = std::max({n, e.i + 1, e.j + 1});
  return build_graph_space(s.edges, s.mu ? *s.mu : RVec::Ones(n));
}

namespace detail {

inline double smooth_profile_value(const MetricMeasureSpace& space, Index x, double amplitude) {
  const auto& geo = *space.grid();
  const double len = geo.periodic ? geo.dims[0] * geo.h : std::max<Index>(geo.dims[0] - 1, 1) * geo.h;
  return 1.0 + amplitude * std::sin(2 * std::numbers::pi * static_cast<double>(geo.coords(x)[0]) * geo.h / len);
}

}  // namespace detail

/// Per-cell coefficient matrices of a divergence-form spec.
inline std::vector<CMat> coefficient_field(const OperatorSpec& o, const MetricMeasureSpace& space) {
  require(space.grid().has_value(), ErrorKind::parameter, "divergence form needs a grid space");
  const auto& geo = *space.grid();
  const Index d = Index(geo.dims.size());
  if (!o.A.empty()) return o.A;
  std::vector<CMat> A;
  for (Index x = 0; x < space.size(); ++x) {
    if (o.A_smooth) {
      // cell anchored at x, profile taken at its midpoint
      const double len = geo.periodic ? geo.dims[0] * geo.h : std::max<Index>(geo.dims[0] - 1, 1) * geo.h;
      const double mid = (static_cast<double>(geo.coords(x)[0]) + 0.5) * geo.h;
      A.push_back((1.0 + o.A_smooth->amplitude * std::sin(2 * std::numbers::pi * mid / len)) * CMat::Identity(d, d));
    } else {
      A.push_back(o.A_constant ? *o.A_constant : CMat(CMat::Identity(d, d)));
    }
  }
  return A;
}

inline GeneratorPtr build_operator(const OperatorSpec& o, SpacePtr space) {
  if (o.kind == "graph_laplacian") return graph_laplacian(space);
  if (o.kind == "divergence_form") return divergence_form(space, coefficient_field(o, *space));
  if (o.kind == "delta_a") {
    Field a;
    if (o.a) {
      a = *o.a;
    } else if (o.a_smooth) {
      a.resize(space->size());
      for (Index x = 0; x < space->size(); ++x) a(x) = detail::smooth_profile_value(*space, x, o.a_smooth->amplitude);
    } else {
      a = Field::Constant(space->size(), o.a_constant ? *o.a_constant : Complex(1.0));
    }
    return nondivergence_delta_a(space, a);
  }
  throw Error(ErrorKind::config, "unknown operator kind '" + o.kind + "'");
}

/// D = ceil(4 nu) + 1 unless overridden.
inline int default_order(double nu) { return static_cast<int>(std::ceil(4 * nu)) + 1; }

}  // namespace paralab
