#pragma once

#include "paralab/assumptions.hpp"
#include "paralab/calculus.hpp"
#include "paralab/config.hpp"
#include "paralab/core.hpp"
#include "paralab/estimates.hpp"
#include "paralab/operators.hpp"
#include "paralab/paraproducts.hpp"
#include "paralab/quadrature.hpp"
#include "paralab/sampling.hpp"
#include "paralab/space.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace paralab {

inline constexpr const char* kVersion = "0.1.0";

/// A CSV-ready table; cells are JSON scalars (numbers, bools, strings, null).
struct Table {
  std::vector<std::string> columns;
  std::vector<Json> rows;  ///< each row a JSON array aligned with columns
};

inline std::string format_cell(const Json& v) {
  if (v.is_null()) return "";
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::isnan(d)) return "nan";
    if (std::isinf(d)) return d > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", d);
    return buf;
  }
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

inline std::string csv_line(const Json& row) {
  std::string s;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) s += ',';
    s += format_cell(row[i]);
  }
  return s;
}

inline std::string to_csv(const Table& t) {
  std::string s;
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    if (i) s += ',';
    s += t.columns[i];
  }
  s += '\n';
  for (const auto& r : t.rows) s += csv_line(r) + '\n';
  return s;
}

/// JSON number, or null when not finite.
inline Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json to_json(const EstimateReport& r) {
  Json c = Json::object(), w = Json::object();
  for (const auto& [k, v] : r.constants) c[k] = num(v);
  for (const auto& [k, v] : r.window) w[k] = num(v);
  return {{"name", r.name}, {"constants", c}, {"violations", r.violations}, {"window", w},
          {"samples", r.samples}, {"seed", r.seed}, {"notes", r.notes}};
}

inline Table to_table(const EstimateReport& r) {
  Table t{r.columns, {}};
  for (const auto& row : r.rows) {
    Json j = Json::array();
    for (double v : row) j.push_back(num(v));
    t.rows.push_back(j);
  }
  return t;
}

struct RunOptions {
  unsigned threads = 1;
  std::optional<std::uint64_t> seed_override;
  std::optional<std::string> out_dir;
};

struct ExperimentResult {
  Json results = Json::object();
  std::vector<std::pair<std::string, Table>> tables;
  std::vector<std::string> violations;
};

/// Everything built once from a config: space, generator, calculus, grid.
struct Lab {
  ExperimentConfig cfg;
  SpacePtr space;
  GeneratorPtr gen;
  CalculusPtr calc;
  DoublingProfile doubling;
  int D = 5;
  QuadratureGrid grid{1e-2, 1e2, 40};
};

inline Lab build_lab(const ExperimentConfig& cfg) {
  Lab lab;
  lab.cfg = cfg;
  lab.space = build_space(cfg.space);
  lab.gen = build_operator(cfg.op, lab.space);
  CalculusOptions copt;
  copt.strict = cfg.strict;
  lab.calc = build_calculus(lab.gen, copt);
  lab.doubling = doubling_profile(*lab.space);
  lab.D = cfg.D ? *cfg.D : default_order(lab.doubling.nu_fit);
  lab.grid = adapted_grid(*lab.calc, cfg.quadrature);
  return lab;
}

/// fn(i) for i < count on up to `threads` workers; results in index order.
/// The first failing index (in index order) rethrows.
template <class T, class Fn>
std::vector<T> parallel_map(Index count, unsigned threads, Fn&& fn) {
  std::vector<std::optional<T>> out(static_cast<std::size_t>(count));
  std::vector<std::exception_ptr> errs(static_cast<std::size_t>(count));
  auto work = [&](unsigned w, unsigned nw) {
    for (Index i = w; i < count; i += nw) {
      try {
        out[std::size_t(i)] = fn(i);
      } catch (...) {
        errs[std::size_t(i)] = std::current_exception();
      }
    }
  };
  const unsigned nw = std::max(1u, std::min<unsigned>(threads, unsigned(std::max<Index>(count, 1))));
  if (nw == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < nw; ++w) pool.emplace_back(work, w, nw);
    for (auto& t : pool) t.join();
  }
  std::vector<T> res;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (errs[i]) std::rethrow_exception(errs[i]);
    res.push_back(std::move(*out[i]));
  }
  return res;
}

/// Main region: alpha in (0,1) for p in (1,p0); alpha in (0,p0/p) for p > p0.
inline bool inside_main_region(double p, double alpha, double p0) {
  if (!(alpha > 0)) return false;
  if (p > 1 && p < p0) return alpha < 1;
  if (p > p0) return alpha < p0 / p;
  return false;
}

namespace detail {

inline Json doubling_json(const DoublingProfile& d) {
  return {{"c_doubling", num(d.c_doubling)},   {"nu_fit", num(d.nu_fit)},
          {"radii_window", {num(d.r_min), num(d.r_max)}}, {"max_ratio_violation", num(d.max_ratio_violation)},
          {"nu_from_slope", d.nu_from_slope}};
}

inline std::pair<Field, Field> sample_pair(const Lab& lab, Index s) {
  const auto& c = lab.cfg;
  return {sample_test_function(*lab.calc, c.sampler, c.seed, std::uint64_t(2 * s)),
          sample_test_function(*lab.calc, c.sampler, c.seed, std::uint64_t(2 * s + 1))};
}

inline double est_double(const Json& o, const std::string& key, double fallback) {
  return o.is_object() && o.contains(key) ? get_as<double>(o.at(key), "estimates." + key) : fallback;
}
inline long long est_int(const Json& o, const std::string& key, long long fallback) {
  return o.is_object() && o.contains(key) ? get_as<long long>(o.at(key), "estimates." + key) : fallback;
}
inline std::vector<double> est_list(const Json& o, const std::string& key, std::vector<double> fallback) {
  return number_list(o, key, "estimates.", std::move(fallback));
}
inline const Json& est_section(const Lab& lab, const std::string& key) {
  static const Json empty = Json::object();
  return lab.cfg.estimates.contains(key) ? lab.cfg.estimates.at(key) : empty;
}

inline std::vector<double> sub_grid(const QuadratureGrid& g, Index count) {
  return log_spaced(g.t_min(), g.t_max(), count);
}

/// Rows of a table restricted to `row` when replaying.
inline bool wanted(const std::optional<Index>& only, Index row) { return !only || *only == row; }

}  // namespace detail

// ---------------------------------------------------------------- experiments

inline ExperimentResult verify_assumptions(const Lab& lab, unsigned threads, std::optional<Index> only = {}) {
  const auto& cfg = lab.cfg;
  const Generator& gen = *lab.gen;
  const SpectralCalculus& calc = *lab.calc;
  ExperimentResult r;
  const double metric = metric_axiom_violation(*lab.space, 512, 2000, cfg.seed);
  r.results["metric_axiom_violation"] = metric;
  if (metric > 1e-12) r.violations.push_back("metric axioms");
  r.results["doubling"] = detail::doubling_json(lab.doubling);
  r.results["generator"] = {{"kind", to_string(gen.kind)},        {"self_adjoint", gen.self_adjoint},
                            {"conservative", gen.conservative},   {"has_gamma", gen.has_gamma},
                            {"norm", gen.norm()},                  {"n", gen.size()}};
  const double omega = check_accretivity(gen, 1000, cfg.seed);
  r.results["accretivity_angle"] = omega;
  if (!(omega < std::numbers::pi / 2)) r.violations.push_back("accretivity");
  r.results["calculus"] = {{"path", to_string(calc.path())},
                           {"reconstruction_error", calc.reconstruction_error()},
                           {"eigvec_condition", num(calc.eigvec_condition())},
                           {"kernel_dimension", calc.kernel_dimension()},
                           {"lambda_min_nonzero", num(calc.lambda_min_nonzero())},
                           {"lambda_max", calc.lambda_max()}};
  if (cfg.op.kind == "divergence_form") {
    const auto ell = check_ellipticity(coefficient_field(cfg.op, *lab.space));
    r.results["ellipticity"] = {{"lambda_low", ell.lambda_low}, {"Lambda_high", ell.Lambda_high},
                                {"violations", ell.violations}};
    if (ell.violations > 0) r.violations.push_back("ellipticity");
  }
  if (!gen.has_gamma) {
    r.results["carre"] = nullptr;
    r.results["notes"] = {"generator has no carre du champ form; Gamma checks skipped"};
    return r;
  }
  const auto ts = detail::sub_grid(lab.grid, 9);
  const Index n = gen.size();
  Table t{{"sample", "residual_strong", "residual_weak_max_t", "weak_inequality_ratio"}, {}};
  struct Row {
    CarreIdentityReport rep;
  };
  const auto rows = parallel_map<Row>(cfg.sample_count, threads, [&](Index s) {
    if (!detail::wanted(only, s)) return Row{};
    auto rng = make_rng(cfg.seed, 0xca, std::uint64_t(s));
    const Field f = random_complex(n, rng), g = random_complex(n, rng);
    return Row{check_carre_identity(gen, f, g, calc, ts)};
  });
  double strong = 0.0, weak = 0.0, ratio = 0.0;
  for (Index s = 0; s < cfg.sample_count; ++s) {
    if (!detail::wanted(only, s)) continue;
    const auto& rep = rows[std::size_t(s)].rep;
    t.rows.push_back({s, rep.residual_strong, num(rep.residual_weak_max_t), num(rep.weak_inequality_ratio)});
    strong = std::max(strong, rep.residual_strong);
    weak = std::max(weak, rep.residual_weak_max_t);
    ratio = std::max(ratio, rep.weak_inequality_ratio);
  }
  r.tables.emplace_back("carre", t);
  r.results["carre"] = {{"samples", cfg.sample_count}, {"residual_strong_max", strong},
                        {"residual_weak_max", weak}, {"weak_inequality_ratio_max", ratio}};
  if (only) return r;
  const bool exact_identity = gen.kind == GeneratorKind::graph_laplacian;
  if (exact_identity && strong > 1e-12) r.violations.push_back("strong carre identity");
  const Index cs_samples = detail::est_int(cfg.estimates, "cauchy_schwarz_samples", 1000);
  const auto cs = check_cauchy_schwarz(gen, cs_samples, cfg.seed);
  r.results["cauchy_schwarz"] = {{"max_violation", cs.max_violation}, {"violations", cs.violations},
                                 {"samples", cs.samples}};
  if (cs.violations > 0) r.violations.push_back("pointwise Cauchy-Schwarz");
  const Index r2_samples = detail::est_int(cfg.estimates, "r2_samples", 1000);
  const auto r2 = check_r2_and_carre2(calc, r2_samples, cfg.seed);
  r.results["r2"] = {{"checked", r2.r2_checked},
                     {"r2_max_ratio", r2.r2_max_ratio},
                     {"r2_equality_residual", r2.r2_equality_residual},
                     {"carre2_max_ratio", r2.carre2_max_ratio},
                     {"summation_by_parts_residual", r2.sbp_residual},
                     {"samples", r2.samples},
                     {"skipped", r2.skipped}};
  if (gen.self_adjoint && gen.conservative) {
    if (r2.r2_equality_residual > 1e-10) r.violations.push_back("R2 equality");
    if (r2.carre2_max_ratio > 1 + 1e-10) r.violations.push_back("carre2 ratio");
  }
  return r;
}

namespace detail {

struct DecompRow {
  std::vector<double> residual, refined, split;
};

/// Spaces up to this size echo the terms of sample 0 in the report.
inline constexpr Index kTermEchoLimit = 16;

/// Complex field as a list of [re, im] pairs.
inline Json field_json(const Field& f) {
  Json out = Json::array();
  for (Index i = 0; i < f.size(); ++i) out.push_back({f(i).real(), f(i).imag()});
  return out;
}

inline DecompRow decomposition_sample(const Lab& lab, Index s, bool with_split) {
  const auto& calc = *lab.calc;
  const auto [f, g] = sample_pair(lab, s);
  const Field fg = f.cwiseProduct(g);
  const auto coarse = product_terms(calc, f, g, lab.D, lab.grid);
  const auto fine = product_terms(calc, f, g, lab.D, lab.grid.refined());
  std::optional<CarreSplitTerms> split;
  if (with_split) split = carre_split_terms(calc, f, g, lab.D, lab.grid);
  DecompRow row;
  for (double p : lab.cfg.p_grid) {
    const double denom = lp_norm(calc.mu(), fg, p);
    require(denom >= 1e-14, ErrorKind::degenerate_sample, "||fg||_p vanishes");
    row.residual.push_back(relative_product_residual(calc, fg, coarse, p));
    row.refined.push_back(relative_product_residual(calc, fg, fine, p));
    row.split.push_back(
        split ? lp_norm(calc.mu(), split->resonant - (split->first + split->second - 2.0 * split->pi_gamma), p) / denom
              : std::nan(""));
  }
  return row;
}

}  // namespace detail

inline ExperimentResult decomposition_experiment(const Lab& lab, unsigned threads, bool split_focus,
                                                 std::optional<Index> only = {}) {
  const auto& cfg = lab.cfg;
  const bool with_split = lab.gen->has_gamma;
  if (split_focus)
    require(with_split, ErrorKind::unsupported_operator, "carre_split needs a generator with a carre du champ form");
  const Index np = Index(cfg.p_grid.size());
  ExperimentResult r;
  Table t;
  t.columns = split_focus ? std::vector<std::string>{"sample", "p", "split_residual", "decomposition_residual"}
                          : std::vector<std::string>{"sample", "p", "residual", "residual_refined", "order",
                                                     "carre_split_residual"};
  const auto rows = parallel_map<detail::DecompRow>(cfg.sample_count, threads, [&](Index s) {
    bool need = !only;
    for (Index k = 0; k < np && !need; ++k) need = *only == s * np + k;
    return need ? detail::decomposition_sample(lab, s, with_split) : detail::DecompRow{};
  });
  double max_res = 0.0, max_split = 0.0, min_order = kInfinity, max_order = -kInfinity;
  for (Index s = 0; s < cfg.sample_count; ++s)
    for (Index k = 0; k < np; ++k) {
      const Index id = s * np + k;
      if (!detail::wanted(only, id)) continue;
      const auto& row = rows[std::size_t(s)];
      const double res = row.residual[std::size_t(k)], ref = row.refined[std::size_t(k)];
      const double order = ref > 0 ? std::log2(res / ref) : kInfinity;
      const double sp = row.split[std::size_t(k)];
      if (split_focus)
        t.rows.push_back({s, cfg.p_grid[std::size_t(k)], num(sp), res});
      else
        t.rows.push_back({s, cfg.p_grid[std::size_t(k)], res, ref, num(order), num(sp)});
      max_res = std::max(max_res, res);
      if (std::isfinite(sp)) max_split = std::max(max_split, sp);
      min_order = std::min(min_order, order);
      max_order = std::max(max_order, order);
    }
  r.tables.emplace_back(split_focus ? "carre_split" : "decomposition", t);
  r.results = {{"D", lab.D},
               {"grid", {{"t_min", lab.grid.t_min()}, {"t_max", lab.grid.t_max()},
                         {"nodes_per_decade", lab.grid.nodes_per_decade()}, {"nodes", lab.grid.size()}}},
               {"samples", cfg.sample_count},
               {"sampler", to_string(cfg.sampler)},
               {"residual_max", max_res},
               {"carre_split_residual_max", with_split ? num(max_split) : Json(nullptr)},
               {"order_min", num(min_order)},
               {"order_max", num(max_order)}};
  if (!only && lab.space->size() <= detail::kTermEchoLimit) {
    const auto [f, g] = detail::sample_pair(lab, 0);
    const auto terms = product_terms(*lab.calc, f, g, lab.D, lab.grid);
    Json echo = {{"f", detail::field_json(f)},
                 {"g", detail::field_json(g)},
                 {"resonant", detail::field_json(terms.resonant)},
                 {"pi_g_f", detail::field_json(terms.pi_g_f)},
                 {"pi_f_g", detail::field_json(terms.pi_f_g)}};
    echo["pi_gamma"] = with_split ? detail::field_json(pi_gamma(*lab.calc, f, g, lab.D, lab.grid)) : Json(nullptr);
    r.results["sample0_terms"] = echo;
  }
  return r;
}

namespace detail {

/// Sobolev seminorms of f, g and fg for every (alpha, p): index [a][p].
struct LeibnizSample {
  std::vector<std::vector<double>> nf, ng, nfg;
  double sup_f = 0, sup_g = 0;
};

inline LeibnizSample leibniz_sample(const Lab& lab, const Field& f, const Field& g) {
  const auto& calc = *lab.calc;
  const auto& cfg = lab.cfg;
  LeibnizSample out;
  out.sup_f = sup_norm(f);
  out.sup_g = sup_norm(g);
  const Field fg = f.cwiseProduct(g);
  for (double a : cfg.alpha_grid) {
    const Field lf = calc.frac_power(a / 2, f).value, lg = calc.frac_power(a / 2, g).value;
    const Field lfg = calc.frac_power(a / 2, fg).value;
    std::vector<double> x, y, z;
    for (double p : cfg.p_grid) {
      x.push_back(lp_norm(calc.mu(), lf, p));
      y.push_back(lp_norm(calc.mu(), lg, p));
      z.push_back(lp_norm(calc.mu(), lfg, p));
    }
    out.nf.push_back(x);
    out.ng.push_back(y);
    out.nfg.push_back(z);
  }
  return out;
}

}  // namespace detail

inline ExperimentResult leibniz_sweep(const Lab& lab, unsigned threads, std::optional<Index> only = {}) {
  const auto& cfg = lab.cfg;
  const Index na = Index(cfg.alpha_grid.size());
  const Index count = cfg.sample_count;
  const Index half = std::max<Index>(1, count / 2);
  const auto samples = parallel_map<detail::LeibnizSample>(count, threads, [&](Index s) {
    const auto [f, g] = detail::sample_pair(lab, s);
    return detail::leibniz_sample(lab, f, g);
  });
  ExperimentResult r;
  Table t{{"p", "alpha", "n_samples", "max_ratio", "mean_ratio", "stability", "inside_thm13"}, {}};
  Json rows = Json::array();
  double worst_stability = 0.0, worst_scale = 0.0;
  bool all_finite = true;
  for (std::size_t pi = 0; pi < cfg.p_grid.size(); ++pi)
    for (Index ai = 0; ai < na; ++ai) {
      const Index id = Index(pi) * na + ai;
      if (!detail::wanted(only, id)) continue;
      const double p = cfg.p_grid[pi], a = cfg.alpha_grid[std::size_t(ai)];
      double mx = 0.0, mx_half = 0.0, sum = 0.0;
      Index used = 0, arg = -1;
      for (Index s = 0; s < count; ++s) {
        const auto& L = samples[std::size_t(s)];
        const double den = L.nf[std::size_t(ai)][pi] * L.sup_g + L.sup_f * L.ng[std::size_t(ai)][pi];
        if (!(den > 0)) continue;
        const double ratio = L.nfg[std::size_t(ai)][pi] / den;
        ++used;
        sum += ratio;
        if (ratio > mx) {
          mx = ratio;
          arg = s;
        }
        if (s < half) mx_half = std::max(mx_half, ratio);
      }
      require(used > 0, ErrorKind::degenerate_sample, "all Leibniz samples are degenerate");
      const double stability = mx > 0 ? (mx - mx_half) / mx : 0.0;
      // scale invariance on the maximizing pair
      const auto [f, g] = detail::sample_pair(lab, arg);
      const double base = leibniz_ratio(*lab.calc, f, g, p, a);
      const double scaled = leibniz_ratio(*lab.calc, 3.7 * f, 0.25 * g, p, a);
      const double scale_dev = std::abs(scaled - base) / base;
      const bool inside = inside_main_region(p, a, cfg.p0);
      t.rows.push_back({p, a, count, mx, sum / double(used), stability, inside});
      rows.push_back({{"p", p}, {"alpha", a}, {"n_samples", count}, {"used_samples", used}, {"max_ratio", mx},
                      {"mean_ratio", sum / double(used)}, {"stability", stability}, {"argmax_sample", arg},
                      {"inside_thm13", inside}, {"p0_used", cfg.p0}, {"scale_invariance_deviation", scale_dev}});
      worst_stability = std::max(worst_stability, stability);
      worst_scale = std::max(worst_scale, scale_dev);
      all_finite = all_finite && std::isfinite(mx);
    }
  r.tables.emplace_back("leibniz", t);
  r.results = {{"rows", rows},
               {"p0", cfg.p0},
               {"samples", count},
               {"stability_max", worst_stability},
               {"scale_invariance_max_deviation", worst_scale},
               {"all_finite", all_finite},
               {"sampler", to_string(cfg.sampler)}};
  return r;
}

namespace detail {

struct PropSample {
  Field f, g, pi_g_f, first, pi_gamma;
};

struct PropositionSpec {
  std::string name;
  bool uses_alpha;
  bool needs_gamma;
};

inline const std::vector<PropositionSpec>& propositions() {
  static const std::vector<PropositionSpec> v{{"errorterms", true, false}, {"lp_para1", false, false},
                                              {"lp_para2", false, false},  {"lp_para", false, true},
                                              {"error_2", true, false},    {"sp_para", true, true},
                                              {"inter", true, true}};
  return v;
}

inline bool in_range(const std::string& name, double p, double a, double p0) {
  if (name == "lp_para") return p > 2;
  if (name == "lp_para1" || name == "lp_para2") return p > 1;
  if (name == "errorterms" || name == "error_2") return p > 1 && a > 0 && a < 1;
  if (name == "sp_para") return p > 1 && p < p0 && a > 0 && a < 1;
  if (name == "inter") return p > p0 && a > 0 && a < p0 / p;
  return false;
}

}  // namespace detail

/// Empirical ratio maxima for each stated estimate over its (p, alpha) range.
inline ExperimentResult proposition_norms(const Lab& lab, unsigned threads, std::optional<Index> only = {}) {
  const auto& cfg = lab.cfg;
  const auto& calc = *lab.calc;
  const bool has_gamma = lab.gen->has_gamma;
  const Index count = cfg.sample_count;
  const auto samples = parallel_map<detail::PropSample>(count, threads, [&](Index s) {
    auto [f, g] = detail::sample_pair(lab, s);
    detail::PropSample out;
    out.pi_g_f = paraproduct_pi_g(calc, f, g, lab.D, lab.grid);
    out.first = split_first_term(calc, f, g, lab.D, lab.grid);
    if (has_gamma) out.pi_gamma = pi_gamma(calc, f, g, lab.D, lab.grid);
    out.f = std::move(f);
    out.g = std::move(g);
    return out;
  });
  struct Cell {
    std::string prop;
    double p;
    std::optional<double> alpha;
  };
  std::vector<Cell> cells;
  for (const auto& ps : detail::propositions()) {
    if (ps.needs_gamma && !has_gamma) continue;
    for (double p : cfg.p_grid) {
      if (ps.uses_alpha) {
        for (double a : cfg.alpha_grid)
          if (detail::in_range(ps.name, p, a, cfg.p0)) cells.push_back({ps.name, p, a});
      } else if (detail::in_range(ps.name, p, 0.5, cfg.p0)) {
        cells.push_back({ps.name, p, std::nullopt});
      }
    }
  }
  ExperimentResult r;
  Table t{{"proposition", "p", "alpha", "n_samples", "max_ratio", "mean_ratio"}, {}};
  Json reports = Json::object();
  const RVec& mu = calc.mu();
  auto sob = [&](const Field& v, double p, double a) { return lp_norm(mu, calc.frac_power(a / 2, v).value, p); };
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    if (!detail::wanted(only, Index(ci))) continue;
    const auto& c = cells[ci];
    double mx = 0.0, sum = 0.0;
    Index used = 0;
    for (Index s = 0; s < count; ++s) {
      const auto& S = samples[std::size_t(s)];
      double num_v = 0, den = 0;
      const double gi = sup_norm(S.g), fi = sup_norm(S.f);
      if (c.prop == "errorterms") {
        num_v = sob(S.pi_g_f, c.p, *c.alpha);
        den = sob(S.f, c.p, *c.alpha) * gi;
      } else if (c.prop == "lp_para1") {
        num_v = lp_norm(mu, S.first, c.p);
        den = lp_norm(mu, S.f, c.p) * gi;
      } else if (c.prop == "lp_para2") {
        num_v = lp_norm(mu, S.first, c.p);
        den = fi * lp_norm(mu, S.g, c.p);
      } else if (c.prop == "lp_para") {
        num_v = lp_norm(mu, S.pi_gamma, c.p);
        den = lp_norm(mu, S.f, c.p) * gi;
      } else if (c.prop == "error_2") {
        num_v = sob(S.first, c.p, *c.alpha);
        den = sob(S.f, c.p, *c.alpha) * gi;
      } else {
        num_v = sob(S.pi_gamma, c.p, *c.alpha);
        den = sob(S.f, c.p, *c.alpha) * gi;
      }
      if (!(den > 0)) continue;
      const double ratio = num_v / den;
      mx = std::max(mx, ratio);
      sum += ratio;
      ++used;
    }
    require(used > 0, ErrorKind::degenerate_sample, "all samples are degenerate for " + c.prop);
    const Json alpha = c.alpha ? Json(*c.alpha) : Json(nullptr);
    t.rows.push_back({c.prop, c.p, alpha, count, mx, sum / double(used)});
    if (!reports.contains(c.prop))
      reports[c.prop] = {{"name", c.prop}, {"rows", Json::array()}, {"samples", count}, {"seed", cfg.seed}};
    reports[c.prop]["rows"].push_back({{"p", c.p}, {"alpha", alpha}, {"max_ratio", mx},
                                       {"mean_ratio", sum / double(used)}, {"used_samples", used}});
  }
  r.tables.emplace_back("propositions", t);
  r.results = {{"reports", reports}, {"D", lab.D}, {"p0", cfg.p0}, {"samples", count}};
  if (!has_gamma) r.results["notes"] = {"generator has no carre du champ form; Pi_Gamma estimates skipped"};
  return r;
}

inline ExperimentResult estimate_suite(const Lab& lab, unsigned threads) {
  (void)threads;
  const auto& cfg = lab.cfg;
  const auto& calc = *lab.calc;
  const auto& space = *lab.space;
  const bool has_gamma = lab.gen->has_gamma;
  ExperimentResult r;
  std::vector<std::string> include{"ue", "dg", "gradient", "square", "angle", "imaginary"};
  if (cfg.estimates.contains("include")) {
    include.clear();
    for (const auto& v : cfg.estimates.at("include")) include.push_back(detail::get_as<std::string>(v, "estimates.include"));
  }
  auto on = [&](const std::string& k) { return std::find(include.begin(), include.end(), k) != include.end(); };
  Json reps = Json::object();
  if (on("ue")) {
    const auto& o = detail::est_section(lab, "ue");
    UeOptions uo;
    uo.t_min = detail::est_double(o, "t_min", 0.0);
    uo.t_max = detail::est_double(o, "t_max", 0.0);
    uo.t_count = detail::est_int(o, "t_count", 8);
    auto rep = fit_ue(calc, uo);
    rep.seed = cfg.seed;
    if (rep.violations > 0 || !std::isfinite(rep.constants["C"])) r.violations.push_back("UE");
    reps["ue"] = to_json(rep);
  }
  if (on("dg") && space.grid()) {
    const auto& o = detail::est_section(lab, "dg");
    const double h = space.grid()->h;
    std::vector<double> radii;
    for (double v : detail::est_list(o, "radii", {2.0})) radii.push_back(v * h);
    std::vector<Index> seps;
    for (double v : detail::est_list(o, "separations", {8, 12, 16, 24, 32})) seps.push_back(Index(v));
    const Index base = detail::est_int(o, "base", space.grid()->dims[0] / 8);
    DgOptions dopt;
    dopt.samples = detail::est_int(o, "samples", 64);
    dopt.seed = cfg.seed;
    auto rep = davies_gaffney(calc, grid_ball_pairs(space, radii, seps, base), dopt);
    if (rep.violations > 0) r.violations.push_back("DG");
    reps["dg"] = to_json(rep);
    r.tables.emplace_back("dg", to_table(rep));
  }
  if (on("gradient") && has_gamma) {
    const auto& o = detail::est_section(lab, "gradient");
    GradientOptions go;
    go.samples = detail::est_int(o, "samples", 200);
    go.seed = cfg.seed;
    const auto ts = detail::log_spaced(1.0 / calc.lambda_max(), 1.0 / calc.lambda_min_nonzero(),
                                       detail::est_int(o, "t_count", 7));
    Json arr = Json::array();
    Table all{{"p", "t", "estimate", "exact_p2"}, {}};
    for (double p : detail::est_list(o, "p", {cfg.p0})) {
      auto rep = gradient_bound(calc, p, ts, go);
      if (rep.violations > 0) r.violations.push_back("gradient bound p=2 exact value");
      arr.push_back(to_json(rep));
      for (const auto& row : rep.rows) all.rows.push_back({p, row[0], row[1], num(row[2])});
    }
    reps["gradient"] = arr;
    r.tables.emplace_back("gradient", all);
  }
  if (on("square")) {
    const auto& o = detail::est_section(lab, "square");
    const double alpha = detail::est_double(o, "alpha", 0.5);
    const int N = int(detail::est_int(o, "N", 2));
    const Index ns = detail::est_int(o, "samples", 100);
    const auto grid = adapted_grid_for_power(calc, 2 * alpha, cfg.quadrature);
    const auto fine = grid.refined();
    std::optional<QuadratureGrid> ggrid, gfine;
    if (has_gamma && alpha < 1) {
      ggrid = adapted_grid_for_power(calc, 1 - alpha, cfg.quadrature);
      gfine = ggrid->refined();
    }
    const double exact_scalar = std::sqrt(vertical_square_scalar(alpha, N));
    Table t{{"family", "p", "max_ratio", "max_ratio_refined", "refinement_change", "exact_max_deviation"}, {}};
    Json arr = Json::array();
    for (double p : detail::est_list(o, "p", {2.0, 1.5, 4.0})) {
      struct SqRow {
        double v, vf, g, gf;
      };
      const auto rows = parallel_map<SqRow>(ns, threads, [&](Index s) {
        const Field f = sample_test_function(calc, cfg.sampler, cfg.seed, std::uint64_t(s));
        SqRow row{vertical_square_function(calc, f, alpha, N, p, grid),
                  vertical_square_function(calc, f, alpha, N, p, fine), std::nan(""), std::nan("")};
        if (ggrid) {
          row.g = gamma_square_function(calc, f, alpha, N, p, *ggrid);
          row.gf = gamma_square_function(calc, f, alpha, N, p, *gfine);
        }
        return row;
      });
      double mv = 0, mvf = 0, mg = 0, mgf = 0, dev = 0;
      for (const auto& row : rows) {
        mv = std::max(mv, row.v);
        mvf = std::max(mvf, row.vf);
        if (ggrid) {
          mg = std::max(mg, row.g);
          mgf = std::max(mgf, row.gf);
        }
        dev = std::max(dev, std::abs(row.v - exact_scalar) / exact_scalar);
      }
      const bool exact_ok = p == 2.0 && lab.gen->self_adjoint;
      t.rows.push_back({"vertical", p, mv, mvf, std::abs(mvf - mv) / mvf, exact_ok ? num(dev) : Json(nullptr)});
      if (ggrid) t.rows.push_back({"gamma", p, mg, mgf, std::abs(mgf - mg) / mgf, nullptr});
      arr.push_back({{"p", p}, {"vertical_max", mv}, {"vertical_max_refined", mvf},
                     {"vertical_exact", exact_ok ? num(exact_scalar) : Json(nullptr)},
                     {"vertical_exact_max_deviation", exact_ok ? num(dev) : Json(nullptr)},
                     {"gamma_max", ggrid ? num(mg) : Json(nullptr)},
                     {"gamma_max_refined", ggrid ? num(mgf) : Json(nullptr)}});
    }
    reps["square"] = {{"alpha", alpha}, {"N", N}, {"samples", ns}, {"rows", arr}};
    r.tables.emplace_back("square", t);
  }
  if (on("angle") && has_gamma) {
    const auto& o = detail::est_section(lab, "angle");
    const Index ns = detail::est_int(o, "samples", 50);
    const int N = int(detail::est_int(o, "N", 2));
    const double nu = detail::est_double(o, "nu", lab.doubling.nu_fit);
    const auto ps = detail::est_list(o, "p", {2.0, 4.0});
    const auto js = detail::est_list(o, "j", {1, 2, 3});
    QuadratureSpec qs = cfg.quadrature;
    qs.nodes_per_decade = int(detail::est_int(o, "nodes_per_decade", 10));
    const auto grid = adapted_grid(calc, qs);
    const auto vals = parallel_map<std::vector<double>>(ns, threads, [&](Index s) {
      const Field f = sample_test_function(calc, cfg.sampler, cfg.seed, std::uint64_t(s));
      const auto F = sqrt_t_gamma_pt(calc, f, N, grid);
      std::vector<double> out;
      for (double p : ps)
        for (double j : js) out.push_back(change_of_angle_ratio(space, F, p, int(j), nu));
      return out;
    });
    Table t{{"p", "j", "max_ratio", "max_ratio_half", "stability"}, {}};
    double bound = 0.0, worst_stab = 0.0;
    const Index half = std::max<Index>(1, ns / 2);
    for (std::size_t pi = 0; pi < ps.size(); ++pi)
      for (std::size_t ji = 0; ji < js.size(); ++ji) {
        const std::size_t k = pi * js.size() + ji;
        double mx = 0, mh = 0;
        for (Index s = 0; s < ns; ++s) {
          mx = std::max(mx, vals[std::size_t(s)][k]);
          if (s < half) mh = std::max(mh, vals[std::size_t(s)][k]);
        }
        const double stab = (mx - mh) / mx;
        t.rows.push_back({ps[pi], js[ji], mx, mh, stab});
        bound = std::max(bound, mx);
        worst_stab = std::max(worst_stab, stab);
      }
    reps["angle"] = {{"nu", nu}, {"samples", ns}, {"common_bound", bound}, {"stability_max", worst_stab},
                     {"N", N}};
    r.tables.emplace_back("angle", t);
  }
  if (on("imaginary")) {
    const auto& o = detail::est_section(lab, "imaginary");
    ImaginaryPowerOptions io;
    io.samples = detail::est_int(o, "samples", 100);
    io.seed = cfg.seed;
    const auto etas = detail::est_list(o, "eta", {-8, -4, -2, -1, 0, 1, 2, 4, 8});
    Json arr = Json::array();
    Table all{{"p", "eta", "norm"}, {}};
    for (double p : detail::est_list(o, "p", {2.0, 4.0})) {
      auto rep = imaginary_power_growth(calc, p, etas, io);
      arr.push_back(to_json(rep));
      for (const auto& row : rep.rows) all.rows.push_back({p, row[0], row[1]});
    }
    reps["imaginary"] = arr;
    r.tables.emplace_back("imaginary", all);
  }
  r.results = {{"reports", reps}, {"doubling", detail::doubling_json(lab.doubling)}, {"D", lab.D}};
  return r;
}

inline ExperimentResult run_experiment(const Lab& lab, unsigned threads, std::optional<Index> only = {}) {
  switch (lab.cfg.experiment) {
    case ExperimentKind::verify_assumptions: return verify_assumptions(lab, threads, only);
    case ExperimentKind::decomposition: return decomposition_experiment(lab, threads, false, only);
    case ExperimentKind::carre_split: return decomposition_experiment(lab, threads, true, only);
    case ExperimentKind::leibniz_sweep: return leibniz_sweep(lab, threads, only);
    case ExperimentKind::proposition_norms: return proposition_norms(lab, threads, only);
    case ExperimentKind::estimate_suite:
      require(!only, ErrorKind::config, "estimate_suite rows cannot be replayed in isolation");
      return estimate_suite(lab, threads);
  }
  throw Error(ErrorKind::config, "unknown experiment");
}

inline Json report_json(const Lab& lab, const ExperimentResult& res) {
  Json tables = Json::array();
  for (const auto& [name, t] : res.tables) tables.push_back(name);
  return {{"experiment", to_string(lab.cfg.experiment)},
          {"seed", lab.cfg.seed},
          {"n", lab.space->size()},
          {"operator", lab.cfg.op.kind},
          {"results", res.results},
          {"tables", tables},
          {"violations", res.violations},
          {"status", res.violations.empty() ? "ok" : "violations"}};
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write '" + p.string() + "'");
  out << text;
}

/// Execute a config: writes report.json, tables/*.csv and manifest.json.
/// Returns 0 on success, 2 when an assumption verifier reports violations.
inline int run(ExperimentConfig cfg, const RunOptions& opt = {}) {
  if (opt.seed_override) cfg.seed = *opt.seed_override;
  if (opt.out_dir) cfg.out_dir = *opt.out_dir;
  const Lab lab = build_lab(cfg);
  const auto res = run_experiment(lab, opt.threads);
  namespace fs = std::filesystem;
  const fs::path out(cfg.out_dir);
  fs::create_directories(out / "tables");
  write_file(out / "report.json", report_json(lab, res).dump(2) + "\n");
  Json files = Json::array({"report.json"});
  for (const auto& [name, t] : res.tables) {
    write_file(out / "tables" / (name + ".csv"), to_csv(t));
    files.push_back("tables/" + name + ".csv");
  }
  Json cfg_echo = cfg.raw;
  cfg_echo["seed"] = cfg.seed;
  const Json manifest = {{"config", cfg_echo},
                         {"seed", cfg.seed},
                         {"experiment", to_string(cfg.experiment)},
                         {"versions",
                          {{"paralab", kVersion},
                           {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                         "." + std::to_string(EIGEN_MINOR_VERSION)},
                           {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                                 std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                                 std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                           {"compiler", __VERSION__}}},
                         {"threads", opt.threads},
                         {"files", files},
                         {"timestamp", utc_timestamp()}};
  write_file(out / "manifest.json", manifest.dump(2) + "\n");
  return res.violations.empty() ? 0 : 2;
}

/// Recompute a single CSV row of `table`; returns header and row lines.
inline std::string replay(ExperimentConfig cfg, const std::string& table, Index row, const RunOptions& opt = {}) {
  if (opt.seed_override) cfg.seed = *opt.seed_override;
  require(row >= 0, ErrorKind::parameter, "row id must be nonnegative");
  const Lab lab = build_lab(cfg);
  const auto res = run_experiment(lab, opt.threads, row);
  for (const auto& [name, t] : res.tables) {
    if (name != table) continue;
    require(!t.rows.empty(), ErrorKind::parameter, "row " + std::to_string(row) + " does not exist in " + table);
    Table one{t.columns, {t.rows.front()}};
    return to_csv(one);
  }
  throw Error(ErrorKind::parameter, "experiment " + std::string(to_string(cfg.experiment)) + " has no table '" +
                                        table + "'");
}

}  // namespace paralab
