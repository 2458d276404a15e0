#pragma once

// Run orchestration behind the command-line tool: config normalization,
// per-seed model runs with cached intermediate results, and report assembly.
//
// Gap labels index the bulk gaps (width >= numerics.min_gap_width) of the
// torus Floquet operator, sorted by centre angle. A label may also be given
// as {"theta": angle}.

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "floquet/errors.hpp"
#include "floquet/evolution.hpp"
#include "floquet/gap_function.hpp"
#include "floquet/invariants_bulk.hpp"
#include "floquet/invariants_edge.hpp"
#include "floquet/io.hpp"
#include "floquet/models.hpp"
#include "floquet/spectral.hpp"

namespace floquet::pipeline {

inline constexpr const char* library_version = "1.0.0";

// ---------------------------------------------------------------- config

inline std::string fmt_double(double x) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, p);
}

namespace detail {

inline const json& need(const json& j, const std::string& key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(where + "." + key + ": missing");
  return j.at(key);
}

template <class T>
T get_or(const json& j, const std::string& key, T fallback, const std::string& where) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

inline void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError(where + "." + it.key() + ": unknown key");
}

inline const std::set<std::string>& request_kinds() {
  static const std::set<std::string> k{"band_chern",     "winding",        "edge_count",     "edge_winding",
                                       "verify_prop21",  "verify_prop31",  "verify_prop32",  "verify_cor34",
                                       "verify_bott",    "oracle"};
  return k;
}

inline bool gap_ref_ok(const json& g) {
  return (g.is_number_integer() && g.get<long long>() >= 0) || (g.is_object() && g.contains("theta") && g["theta"].is_number());
}

}  // namespace detail

/// Fill defaults and validate. The result is the effective config echoed in reports.
inline json normalize_config(const json& in) {
  using namespace detail;
  if (!in.is_object()) throw ConfigError("config: must be a JSON object");
  reject_unknown(in, {"model", "geometry", "requests", "ensemble", "numerics", "output"}, "config");
  json out;

  const json& m = need(in, "model", "config");
  const std::string kind = get_or<std::string>(m, "kind", "", "model");
  json mo{{"kind", kind}};
  if (kind == "chalker_coddington") {
    reject_unknown(m, {"kind", "beta", "lambda", "cuts"}, "model");
    mo["beta"] = get_or<double>(m, "beta", std::numbers::pi / 8, "model");
    mo["lambda"] = get_or<double>(m, "lambda", 0.0, "model");
    if (!(mo["beta"].get<double>() >= 0.0 && mo["beta"].get<double>() <= std::numbers::pi))
      throw ConfigError("model.beta: must lie in [0, pi]");
    if (!(mo["lambda"].get<double>() >= 0.0)) throw ConfigError("model.lambda: must be >= 0");
    if (m.contains("cuts") && !m["cuts"].is_null()) {
      const auto c = get_or<std::vector<double>>(m, "cuts", {}, "model");
      if (c.size() != 4) throw ConfigError("model.cuts: needs 4 angles");
      mo["cuts"] = c;
    } else {
      mo["cuts"] = nullptr;
    }
  } else if (kind == "driven_qwz") {
    reject_unknown(m, {"kind", "mass", "hopping", "margin"}, "model");
    mo["mass"] = get_or<double>(m, "mass", 1.0, "model");
    mo["hopping"] = get_or<double>(m, "hopping", 1.0, "model");
    mo["margin"] = get_or<double>(m, "margin", 1.01, "model");
  } else if (kind == "trivial") {
    reject_unknown(m, {"kind", "fiber"}, "model");
    mo["fiber"] = get_or<int>(m, "fiber", 2, "model");
  } else if (kind == "custom") {
    reject_unknown(m, {"kind", "protocol"}, "model");
    if (!m.contains("protocol") || !m["protocol"].is_string()) throw ConfigError("model.protocol: missing file path");
    mo["protocol"] = m["protocol"];
  } else {
    throw ConfigError("model.kind: unknown value '" + kind + "'");
  }
  out["model"] = mo;

  const json g = in.value("geometry", json::object());
  reject_unknown(g, {"extents", "edge_extents", "open_axis"}, "geometry");
  const auto ext = get_or<std::vector<int>>(g, "extents", {24, 24}, "geometry");
  out["geometry"] = {{"extents", ext},
                     {"edge_extents", get_or<std::vector<int>>(g, "edge_extents", ext.size() == 2 ? std::vector<int>{ext[0], 32} : ext, "geometry")},
                     {"open_axis", get_or<int>(g, "open_axis", static_cast<int>(ext.size()), "geometry")}};

  const json reqs = in.value("requests", json::array());
  if (!reqs.is_array()) throw ConfigError("requests: must be an array");
  json ro = json::array();
  for (std::size_t k = 0; k < reqs.size(); ++k) {
    const std::string where = "requests[" + std::to_string(k) + "]";
    const json& r = reqs[k];
    reject_unknown(r, {"kind", "gaps", "gap", "window", "index_set", "id"}, where);
    const std::string rk = get_or<std::string>(r, "kind", "", where);
    if (!request_kinds().count(rk)) throw ConfigError(where + ".kind: unknown value '" + rk + "'");
    json e{{"kind", rk}, {"id", get_or<std::string>(r, "id", rk + "_" + std::to_string(k), where)}};
    const bool pair = rk == "band_chern" || rk == "edge_winding" || rk == "verify_prop21" || rk == "verify_prop31" ||
                      rk == "verify_prop32" || rk == "verify_bott" || rk == "oracle";
    if (pair) {
      const json gp = r.value("gaps", json::array({0, 1}));
      if (!gp.is_array() || gp.size() != 2 || !gap_ref_ok(gp[0]) || !gap_ref_ok(gp[1]))
        throw ConfigError(where + ".gaps: needs two gap labels");
      e["gaps"] = gp;
    } else {
      json gs = r.contains("gaps") ? r["gaps"] : (r.contains("gap") ? json::array({r["gap"]}) : json("all"));
      if (!(gs == json("all"))) {
        if (!gs.is_array() || gs.empty()) throw ConfigError(where + ".gaps: needs gap labels or \"all\"");
        for (const auto& x : gs)
          if (!gap_ref_ok(x)) throw ConfigError(where + ".gaps: bad gap label");
      }
      e["gaps"] = gs;
    }
    if (rk == "edge_count" || rk == "edge_winding") {
      const std::string w = get_or<std::string>(r, "window", "lower", where);
      if (w != "lower" && w != "upper" && w != "both") throw ConfigError(where + ".window: must be lower, upper or both");
      e["window"] = w;
    }
    if (rk == "band_chern" || rk == "winding") {
      std::vector<int> def = rk == "band_chern" ? std::vector<int>{1, 2} : std::vector<int>{0, 1, 2};
      if (ext.size() == 1) def = rk == "band_chern" ? std::vector<int>{} : std::vector<int>{0};
      e["index_set"] = get_or<std::vector<int>>(r, "index_set", def, where);
      const IndexSet is(e["index_set"].get<std::vector<int>>());
      try {
        is.check_dimension(static_cast<int>(ext.size()));
      } catch (const DomainError& ex) {
        throw ConfigError(where + ".index_set: " + ex.what());
      }
      if (rk == "winding" && (is.is_even() || !is.contains_time()))
        throw ConfigError(where + ".index_set: a winding needs an odd set containing 0");
      if (rk == "band_chern" && (!is.is_even() || is.contains_time()))
        throw ConfigError(where + ".index_set: a band Chern number needs an even set of spatial axes");
    }
    ro.push_back(e);
  }
  out["requests"] = ro;

  const json en = in.value("ensemble", json::object());
  reject_unknown(en, {"seeds", "base_seed", "count"}, "ensemble");
  if (en.contains("seeds")) {
    const auto s = get_or<std::vector<std::uint64_t>>(en, "seeds", {}, "ensemble");
    if (s.empty()) throw ConfigError("ensemble.seeds: empty list");
    out["ensemble"] = {{"seeds", s}};
  } else {
    const auto base = get_or<std::uint64_t>(en, "base_seed", 1, "ensemble");
    const auto count = get_or<int>(en, "count", 1, "ensemble");
    if (count < 1) throw ConfigError("ensemble.count: must be >= 1");
    std::vector<std::uint64_t> s;
    for (int i = 0; i < count; ++i) s.push_back(base + static_cast<std::uint64_t>(i));
    out["ensemble"] = {{"seeds", s}};
  }

  const json nu = in.value("numerics", json::object());
  reject_unknown(nu, {"quadrature_nodes", "min_gap_width", "bump_fraction", "oracle_grid", "tolerances"}, "numerics");
  json no{{"quadrature_nodes", get_or<int>(nu, "quadrature_nodes", 16, "numerics")},
          {"min_gap_width", get_or<double>(nu, "min_gap_width", 0.2, "numerics")},
          {"bump_fraction", get_or<double>(nu, "bump_fraction", 0.8, "numerics")},
          {"oracle_grid", get_or<int>(nu, "oracle_grid", 64, "numerics")}};
  if (no["quadrature_nodes"].get<int>() < 1) throw ConfigError("numerics.quadrature_nodes: must be >= 1");
  if (!(no["min_gap_width"].get<double>() > 0.0)) throw ConfigError("numerics.min_gap_width: must be positive");
  const double bf = no["bump_fraction"].get<double>();
  if (!(bf > 0.0 && bf < 1.0)) throw ConfigError("numerics.bump_fraction: must lie in (0, 1)");
  json tol{{"prop21", 0.05}, {"prop31", 0.1}, {"prop32", 0.1}, {"cor34", 0.1}, {"bott", 0.02}, {"oracle", 0.05}};
  if (nu.contains("tolerances")) {
    reject_unknown(nu["tolerances"], {"prop21", "prop31", "prop32", "cor34", "bott", "oracle"}, "numerics.tolerances");
    for (auto it = nu["tolerances"].begin(); it != nu["tolerances"].end(); ++it) {
      if (!it.value().is_number()) throw ConfigError("numerics.tolerances." + it.key() + ": must be a number");
      tol[it.key()] = it.value();
    }
  }
  no["tolerances"] = tol;
  out["numerics"] = no;

  const json op = in.value("output", json::object());
  reject_unknown(op, {"prefix", "edge_spectrum"}, "output");
  out["output"] = {{"prefix", get_or<std::string>(op, "prefix", "run", "output")},
                   {"edge_spectrum", get_or<bool>(op, "edge_spectrum", false, "output")}};
  return out;
}

/// Apply "a.b.c=value"; value parsed as JSON when possible, else taken as a string.
inline void apply_override(json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "': expected key=value");
  const std::string path = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &cfg;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("override '" + assignment + "': empty path component");
    const bool index = !key.empty() && std::all_of(key.begin(), key.end(), ::isdigit) && node->is_array();
    json* child = nullptr;
    if (index) {
      const std::size_t i = std::stoul(key);
      if (i >= node->size()) throw ConfigError("override '" + assignment + "': index " + key + " out of range");
      child = &(*node)[i];
    } else {
      if (!node->is_object() && !node->is_null()) throw ConfigError("override '" + assignment + "': '" + key + "' is not inside an object");
      child = &(*node)[key];
    }
    if (dot == std::string::npos) {
      *child = value;
      return;
    }
    node = child;
    start = dot + 1;
  }
}

// ---------------------------------------------------------------- per-seed run

struct BuiltModel {
  DrivingProtocol protocol;
  std::optional<BlochModel> bloch;
};

inline BuiltModel build_model(const json& model, const Geometry& torus, std::uint64_t seed) {
  const std::string kind = model["kind"];
  if (kind == "chalker_coddington") {
    ChalkerCoddingtonSpec spec{model["beta"].get<double>(), {seed, model["lambda"].get<double>()}};
    std::array<double, 4> cuts{};
    const bool given = !model["cuts"].is_null();
    if (given)
      for (int k = 0; k < 4; ++k) cuts[static_cast<std::size_t>(k)] = model["cuts"][static_cast<std::size_t>(k)].get<double>();
    auto cc = build_chalker_coddington(torus, spec, given ? &cuts : nullptr);
    BuiltModel b{cc.protocol, std::nullopt};
    if (spec.disorder.lambda == 0.0) b.bloch = chalker_coddington_bloch(spec.beta);
    return b;
  }
  if (kind == "driven_qwz") {
    DrivenQWZSpec spec{model["mass"].get<double>(), model["hopping"].get<double>(), model["margin"].get<double>()};
    return {build_driven_qwz(torus, spec).protocol, driven_qwz_bloch(spec)};
  }
  if (kind == "trivial") return {trivial_protocol(torus), std::nullopt};
  const DrivingProtocol p = load_custom_protocol(model["protocol"].get<std::string>());
  return {p, std::nullopt};
}

/// All lazily computed objects of one model realization.
class SeedRun {
 public:
  SeedRun(const json& cfg, std::uint64_t seed) : cfg_(cfg), seed_(seed) {
    const auto ext = cfg_["geometry"]["extents"].get<std::vector<int>>();
    const json& model = cfg_["model"];
    const int fiber = model["kind"] == "trivial" ? model["fiber"].get<int>() : 2;
    if (model["kind"] == "custom") {
      bulk_ = build_model(model, Geometry{}, seed);
    } else {
      bulk_ = build_model(model, Geometry::torus(ext, fiber), seed);
    }
    nodes_ = cfg_["numerics"]["quadrature_nodes"].get<int>();
    fraction_ = cfg_["numerics"]["bump_fraction"].get<double>();
  }

  std::uint64_t seed() const noexcept { return seed_; }
  const Geometry& geometry() const { return bulk_.protocol.geometry(); }
  const std::optional<BlochModel>& bloch() const { return bulk_.bloch; }

  const EvolutionPath& path() {
    if (!path_) path_ = evolve(bulk_.protocol);
    return *path_;
  }
  const QuasiEnergySpectrum& spectrum() {
    if (!spectrum_) spectrum_ = floquet_spectrum(path());
    return *spectrum_;
  }
  const std::vector<SpectralGap>& gaps() {
    if (!gaps_) gaps_ = find_gaps(spectrum(), cfg_["numerics"]["min_gap_width"].get<double>());
    return *gaps_;
  }

  double resolve(const json& ref) {
    if (ref.is_object()) {
      const double th = ref["theta"].get<double>();
      require_in_gap(spectrum(), th);
      return th;
    }
    const auto k = ref.get<std::size_t>();
    if (k >= gaps().size())
      throw GapViolation("gap label " + std::to_string(k) + " not resolvable: " + std::to_string(gaps().size()) +
                         " bulk gap(s) of width >= min_gap_width");
    return gaps()[k].center();
  }

  std::vector<double> resolve_all(const json& refs) {
    std::vector<double> out;
    if (refs == json("all")) {
      if (gaps().empty()) throw GapViolation("no bulk gap of width >= min_gap_width");
      for (const auto& g : gaps()) out.push_back(g.center());
    } else {
      for (const auto& r : refs) out.push_back(resolve(r));
    }
    return out;
  }

  /// Windings of V_theta for the given index set; new angles are computed in one batch.
  std::vector<ChernResult> windings(const std::vector<double>& thetas, const IndexSet& j) {
    auto& cache = windings_[j.str()];
    std::vector<double> missing;
    for (double th : thetas)
      if (!cache.count(th) && std::find(missing.begin(), missing.end(), th) == missing.end()) missing.push_back(th);
    if (!missing.empty()) {
      for (auto& w : periodized_windings(path(), spectrum(), missing, j, {nodes_})) {
        if (!(w.endpoint_defect < 1e-9))
          throw PreconditionError("periodized evolution endpoint defect " + std::to_string(w.endpoint_defect));
        cache.emplace(w.theta, w.result);
      }
    }
    std::vector<ChernResult> out;
    for (double th : thetas) out.push_back(cache.at(th));
    return out;
  }

  ChernResult band_chern(double th, double th2, const IndexSet& i) {
    return even_chern(band_projection(spectrum(), th, th2), i);
  }

  // Edge side: torus at edge extents (for its gaps) and its half-space restriction.
  const QuasiEnergySpectrum& edge_bulk_spectrum() {
    ensure_edge();
    return *edge_bulk_spectrum_;
  }
  const LatticeOperator& edge_floquet() {
    ensure_edge();
    return *edge_floquet_;
  }
  const QuasiEnergySpectrum& edge_spectrum() {
    ensure_edge();
    return *edge_spectrum_;
  }

  EdgeResult edge_count(double th, EdgeWindow w) {
    return edge_channel_count(edge_floquet(), edge_spectrum(), th, fraction_, w, edge_bulk_spectrum());
  }

  EdgeResult edge_winding(double th, double th2, EdgeWindow w) {
    const auto gf = GapFunction::step_pair_in_gaps(edge_bulk_spectrum(), th, th2, fraction_);
    const auto wu = exp_map_unitary(edge_spectrum(), gf, &edge_bulk_spectrum());
    return edge_odd_chern(wu, IndexSet{edge_axis(wu.W.geometry())}, w);
  }

 private:
  void ensure_edge() {
    if (edge_floquet_) return;
    const json& model = cfg_["model"];
    DrivingProtocol torus_protocol;
    if (model["kind"] == "custom") {
      torus_protocol = bulk_.protocol;
    } else {
      const auto ext = cfg_["geometry"]["edge_extents"].get<std::vector<int>>();
      torus_protocol = build_model(model, Geometry::torus(ext, geometry().fiber_dim()), seed_).protocol;
    }
    const int open = cfg_["geometry"]["open_axis"].get<int>();
    if (torus_protocol.geometry().dimension() != 2) throw UnsupportedGeometry("edge pipeline needs a 2D model");
    const auto torus_path = evolve(torus_protocol);
    edge_bulk_spectrum_ = floquet_spectrum(torus_path);
    const auto cyl = evolve(restrict_half_space(torus_protocol, open));
    edge_floquet_ = cyl.floquet();
    edge_spectrum_ = floquet_spectrum(cyl);
  }

  json cfg_;
  std::uint64_t seed_;
  BuiltModel bulk_;
  int nodes_ = 16;
  double fraction_ = 0.8;
  std::optional<EvolutionPath> path_;
  std::optional<QuasiEnergySpectrum> spectrum_;
  std::optional<std::vector<SpectralGap>> gaps_;
  std::map<std::string, std::map<double, ChernResult>> windings_;
  std::optional<QuasiEnergySpectrum> edge_bulk_spectrum_;
  std::optional<LatticeOperator> edge_floquet_;
  std::optional<QuasiEnergySpectrum> edge_spectrum_;
};

// ---------------------------------------------------------------- requests

enum class Command { Spectrum, Bulk, Edge, Verify, Oracle };

inline Command command_from_string(const std::string& s) {
  if (s == "spectrum") return Command::Spectrum;
  if (s == "bulk") return Command::Bulk;
  if (s == "edge") return Command::Edge;
  if (s == "verify") return Command::Verify;
  if (s == "oracle") return Command::Oracle;
  throw ConfigError("unknown command '" + s + "'");
}

inline bool belongs_to(Command c, const std::string& kind) {
  switch (c) {
    case Command::Bulk: return kind == "band_chern" || kind == "winding";
    case Command::Edge: return kind == "edge_count" || kind == "edge_winding";
    case Command::Verify: return kind.rfind("verify_", 0) == 0 || kind == "oracle";
    case Command::Oracle: return kind == "oracle";
    case Command::Spectrum: return false;
  }
  return false;
}

/// One table row; every value is a finite number or a label.
struct Row {
  std::string request, kind, label;
  std::uint64_t seed = 0;
  double theta = NAN, theta_prime = NAN;
  std::string window;
  double value = NAN, raw_re = NAN, raw_im = NAN, residual = NAN;
  bool quantized = false;
  // identity checks
  double lhs = NAN, rhs = NAN, tolerance = NAN;
  bool pass = true;
  bool is_check = false;
  bool reliable = true;
};

inline json row_to_json(const Row& r) {
  json j{{"seed", r.seed}, {"label", r.label}};
  if (!std::isnan(r.theta)) j["theta"] = r.theta;
  if (!std::isnan(r.theta_prime)) j["theta_prime"] = r.theta_prime;
  if (!r.window.empty()) j["window"] = r.window;
  if (r.is_check) {
    j["lhs"] = r.lhs;
    j["rhs"] = r.rhs;
    j["residual"] = r.residual;
    j["tolerance"] = r.tolerance;
    j["pass"] = r.pass;
  } else {
    j["value"] = r.value;
    j["raw_re"] = r.raw_re;
    j["raw_im"] = r.raw_im;
    j["quantization_residual"] = r.residual;
    j["quantized"] = r.quantized;
    j["reliable"] = r.reliable;
  }
  return j;
}

inline Row chern_row(const std::string& req, const std::string& kind, const std::string& label, std::uint64_t seed,
                     const ChernResult& c) {
  Row r;
  r.request = req;
  r.kind = kind;
  r.label = label;
  r.seed = seed;
  r.value = c.value;
  r.raw_re = c.raw.real();
  r.raw_im = c.raw.imag();
  r.residual = c.quantization_residual;
  r.quantized = c.quantized;
  return r;
}

inline Row check_row(const std::string& req, const std::string& kind, const std::string& label, std::uint64_t seed,
                     double lhs, double rhs, double residual, double tol) {
  Row r;
  r.request = req;
  r.kind = kind;
  r.label = label;
  r.seed = seed;
  r.lhs = lhs;
  r.rhs = rhs;
  r.residual = residual;
  r.tolerance = tol;
  r.pass = residual < tol;
  r.is_check = true;
  return r;
}

inline std::vector<EdgeWindow> windows_of(const std::string& w) {
  if (w == "both") return {EdgeWindow::Lower, EdgeWindow::Upper};
  return {w == "upper" ? EdgeWindow::Upper : EdgeWindow::Lower};
}

/// Evaluate one request on one realization.
inline std::vector<Row> run_request(SeedRun& run, const json& req, const json& numerics) {
  const std::string kind = req["kind"], id = req["id"];
  const json& tol = numerics["tolerances"];
  const std::uint64_t seed = run.seed();
  std::vector<Row> rows;
  auto pair = [&]() { return std::pair{run.resolve(req["gaps"][0]), run.resolve(req["gaps"][1])}; };

  if (kind == "band_chern") {
    const auto [a, b] = pair();
    Row r = chern_row(id, kind, "Ch_I(P)", seed, run.band_chern(a, b, IndexSet(req["index_set"].get<std::vector<int>>())));
    r.theta = a;
    r.theta_prime = b;
    rows.push_back(r);
  } else if (kind == "winding") {
    const auto th = run.resolve_all(req["gaps"]);
    const IndexSet j(req["index_set"].get<std::vector<int>>());
    const auto w = run.windings(th, j);
    for (std::size_t k = 0; k < th.size(); ++k) {
      Row r = chern_row(id, kind, "Ch_J(V_theta)", seed, w[k]);
      r.theta = th[k];
      rows.push_back(r);
    }
  } else if (kind == "edge_count") {
    const auto th = run.resolve_all(req["gaps"]);
    for (double t : th)
      for (EdgeWindow win : windows_of(req["window"])) {
        const auto e = run.edge_count(t, win);
        Row r = chern_row(id, kind, "N_theta", seed, e.chern);
        r.theta = t;
        r.window = to_string(win);
        r.reliable = e.reliable;
        rows.push_back(r);
      }
  } else if (kind == "edge_winding") {
    const auto [a, b] = pair();
    for (EdgeWindow win : windows_of(req["window"])) {
      const auto e = run.edge_winding(a, b, win);
      Row r = chern_row(id, kind, "Ch~_1(W)", seed, e.chern);
      r.theta = a;
      r.theta_prime = b;
      r.window = to_string(win);
      r.reliable = e.reliable;
      rows.push_back(r);
    }
  } else if (kind == "verify_prop21") {
    const auto [a, b] = pair();
    const IndexSet i = run.geometry().dimension() == 2 ? IndexSet{1, 2} : IndexSet{};
    const IndexSet j = run.geometry().dimension() == 2 ? IndexSet{0, 1, 2} : IndexSet{0};
    const auto w = run.windings({a, b}, j);
    const auto band = run.band_chern(a, b, i);
    const cplx lhs = w[1].raw - w[0].raw;
    Row r = check_row(id, kind, "Ch(V_theta') - Ch(V_theta) = Ch_I(P)", seed, lhs.real(), band.raw.real(),
                      std::abs(lhs - band.raw), tol["prop21"].get<double>());
    r.theta = a;
    r.theta_prime = b;
    rows.push_back(r);
  } else if (kind == "verify_prop31") {
    const auto [a, b] = pair();
    const auto band = run.band_chern(a, b, IndexSet{1, 2});
    const auto e = run.edge_winding(a, b, EdgeWindow::Lower);
    Row r = check_row(id, kind, "Ch_12(P) = Ch~_1(exp map)", seed, band.raw.real(), e.chern.raw.real(),
                      std::abs(band.raw - e.chern.raw), tol["prop31"].get<double>());
    r.theta = a;
    r.theta_prime = b;
    r.window = "lower";
    rows.push_back(r);
  } else if (kind == "verify_prop32") {
    const auto [a, b] = pair();
    const auto band = run.band_chern(a, b, IndexSet{1, 2});
    const auto na = run.edge_count(a, EdgeWindow::Lower), nb = run.edge_count(b, EdgeWindow::Lower);
    const auto c = bbc_band_check(band, na.chern, nb.chern);
    Row r = check_row(id, kind, "Ch_12(P) = N_theta - N_theta'", seed, c.lhs.real(), c.rhs.real(), c.residual,
                      tol["prop32"].get<double>());
    r.theta = a;
    r.theta_prime = b;
    r.window = "lower";
    rows.push_back(r);
  } else if (kind == "verify_cor34") {
    const auto th = run.resolve_all(req["gaps"]);
    const auto w = run.windings(th, IndexSet{0, 1, 2});
    for (std::size_t k = 0; k < th.size(); ++k) {
      const auto n = run.edge_count(th[k], EdgeWindow::Lower);
      const auto c = bbc_anomalous_check(w[k], n.chern);
      Row r = check_row(id, kind, "Ch_012(V_theta) = N_theta", seed, c.lhs.real(), c.rhs.real(), c.residual,
                        tol["cor34"].get<double>());
      r.theta = th[k];
      r.window = "lower";
      rows.push_back(r);
    }
  } else if (kind == "verify_bott") {
    const auto [a, b] = pair();
    const IndexSet i = run.geometry().dimension() == 2 ? IndexSet{1, 2} : IndexSet{};
    const IndexSet j = run.geometry().dimension() == 2 ? IndexSet{0, 1, 2} : IndexSet{0};
    const auto loop = bott_loop(run.spectrum(), a, b);
    const auto w = odd_chern_time(loop, j, {numerics["quadrature_nodes"].get<int>()});
    const auto band = run.band_chern(a, b, i);
    Row r = check_row(id, kind, "Ch_0uI((1-P)+e^{it}P) = Ch_I(P)", seed, w.raw.real(), band.raw.real(),
                      std::abs(w.raw - band.raw), tol["bott"].get<double>());
    r.theta = a;
    r.theta_prime = b;
    rows.push_back(r);
  } else if (kind == "oracle") {
    if (!run.bloch()) throw UnsupportedGeometry("oracle requests need a clean translation-invariant model");
    const auto [a, b] = pair();
    const int o = bloch_chern_oracle(*run.bloch(), a, b, numerics["oracle_grid"].get<int>());
    const auto band = run.band_chern(a, b, IndexSet{1, 2});
    Row r = check_row(id, kind, "Ch_12(P) = Bloch oracle", seed, band.raw.real(), o, std::abs(band.raw - double(o)),
                      tol["oracle"].get<double>());
    r.pass = r.pass && std::lround(band.raw.real()) == o;
    r.theta = a;
    r.theta_prime = b;
    rows.push_back(r);
  }
  return rows;
}

/// Warm the winding cache with every angle the selected requests need, so the
/// doubled-drive half of V_theta is integrated once.
inline void prefetch_windings(SeedRun& run, const std::vector<json>& reqs) {
  std::map<std::string, std::vector<double>> want;
  for (const auto& r : reqs) {
    const std::string k = r["kind"];
    if (k == "winding") {
      const IndexSet j(r["index_set"].get<std::vector<int>>());
      for (double t : run.resolve_all(r["gaps"])) want[j.str()].push_back(t);
    } else if (k == "verify_cor34") {
      for (double t : run.resolve_all(r["gaps"])) want["{0,1,2}"].push_back(t);
    } else if (k == "verify_prop21") {
      const std::string js = run.geometry().dimension() == 2 ? "{0,1,2}" : "{0}";
      want[js].push_back(run.resolve(r["gaps"][0]));
      want[js].push_back(run.resolve(r["gaps"][1]));
    }
  }
  for (const auto& [js, th] : want) {
    const IndexSet j = js == "{0}" ? IndexSet{0} : IndexSet{0, 1, 2};
    run.windings(th, j);
  }
}

// ---------------------------------------------------------------- reports

struct Report {
  json document;
  std::string csv;
  bool all_pass = true;
};

inline double sample_stddev(const std::vector<double>& x) {
  if (x.size() < 2) return 0.0;
  double m = 0.0;
  for (double v : x) m += v;
  m /= static_cast<double>(x.size());
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size() - 1));
}

inline std::string csv_num(double x) { return std::isnan(x) ? "" : fmt_double(x); }

inline std::string rows_csv(const std::vector<Row>& rows) {
  std::string s = "request,kind,seed,theta,theta_prime,window,value,raw_re,raw_im,quantization_residual,quantized,lhs,rhs,residual,tolerance,pass\n";
  for (const auto& r : rows) {
    s += r.request + "," + r.kind + "," + std::to_string(r.seed) + "," + csv_num(r.theta) + "," + csv_num(r.theta_prime) +
         "," + r.window + ",";
    if (r.is_check) {
      s += ",,,,," + csv_num(r.lhs) + "," + csv_num(r.rhs) + "," + csv_num(r.residual) + "," + csv_num(r.tolerance) + "," +
           (r.pass ? "true" : "false") + "\n";
    } else {
      s += csv_num(r.value) + "," + csv_num(r.raw_re) + "," + csv_num(r.raw_im) + "," + csv_num(r.residual) + "," +
           (r.quantized ? "true" : "false") + ",,,,,\n";
    }
  }
  return s;
}

inline json provenance(const std::string& command, int threads) {
  return {{"library", "floquet"}, {"version", library_version}, {"command", command}, {"threads", threads}};
}

/// Run the per-seed work on up to `threads` workers; results stay in seed order.
template <class F>
auto for_each_seed(const std::vector<std::uint64_t>& seeds, int threads, F&& f) {
  using R = decltype(f(seeds.front()));
  std::vector<std::optional<R>> out(seeds.size());
  std::vector<std::exception_ptr> err(seeds.size());
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(threads), seeds.size()));
  auto work = [&](std::size_t w) {
    for (std::size_t i = w; i < seeds.size(); i += workers) {
      try {
        out[i] = f(seeds[i]);
      } catch (...) {
        err[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (auto& e : err)
    if (e) std::rethrow_exception(e);
  std::vector<R> res;
  for (auto& o : out) res.push_back(std::move(*o));
  return res;
}

inline Report run_invariants(const json& cfg, Command cmd, int threads) {
  std::vector<json> reqs;
  for (const auto& r : cfg["requests"])
    if (belongs_to(cmd, r["kind"])) reqs.push_back(r);
  if (reqs.empty()) throw ConfigError("requests: no request applicable to this command");
  const auto seeds = cfg["ensemble"]["seeds"].get<std::vector<std::uint64_t>>();

  auto per_seed = for_each_seed(seeds, threads, [&](std::uint64_t seed) {
    SeedRun run(cfg, seed);
    prefetch_windings(run, reqs);
    std::vector<std::vector<Row>> rows;
    for (const auto& r : reqs) rows.push_back(run_request(run, r, cfg["numerics"]));
    return rows;
  });

  Report rep;
  json results = json::array();
  std::vector<Row> all;
  for (std::size_t q = 0; q < reqs.size(); ++q) {
    json entry{{"id", reqs[q]["id"]}, {"kind", reqs[q]["kind"]}, {"request", reqs[q]}, {"rows", json::array()}};
    // the k-th row of every seed refers to the same gap label and window; theta itself moves with disorder
    std::vector<std::vector<double>> groups;
    std::vector<std::string> windows;
    bool pass = true;
    for (std::size_t s = 0; s < seeds.size(); ++s)
      for (std::size_t k = 0; k < per_seed[s][q].size(); ++k) {
        const Row& row = per_seed[s][q][k];
        entry["rows"].push_back(row_to_json(row));
        all.push_back(row);
        if (groups.size() <= k) {
          groups.resize(k + 1);
          windows.resize(k + 1, row.window);
        }
        groups[k].push_back(row.is_check ? row.residual : row.raw_re);
        pass = pass && row.pass;
      }
    json stats = json::array();
    for (std::size_t k = 0; k < groups.size(); ++k) {
      const auto& v = groups[k];
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      json st{{"row", k}, {"mean", mean}, {"stddev", sample_stddev(v)}, {"count", v.size()}};
      if (!windows[k].empty()) st["window"] = windows[k];
      stats.push_back(st);
    }
    entry["ensemble"] = stats;
    if (cmd == Command::Verify || cmd == Command::Oracle) entry["pass"] = pass;
    rep.all_pass = rep.all_pass && pass;
    results.push_back(entry);
  }
  rep.document = {{"config", cfg}, {"results", results}};
  rep.csv = rows_csv(all);
  return rep;
}

/// Edge weight of a cylinder eigenvector: probability on sites within L/4 of either edge.
inline double edge_weight(const Eigen::VectorXcd& v, const Geometry& g) {
  const int L = g.extent(g.open_axis());
  double w = 0.0;
  for (Index i = 0; i < v.size(); ++i) {
    const int x = g.coordinate(i, g.open_axis());
    if (4 * x < L || 4 * (L - 1 - x) < L) w += std::norm(v(i));
  }
  return w;
}

inline Report run_spectrum(const json& cfg, int threads) {
  const auto seeds = cfg["ensemble"]["seeds"].get<std::vector<std::uint64_t>>();
  const bool edge = cfg["output"]["edge_spectrum"].get<bool>();
  auto per_seed = for_each_seed(seeds, threads, [&](std::uint64_t seed) {
    SeedRun run(cfg, seed);
    std::string csv;
    json gaps = json::array();
    for (Index k = 0; k < run.spectrum().size(); ++k)
      csv += fmt_double(run.spectrum().phases(k)) + ",," + "bulk," + std::to_string(seed) + "\n";
    for (const auto& g : run.gaps()) gaps.push_back({{"lo", g.lo}, {"hi", g.hi}, {"center", g.center()}, {"width", g.width()}});
    json res{{"seed", seed}, {"bulk_phases", run.spectrum().size()}, {"gaps", gaps}};
    if (edge) {
      const auto& s = run.edge_spectrum();
      const Geometry& g = run.edge_floquet().geometry();
      for (Index k = 0; k < s.size(); ++k)
        csv += fmt_double(s.phases(k)) + "," + fmt_double(edge_weight(s.vectors.col(k), g)) + ",edge," + std::to_string(seed) + "\n";
      res["edge_phases"] = s.size();
    }
    return std::pair{res, csv};
  });
  Report rep;
  json results = json::array();
  rep.csv = "phase,edge_weight,geometry,seed\n";
  for (auto& [res, csv] : per_seed) {
    results.push_back(res);
    rep.csv += csv;
  }
  rep.document = {{"config", cfg}, {"results", results}};
  return rep;
}

}  // namespace floquet::pipeline
