#pragma once

// Serialization: geometry and protocol JSON, and a plain-text matrix dump.
//
// Matrix dump layout (whitespace separated):
//   floquet-matrix 1
//   d <d> L <L_1> ... <L_d> fiber <F> boundary <torus|cylinder> open <axis> B <d*d reals, row-major>
//   <rows> <cols>
//   re im        one line per entry, column-major
// Reals are written with 17 significant digits, so a dump reloads bit-exactly.
//
// Protocol JSON:
//   { "format": "floquet-protocol", "version": 1,
//     "geometry": { "extents": [...], "fiber": F, "boundary": "torus", "open_axis": 0, "field": [...] },
//     "segments": [ { "duration": t, "scale": s, "hamiltonian": <sparse> }, ... ]      or
//     "steps":    [ { "unitary": <sparse>, "branch": { "kind": "largest_gap" | "principal" | "generator", ... } } ] }
//   <sparse> = { "rows": [...], "cols": [...], "re": [...], "im": [...] }  (0-based, duplicates summed)

#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "floquet/errors.hpp"
#include "floquet/evolution.hpp"
#include "floquet/lattice.hpp"

namespace floquet {

using json = nlohmann::json;

inline json geometry_to_json(const Geometry& g) {
  json j;
  j["extents"] = g.extents();
  j["fiber"] = g.fiber_dim();
  j["boundary"] = g.is_torus() ? "torus" : "cylinder";
  j["open_axis"] = g.open_axis();
  j["field"] = g.field_matrix();
  return j;
}

inline Geometry geometry_from_json(const json& j, const std::string& where = "geometry") {
  try {
    const auto ext = j.at("extents").get<std::vector<int>>();
    const int fiber = j.value("fiber", 1);
    const std::string b = j.value("boundary", std::string("torus"));
    if (b == "torus") return Geometry::torus(ext, fiber, j.value("field", std::vector<double>{}));
    if (b == "cylinder") return Geometry::cylinder(ext, fiber, j.at("open_axis").get<int>());
    throw ConfigError(where + ".boundary: unknown value '" + b + "'");
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  } catch (const DomainError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

inline json sparse_to_json(const Matrix& m) {
  json j{{"rows", json::array()}, {"cols", json::array()}, {"re", json::array()}, {"im", json::array()}};
  for (Index c = 0; c < m.cols(); ++c)
    for (Index r = 0; r < m.rows(); ++r)
      if (m(r, c) != cplx{}) {
        j["rows"].push_back(r);
        j["cols"].push_back(c);
        j["re"].push_back(m(r, c).real());
        j["im"].push_back(m(r, c).imag());
      }
  return j;
}

inline Matrix sparse_from_json(const json& j, Index n, const std::string& where) {
  try {
    const auto rows = j.at("rows").get<std::vector<Index>>();
    const auto cols = j.at("cols").get<std::vector<Index>>();
    const auto re = j.at("re").get<std::vector<double>>();
    const auto im = j.value("im", std::vector<double>(re.size(), 0.0));
    if (rows.size() != cols.size() || rows.size() != re.size() || re.size() != im.size())
      throw ConfigError(where + ": rows/cols/re/im lengths differ");
    Matrix m = Matrix::Zero(n, n);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if (rows[k] < 0 || rows[k] >= n || cols[k] < 0 || cols[k] >= n)
        throw ConfigError(where + ": entry " + std::to_string(k) + " out of range");
      m(rows[k], cols[k]) += cplx(re[k], im[k]);
    }
    return m;
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

/// Segments with explicit Hamiltonians (scale folded in as a separate field).
inline json protocol_to_json(const DrivingProtocol& p) {
  json j{{"format", "floquet-protocol"}, {"version", 1}, {"geometry", geometry_to_json(p.geometry())}};
  j["segments"] = json::array();
  for (const auto& s : p.segments())
    j["segments"].push_back({{"duration", s.duration}, {"scale", s.scale}, {"hamiltonian", sparse_to_json(s.generator->matrix())}});
  return j;
}

inline DrivingProtocol protocol_from_json(const json& j) {
  if (j.value("format", std::string()) != "floquet-protocol") throw ConfigError("protocol.format must be 'floquet-protocol'");
  const Geometry g = geometry_from_json(j.at("geometry"), "protocol.geometry");
  const Index n = g.dim();
  try {
    if (j.contains("segments")) {
      std::vector<Segment> segs;
      const auto& arr = j.at("segments");
      for (std::size_t k = 0; k < arr.size(); ++k) {
        const std::string where = "protocol.segments[" + std::to_string(k) + "]";
        const auto& s = arr[k];
        Matrix h = sparse_from_json(s.at("hamiltonian"), n, where + ".hamiltonian");
        GeneratorPtr gen;
        try {
          gen = Generator::from_operator({g, std::move(h)});
        } catch (const DomainError& e) {
          throw ConfigError(where + ": " + e.what());
        }
        segs.push_back({gen, s.value("scale", 1.0), s.at("duration").get<double>()});
      }
      try {
        return DrivingProtocol(g, std::move(segs));
      } catch (const DomainError& e) {
        throw ConfigError(std::string("protocol.segments: ") + e.what());
      }
    }
    if (j.contains("steps")) {
      std::vector<WalkStep> steps;
      const auto& arr = j.at("steps");
      for (std::size_t k = 0; k < arr.size(); ++k) {
        const std::string where = "protocol.steps[" + std::to_string(k) + "]";
        const auto& s = arr[k];
        WalkStep w{LatticeOperator(g, sparse_from_json(s.at("unitary"), n, where + ".unitary")), LargestGap{}};
        if (s.contains("branch")) {
          const auto& b = s.at("branch");
          const std::string kind = b.value("kind", std::string("largest_gap"));
          if (kind == "principal") w.branch = PrincipalAt{b.at("theta").get<double>()};
          else if (kind == "generator")
            w.branch = GivenGenerator{LatticeOperator(g, sparse_from_json(b.at("hamiltonian"), n, where + ".branch.hamiltonian"))};
          else if (kind != "largest_gap") throw ConfigError(where + ".branch.kind: unknown value '" + kind + "'");
        }
        steps.push_back(std::move(w));
      }
      if (steps.empty()) throw ConfigError("protocol.steps: empty step list");
      try {
        return quantum_walk_protocol(steps);
      } catch (const DomainError& e) {
        throw ConfigError(std::string("protocol.steps: ") + e.what());
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("protocol: ") + e.what());
  }
  throw ConfigError("protocol: needs 'segments' or 'steps'");
}

inline DrivingProtocol load_custom_protocol(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open protocol file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("protocol file '" + path + "': " + e.what());
  }
  return protocol_from_json(j);
}

inline void write_matrix_dump(std::ostream& os, const LatticeOperator& a) {
  const Geometry& g = a.geometry();
  os << "floquet-matrix 1\n";
  os << "d " << g.dimension() << " L";
  for (int L : g.extents()) os << ' ' << L;
  os << " fiber " << g.fiber_dim() << " boundary " << (g.is_torus() ? "torus" : "cylinder") << " open " << g.open_axis()
     << " B";
  const int d = g.dimension();
  for (int r = 1; r <= d; ++r)
    for (int c = 1; c <= d; ++c) os << ' ' << std::setprecision(17) << g.field(r, c);
  os << '\n' << a.dim() << ' ' << a.dim() << '\n';
  os << std::setprecision(17);
  for (Index c = 0; c < a.dim(); ++c)
    for (Index r = 0; r < a.dim(); ++r) os << a(r, c).real() << ' ' << a(r, c).imag() << '\n';
}

inline LatticeOperator read_matrix_dump(std::istream& is) {
  std::string tag, key;
  int version = 0, d = 0;
  is >> tag >> version;
  if (tag != "floquet-matrix" || version != 1) throw ConfigError("not a floquet-matrix dump");
  is >> key >> d >> key;
  std::vector<int> ext(static_cast<std::size_t>(d));
  for (auto& L : ext) is >> L;
  int fiber = 1, open = 0;
  std::string boundary;
  is >> key >> fiber >> key >> boundary >> key >> open >> key;
  std::vector<double> b(static_cast<std::size_t>(d * d));
  for (auto& x : b) is >> x;
  Index rows = 0, cols = 0;
  is >> rows >> cols;
  if (!is) throw ConfigError("truncated matrix dump header");
  const Geometry g = boundary == "torus" ? Geometry::torus(ext, fiber, b) : Geometry::cylinder(ext, fiber, open);
  Matrix m(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) {
      double re = 0, im = 0;
      is >> re >> im;
      m(r, c) = cplx(re, im);
    }
  if (!is) throw ConfigError("truncated matrix dump body");
  return {g, std::move(m)};
}

}  // namespace floquet
