#include <catch_amalgamated.hpp>

#include "floquet/pipeline.hpp"
#include "test_util.hpp"

using namespace floquet;
namespace pl = floquet::pipeline;
using Catch::Approx;
using std::numbers::pi;

namespace {

json trivial_config() {
  return json::parse(R"({
    "model": {"kind": "trivial", "fiber": 2},
    "geometry": {"extents": [4, 4]},
    "requests": [{"kind": "winding", "gaps": [{"theta": 3.0}]},
                 {"kind": "band_chern", "gaps": [{"theta": 1.0}, {"theta": 2.0}]}]
  })");
}

json cc_config(double beta) {
  json c = json::parse(R"({
    "model": {"kind": "chalker_coddington"},
    "geometry": {"extents": [12, 12], "edge_extents": [12, 24]},
    "requests": [{"kind": "winding"},
                 {"kind": "band_chern"},
                 {"kind": "edge_count", "window": "both"},
                 {"kind": "verify_prop21"},
                 {"kind": "oracle"}]
  })");
  c["model"]["beta"] = beta;
  return c;
}

}  // namespace

TEST_CASE("config defaults", "[pipeline]") {
  const json c = pl::normalize_config(json::parse(R"({"model": {"kind": "chalker_coddington"}})"));
  REQUIRE(c["model"]["beta"].get<double>() == Approx(pi / 8));
  REQUIRE(c["model"]["lambda"].get<double>() == 0.0);
  REQUIRE(c["geometry"]["extents"] == json({24, 24}));
  REQUIRE(c["geometry"]["edge_extents"] == json({24, 32}));
  REQUIRE(c["geometry"]["open_axis"] == 2);
  REQUIRE(c["numerics"]["quadrature_nodes"] == 16);
  REQUIRE(c["ensemble"]["seeds"] == json({1}));
  // normalizing twice changes nothing
  REQUIRE(pl::normalize_config(c) == c);
}

TEST_CASE("config errors name the offending key", "[pipeline]") {
  json c = trivial_config();
  c["model"]["colour"] = 1;
  try {
    pl::normalize_config(c);
    FAIL("accepted an unknown key");
  } catch (const ConfigError& e) {
    REQUIRE(std::string(e.what()).find("colour") != std::string::npos);
  }
  REQUIRE_THROWS_AS(pl::normalize_config(json::parse(R"({"model": {"kind": "graphene"}})")), ConfigError);
  REQUIRE_THROWS_AS(pl::normalize_config(json::parse(R"({"model": {"kind": "trivial"}, "requests": [{"kind": "winding", "index_set": [0, 1]}],
                                                         "geometry": {"extents": [4]}})")),
                    ConfigError);
  REQUIRE_THROWS_AS(pl::normalize_config(json::parse(R"({"model": {"kind": "trivial"}, "ensemble": {"seeds": []}})")), ConfigError);
}

TEST_CASE("overrides", "[pipeline]") {
  json c = cc_config(pi / 8);
  pl::apply_override(c, "model.beta=0.5");
  pl::apply_override(c, "geometry.extents=[6,6]");
  pl::apply_override(c, "requests.0.kind=band_chern");
  pl::apply_override(c, "output.prefix=abc");
  REQUIRE(c["model"]["beta"] == 0.5);
  REQUIRE(c["geometry"]["extents"] == json({6, 6}));
  REQUIRE(c["requests"][0]["kind"] == "band_chern");
  REQUIRE(c["output"]["prefix"] == "abc");
  REQUIRE_THROWS_AS(pl::apply_override(c, "novalue"), ConfigError);
  REQUIRE_THROWS_AS(pl::apply_override(c, "requests.9.kind=x"), ConfigError);
}

TEST_CASE("trivial model gives zero invariants", "[pipeline]") {
  const json c = pl::normalize_config(trivial_config());
  const auto rep = pl::run_invariants(c, pl::Command::Bulk, 1);
  for (const auto& r : rep.document["results"])
    for (const auto& row : r["rows"]) REQUIRE(row["value"].get<double>() == 0.0);
  const auto sp = pl::run_spectrum(c, 1);
  REQUIRE(sp.document["results"][0]["bulk_phases"] == 32);
  REQUIRE(sp.csv.find("0,,bulk,1\n") != std::string::npos);
}

TEST_CASE("requests outside the command are rejected", "[pipeline]") {
  json c = trivial_config();
  c["requests"] = json::array();
  REQUIRE_THROWS_AS(pl::run_invariants(pl::normalize_config(c), pl::Command::Bulk, 1), ConfigError);
  REQUIRE_THROWS_AS(pl::run_invariants(pl::normalize_config(trivial_config()), pl::Command::Edge, 1), ConfigError);
}

TEST_CASE("reports are deterministic and echo the config", "[pipeline]") {
  const json c = pl::normalize_config(cc_config(3 * pi / 8));
  const auto a = pl::run_invariants(c, pl::Command::Verify, 1);
  const auto b = pl::run_invariants(c, pl::Command::Verify, 1);
  REQUIRE(a.document.dump() == b.document.dump());
  REQUIRE(a.csv == b.csv);
  REQUIRE(pl::normalize_config(a.document["config"]) == c);
  REQUIRE(json::parse(a.document.dump()) == a.document);
}

TEST_CASE("anomalous walk through the pipeline", "[pipeline]") {
  const json c = pl::normalize_config(cc_config(3 * pi / 8));
  const auto bulk = pl::run_invariants(c, pl::Command::Bulk, 1);
  for (const auto& row : bulk.document["results"][0]["rows"]) REQUIRE(row["value"].get<double>() == 1.0);
  REQUIRE(bulk.document["results"][1]["rows"][0]["value"].get<double>() == 0.0);
  const auto edge = pl::run_invariants(c, pl::Command::Edge, 1);
  const auto& rows = edge.document["results"][0]["rows"];
  REQUIRE(rows.size() == 4);
  for (const auto& row : rows)
    REQUIRE(row["raw_re"].get<double>() == Approx(row["window"] == "lower" ? 1.0 : -1.0).margin(0.1));
  const auto ver = pl::run_invariants(c, pl::Command::Verify, 1);
  REQUIRE(ver.all_pass);
}

TEST_CASE("ensembles report per-seed rows and statistics", "[pipeline]") {
  json raw = cc_config(pi / 8);
  raw["model"]["lambda"] = 0.2;
  raw["ensemble"] = {{"seeds", {3, 4}}};
  raw["requests"] = json::parse(R"([{"kind": "band_chern"}])");
  const json c = pl::normalize_config(raw);
  const auto one = pl::run_invariants(c, pl::Command::Bulk, 1);
  const auto two = pl::run_invariants(c, pl::Command::Bulk, 2);
  REQUIRE(one.document == two.document);
  const auto& r = one.document["results"][0];
  REQUIRE(r["rows"].size() == 2);
  REQUIRE(r["rows"][0]["seed"] == 3);
  REQUIRE(r["ensemble"][0]["count"] == 2);
}

TEST_CASE("unresolvable gap labels are numeric precondition failures", "[pipeline]") {
  json raw = cc_config(pi / 8);
  raw["requests"] = json::parse(R"([{"kind": "winding", "gaps": [5]}])");
  REQUIRE_THROWS_AS(pl::run_invariants(pl::normalize_config(raw), pl::Command::Bulk, 1), GapViolation);
  // beta = pi/4 closes both gaps; below L = 24 the level spacing still leaves "gaps" wider than 0.2
  json closed = cc_config(pi / 4);
  closed["geometry"]["extents"] = {24, 24};
  closed["requests"] = json::parse(R"([{"kind": "verify_prop21"}])");
  REQUIRE_THROWS_AS(pl::run_invariants(pl::normalize_config(closed), pl::Command::Verify, 1), PreconditionError);
}

TEST_CASE("edge spectrum output marks edge states", "[pipeline]") {
  json raw = cc_config(3 * pi / 8);
  raw["output"] = {{"edge_spectrum", true}};
  const auto rep = pl::run_spectrum(pl::normalize_config(raw), 1);
  // in-gap eigenphases of the cylinder operator live near the edges
  std::istringstream in(rep.csv);
  std::string line;
  std::getline(in, line);
  int in_gap = 0;
  while (std::getline(in, line)) {
    if (line.find(",edge,") == std::string::npos) continue;
    const double phase = std::stod(line.substr(0, line.find(',')));
    const double w = std::stod(line.substr(line.find(',') + 1));
    if (circular_distance(phase, 0.0) < 0.3 || circular_distance(phase, pi) < 0.3) {
      ++in_gap;
      REQUIRE(w > 0.9);
    }
  }
  REQUIRE(in_gap > 0);
}
