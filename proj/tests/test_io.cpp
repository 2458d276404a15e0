#include <catch_amalgamated.hpp>

#include <sstream>

#include "test_util.hpp"

using namespace floquet;
using std::numbers::pi;

TEST_CASE("matrix dump round-trips bit for bit", "[io]") {
  const auto g = Geometry::torus({4, 4}, 2, {0.0, two_pi / 16, -two_pi / 16, 0.0});
  std::mt19937_64 rng(3);
  const LatticeOperator a(g, testutil::gaussian(g.dim(), g.dim(), rng));
  std::stringstream ss;
  write_matrix_dump(ss, a);
  const auto b = read_matrix_dump(ss);
  REQUIRE(b.geometry() == g);
  REQUIRE(b.matrix() == a.matrix());

  const LatticeOperator c(Geometry::cylinder({3, 4}, 1, 1), Matrix::Identity(12, 12));
  std::stringstream s2;
  write_matrix_dump(s2, c);
  REQUIRE(read_matrix_dump(s2).geometry() == c.geometry());
}

TEST_CASE("geometry JSON round-trip", "[io]") {
  for (const auto& g : {Geometry::torus({5}, 3), Geometry::cylinder({4, 6}, 2, 2),
                        Geometry::torus({4, 4}, 1, {0.0, two_pi / 8, -two_pi / 8, 0.0})})
    REQUIRE(geometry_from_json(geometry_to_json(g)) == g);
  REQUIRE_THROWS_AS(geometry_from_json(json{{"extents", {4, 4}}, {"boundary", "sphere"}}), ConfigError);
}

TEST_CASE("protocol export and import reproduce the Hamiltonians", "[io]") {
  const auto cc = build_chalker_coddington(Geometry::torus({4, 4}, 2), {pi / 8, {3, 0.2}});
  const auto back = protocol_from_json(json::parse(protocol_to_json(cc.protocol).dump()));
  REQUIRE(back.size() == cc.protocol.size());
  for (std::size_t k = 0; k < back.size(); ++k) {
    REQUIRE(back.segments()[k].generator->matrix() == cc.protocol.segments()[k].generator->matrix());
    REQUIRE(back.segments()[k].scale == cc.protocol.segments()[k].scale);
    REQUIRE(back.segments()[k].duration == cc.protocol.segments()[k].duration);
  }
  // generators are rediagonalized on import, so agreement is to rounding
  REQUIRE((evolve(back).endpoint() - evolve(cc.protocol).endpoint()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("protocol import errors", "[io]") {
  const json geo = geometry_to_json(Geometry::torus({4}, 1));
  REQUIRE_THROWS_AS(protocol_from_json(json{{"format", "other"}}), ConfigError);
  REQUIRE_THROWS_AS(protocol_from_json(json{{"format", "floquet-protocol"}, {"geometry", geo}, {"segments", json::array()}}),
                    ConfigError);
  REQUIRE_THROWS_AS(protocol_from_json(json{{"format", "floquet-protocol"}, {"geometry", geo}, {"steps", json::array()}}),
                    ConfigError);
  REQUIRE_THROWS_AS(protocol_from_json(json{{"format", "floquet-protocol"}, {"geometry", geo}}), ConfigError);
  REQUIRE_THROWS_AS(load_custom_protocol("/nonexistent/protocol.json"), ConfigError);
}

TEST_CASE("one-dimensional two-step walk from JSON", "[io]") {
  // split-step walk: coin then conditional shift on a ring of 6 sites
  const auto g = Geometry::torus({6}, 2);
  const double c = std::cos(0.4), s = std::sin(0.4);
  Matrix coin = Matrix::Zero(g.dim(), g.dim()), shift = Matrix::Zero(g.dim(), g.dim());
  const Matrix t = build_translation(g, 1).matrix();
  for (Index a = 0; a < 6; ++a) {
    coin(2 * a, 2 * a) = c;
    coin(2 * a, 2 * a + 1) = -s;
    coin(2 * a + 1, 2 * a) = s;
    coin(2 * a + 1, 2 * a + 1) = c;
    for (Index b = 0; b < 6; ++b) {
      shift(2 * b, 2 * a) = t(2 * b, 2 * a);  // up moves right
      shift(2 * b + 1, 2 * a + 1) = std::conj(t(2 * a, 2 * b));  // down moves left
    }
  }
  json j{{"format", "floquet-protocol"}, {"geometry", geometry_to_json(g)}, {"steps", json::array()}};
  j["steps"].push_back({{"unitary", sparse_to_json(coin)}});
  j["steps"].push_back({{"unitary", sparse_to_json(shift)}, {"branch", {{"kind", "principal"}, {"theta", pi + 0.1}}}});
  const auto p = protocol_from_json(j);
  REQUIRE(p.geometry().dimension() == 1);
  const auto path = evolve(p);
  REQUIRE((path.endpoint() - shift * coin).cwiseAbs().maxCoeff() < 1e-9);
  const auto spec = floquet_spectrum(path);
  const auto gaps = find_gaps(spec, 0.1);
  REQUIRE(gaps.size() >= 2);
  // in one dimension Ch_0 is a winding density; across a band it moves by T(P)
  for (std::size_t k = 0; k + 1 < gaps.size(); ++k) {
    const double a = gaps[k].center(), b = gaps[k + 1].center();
    const cplx wa = odd_chern_time(periodize(path, a, spec), IndexSet{0}).raw;
    const cplx wb = odd_chern_time(periodize(path, b, spec), IndexSet{0}).raw;
    const double density = band_projection(spec, a, b).P.matrix().trace().real() / 6.0;
    REQUIRE(density > 0.0);
    REQUIRE(std::abs(wb - wa - density) < 1e-9);
  }
  REQUIRE_THROWS_AS(odd_chern_time(periodize(path, gaps[0].center(), spec), IndexSet{0, 1, 2}), DomainError);
}
