#include <doctest.h>

#include "gpelab/mesh.hpp"

using namespace gpelab;

TEST_CASE("uniform_mesh: spacing and validation") {
  const Mesh1D m7 = uniform_mesh(-15, 15, std::size_t{1} << 7);
  CHECK(m7.h() == 0.234375); // 30 * 2^-7, exact in binary
  const Mesh1D m16 = uniform_mesh(-15, 15, std::size_t{1} << 16);
  CHECK(m16.h() == doctest::Approx(30.0 / 65536.0).epsilon(1e-16));

  const Mesh1D m2 = uniform_mesh(0, 1, 2);
  CHECK(m2.node(0) == 0.0);
  CHECK(m2.node(1) == 0.5);
  CHECK(m2.node(2) == 1.0);
  CHECK(m2.n_interior() == 1);

  CHECK_THROWS_AS(uniform_mesh(0, 1, 1), Error);
  CHECK_THROWS_AS(uniform_mesh(1, 0, 4), Error);
}

TEST_CASE("element_patch: base case, interior growth, boundary clipping") {
  const Mesh1D m = uniform_mesh(0, 1, 8);
  const IndexRange p0 = element_patch(m, 3, 0);
  CHECK(p0.lo == 3);
  CHECK(p0.hi == 3);

  const IndexRange p1 = element_patch(m, 3, 1);
  CHECK(p1.lo == 2);
  CHECK(p1.hi == 4);

  const IndexRange pb = element_patch(m, 0, 2);
  CHECK(pb.lo == 0);
  CHECK(pb.hi == 2);

  CHECK_THROWS_AS(element_patch(m, 8, 1), Error);
}

TEST_CASE("patch monotonicity and width") {
  const Mesh1D m = uniform_mesh(-2, 3, 11);
  const std::size_t n = m.n_elements;
  for (std::size_t K = 0; K < n; ++K) {
    for (std::size_t ell = 0; ell + 1 < 8; ++ell) {
      const IndexRange a = element_patch(m, K, ell);
      const IndexRange b = element_patch(m, K, ell + 1);
      CHECK(b.lo <= a.lo);
      CHECK(b.hi >= a.hi);
      const std::size_t expect =
          std::min(n, K + ell + 1) - (K > ell ? K - ell : 0);
      CHECK(a.size() == expect);
      CHECK(a.size() <= 2 * ell + 1);
    }
  }
}

TEST_CASE("interior nodes: counts, first node") {
  const Mesh1D m2 = uniform_mesh(0, 1, 2);
  const auto nodes2 = interior_nodes(m2);
  REQUIRE(nodes2.size() == 1);
  CHECK(nodes2[0] == 0.5);

  const Mesh1D m7 = uniform_mesh(-15, 15, std::size_t{1} << 7);
  const auto nodes7 = interior_nodes(m7);
  CHECK(nodes7.size() == 127);
  CHECK(nodes7.front() == doctest::Approx(m7.a + m7.h()).epsilon(1e-16));
}

TEST_CASE("fine_range on nested meshes") {
  const RefinementPair p4 =
      refinement_pair(uniform_mesh(0, 1, 4), uniform_mesh(0, 1, 16));
  CHECK(p4.factor == 4);
  const IndexRange f = fine_range(p4, IndexRange{2, 2});
  CHECK(f.lo == 8);
  CHECK(f.hi == 11);

  const RefinementPair p2 =
      refinement_pair(uniform_mesh(0, 1, 4), uniform_mesh(0, 1, 8));
  const IndexRange g = fine_range(p2, IndexRange{0, 1});
  CHECK(g.lo == 0);
  CHECK(g.hi == 3);

  const IndexRange full = fine_range(p2, IndexRange{0, 3});
  CHECK(full.lo == 0);
  CHECK(full.hi == 7);
}

TEST_CASE("nesting: coarse nodes are fine nodes exactly") {
  const RefinementPair p = refinement_pair(uniform_mesh(-15, 15, 1 << 5),
                                           uniform_mesh(-15, 15, 1 << 9));
  for (std::size_t i = 0; i <= p.coarse.n_elements; ++i)
    CHECK(p.coarse.node(i) == p.fine.node(i * p.factor));
}

TEST_CASE("refinement_pair validation") {
  CHECK_THROWS_AS(refinement_pair(uniform_mesh(0, 1, 4), uniform_mesh(0, 2, 8)),
                  Error);
  CHECK_THROWS_AS(refinement_pair(uniform_mesh(0, 1, 4), uniform_mesh(0, 1, 4)),
                  Error);
  CHECK_THROWS_AS(refinement_pair(uniform_mesh(0, 1, 4), uniform_mesh(0, 1, 6)),
                  Error);
}
