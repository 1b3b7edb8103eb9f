#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <set>

#include "looplab/tl.hpp"

using namespace looplab;

namespace {

// Independent count of non-crossing perfect matchings: brute force over all
// perfect matchings of 2k points, keeping those without a crossing pair.
long brute_noncrossing(int k) {
  const int n = 2 * k;
  std::vector<int> p(static_cast<size_t>(n), -1);
  long count = 0;
  auto rec = [&](auto&& self) -> void {
    int i = 0;
    while (i < n && p[static_cast<size_t>(i)] != -1) ++i;
    if (i == n) {
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
          int c = p[static_cast<size_t>(a)], d = p[static_cast<size_t>(b)];
          if (a < b && b < c && c < d) return;
        }
      ++count;
      return;
    }
    for (int j = i + 1; j < n; ++j) {
      if (p[static_cast<size_t>(j)] != -1) continue;
      p[static_cast<size_t>(i)] = j;
      p[static_cast<size_t>(j)] = i;
      self(self);
      p[static_cast<size_t>(i)] = -1;
      p[static_cast<size_t>(j)] = -1;
    }
  };
  rec(rec);
  return count;
}

long catalan(int k) {
  long c = 1;
  for (int i = 0; i < k; ++i) c = c * 2 * (2 * i + 1) / (i + 2);
  return c;
}

}  // namespace

TEST_CASE("generate_tl examples") {
  CHECK(generate_tl(0).size() == 1);
  CHECK(generate_tl(0)[0].num_points() == 0);
  CHECK(generate_tl(3).size() == 5);
  CHECK(generate_tl(5).size() == 42);
  CHECK(brute_noncrossing(3) == 5);
  CHECK(brute_noncrossing(5) == 42);
}

TEST_CASE("generate_tl count is Catalan and elements are distinct valid diagrams") {
  for (int k = 0; k <= 8; ++k) {
    auto all = generate_tl(k, k % 2 ? -1 : +1);
    CHECK(static_cast<long>(all.size()) == catalan(k));
    std::set<TLDiagram> uniq(all.begin(), all.end());
    CHECK(uniq.size() == all.size());
    for (const auto& d : all) CHECK(is_noncrossing_pairing(d.pairing()));
  }
  CHECK_THROWS_AS(generate_tl(-1), DimensionError);
}

TEST_CASE("closure_loops examples") {
  CHECK(closure_loops(TLDiagram::cup(), TLDiagram::cup()) == 1);
  CHECK(closure_loops(TLDiagram::nested(2), TLDiagram::nested(2)) == 2);
  CHECK(closure_loops(TLDiagram::nested(2), TLDiagram::unnested(2)) == 1);
  CHECK_THROWS_AS(closure_loops(TLDiagram::cup(), TLDiagram::nested(2)), DimensionError);
  CHECK_THROWS_AS(closure_loops(TLDiagram::cup(1), TLDiagram::cup(-1)), ShadingError);
}

TEST_CASE("closure pairing is symmetric for k <= 5") {
  for (int k = 1; k <= 5; ++k) {
    auto all = generate_tl(k);
    for (const auto& a : all)
      for (const auto& b : all) CHECK(closure_loops(a, b) == closure_loops(b, a));
    // A diagram closed with itself gives k loops.
    for (const auto& a : all) CHECK(closure_loops(a, a) == k);
  }
}

TEST_CASE("Gram matrix positivity") {
  auto min_eig = [](int k, double delta) {
    auto all = generate_tl(k);
    const int n = static_cast<int>(all.size());
    Eigen::MatrixXd g(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        g(i, j) = std::pow(delta, closure_loops(all[static_cast<size_t>(i)], all[static_cast<size_t>(j)]));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
    return es.eigenvalues().minCoeff() / es.eigenvalues().maxCoeff();
  };
  for (int p : {3, 4, 5}) {
    const double delta = 2.0 * std::cos(std::numbers::pi / p);
    for (int k = 1; k <= 4; ++k) CHECK(min_eig(k, delta) >= -1e-10);
  }
  for (int k = 1; k <= 4; ++k) CHECK(min_eig(k, 2.5) > 1e-6);
  // Between admissible values the form is indefinite (δ = 1.5 at k = 4).
  CHECK(min_eig(4, 1.5) < -1e-6);
}

TEST_CASE("wedge examples and associativity") {
  CHECK(wedge(TLDiagram::cup(), TLDiagram::cup()) == TLDiagram::unnested(2));
  CHECK(wedge(TLDiagram::empty(), TLDiagram::nested(2)) == TLDiagram::nested(2));
  CHECK(wedge(TLDiagram::unnested(2), TLDiagram::cup()) == TLDiagram::unnested(3));
  CHECK_THROWS_AS(wedge(TLDiagram::cup(1), TLDiagram::cup(-1)), ShadingError);
  for (const auto& a : generate_tl(2))
    for (const auto& b : generate_tl(1))
      for (const auto& c : generate_tl(2)) CHECK(wedge(wedge(a, b), c) == wedge(a, wedge(b, c)));
}

TEST_CASE("text notation round-trips and rejects malformed input") {
  for (int k = 0; k <= 4; ++k)
    for (int s : {1, -1})
      for (const auto& d : generate_tl(k, s)) CHECK(TLDiagram::parse(d.to_string()) == d);
  CHECK(TLDiagram::parse("+:(1,2)(3,6)(4,5)").partner(2) == 5);
  CHECK(TLDiagram::parse(" - : (1,4) (2,3) ").sign() == -1);
  CHECK_THROWS_AS(TLDiagram::parse("(1,2)"), ParseError);
  CHECK_THROWS_AS(TLDiagram::parse("+:(1,3)(2,4)"), ParseError);
  CHECK_THROWS_AS(TLDiagram::parse("+:(1,2)(2,3)"), ParseError);
  CHECK_THROWS_AS(TLDiagram::parse("+:(1,x)"), ParseError);
  CHECK_THROWS_AS(TLDiagram({1, 0, 3}, 1), DimensionError);
  CHECK_THROWS_AS(TLDiagram({2, 3, 0, 1}, 1), ShapeError);
}

TEST_CASE("stitch_product_diagrams examples") {
  CHECK(stitch_product_diagrams(0).size() == 1);
  auto one = stitch_product_diagrams(1);
  CHECK(one.size() == 2);
  // n = 2: all-red (2) + all-black (2) + six two-two colourings with one cup each.
  CHECK(stitch_product_diagrams(2).size() == 10);
  for (int n = 0; n <= 3; ++n)
    for (const auto& d : stitch_product_diagrams(n)) {
      for (int i = 0; i < d.num_points(); ++i) {
        CHECK(d.partner(d.partner(i)) == i);
        CHECK(d.color[static_cast<size_t>(d.partner(i))] == d.color[static_cast<size_t>(i)]);
        CHECK(d.label(i) != d.label(d.partner(i)));
      }
    }
}
