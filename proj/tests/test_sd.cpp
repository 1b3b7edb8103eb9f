#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "looplab/enumerate.hpp"
#include "looplab/graph.hpp"
#include "looplab/sd.hpp"

using namespace looplab;

namespace {

const TLDiagram kQuartic = TLDiagram::parse("+:(1,4)(2,3)");

PotentialSpec quartic() { return PotentialSpec{{{kQuartic, 0}}, 1}; }
PotentialSpec double_cup() {
  return PotentialSpec{{{TLDiagram::parse("+:(1,2)(3,4)"), 0}, {TLDiagram::parse("-:(1,2)(3,4)"), 1}}, 2};
}

std::vector<WeightedGraph> test_graphs() { return {make_a_n(3), make_a_n(4), make_two_vertex(2), make_two_vertex(3)}; }

// All closed loops of a given length at v.
std::vector<Loop> loops_at(const WeightedGraph& g, int v, int len) {
  std::vector<Loop> out;
  for (const auto& p : paths_from(g, v, len))
    if (static_cast<int>(p.size()) == len && (p.empty() ? v : g.graph.edge(p.back()).target) == v)
      out.push_back(Loop{v, p});
  return out;
}

}  // namespace

TEST_CASE("solve_sd examples") {
  auto two = make_two_vertex(2);
  WordTable t0(two, PotentialSpec{{}, 1}, 8, 0);
  CHECK(t0.tau(Loop{0, {0, 1}}).constant_term() == doctest::Approx(1.0));

  auto a3 = make_a_n(3);
  WordTable t3(a3, PotentialSpec{{}, 1}, 8, 0);
  for (const auto& w : loops_at(a3, 0, 3)) CHECK(t3.tau(w).is_zero());
  CHECK(observable_from_table(t3, TLDiagram::cup(), 0).constant_term() == doctest::Approx(std::sqrt(2.0)));
  CHECK(t3.tau(Loop{0, {}}).constant_term() == 1.0);
  CHECK_THROWS_AS(t3.tau(Loop{0, {0}}), ShapeError);
}

TEST_CASE("order 0 equals tr0 for all loops of length <= 8") {
  for (const auto& g : test_graphs()) {
    WordTable table(g, PotentialSpec{{}, 1}, 8, 0);
    for (int v = 0; v < g.num_vertices(); ++v)
      for (int len = 2; len <= 8; len += 2) {
        GraphPAElement unit(&g);
        for (const auto& w : loops_at(g, v, len)) {
          GraphPAElement x(&g);
          x.add(w, 1.0);
          CHECK(std::abs(table.tau(w).constant_term() - tr0(x, v)) <= 1e-10 * std::max(1.0, tr0(x, v)));
        }
      }
  }
}

TEST_CASE("insufficient max_length is a closure error naming the length") {
  auto g = make_two_vertex(2);
  WordTable table(g, quartic(), 4, 2);
  try {
    observable_from_table(table, TLDiagram::cup(), 0);
    FAIL("expected a closure error");
  } catch (const ClosureError& e) {
    CHECK(std::string(e.what()).find("length 6") != std::string::npos);
  }
}

TEST_CASE("observable_from_table examples against the enumeration oracle") {
  auto g = make_two_vertex(2);
  WordTable table(g, quartic(), 12, 3);
  CHECK(observable_from_table(table, TLDiagram::unnested(2), 0).constant_term() == doctest::Approx(6.0));
  for (const auto& s : {TLDiagram::cup(), TLDiagram::unnested(2)}) {
    auto sd = observable_from_table(table, s, 0);
    auto ex = observable_series(ConfigurationProblem{s, {{kQuartic, 0}}, 1, 3});
    for (int n = 0; n <= 3; ++n)
      CHECK(sd.coeff({n}) == doctest::Approx(rational_to_double(ex.coeff({n}).eval(Rational(2)))).epsilon(1e-12));
  }
}

TEST_CASE("observables are independent of the base vertex within a parity class") {
  for (const auto& g : {make_a_n(4), make_a_n(5)}) {
    for (const auto& pot : {quartic(), double_cup()}) {
      WordTable table(g, pot, 16, 3);
      for (const auto& s : {TLDiagram::cup(), TLDiagram::unnested(2), TLDiagram::nested(2), TLDiagram::cup(-1)}) {
        FloatSeries ref;
        bool first = true;
        for (int v = 0; v < g.num_vertices(); ++v) {
          if (g.graph.is_plus(v) != (s.sign() > 0)) continue;
          auto obs = observable_from_table(table, s, v);
          if (first) {
            ref = obs;
            first = false;
            continue;
          }
          for (const auto& [e, c] : ref.terms()) CHECK(std::abs(obs.coeff(e) - c) <= 1e-10 * std::abs(c));
        }
      }
    }
  }
}

// τ(w)(v) carries the normalisation 1/μ(v), so the cyclically invariant
// quantity is μ(s(w))·τ(w).
TEST_CASE("traciality: rotated words have equal mu-weighted series") {
  auto g = make_a_n(4);
  WordTable table(g, double_cup(), 16, 3);
  for (int v = 0; v < g.num_vertices(); ++v)
    for (int len : {2, 4, 6})
      for (const auto& w : loops_at(g, v, len)) {
        const FloatSeries a = table.tau(w) * g.mu(v);
        for (int r = 1; r < len; ++r) {
          const Loop rw = rotate_loop(g, w, r);
          const FloatSeries b = table.tau(rw) * g.mu(rw.base);
          for (const auto& [e, c] : a.terms()) CHECK(std::abs(b.coeff(e) - c) <= 1e-10 * std::max(1.0, std::abs(c)));
        }
      }
}

TEST_CASE("Hankel positivity at small couplings") {
  auto g = make_a_n(3);
  WordTable table(g, quartic(), 24, 6);
  auto paths = paths_from(g, 0, 3);
  if (paths.size() > 10) paths.resize(10);
  CHECK(hankel_min_eigenvalue(table, 0, paths, {-0.01}) >= -1e-8);
  CHECK(hankel_min_eigenvalue(table, 0, paths, {0.0}) >= -1e-8);
}

TEST_CASE("observables are invariant under rescaling mu") {
  auto g = make_a_n(4);
  auto scaled = rescale_mu(g, 0.37);
  WordTable a(g, double_cup(), 12, 2), b(scaled, double_cup(), 12, 2);
  for (const auto& s : {TLDiagram::cup(), TLDiagram::unnested(2)}) {
    auto x = observable_from_table(a, s, 0), y = observable_from_table(b, s, 0);
    for (const auto& [e, c] : x.terms()) CHECK(std::abs(y.coeff(e) - c) <= 1e-10 * std::abs(c));
  }
}

TEST_CASE("contraction_bound examples") {
  auto two = make_two_vertex(2);
  auto r0 = contraction_bound(two, quartic(), {0.0}, 4.0, 0.2);
  CHECK(r0.a_t == 0.0);
  CHECK(r0.factor == doctest::Approx(0.04 / (1.0 * (1.0 - 0.8))));
  auto small = contraction_bound(two, quartic(), {0.01}, 4.0, 1e-4);
  CHECK(small.factor > 1e3);
  // k_i^e for the quartic vertex on two-vertex(2): four (loop, position) terms
  // per edge, by listing the loops a b b° a° through a given edge.
  auto r = contraction_bound(two, quartic(), {0.01}, 4.0, 0.2);
  CHECK(r.a_t == doctest::Approx(0.04));
  CHECK(r.factor == doctest::Approx(0.2 + 0.04 / 0.04));
  CHECK_THROWS_AS(contraction_bound(two, quartic(), {0.01}, 4.0, 0.3), std::invalid_argument);
  CHECK_THROWS_AS(contraction_bound(two, quartic(), {0.01}, 4.0, 0.0), std::invalid_argument);
  auto best = best_contraction_bound(two, quartic(), {0.001}, 4.0);
  CHECK(best.certified);
}

TEST_CASE("word-table dump lists every computed word") {
  auto g = make_two_vertex(2);
  WordTable table(g, quartic(), 8, 1);
  observable_from_table(table, TLDiagram::cup(), 0);
  std::ostringstream os;
  table.dump(os);
  const std::string text = os.str();
  size_t records = 0;
  for (size_t p = text.find("# looplab-series"); p != std::string::npos; p = text.find("# looplab-series", p + 1))
    ++records;
  CHECK(records == table.entries().size());
}
