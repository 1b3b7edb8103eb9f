#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "looplab/enumerate.hpp"
#include "looplab/graph.hpp"
#include "looplab/sd.hpp"

using namespace looplab;

namespace {

const TLDiagram kQuartic = TLDiagram::parse("+:(1,4)(2,3)");
const DeltaPoly d = DeltaPoly::delta();

DeltaPoly closure_poly(const TLDiagram& s) {
  DeltaPoly v;
  for (const auto& t : generate_tl(s.num_strings(), s.sign())) v += DeltaPoly::monomial(closure_loops(s, t));
  return v;
}

}  // namespace

TEST_CASE("observable_series examples") {
  ConfigurationProblem cup{TLDiagram::cup(), {}, 0, 0};
  CHECK(observable_series(cup).constant_term() == d);
  ConfigurationProblem b2{TLDiagram::unnested(2), {}, 0, 0};
  CHECK(observable_series(b2).constant_term() == d * d + d);

  // Order-1 coefficient against the Schwinger-Dyson recursion on two-vertex(2).
  ConfigurationProblem q{TLDiagram::cup(), {{kQuartic, 0}}, 1, 1};
  auto ex = observable_series(q);
  auto g = make_two_vertex(2);
  WordTable table(g, PotentialSpec{{{kQuartic, 0}}, 1}, 8, 1);
  auto sd = observable_from_table(table, TLDiagram::cup(), 0);
  CHECK(rational_to_double(ex.coeff({1}).eval(Rational(2))) == doctest::Approx(sd.coeff({1})).epsilon(1e-12));
  CHECK(ex.coeff({1}) == DeltaPoly(2) * d * d + DeltaPoly(2) * d);
}

TEST_CASE("order 0 equals the closure sum for every diagram with up to 8 points") {
  for (int k = 0; k <= 4; ++k)
    for (int s : {1, -1})
      for (const auto& diag : generate_tl(k, s)) {
        ConfigurationProblem p{diag, {}, 0, 0};
        CHECK(observable_series(p).constant_term() == closure_poly(diag));
      }
}

TEST_CASE("free_energy_series examples") {
  // Brute force over the three matchings of a single 4-point vertex: two are
  // shading-consistent and planar, closing into 1 and 2 loops.
  auto f = free_energy_series({{kQuartic, 0}}, 1, 2);
  CHECK(f.coeff({1}) == d * d + d);
  CHECK(f.constant_term().is_zero());
  CHECK(free_energy_series({}, 1, 3).is_zero());
  auto two = free_energy_series({{kQuartic, 0}, {TLDiagram::unnested(2, -1), 1}}, 2, 1);
  CHECK(two.coeff({1, 0}) == f.coeff({1}));
}

TEST_CASE("every accepted configuration passes the genus and shading checks") {
  EnumerationStats stats;
  ConfigurationProblem p{TLDiagram::unnested(2), {{kQuartic, 0}, {TLDiagram::unnested(2, -1), 1}}, 2, 2};
  observable_series(p, &stats);
  CHECK(stats.accepted > 0);
  CHECK(stats.shading_verified == stats.accepted);
  CHECK(stats.euler_verified == stats.accepted);
  CHECK(stats.rejected_genus > 0);
  CHECK(stats.matchings_completed == stats.accepted + stats.rejected_genus + stats.rejected_disconnected);
}

TEST_CASE("infeasible sizes raise a resource error") {
  ConfigurationProblem p{TLDiagram::cup(), {{kQuartic, 0}}, 1, 6};
  CHECK_THROWS_AS(observable_series(p), ResourceError);
}

TEST_CASE("coefficient growth is bounded by A^n times the labelled-copy factorials") {
  // log(count_n / n!) <= n log A with A fitted from n = 1, 2 and checked up to n = 4.
  EnumerationStats stats;
  ConfigurationProblem p{TLDiagram::cup(), {{kQuartic, 0}}, 1, 4};
  observable_series(p, &stats);
  std::vector<double> per(5, 0.0);
  for (const auto& [e, c] : stats.accepted_by_order) per[static_cast<size_t>(e[0])] = static_cast<double>(c);
  double fact = 1.0;
  double a = 0.0;
  for (int n = 1; n <= 2; ++n) {
    fact *= n;
    a = std::max(a, std::pow(per[static_cast<size_t>(n)] / fact, 1.0 / n));
  }
  a *= 4.0;  // fitted constant with headroom for subexponential factors
  fact = 1.0;
  for (int n = 1; n <= 4; ++n) {
    fact *= n;
    CHECK(std::log(per[static_cast<size_t>(n)]) <= n * std::log(a) + std::log(fact));
  }
}

TEST_CASE("observable_series is invariant under relabelling copies of the same type") {
  // Two identical types with separate couplings: the (1,1) coefficient counts
  // configurations with one copy of each, which equals the (2) coefficient
  // of the merged type times 2!.
  ConfigurationProblem merged{TLDiagram::cup(), {{kQuartic, 0}}, 1, 2};
  ConfigurationProblem split{TLDiagram::cup(), {{kQuartic, 0}, {kQuartic, 1}}, 2, 2};
  auto m = observable_series(merged);
  auto s = observable_series(split);
  CHECK(s.coeff({1, 1}) == m.coeff({2}) * DeltaPoly(2));
  CHECK(s.coeff({2, 0}) == m.coeff({2}));
  CHECK(s.coeff({0, 2}) == m.coeff({2}));
}

TEST_CASE("strip_recurrence examples and agreement with brute force") {
  CHECK(strip_recurrence(0, 0, 0, 0) == DeltaPoly(1));
  CHECK(strip_recurrence(1, 0, 0, 0).is_zero());
  CHECK(strip_recurrence(2, 0, 0, 0) == DeltaPoly(1));
  for (int p = 1; p <= 4; ++p)
    for (int n = 0; n <= 2; ++n)
      for (int l = 0; l <= 2; ++l)
        for (int k = 0; k <= 2; ++k) {
          if (p + 2 * n + 3 * (l + k) > 14) continue;
          CHECK(strip_recurrence(p, n, l, k) == strip_configurations(p, n, l, k));
        }
}

TEST_CASE("stitched_observable_series examples") {
  ColoredTLDiagram red_cup{{0, 0}, TLDiagram::cup(), TLDiagram::empty()};
  auto s = stitched_observable_series(red_cup, {}, 1, 0);
  CHECK(s.at(Exponent{0}).size() == 1);
  CHECK(s.at(Exponent{0}).at({1, 0}) == 1);

  ColoredTLDiagram both{{0, 0, 1, 1}, TLDiagram::cup(), TLDiagram::cup()};
  auto b = stitched_observable_series(both, {}, 1, 0);
  CHECK(b.at(Exponent{0}).at({1, 1}) == 1);

  // Product-graph Schwinger-Dyson oracle at (δ_r, δ_b) = (2, 2).
  auto g = product_graph(make_two_vertex(2), make_two_vertex(2));
  for (const auto& colors : {std::vector<int>{0, 1, 0, 1}, std::vector<int>{0, 0, 1, 1}}) {
    ColoredTLDiagram vertex{colors, TLDiagram::cup(), TLDiagram::cup()};
    auto ev = evaluate_stitched(stitched_observable_series(red_cup, {{vertex, 0}}, 1, 2), 1, 2, 2.0, 2.0);
    PotentialSpec pot;
    pot.num_couplings = 1;
    PotentialTerm term;
    term.colored = vertex;
    pot.terms.push_back(term);
    WordTable table(g, pot, 12, 2);
    auto sd = observable_from_table(table, red_cup, 0);
    for (int n = 0; n <= 2; ++n) CHECK(ev.coeff({n}) == doctest::Approx(sd.coeff({n})).epsilon(1e-12));
  }
}
