#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "looplab/enumerate.hpp"
#include "looplab/errors.hpp"
#include "looplab/exact.hpp"
#include "looplab/graph.hpp"
#include "looplab/sd.hpp"

using namespace looplab;

namespace {

const double kSqrt2 = std::sqrt(2.0);
const double kPi = 3.14159265358979323846;
const cplx kI(0.0, 1.0);

double rel(cplx a, cplx b) { return std::abs(a - b) / std::max(1e-300, std::abs(b)); }

DeltaPoly dpoly(std::initializer_list<long> c) {
  std::vector<Rational> v;
  for (long x : c) v.emplace_back(x);
  return DeltaPoly(v);
}

// Moments 𝒯_t(B_k), k = 1..4, from the SD series with potential t·B_n on A_3.
std::vector<double> sd_cup_moments(int n, double t, int order) {
  static const WeightedGraph a3 = make_a_n(3);
  WordTable table(a3, PotentialSpec{{{TLDiagram::unnested(n, +1), 0}}, 1}, 2 * n * order + 10, order);
  std::vector<double> out;
  for (int k = 1; k <= 4; ++k) out.push_back(observable_from_table(table, TLDiagram::unnested(k, +1), 0).evaluate({t}, kSqrt2));
  return out;
}

// Points off [a1,a2] ∪ [b1,b2] used for the map and transform checks.
std::vector<cplx> off_cut_points() {
  return {{0.5, 0.3}, {2.0, 0.0}, {-1.0, 0.0}, {0.5, 0.0}, {0.3, -0.2},
          {1.2, 0.01}, {-0.4, 0.7}, {0.9, -0.05}, {3.0, 1.0}, {0.1, 0.02}};
}

const EllipticFrame& solved_frame() {
  static const EllipticFrame f = elliptic_frame_solved(1e-3, 1.0, kSqrt2);
  return f;
}

}  // namespace

// ---------------------------------------------------------------------------
// Cup model

TEST_CASE("cup_solve at t = 0 gives the free moments") {
  for (double delta : {kSqrt2, 2.0, 2.5}) {
    auto s = cup_solve({}, delta);
    const auto& m = s.measure.moments;
    CHECK(s.measure.a == doctest::Approx((1 - std::sqrt(delta)) * (1 - std::sqrt(delta))).epsilon(1e-12));
    CHECK(s.measure.b == doctest::Approx((1 + std::sqrt(delta)) * (1 + std::sqrt(delta))).epsilon(1e-12));
    CHECK(m[0] == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(m[1] == doctest::Approx(delta).epsilon(1e-12));
    CHECK(m[2] == doctest::Approx(delta * delta + delta).epsilon(1e-12));
    CHECK(m[3] == doctest::Approx(delta * delta * delta + 3 * delta * delta + delta).epsilon(1e-12));
    s.measure.validate(10.0);
  }
}

TEST_CASE("cup_solve density is nonnegative at t = -0.01") {
  for (int n : {1, 2}) {
    std::vector<double> t(static_cast<size_t>(n), 0.0);
    t.back() = -0.01;
    auto s = cup_solve(t, kSqrt2);
    for (int j = 0; j <= 1000; ++j) {
      const double x = s.measure.a + (s.measure.b - s.measure.a) * j / 1000.0;
      CHECK(s.density(x) >= 0.0);
    }
    s.measure.validate(10.0);
  }
}

TEST_CASE("cup_solve moments agree with the SD series on A_3") {
  for (int n : {1, 2}) {
    std::vector<double> t(static_cast<size_t>(n), 0.0);
    t.back() = -0.01;
    auto s = cup_solve(t, kSqrt2);
    auto sd = sd_cup_moments(n, -0.01, 18);
    for (int k = 1; k <= 4; ++k) CHECK(std::abs(s.measure.moments[static_cast<size_t>(k)] - sd[static_cast<size_t>(k - 1)]) < 1e-8);
  }
}

TEST_CASE("cup_solve satisfies the quadratic loop equation off the support") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> re(-3.0, 8.0), im(0.05, 3.0);
  for (const std::vector<double>& t : {std::vector<double>{-0.01}, std::vector<double>{0.0, -0.01}, std::vector<double>{0.02, -0.01, 0.001}}) {
    auto s = cup_solve(t, kSqrt2);
    for (int i = 0; i < 20; ++i) {
      const cplx z(re(rng), i % 2 ? im(rng) : -im(rng));
      CHECK(std::abs(s.sd_residual(z)) < 1e-10);
    }
  }
}

TEST_CASE("cup_solve 1/z moments equal quadrature moments") {
  auto s = cup_solve({0.01, -0.01}, 2.5);
  for (int k = 0; k <= 6; ++k)
    CHECK(std::abs(s.moment_by_quadrature(k) - s.measure.moments[static_cast<size_t>(k)]) < 1e-11 * std::max(1.0, s.measure.moments[static_cast<size_t>(k)]));
  // G(z) against ∫ρ(x)/(z − x) dx with x = c + r cos θ (midpoint rule in θ).
  const double c = 0.5 * (s.measure.a + s.measure.b), r = 0.5 * (s.measure.b - s.measure.a);
  for (cplx z : {cplx(-5.0, 2.0), cplx(0.7, 2.0), cplx(20.0, -1.0)}) {
    cplx acc = 0.0;
    const int N = 2000;
    for (int j = 0; j < N; ++j) {
      const double th = kPi * (j + 0.5) / N, x = c + r * std::cos(th);
      acc += s.density(x) * r * std::sin(th) / (z - x);
    }
    CHECK(std::abs(s.stieltjes(z) - acc * kPi / static_cast<double>(N)) < 1e-10);
  }
}

TEST_CASE("cup_solve error paths") {
  CHECK_THROWS_AS(cup_solve({-0.01}, 1.0), RegimeError);
  // x − 0.2x² is unbounded below: no equilibrium measure.
  CHECK_THROWS_AS(cup_solve({0.0, 0.2}, kSqrt2), ConvergenceError);
}

// ---------------------------------------------------------------------------
// Double cup: spectral solver, particles, formal series

TEST_CASE("doublecup at zero coupling gives two semicircles") {
  auto m = doublecup_minimize({0.0, 0.0}, kSqrt2);
  const double catalan[] = {1, 0, 1, 0, 2, 0, 5, 0, 14};
  for (int p = 0; p <= 8; ++p) {
    CHECK(std::abs(m.plus.moment(p) - catalan[p]) < 1e-13);
    CHECK(std::abs(m.minus.moment(p) - catalan[p]) < 1e-13);
  }
  auto particles = doublecup_particles({0.0, 0.0}, kSqrt2, 200);
  CHECK(particles.moment_plus(2) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(particles.moment_minus(2) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("spectral solver agrees with the particle minimizer") {
  const auto c = DoubleCupCouplings::from_appendix(0.01, 0.02);
  auto m = doublecup_minimize(c, kSqrt2);
  auto p = doublecup_particles(c, kSqrt2, 400);
  CHECK(p.gradient_norm < 1e-8);
  for (int k = 1; k <= 3; ++k) {
    CHECK(std::abs(m.plus.moment(k) - p.moment_plus(k)) < 2e-5);
    CHECK(std::abs(m.minus.moment(k) - p.moment_minus(k)) < 3e-5);
  }
  // Off the support the particle transform carries the O(1/n) discretization bias.
  for (cplx z : {cplx(3.0, 0.0), cplx(0.0, 2.0), cplx(-2.5, -1.0)})
    CHECK(std::abs(m.plus.stieltjes(z) - p.stieltjes_plus(z)) < 1e-4);
}

TEST_CASE("spectral solver stationarity and swap symmetry") {
  const auto c = DoubleCupCouplings::from_appendix(0.01, 0.02);
  auto m = doublecup_minimize(c, kSqrt2);
  // x − 2 PV G_+(x) + δα ∫ dν_−(y)/(1 + αx + βy) = 0 on the support of ν_+.
  for (double s : {-0.9, -0.3, 0.2, 0.8}) {
    const double x = m.plus.center() + m.plus.radius() * s;
    const double eps = 1e-7;
    const double pv = (m.plus.stieltjes(cplx(x, eps)) + m.plus.stieltjes(cplx(x, -eps))).real() / 2.0;
    double inter = 0.0;
    for (size_t j = 0; j < m.minus.nodes().size(); ++j)
      inter += m.minus.weights()[j] / (1.0 + c.alpha * x + c.beta * m.minus.nodes()[j]);
    CHECK(std::abs(x - 2.0 * pv + kSqrt2 * c.alpha * inter) < 1e-6);
  }
  auto swapped = doublecup_minimize({c.beta, c.alpha}, kSqrt2);
  for (int k = 0; k <= 6; ++k) {
    CHECK(std::abs(swapped.plus.moment(k) - m.minus.moment(k)) < 1e-13);
    CHECK(std::abs(swapped.minus.moment(k) - m.plus.moment(k)) < 1e-13);
  }
}

TEST_CASE("doublecup regime error when the supports meet") {
  CHECK_THROWS_AS(doublecup_minimize(DoubleCupCouplings::from_appendix(0.1, 0.1), kSqrt2), RegimeError);
  CHECK_THROWS_AS(doublecup_particles(DoubleCupCouplings::from_appendix(0.1, 0.1), kSqrt2, 100), RegimeError);
  CHECK_THROWS_AS(DoubleCupCouplings::from_t(-1.0, 0.0), RegimeError);
}

TEST_CASE("formal moment series reproduce the strip recurrence") {
  auto ms = doublecup_moment_series(3, 3);
  for (int p = 0; p <= 3; ++p)
    for (int l = 0; l <= 3; ++l)
      for (int k = 0; l + k <= 3; ++k) {
        Rational fact = 1;
        for (int i = 2; i <= l; ++i) fact *= i;
        for (int i = 2; i <= k; ++i) fact *= i;
        if (p % 2) fact = -fact;
        CHECK(ms.plus[static_cast<size_t>(p)].coeff({l, k}) * DeltaPoly(fact) == strip_recurrence(p, 0, l, k));
      }
}

TEST_CASE("formal moment series reproduce the printed small-coupling formulas") {
  auto ms = doublecup_moment_series(2, 6);
  // (1/α_app)∫x dν̃_+ = −m_1/α and (∫x² dν̃_+ − α_app)/α_app² = (m_2 − 1)/α².
  auto mean = table_mean_over_alpha(), second = table_second_reduced();
  for (int i = 0; i <= 2; ++i)
    for (int j = 0; i + j <= 2; ++j) {
      CHECK(-ms.plus[1].coeff({2 * i + 1, 2 * j}) == mean.coeff({i, j}));
      if (i + j <= 1) CHECK(ms.plus[2].coeff({2 * i + 2, 2 * j}) == second.coeff({i, j}));
    }
  CHECK(mean.coeff({1, 1}) == dpoly({0, 6, 8, 4}));
}

TEST_CASE("formal moment series agree with the spectral solver") {
  const auto c = DoubleCupCouplings::from_appendix(0.002, 0.004);
  auto m = doublecup_minimize(c, kSqrt2);
  auto ms = doublecup_moment_series(3, 12);
  for (int p = 1; p <= 3; ++p) {
    CHECK(std::abs(ms.plus[static_cast<size_t>(p)].evaluate({c.alpha, c.beta}, kSqrt2) - m.plus.moment(p)) < 1e-8);
    CHECK(std::abs(ms.minus[static_cast<size_t>(p)].evaluate({c.alpha, c.beta}, kSqrt2) - m.minus.moment(p)) < 1e-8);
  }
}

// ---------------------------------------------------------------------------
// Generating function of the cups

TEST_CASE("potts_generating_series matches enumeration") {
  auto formal = potts_generating_series(2, 1);
  for (int n = 0; n <= 2; ++n) {
    ConfigurationProblem prob{TLDiagram::unnested(n, +1),
                              {{TLDiagram::parse("+:(1,2)(3,4)"), 0}, {TLDiagram::parse("-:(1,2)(3,4)"), 1}}, 2, 1};
    CHECK(formal[static_cast<size_t>(n)] == observable_series(prob));
  }
}

TEST_CASE("potts_generating_series at t = 0") {
  auto formal = potts_generating_series(1, 0);
  CHECK(formal[0].constant_term() == DeltaPoly(1));
  CHECK(formal[1].constant_term() == DeltaPoly::delta());
}

TEST_CASE("potts_generating_function agrees with the formal route") {
  const double tp = 1e-4, tm = 2e-4;
  auto m = doublecup_minimize(DoubleCupCouplings::from_t(tp, tm), kSqrt2);
  auto numeric = potts_generating_function(m, 3);
  auto formal = potts_generating_series(3, 4);
  for (int n = 0; n <= 3; ++n)
    CHECK(std::abs(numeric.coeff({n}) - formal[static_cast<size_t>(n)].evaluate({tp, tm}, kSqrt2)) < 1e-8);
}

TEST_CASE("potts_generating_function needs alpha > 0") {
  auto m = doublecup_minimize({0.0, 0.1}, kSqrt2);
  CHECK_THROWS_AS(potts_generating_function(m, 3), InversionError);
}

// ---------------------------------------------------------------------------
// Tables and elliptic frame

TEST_CASE("small-coupling tables: leading terms and kappa symmetry") {
  for (double kappa : {0.7, 1.0, 1.6}) {
    const double p = 1e-8;
    CHECK(small_coupling_table("alpha").evaluate(p, kappa, kSqrt2) / kappa == doctest::Approx(p).epsilon(1e-6));
    CHECK((small_coupling_table("b2").evaluate(p, kappa, kSqrt2) - 1.0) / std::sqrt(p) ==
          doctest::Approx(2.0 / kappa).epsilon(1e-3));
  }
  for (double p : {1e-4, 1e-3, 1e-2}) {
    CHECK(small_coupling_table("alpha").evaluate(p, 1.0, kSqrt2) == small_coupling_table("beta").evaluate(p, 1.0, kSqrt2));
    CHECK(small_coupling_table("a1").evaluate(p, 1.0, kSqrt2) == doctest::Approx(1.0 - small_coupling_table("b2").evaluate(p, 1.0, kSqrt2)));
  }
  CHECK_THROWS_AS(small_coupling_table("gamma"), ParseError);
  CHECK_THROWS_AS(elliptic_frame_from_pk(0.1, 1.0, kSqrt2), RangeError);
  CHECK_THROWS_AS(elliptic_frame_from_pk(1e-3, 3.0, kSqrt2), RangeError);
}

TEST_CASE("q_from_delta") {
  for (double d : {kSqrt2, 2 * std::cos(kPi / 5), 1.0}) {
    const cplx q = q_from_delta(d);
    CHECK(std::abs(std::abs(q) - 1.0) < 1e-15);
    CHECK(std::abs(q + 1.0 / q - d) < 1e-14);
  }
  CHECK(q_from_delta(2.5).real() == doctest::Approx(0.5));
  CHECK_THROWS_AS(q_from_delta(2.0), RangeError);
}

TEST_CASE("theta identities") {
  const auto& f = solved_frame();
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  CHECK(std::abs(theta(0.0, f.K, f.Kp)) == 0.0);
  for (int i = 0; i < 20; ++i) {
    const cplx u(d(rng) * f.K, d(rng) * f.Kp);
    const cplx t = theta(u, f.K, f.Kp);
    CHECK(std::abs(theta(u + 2.0 * f.K, f.K, f.Kp) + t) < 1e-12 * std::max(1.0, std::abs(t)));
    const cplx shifted = theta(u + 2.0 * kI * f.Kp, f.K, f.Kp);
    CHECK(rel(shifted, -std::exp(kPi * (f.Kp - kI * u) / f.K) * t) < 1e-10);
  }
  const double h = 1e-5;
  CHECK(rel(theta_prime(0.3, f.K, f.Kp), (theta(0.3 + h, f.K, f.Kp) - theta(0.3 - h, f.K, f.Kp)) / (2 * h)) < 1e-9);
}

TEST_CASE("elliptic map: base point, infinity and round trip") {
  const auto& f = solved_frame();
  CHECK(elliptic_map_u(f.b2, f) == cplx(0.0, 0.0));
  CHECK(f.u_inf.real() == 0.0);
  CHECK(std::abs(elliptic_map_u(cplx(1e8, 0.0), f) - f.u_inf) < 1e-7);
  CHECK(std::abs(elliptic_map_u(cplx(0.3, 1e8), f) - f.u_inf) < 1e-7);
  for (cplx z : off_cut_points()) CHECK(std::abs(elliptic_map_z(elliptic_map_u(z, f), f) - z) < 1e-9);
  CHECK_THROWS_AS(elliptic_map_u(0.5 * (f.b1 + f.b2), f), BranchError);
  CHECK_THROWS_AS(elliptic_map_u(0.5 * (f.a1 + f.a2), f), BranchError);
  CHECK(std::abs(residue_scale_numeric(f) - f.z_m1) < 1e-7);
}

TEST_CASE("phi: twist, symmetry and residue") {
  for (double delta : {kSqrt2, 2.5}) {
    auto f = elliptic_frame_from_pk(1e-3, 1.2, delta);
    for (cplx u : {cplx(0.3, 0.2), cplx(-0.7, 0.9), cplx(1.1, -0.4)}) {
      CHECK(rel(phi_plus(f, u + 2.0 * kI * f.Kp), f.q * f.q * phi_plus(f, u)) < 1e-10);
      CHECK(rel(phi_minus(f, u + 2.0 * kI * f.Kp), phi_minus(f, u) / (f.q * f.q)) < 1e-10);
      CHECK(rel(phi_plus(f, u + 2.0 * f.K), phi_plus(f, u)) < 1e-10);
      CHECK(rel(phi_plus(f, -u), -phi_minus(f, u)) < 1e-10);
    }
    // Symmetric difference quotient removes the O(ε) term.
    const double e = 1e-5;
    const cplx lim = 0.5 * e * (phi_plus(f, f.u_inf + e) - phi_plus(f, f.u_inf - e));
    const cplx expected = phi_coefficient(f, +1) * theta(-2.0 * f.nu * f.K, f.K, f.Kp) / theta_prime(0.0, f.K, f.Kp);
    CHECK(rel(lim, expected) < 1e-8);
    CHECK_THROWS_AS(phi_plus(f, f.u_inf), PoleError);
  }
}

TEST_CASE("omega matches the spectral solver on the solved frame") {
  const auto& f = solved_frame();
  auto m = doublecup_minimize(DoubleCupCouplings::from_appendix(f.alpha, f.beta), kSqrt2);
  for (cplx z : off_cut_points()) {
    const cplx u = elliptic_map_u(z, f);
    CHECK(rel(omega_plus(f, u), m.stieltjes_tilde_plus(z)) < 1e-8);
    CHECK(rel(omega_minus(f, u), m.stieltjes_tilde_minus(z)) < 1e-8);
  }
}

TEST_CASE("omega functional equations") {
  const auto& f = solved_frame();
  for (cplx u : {cplx(0.3, 0.2), cplx(-0.7, 0.9), cplx(1.1, 1.4)}) {
    const cplx z = elliptic_map_z(u, f);
    const cplx wp = omega_plus(f, u), wm = omega_minus(f, u);
    CHECK(rel(omega_plus(f, u + 2.0 * f.K), wp) < 1e-8);
    CHECK(rel(omega_minus(f, u + 2.0 * f.K), wm) < 1e-8);
    CHECK(rel(omega_plus(f, -u), wp) < 1e-8);
    CHECK(rel(omega_minus(f, 2.0 * kI * f.Kp - u), wm) < 1e-8);
    const cplx pp = z / f.alpha, pm = (z - 1.0) / f.beta;
    CHECK(std::abs(wp + omega_plus(f, 2.0 * kI * f.Kp - u) - f.delta * wm - pp) < 1e-8 * std::abs(pp));
    CHECK(std::abs(wm + omega_minus(f, -u) - f.delta * wp - pm) < 1e-8 * std::abs(pm));
  }
}

TEST_CASE("omega is elliptic at rational nu") {
  for (int n : {4, 5}) {
    const double delta = 2.0 * std::cos(kPi / n);
    auto f = elliptic_frame_from_pk(2e-3, 1.0, delta);
    for (cplx u : {cplx(0.3, 0.2), cplx(-0.7, 0.9)}) {
      const cplx shift = 2.0 * n * kI * f.Kp;
      CHECK(rel(omega_plus(f, u + shift), omega_plus(f, u)) < 1e-8);
      CHECK(rel(omega_minus(f, u + shift), omega_minus(f, u)) < 1e-8);
    }
  }
}

TEST_CASE("principal-value saddle equations on the supports") {
  const auto& f = solved_frame();
  auto m = doublecup_minimize(DoubleCupCouplings::from_appendix(f.alpha, f.beta), kSqrt2);
  // G̃_±(x + i0) + G̃_±(x − i0) = P_±(x) + δ G̃_∓(x) at interior points.
  const double eps = 1e-9;
  for (double s : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    const double x = m.tilde_plus_lower() + s * (m.tilde_plus_upper() - m.tilde_plus_lower());
    const cplx lhs = m.stieltjes_tilde_plus(cplx(x, eps)) + m.stieltjes_tilde_plus(cplx(x, -eps));
    const cplx rhs = x / f.alpha + f.delta * m.stieltjes_tilde_minus(x);
    CHECK(std::abs(lhs - rhs) < 1e-6 * std::max(1.0, std::abs(rhs)));
    const double y = m.tilde_minus_lower() + s * (m.tilde_minus_upper() - m.tilde_minus_lower());
    const cplx lhs2 = m.stieltjes_tilde_minus(cplx(y, eps)) + m.stieltjes_tilde_minus(cplx(y, -eps));
    const cplx rhs2 = (y - 1.0) / f.beta + f.delta * m.stieltjes_tilde_plus(y);
    CHECK(std::abs(lhs2 - rhs2) < 1e-6 * std::max(1.0, std::abs(rhs2)));
  }
  // The particle minimizer satisfies the discrete form at every particle.
  auto p = doublecup_particles(DoubleCupCouplings::from_appendix(f.alpha, f.beta), kSqrt2, 400);
  CHECK(p.gradient_norm < 1e-8);
}

TEST_CASE("solved frame hits the requested nome and the table up to truncation") {
  double previous = 0.0;
  for (double p : {1e-3, 5e-4}) {
    auto fs = elliptic_frame_solved(p, 1.0, kSqrt2);
    auto ft = elliptic_frame_from_pk(p, 1.0, kSqrt2);
    CHECK(fs.p == doctest::Approx(p).epsilon(1e-12));
    CHECK(fs.kappa == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fs.alpha == doctest::Approx(fs.beta).epsilon(1e-12));
    // The α series stops before p⁴, so the relative gap scales like p³.
    const double gap = std::abs(fs.alpha - ft.alpha) / ft.alpha;
    CHECK(gap < 5000 * p * p * p);
    if (previous > 0) CHECK(previous / gap == doctest::Approx(8.0).epsilon(0.05));
    previous = gap;
  }
}
