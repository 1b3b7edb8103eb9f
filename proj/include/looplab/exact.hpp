#pragma once

#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "looplab/series.hpp"

namespace looplab {

using cplx = std::complex<double>;

// Summary of a one-cut probability measure on [a, b].
struct EquilibriumMeasure {
  double a = 0.0, b = 0.0;
  std::vector<double> grid;     // Chebyshev points of [a, b], endpoints included
  std::vector<double> density;  // density at the grid points
  std::vector<double> moments;  // m_0..m_J

  // m_0 = 1 to 1e-10, density >= -1e-10 on the grid, [a, b] inside [-K, K].
  void validate(double K) const;
};

// ---------------------------------------------------------------------------
// Cup model: potential P(x) = Σ_n t_n x^n, one term per B_n (n unnested cups).
// The equilibrium measure lives on [a, b] ⊂ (0, ∞) with effective potential
// x − P(x) − (δ−1)·log x, and
//   2zG(z) = z(1 − P'(z)) − (δ−1) − R(z)·sqrt((z−a)(z−b)),
// where the square root behaves like z at infinity.

struct CupSolution {
  double delta = 0.0;
  std::vector<double> couplings;  // t_1..t_k
  std::vector<double> R;          // r_0..r_{k−1}
  EquilibriumMeasure measure;
  std::vector<double> residuals;  // final nonlinear-system residuals

  cplx stieltjes(cplx z) const;
  double density(double x) const;
  double moment_by_quadrature(int n, int nodes = 256) const;
  double inverse_moment(int nodes = 256) const;  // ∫ x^{-1} dν
  // G² + ((δ−1)/z + P'(z) − 1)G + Q(z) + c/z with Q(z) = ∫(P'(x)−P'(z))/(z−x)dν
  // and c = (δ−1)∫x^{-1}dν; vanishes for the exact solution.
  cplx sd_residual(cplx z) const;
};

// Solves for a, b and R by continuation from t = 0 (Eigen's hybrid Powell
// solver at each step). Requires δ > 1. Throws ConvergenceError when no
// one-cut solution is found and RegimeError when the solution leaves the
// one-cut regime (a <= 0, negative density or support outside [-K, K]).
CupSolution cup_solve(const std::vector<double>& t, double delta, double K = 10.0, int num_moments = 8);

// ---------------------------------------------------------------------------
// Double-cup auxiliary model. With α, β >= 0 the pair (ν_+, ν_−) minimizes
//   S = Σ_± (½∫x² dν_± − Σ(ν_±)) + δ ∬ log|1 + αx + βy| dν_+(x) dν_−(y).
// ν̃_+ is the law of −αx under ν_+ and ν̃_− the law of 1 + βy under ν_−.

struct DoubleCupCouplings {
  double alpha = 0.0;  // couples to the "+:(1,2)(3,4)" vertex, acts on ν_+
  double beta = 0.0;   // couples to the "-:(1,2)(3,4)" vertex, acts on ν_−

  // α = sqrt(2 t_plus), β = sqrt(2 t_minus) in the coupling normalization of
  // enumerate / sd_series (fixed by the strip-recurrence cross-check).
  static DoubleCupCouplings from_t(double t_plus, double t_minus);
  // The small-coupling tables use α_app = α², β_app = β².
  static DoubleCupCouplings from_appendix(double alpha_app, double beta_app);
  double alpha_app() const { return alpha * alpha; }
  double beta_app() const { return beta * beta; }
};

// One-cut measure with density (1/π)·sqrt(1−s²)·Σ_{k>=1} c_k U_{k−1}(s) in
// the variable s = (x − center)/radius.
class OneCutMeasure {
 public:
  OneCutMeasure() = default;
  OneCutMeasure(double center, double radius, std::vector<double> coeffs, int quadrature = 96);
  static OneCutMeasure semicircle(int quadrature = 96);

  double center() const { return center_; }
  double radius() const { return radius_; }
  double lower() const { return center_ - radius_; }
  double upper() const { return center_ + radius_; }
  const std::vector<double>& coeffs() const { return coeffs_; }

  double density(double x) const;
  cplx stieltjes(cplx z) const;  // off the support
  double moment(int p) const;
  // Gauss nodes and weights (weights include the density, Σw = 1).
  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }
  // Minimum of the density shape factor Σ c_k U_{k−1} on a fine grid.
  double min_shape(int points = 400) const;
  EquilibriumMeasure summary(int num_moments, int grid_points = 64) const;

 private:
  double center_ = 0.0, radius_ = 2.0;
  std::vector<double> coeffs_{2.0};
  std::vector<double> nodes_, weights_;
};

// Equilibrium measure for the energy ∫W dν − Σ(ν) given W'. The support is
// found from the two soft-edge conditions on the Chebyshev coefficients of W'.
OneCutMeasure solve_one_cut(const std::function<double(double)>& w_prime, const OneCutMeasure& guess,
                            int chebyshev = 48, int quadrature = 96);

struct DoubleCupOptions {
  int chebyshev = 48;
  int quadrature = 96;
  int num_moments = 8;
  double tolerance = 1e-14;
  int max_iterations = 200;
};

struct CoupledMeasures {
  DoubleCupCouplings couplings;
  double delta = 0.0;
  OneCutMeasure plus, minus;
  EquilibriumMeasure nu_plus, nu_minus;
  int iterations = 0;

  // Stieltjes transforms of ν̃_+ and ν̃_−.
  cplx stieltjes_tilde_plus(cplx z) const;
  cplx stieltjes_tilde_minus(cplx z) const;
  double tilde_plus_lower() const;
  double tilde_plus_upper() const;
  double tilde_minus_lower() const;
  double tilde_minus_upper() const;
  // ∫ x^p dν̃_+.
  double tilde_plus_moment(int p) const;
};

// Alternating one-cut solves for ν_+ and ν_− until the supports and the
// Chebyshev data stop changing. Throws RegimeError when the ν̃ supports
// overlap (1 + αx + βy <= 0 somewhere) and ConvergenceError when the
// iteration does not settle.
CoupledMeasures doublecup_minimize(const DoubleCupCouplings& c, double delta, const DoubleCupOptions& opts = {});

// n equally weighted particles per measure minimizing the discrete energy
//   Σ_± [(1/n)Σ x_i²/2 − (1/(n(n−1)))Σ_{i≠j} log|x_i − x_j|]
//     + (δ/n²) Σ_{i,j} log(1 + αx_i + βy_j)
// by damped Newton steps with step halving on energy increase.
struct ParticleSolution {
  std::vector<double> plus, minus;  // sorted positions
  double gradient_norm = 0.0;       // max |n·∂E/∂x_i|
  double energy = 0.0;
  int iterations = 0;

  double moment_plus(int p) const;
  double moment_minus(int p) const;
  cplx stieltjes_plus(cplx z) const;
};
ParticleSolution doublecup_particles(const DoubleCupCouplings& c, double delta, int n = 400, double tol = 1e-8,
                                     int max_iterations = 100);

// Moments of ν_+ and ν_− as formal series in (α, β) (variables 0 and 1) over
// ℚ[δ], from the loop equations
//   Σ_{i+j=p−1} m_i m_j = m_{p+1} + δα E[x^p / (1 + αx + βy)]
// and the mirror equation for ν_−.
struct MomentSeries {
  std::vector<ExactSeries> plus, minus;  // index p = moment order
  int order = 0;
};
MomentSeries doublecup_moment_series(int max_moment, int order);

// C(γ) = Σ γ^n 𝒯_t(B_n) from the measures: γ(z) = αz/(1 − z²M(z)) is
// inverted formally and C(γ) = (αz(γ)/γ)·M(z(γ)), where M(z) = Σ z^p ∫(−x)^p dν_+.
// Returns a univariate series in γ. Throws InversionError when α = 0.
FloatSeries potts_generating_function(const CoupledMeasures& m, int order);
// The same inversion over the formal moment series. Entry n is 𝒯_t(B_n) as
// an exact series in (t_plus, t_minus) through total degree order_t.
std::vector<ExactSeries> potts_generating_series(int order_gamma, int order_t);

// ---------------------------------------------------------------------------
// Small-coupling tables (literal data). Each series is Σ c(δ)·κ^e·p^{h/2}.

struct TableTerm {
  int half_p = 0;             // power of p^{1/2}
  int kappa_power = 0;
  std::vector<int> delta;     // coefficients of δ^0, δ^1, ...
};
struct TableSeries {
  std::string name;
  std::vector<TableTerm> terms;
  int truncation_half_p = 0;  // first omitted power of p^{1/2}
  double evaluate(double p, double kappa, double delta) const;
};
// alpha, beta, a1, a2, b1, b2, mean (∫x dν̃_+), second (∫x² dν̃_+).
const std::vector<TableSeries>& small_coupling_tables();
const TableSeries& small_coupling_table(const std::string& name);

// (1/α)∫x dν̃_+ and (1/α²)(∫x² dν̃_+ − α) in (α, β) = (α_app, β_app) as
// exact bivariate series over ℚ[δ] (through total degree 2 and 1).
ExactSeries table_mean_over_alpha();
ExactSeries table_second_reduced();

// ---------------------------------------------------------------------------
// Elliptic parameterization of the plane cut along [a1,a2] ∪ [b1,b2].

struct EllipticFrame {
  double a1 = 0, a2 = 0, b1 = 0, b2 = 0;
  double alpha = 0, beta = 0;  // α_app, β_app
  double delta = 0;
  double k2 = 0;               // modulus squared
  double K = 0, Kp = 0;        // quarter periods
  cplx u_inf;                  // u(∞), on the imaginary axis
  cplx z_m1;                   // z(u) ≈ z_m1/(u − u_inf)
  double p = 0, kappa = 0;     // exp(−πK'/K) and p·exp(−2iπu_inf/K) of this frame
  cplx q, nu;                  // δ = q + 1/q, q = exp(iπν)
};

// q with δ = q + 1/q: exp(i·arccos(δ/2)) for δ < 2, the root in (0,1) for δ > 2.
cplx q_from_delta(double delta);

EllipticFrame elliptic_frame_from_endpoints(double a1, double a2, double b1, double b2, double alpha_app,
                                            double beta_app, double delta);
// Endpoints and couplings from the small-coupling tables. Throws RangeError
// for p outside (0, 0.05) or κ outside [0.5, 2].
EllipticFrame elliptic_frame_from_pk(double p, double kappa, double delta);
// Couplings found by Newton iteration so that the endpoints of
// doublecup_minimize reproduce the nome p and κ; independent of the tables.
EllipticFrame elliptic_frame_solved(double p, double kappa, double delta);

cplx theta(cplx u, double K, double Kp);
cplx theta_prime(cplx u, double K, double Kp);

// u(z) by quadrature; z(u) through Jacobi sn. elliptic_map_u throws
// BranchError on a cut.
cplx elliptic_map_u(cplx z, const EllipticFrame& f);
cplx elliptic_map_z(cplx u, const EllipticFrame& f);
// lim (u − u_inf)·z(u), evaluated from the map.
cplx residue_scale_numeric(const EllipticFrame& f);

cplx phi_plus(const EllipticFrame& f, cplx u);
cplx phi_minus(const EllipticFrame& f, cplx u);
// Reparametrized Stieltjes transforms of ν̃_+ and ν̃_−. Throw PoleError at ±u_inf.
cplx omega_plus(const EllipticFrame& f, cplx u);
cplx omega_minus(const EllipticFrame& f, cplx u);
// Residue coefficients c_+ and c_− of φ_+.
cplx phi_coefficient(const EllipticFrame& f, int sign);

}  // namespace looplab
