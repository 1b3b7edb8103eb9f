#include "looplab/exact.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>
#include <unsupported/Eigen/NonLinearOptimization>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/jacobi_elliptic.hpp>

#include "looplab/errors.hpp"

namespace looplab {

namespace {

constexpr double kPi = 3.14159265358979323846;
const cplx kI(0.0, 1.0);

// Adapter for Eigen's HybridNonLinearSolver (forward-difference Jacobian).
struct SystemFunctor {
  using Scalar = double;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;

  std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)> f;
  int n = 0;

  int inputs() const { return n; }
  int values() const { return n; }
  int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& out) const {
    f(x, out);
    for (int i = 0; i < n; ++i)
      if (!std::isfinite(out[i])) return -1;
    return 0;
  }
};

// Solves f(x) = 0 from x; returns the final max-norm residual.
double hybrid_solve(const std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>& f, Eigen::VectorXd& x) {
  SystemFunctor functor{f, static_cast<int>(x.size())};
  Eigen::HybridNonLinearSolver<SystemFunctor> solver(functor);
  solver.hybrd1(x, 1e-15);
  Eigen::VectorXd r(x.size());
  f(x, r);
  for (int i = 0; i < r.size(); ++i)
    if (!std::isfinite(r[i])) return INFINITY;
  return r.lpNorm<Eigen::Infinity>();
}

std::string residual_text(double r) {
  std::ostringstream os;
  os.precision(3);
  os << r;
  return os.str();
}

// sqrt((z−a)(z−b)) with the cut on [a, b] and ~ z at infinity.
cplx segment_sqrt(cplx z, double a, double b) {
  const double m = 0.5 * (a + b), h = 0.5 * (b - a);
  const cplx w = z - m;
  return w * std::sqrt(1.0 - h * h / (w * w));
}

std::vector<double> chebyshev_lobatto(double a, double b, int n) {
  std::vector<double> x(static_cast<size_t>(n));
  for (int j = 0; j < n; ++j)
    x[static_cast<size_t>(j)] = 0.5 * (a + b) - 0.5 * (b - a) * std::cos(kPi * j / (n - 1));
  return x;
}

}  // namespace

void EquilibriumMeasure::validate(double K) const {
  if (moments.empty() || std::abs(moments[0] - 1.0) > 1e-10)
    throw NumericError("equilibrium measure: total mass differs from 1");
  for (double d : density)
    if (d < -1e-10) throw NumericError("equilibrium measure: negative density on the grid");
  if (a < -K || b > K) throw NumericError("equilibrium measure: support leaves [-K, K]");
}

// ---------------------------------------------------------------------------
// Cup model

namespace {

struct CupSystem {
  std::vector<double> t;  // t_1..t_k (index 0 ↔ t_1)
  double delta;
  int k;                  // number of R coefficients

  // Coefficients s_0..s_n of sqrt((1 − a w)(1 − b w)).
  static std::vector<double> sqrt_series(double a, double b, int n) {
    std::vector<double> p{1.0, -(a + b), a * b};
    std::vector<double> s(static_cast<size_t>(n + 1), 0.0);
    s[0] = 1.0;
    for (int j = 1; j <= n; ++j) {
      double acc = j < 3 ? p[static_cast<size_t>(j)] : 0.0;
      for (int i = 1; i < j; ++i) acc -= s[static_cast<size_t>(i)] * s[static_cast<size_t>(j - i)];
      s[static_cast<size_t>(j)] = acc / 2.0;
    }
    return s;
  }

  double tm(int m) const { return m >= 1 && m <= static_cast<int>(t.size()) ? t[static_cast<size_t>(m - 1)] : 0.0; }

  void residual(const Eigen::VectorXd& x, Eigen::VectorXd& f, double scale) const {
    const double a = x[0], b = x[1];
    auto s = sqrt_series(a, b, k + 1);
    // Polynomial part of R(z)·z·s(1/z): coefficient of z^m is Σ_i r_i s_{i+1−m}.
    for (int m = 0; m <= k; ++m) {
      double acc = 0.0;
      for (int i = 0; i < k; ++i) {
        const int j = i + 1 - m;
        if (j >= 0) acc += x[2 + i] * s[static_cast<size_t>(j)];
      }
      const double target = m == 0 ? -delta - 1.0 : (m == 1 ? 1.0 : 0.0) - m * scale * tm(m);
      f[m] = acc - target;
    }
    f[k + 1] = x[2] * std::sqrt(std::max(a * b, 0.0)) * (a * b >= 0 ? 1.0 : -1.0) - (delta - 1.0);
    if (a * b < 0) f[k + 1] = -(delta - 1.0) - std::abs(a * b);
  }
};

}  // namespace

cplx CupSolution::stieltjes(cplx z) const {
  cplx pprime = 0.0, rz = 0.0, zp = 1.0;
  for (size_t n = 1; n <= couplings.size(); ++n) {
    pprime += static_cast<double>(n) * couplings[n - 1] * zp;
    zp *= z;
  }
  zp = 1.0;
  for (double r : R) {
    rz += r * zp;
    zp *= z;
  }
  return (z * (1.0 - pprime) - (delta - 1.0) - rz * segment_sqrt(z, measure.a, measure.b)) / (2.0 * z);
}

double CupSolution::density(double x) const {
  if (x <= measure.a || x >= measure.b) return 0.0;
  double rx = 0.0, xp = 1.0;
  for (double r : R) {
    rx += r * xp;
    xp *= x;
  }
  return rx * std::sqrt((x - measure.a) * (measure.b - x)) / (2.0 * kPi * x);
}

namespace {

// ∫ f dν for the cup measure: Gauss quadrature for the weight sqrt(1 − s²).
template <class F>
double cup_integrate(const CupSolution& s, F f, int nodes) {
  const double c = 0.5 * (s.measure.a + s.measure.b), r = 0.5 * (s.measure.b - s.measure.a);
  double acc = 0.0;
  for (int j = 1; j <= nodes; ++j) {
    const double th = kPi * j / (nodes + 1);
    const double x = c + r * std::cos(th);
    double rx = 0.0, xp = 1.0;
    for (double coef : s.R) {
      rx += coef * xp;
      xp *= x;
    }
    acc += std::sin(th) * std::sin(th) * f(x) * rx / x;
  }
  return acc * r * r / (2.0 * (nodes + 1));
}

}  // namespace

double CupSolution::moment_by_quadrature(int n, int nodes) const {
  return cup_integrate(*this, [n](double x) { return std::pow(x, n); }, nodes);
}

double CupSolution::inverse_moment(int nodes) const {
  return cup_integrate(*this, [](double x) { return 1.0 / x; }, nodes);
}

cplx CupSolution::sd_residual(cplx z) const {
  const cplx g = stieltjes(z);
  cplx pprime = 0.0, zp = 1.0;
  for (size_t n = 1; n <= couplings.size(); ++n) {
    pprime += static_cast<double>(n) * couplings[n - 1] * zp;
    zp *= z;
  }
  cplx q = 0.0;
  for (size_t n = 2; n <= couplings.size(); ++n)
    for (size_t i = 0; i + 2 <= n; ++i)
      q -= static_cast<double>(n) * couplings[n - 1] * measure.moments.at(i) * std::pow(z, static_cast<int>(n - 2 - i));
  const double c = (delta - 1.0) * inverse_moment();
  return g * g + ((delta - 1.0) / z + pprime - 1.0) * g + q + c / z;
}

CupSolution cup_solve(const std::vector<double>& t_in, double delta, double K, int num_moments) {
  if (!(delta > 1.0)) throw RegimeError("cup_solve needs δ > 1 (the support touches 0 otherwise)");
  std::vector<double> t = t_in;
  while (!t.empty() && t.back() == 0.0) t.pop_back();
  CupSystem sys{t, delta, std::max<int>(1, static_cast<int>(t.size()))};
  const int k = sys.k;

  Eigen::VectorXd x = Eigen::VectorXd::Zero(k + 2);
  x[0] = (1.0 - std::sqrt(delta)) * (1.0 - std::sqrt(delta));
  x[1] = (1.0 + std::sqrt(delta)) * (1.0 + std::sqrt(delta));
  x[2] = 1.0;
  double res = 0.0;
  // Continuation in the overall coupling scale.
  double lambda = 0.0, step = 0.125;
  while (lambda < 1.0) {
    const double next = std::min(1.0, lambda + step);
    Eigen::VectorXd trial = x;
    res = hybrid_solve([&](const Eigen::VectorXd& v, Eigen::VectorXd& f) { sys.residual(v, f, next); }, trial);
    if (res < 1e-12 && trial[0] > 0.0 && trial[1] > trial[0]) {
      x = trial;
      lambda = next;
    } else {
      step /= 2.0;
      if (step < 1e-4)
        throw ConvergenceError("cup_solve: no one-cut solution found (residual " + residual_text(res) + " at scale " +
                               residual_text(next) + ")");
    }
  }

  CupSolution out;
  out.delta = delta;
  out.couplings = t;
  out.R.assign(x.data() + 2, x.data() + 2 + k);
  out.measure.a = x[0];
  out.measure.b = x[1];
  Eigen::VectorXd f(k + 2);
  sys.residual(x, f, 1.0);
  out.residuals.assign(f.data(), f.data() + f.size());

  if (out.measure.a <= 0.0) throw RegimeError("cup_solve: support reaches the origin");
  if (out.measure.b > K || out.measure.a < -K) throw RegimeError("cup_solve: support leaves [-K, K]");
  for (int j = 0; j <= 400; ++j) {
    const double xx = out.measure.a + (out.measure.b - out.measure.a) * j / 400.0;
    double rx = 0.0, xp = 1.0;
    for (double r : out.R) {
      rx += r * xp;
      xp *= xx;
    }
    if (rx < -1e-10) throw RegimeError("cup_solve: R changes sign on the support (not a one-cut solution)");
  }

  // Moments from the 1/z expansion: [z^{-J}] of R(z)·z·s(1/z) equals −2 m_J.
  auto s = CupSystem::sqrt_series(out.measure.a, out.measure.b, k + 1 + num_moments);
  out.measure.moments.assign(static_cast<size_t>(num_moments + 1), 0.0);
  for (int J = 0; J <= num_moments; ++J) {
    double acc = 0.0;
    for (int i = 0; i < k; ++i) acc += out.R[static_cast<size_t>(i)] * s[static_cast<size_t>(i + 1 + J)];
    out.measure.moments[static_cast<size_t>(J)] = -acc / 2.0;
  }
  // The z^0 coefficient gives m_0 through the normalization equation.
  out.measure.moments[0] = 1.0 + f[0] / 2.0;
  out.measure.grid = chebyshev_lobatto(out.measure.a, out.measure.b, 64);
  for (double g : out.measure.grid) out.measure.density.push_back(out.density(g));
  return out;
}

// ---------------------------------------------------------------------------
// One-cut measures

DoubleCupCouplings DoubleCupCouplings::from_t(double t_plus, double t_minus) {
  if (t_plus < 0 || t_minus < 0) throw RegimeError("double-cup couplings must be non-negative");
  return {std::sqrt(2.0 * t_plus), std::sqrt(2.0 * t_minus)};
}

DoubleCupCouplings DoubleCupCouplings::from_appendix(double alpha_app, double beta_app) {
  if (alpha_app < 0 || beta_app < 0) throw RegimeError("double-cup couplings must be non-negative");
  return {std::sqrt(alpha_app), std::sqrt(beta_app)};
}

namespace {

double shape(const std::vector<double>& c, double s) {
  double u0 = 1.0, u1 = 2.0 * s, acc = 0.0;
  for (size_t k = 0; k < c.size(); ++k) {
    const double u = k == 0 ? u0 : u1;
    acc += c[k] * u;
    if (k >= 1) {
      const double u2 = 2.0 * s * u1 - u0;
      u0 = u1;
      u1 = u2;
    }
  }
  return acc;
}

}  // namespace

OneCutMeasure::OneCutMeasure(double center, double radius, std::vector<double> coeffs, int quadrature)
    : center_(center), radius_(radius), coeffs_(std::move(coeffs)) {
  if (!(radius > 0)) throw NumericError("one-cut measure needs a positive radius");
  nodes_.resize(static_cast<size_t>(quadrature));
  weights_.resize(static_cast<size_t>(quadrature));
  for (int j = 1; j <= quadrature; ++j) {
    const double th = kPi * j / (quadrature + 1);
    const double s = std::cos(th);
    nodes_[static_cast<size_t>(j - 1)] = center_ + radius_ * s;
    weights_[static_cast<size_t>(j - 1)] = std::sin(th) * std::sin(th) * shape(coeffs_, s) / (quadrature + 1);
  }
}

OneCutMeasure OneCutMeasure::semicircle(int quadrature) { return OneCutMeasure(0.0, 2.0, {2.0}, quadrature); }

double OneCutMeasure::density(double x) const {
  const double s = (x - center_) / radius_;
  if (std::abs(s) >= 1.0) return 0.0;
  return std::sqrt(1.0 - s * s) * shape(coeffs_, s) / (kPi * radius_);
}

cplx OneCutMeasure::stieltjes(cplx z) const {
  const cplx sigma = (z - center_) / radius_;
  const cplx xi = sigma - std::sqrt(sigma - 1.0) * std::sqrt(sigma + 1.0);
  cplx acc = 0.0, p = xi;
  for (double c : coeffs_) {
    acc += c * p;
    p *= xi;
  }
  return acc / radius_;
}

double OneCutMeasure::moment(int p) const {
  double acc = 0.0;
  for (size_t j = 0; j < nodes_.size(); ++j) acc += weights_[j] * std::pow(nodes_[j], p);
  return acc;
}

double OneCutMeasure::min_shape(int points) const {
  double m = INFINITY;
  for (int j = 0; j <= points; ++j) m = std::min(m, shape(coeffs_, -1.0 + 2.0 * j / points));
  return m;
}

EquilibriumMeasure OneCutMeasure::summary(int num_moments, int grid_points) const {
  EquilibriumMeasure e;
  e.a = lower();
  e.b = upper();
  e.grid = chebyshev_lobatto(e.a, e.b, grid_points);
  for (double x : e.grid) e.density.push_back(density(x));
  for (int p = 0; p <= num_moments; ++p) e.moments.push_back(moment(p));
  return e;
}

OneCutMeasure solve_one_cut(const std::function<double(double)>& w_prime, const OneCutMeasure& guess, int chebyshev,
                            int quadrature) {
  const int M = chebyshev;
  std::vector<double> s(static_cast<size_t>(M));
  for (int j = 0; j < M; ++j) s[static_cast<size_t>(j)] = std::cos(kPi * (j + 0.5) / M);
  auto coefficients = [&](double c, double r) {
    std::vector<double> vals(static_cast<size_t>(M)), w(static_cast<size_t>(M), 0.0);
    for (int j = 0; j < M; ++j) vals[static_cast<size_t>(j)] = w_prime(c + r * s[static_cast<size_t>(j)]);
    for (int k = 0; k < M; ++k) {
      double acc = 0.0;
      for (int j = 0; j < M; ++j) acc += vals[static_cast<size_t>(j)] * std::cos(k * kPi * (j + 0.5) / M);
      w[static_cast<size_t>(k)] = acc * (k == 0 ? 1.0 : 2.0) / M;
    }
    return w;
  };
  Eigen::VectorXd x(2);
  x << guess.center(), guess.radius();
  const double res = hybrid_solve(
      [&](const Eigen::VectorXd& v, Eigen::VectorXd& f) {
        if (!(v[1] > 0)) {
          f << NAN, NAN;
          return;
        }
        auto w = coefficients(v[0], v[1]);
        f << w[0], v[1] * w[1] - 4.0;
      },
      x);
  if (!(res < 1e-12)) throw ConvergenceError("one-cut support equations not solved (residual " + residual_text(res) + ")");
  auto w = coefficients(x[0], x[1]);
  std::vector<double> c(static_cast<size_t>(M - 1));
  for (int k = 1; k < M; ++k) c[static_cast<size_t>(k - 1)] = x[1] * w[static_cast<size_t>(k)] / 2.0;
  OneCutMeasure out(x[0], x[1], std::move(c), quadrature);
  if (out.min_shape() < -1e-10) throw RegimeError("equilibrium density turns negative (not one-cut)");
  return out;
}

// ---------------------------------------------------------------------------
// Double cup

cplx CoupledMeasures::stieltjes_tilde_plus(cplx z) const {
  const double a = couplings.alpha;
  if (a == 0.0) return 1.0 / z;
  return -plus.stieltjes(-z / a) / a;
}

cplx CoupledMeasures::stieltjes_tilde_minus(cplx z) const {
  const double b = couplings.beta;
  if (b == 0.0) return 1.0 / (z - 1.0);
  return minus.stieltjes((z - 1.0) / b) / b;
}

double CoupledMeasures::tilde_plus_lower() const { return -couplings.alpha * plus.upper(); }
double CoupledMeasures::tilde_plus_upper() const { return -couplings.alpha * plus.lower(); }
double CoupledMeasures::tilde_minus_lower() const { return 1.0 + couplings.beta * minus.lower(); }
double CoupledMeasures::tilde_minus_upper() const { return 1.0 + couplings.beta * minus.upper(); }

double CoupledMeasures::tilde_plus_moment(int p) const {
  double acc = 0.0;
  for (size_t j = 0; j < plus.nodes().size(); ++j) acc += plus.weights()[j] * std::pow(-couplings.alpha * plus.nodes()[j], p);
  return acc;
}

CoupledMeasures doublecup_minimize(const DoubleCupCouplings& c, double delta, const DoubleCupOptions& opts) {
  const double al = c.alpha, be = c.beta;
  if (al < 0 || be < 0) throw RegimeError("double-cup couplings must be non-negative");
  OneCutMeasure plus = OneCutMeasure::semicircle(opts.quadrature), minus = plus;
  auto check_regime = [&](double x, double y) {
    if (!(1.0 + al * x + be * y > 0.0)) throw RegimeError("regime error: the ν̃_+ and ν̃_- supports overlap");
  };
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    check_regime(plus.upper() * (al > 0 ? 0 : 1) + plus.lower(), minus.lower());
    auto wp = [&](double x) {
      double acc = 0.0;
      for (size_t j = 0; j < minus.nodes().size(); ++j) {
        const double d = 1.0 + al * x + be * minus.nodes()[j];
        check_regime(x, minus.nodes()[j]);
        acc += minus.weights()[j] / d;
      }
      return x + delta * al * acc;
    };
    OneCutMeasure np = solve_one_cut(wp, plus, opts.chebyshev, opts.quadrature);
    check_regime(np.lower(), minus.lower());
    auto wm = [&](double y) {
      double acc = 0.0;
      for (size_t j = 0; j < np.nodes().size(); ++j) {
        const double d = 1.0 + al * np.nodes()[j] + be * y;
        check_regime(np.nodes()[j], y);
        acc += np.weights()[j] / d;
      }
      return y + delta * be * acc;
    };
    OneCutMeasure nm = solve_one_cut(wm, minus, opts.chebyshev, opts.quadrature);
    double diff = std::max({std::abs(np.center() - plus.center()), std::abs(np.radius() - plus.radius()),
                            std::abs(nm.center() - minus.center()), std::abs(nm.radius() - minus.radius())});
    for (size_t k = 0; k < std::min(np.coeffs().size(), plus.coeffs().size()); ++k)
      diff = std::max(diff, std::abs(np.coeffs()[k] - plus.coeffs()[k]));
    for (size_t k = 0; k < std::min(nm.coeffs().size(), minus.coeffs().size()); ++k)
      diff = std::max(diff, std::abs(nm.coeffs()[k] - minus.coeffs()[k]));
    plus = std::move(np);
    minus = std::move(nm);
    if (diff < opts.tolerance && it > 0) break;
  }
  if (it == opts.max_iterations) throw ConvergenceError("double-cup iteration did not settle");
  CoupledMeasures out;
  out.couplings = c;
  out.delta = delta;
  out.plus = plus;
  out.minus = minus;
  out.nu_plus = plus.summary(opts.num_moments);
  out.nu_minus = minus.summary(opts.num_moments);
  out.iterations = it + 1;
  if (!(out.tilde_plus_upper() < out.tilde_minus_lower()))
    throw RegimeError("regime error: the ν̃_+ and ν̃_- supports overlap");
  return out;
}

// ---------------------------------------------------------------------------
// Particles

double ParticleSolution::moment_plus(int p) const {
  double acc = 0.0;
  for (double x : plus) acc += std::pow(x, p);
  return acc / static_cast<double>(plus.size());
}

double ParticleSolution::moment_minus(int p) const {
  double acc = 0.0;
  for (double x : minus) acc += std::pow(x, p);
  return acc / static_cast<double>(minus.size());
}

cplx ParticleSolution::stieltjes_plus(cplx z) const {
  cplx acc = 0.0;
  for (double x : plus) acc += 1.0 / (z - x);
  return acc / static_cast<double>(plus.size());
}

namespace {

struct ParticleEnergy {
  double alpha, beta, delta;
  int n;

  // n·E, or +inf outside the admissible set.
  double energy(const Eigen::VectorXd& v) const {
    const double nn = n;
    double e = 0.0;
    for (int s = 0; s < 2; ++s) {
      const int o = s * n;
      for (int i = 0; i < n; ++i) {
        e += 0.5 * v[o + i] * v[o + i];
        for (int j = i + 1; j < n; ++j) {
          const double d = std::abs(v[o + i] - v[o + j]);
          if (d == 0.0) return INFINITY;
          e -= 2.0 / (nn - 1.0) * std::log(d);
        }
      }
    }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double d = 1.0 + alpha * v[i] + beta * v[n + j];
        if (!(d > 0)) return INFINITY;
        e += delta / nn * std::log(d);
      }
    return e;
  }

  void gradient_hessian(const Eigen::VectorXd& v, Eigen::VectorXd& g, Eigen::MatrixXd& h) const {
    const double nn = n;
    g = v;
    h = Eigen::MatrixXd::Identity(2 * n, 2 * n);
    for (int s = 0; s < 2; ++s) {
      const int o = s * n;
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
          const double d = v[o + i] - v[o + j];
          const double c = 2.0 / (nn - 1.0);
          g[o + i] -= c / d;
          g[o + j] += c / d;
          const double hh = c / (d * d);
          h(o + i, o + i) += hh;
          h(o + j, o + j) += hh;
          h(o + i, o + j) -= hh;
          h(o + j, o + i) -= hh;
        }
    }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double d = 1.0 + alpha * v[i] + beta * v[n + j];
        const double c = delta / nn;
        g[i] += c * alpha / d;
        g[n + j] += c * beta / d;
        const double d2 = c / (d * d);
        h(i, i) -= d2 * alpha * alpha;
        h(n + j, n + j) -= d2 * beta * beta;
        h(i, n + j) -= d2 * alpha * beta;
        h(n + j, i) -= d2 * alpha * beta;
      }
  }
};

}  // namespace

ParticleSolution doublecup_particles(const DoubleCupCouplings& c, double delta, int n, double tol, int max_iterations) {
  if (n < 2) throw ResourceError("doublecup_particles needs at least two particles");
  ParticleEnergy pe{c.alpha, c.beta, delta, n};
  Eigen::VectorXd v(2 * n);
  for (int i = 0; i < n; ++i) {
    const double x = -2.0 * std::cos(kPi * (i + 1) / (n + 1));
    v[i] = x;
    v[n + i] = x;
  }
  double e = pe.energy(v);
  if (!std::isfinite(e)) throw RegimeError("regime error: the ν̃_+ and ν̃_- supports overlap");
  Eigen::VectorXd g;
  Eigen::MatrixXd h;
  ParticleSolution out;
  int it = 0;
  for (; it < max_iterations; ++it) {
    pe.gradient_hessian(v, g, h);
    out.gradient_norm = g.lpNorm<Eigen::Infinity>();
    if (out.gradient_norm < tol) break;
    Eigen::LLT<Eigen::MatrixXd> llt(h);
    Eigen::VectorXd d = llt.info() == Eigen::Success ? Eigen::VectorXd(-llt.solve(g)) : Eigen::VectorXd(-g);
    double step = 1.0;
    bool moved = false;
    for (int half = 0; half < 60; ++half, step *= 0.5) {
      Eigen::VectorXd trial = v + step * d;
      const double et = pe.energy(trial);
      if (std::isfinite(et) && et <= e + 1e-14 * std::abs(e)) {
        v = trial;
        e = et;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  pe.gradient_hessian(v, g, h);
  out.gradient_norm = g.lpNorm<Eigen::Infinity>();
  if (!(out.gradient_norm < tol))
    throw ConvergenceError("particle flow stopped with gradient norm " + residual_text(out.gradient_norm));
  out.plus.assign(v.data(), v.data() + n);
  out.minus.assign(v.data() + n, v.data() + 2 * n);
  std::sort(out.plus.begin(), out.plus.end());
  std::sort(out.minus.begin(), out.minus.end());
  out.energy = e / n;
  out.iterations = it;
  return out;
}

// ---------------------------------------------------------------------------
// Formal moment series

MomentSeries doublecup_moment_series(int max_moment, int order) {
  if (max_moment < 0 || order < 0) throw DimensionError("negative moment-series shape");
  const int D = order;
  const int P = max_moment + D + 2;
  const ExactSeries one = ExactSeries::constant(2, D, DeltaPoly(1));
  const ExactSeries al = ExactSeries::variable(2, D, 0), be = ExactSeries::variable(2, D, 1);
  const DeltaPoly d = DeltaPoly::delta();

  std::vector<ExactSeries> mp(static_cast<size_t>(P + 1), ExactSeries(2, D)), mm = mp;
  // Start from the semicircle (Catalan numbers at even orders).
  Rational cat = 1;
  for (int q = 0; 2 * q <= P; ++q) {
    mp[static_cast<size_t>(2 * q)] = one * DeltaPoly(cat);
    mm[static_cast<size_t>(2 * q)] = mp[static_cast<size_t>(2 * q)];
    cat = cat * Rational(2 * (2 * q + 1), q + 2);
  }
  std::vector<ExactSeries> apow(static_cast<size_t>(D + 1)), bpow = apow;
  apow[0] = one;
  bpow[0] = one;
  for (int i = 1; i <= D; ++i) {
    apow[static_cast<size_t>(i)] = apow[static_cast<size_t>(i - 1)] * al;
    bpow[static_cast<size_t>(i)] = bpow[static_cast<size_t>(i - 1)] * be;
  }
  auto at = [&](const std::vector<ExactSeries>& m, int i) { return i <= P ? m[static_cast<size_t>(i)] : ExactSeries(2, D); };
  auto binom = [](int n, int k) {
    Rational r = 1;
    for (int i = 1; i <= k; ++i) r = r * Rational(n - k + i, i);
    return r;
  };

  for (int iter = 0; iter <= D + 2; ++iter) {
    // E[x^p (αx+βy)^k] = Σ_j C(k,j) α^j β^{k−j} m⁺_{p+j} m⁻_{k−j}; gather the
    // p-independent factors A_j = Σ_k (−1)^k C(k,j) α^j β^{k−j} m⁻_{k−j}.
    std::vector<ExactSeries> A(static_cast<size_t>(D), ExactSeries(2, D)), B = A;
    for (int k = 0; k < D; ++k)
      for (int j = 0; j <= k; ++j) {
        const Rational sgn = (k % 2 ? -1 : 1) * binom(k, j);
        const ExactSeries ab = apow[static_cast<size_t>(j)] * bpow[static_cast<size_t>(k - j)] * DeltaPoly(sgn);
        A[static_cast<size_t>(j)] += ab * at(mm, k - j);
        B[static_cast<size_t>(k - j)] += ab * at(mp, j);
      }
    std::vector<ExactSeries> np(static_cast<size_t>(P + 1), ExactSeries(2, D)), nm = np;
    np[0] = one;
    nm[0] = one;
    for (int p = 0; p < P; ++p) {
      ExactSeries sp(2, D), sm(2, D);
      for (int i = 0; i + 1 <= p; ++i) {
        sp += np[static_cast<size_t>(i)] * np[static_cast<size_t>(p - 1 - i)];
        sm += nm[static_cast<size_t>(i)] * nm[static_cast<size_t>(p - 1 - i)];
      }
      ExactSeries tp(2, D), tm(2, D);
      for (int j = 0; j < D; ++j) {
        tp += A[static_cast<size_t>(j)] * at(mp, p + j);
        tm += B[static_cast<size_t>(j)] * at(mm, p + j);
      }
      np[static_cast<size_t>(p + 1)] = sp - al * tp * d;
      nm[static_cast<size_t>(p + 1)] = sm - be * tm * d;
    }
    const bool same = np == mp && nm == mm;
    mp = std::move(np);
    mm = std::move(nm);
    if (same) break;
  }
  MomentSeries out;
  out.order = D;
  out.plus.assign(mp.begin(), mp.begin() + max_moment + 1);
  out.minus.assign(mm.begin(), mm.begin() + max_moment + 1);
  return out;
}

// ---------------------------------------------------------------------------
// Generating function of the cups

FloatSeries potts_generating_function(const CoupledMeasures& m, int order) {
  const double al = m.couplings.alpha;
  if (al == 0.0) throw InversionError("γ(z) has a vanishing linear coefficient (α = 0)");
  const int N = order + 1;
  // M(z) = Σ z^p ∫(−x)^p dν_+.
  FloatSeries M(1, N);
  for (int p = 0; p <= N; ++p) M.set({p}, m.plus.moment(p) * (p % 2 ? -1.0 : 1.0));
  FloatSeries z = FloatSeries::variable(1, N, 0);
  FloatSeries denom = FloatSeries::constant(1, N, 1.0) - z * z * M;
  FloatSeries gamma = z * series_reciprocal(denom) * al;
  FloatSeries zg = series_inverse_univariate(gamma);
  // z(γ)/γ
  FloatSeries shifted(1, order);
  for (const auto& [e, c] : zg.terms())
    if (e[0] >= 1) shifted.set({e[0] - 1}, c);
  FloatSeries Mz = series_compose_univariate(M, zg).truncated(order);
  return shifted * Mz * al;
}

namespace {

// Polynomials in g with ExactSeries coefficients, truncated at degree N.
using GPoly = std::vector<ExactSeries>;

GPoly gmul(const GPoly& a, const GPoly& b, int N, const ExactSeries& zero) {
  GPoly r(static_cast<size_t>(N + 1), zero);
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].is_zero()) continue;
    for (size_t j = 0; j < b.size() && i + j <= static_cast<size_t>(N); ++j)
      if (!b[j].is_zero()) r[i + j] += a[i] * b[j];
  }
  return r;
}

}  // namespace

std::vector<ExactSeries> potts_generating_series(int order_gamma, int order_t) {
  const int N = order_gamma;
  const int D = N + 2 * order_t;
  MomentSeries ms = doublecup_moment_series(N, D);
  const ExactSeries zero(2, D), one = ExactSeries::constant(2, D, DeltaPoly(1));
  // With z = (γ/α)·u, u solves u = 1 − g²u²M(gu), g = γ/α, and C = u·M(gu).
  auto M_of_gu = [&](const GPoly& u) {
    GPoly acc(static_cast<size_t>(N + 1), zero), power(static_cast<size_t>(N + 1), zero);
    power[0] = one;  // (gu)^0
    GPoly gu(static_cast<size_t>(N + 1), zero);
    for (int i = 0; i < N; ++i) gu[static_cast<size_t>(i + 1)] = u[static_cast<size_t>(i)];
    for (int p = 0; p <= N; ++p) {
      const ExactSeries mpp = ms.plus[static_cast<size_t>(p)] * DeltaPoly(p % 2 ? -1 : 1);
      for (int i = 0; i <= N; ++i) acc[static_cast<size_t>(i)] += power[static_cast<size_t>(i)] * mpp;
      power = gmul(power, gu, N, zero);
    }
    return acc;
  };
  GPoly u(static_cast<size_t>(N + 1), zero);
  u[0] = one;
  for (int iter = 0; iter <= N; ++iter) {
    GPoly mg = M_of_gu(u);
    GPoly uu = gmul(u, u, N, zero);
    GPoly rhs = gmul(uu, mg, N, zero);
    GPoly next(static_cast<size_t>(N + 1), zero);
    next[0] = one;
    for (int i = 0; i + 2 <= N; ++i) next[static_cast<size_t>(i + 2)] -= rhs[static_cast<size_t>(i)];
    u = std::move(next);
  }
  GPoly C = gmul(u, M_of_gu(u), N, zero);

  std::vector<ExactSeries> out;
  for (int n = 0; n <= N; ++n) {
    ExactSeries tn(2, order_t);
    for (const auto& [e, c] : C[static_cast<size_t>(n)].terms()) {
      if (e[0] < n) throw NumericError("potts_generating_series: coefficient not divisible by α^n");
      const int ea = e[0] - n, eb = e[1];
      if (ea + eb > 2 * order_t) continue;
      if (ea % 2 || eb % 2) throw NumericError("potts_generating_series: odd power of α or β after division");
      const Rational scale = Rational(1 << ((ea + eb) / 2));
      tn.add_to({ea / 2, eb / 2}, c * DeltaPoly(scale));
    }
    out.push_back(tn);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Small-coupling tables

double TableSeries::evaluate(double p, double kappa, double delta) const {
  double acc = 0.0;
  for (const auto& t : terms) {
    double c = 0.0, dp = 1.0;
    for (int k : t.delta) {
      c += k * dp;
      dp *= delta;
    }
    acc += c * std::pow(kappa, t.kappa_power) * std::pow(p, 0.5 * t.half_p);
  }
  return acc;
}

const std::vector<TableSeries>& small_coupling_tables() {
  static const std::vector<TableSeries> tables = {
      {"alpha", {{2, 1, {1}}, {4, 2, {-2, -3}}, {4, 0, {-6, -2}}, {6, 3, {3, 5, 8}}, {6, 1, {24, 45, 8}}, {6, -1, {17, 12, 5}}}, 8},
      {"beta", {{2, -1, {1}}, {4, -2, {-2, -3}}, {4, 0, {-6, -2}}, {6, -3, {3, 5, 8}}, {6, -1, {24, 45, 8}}, {6, 1, {17, 12, 5}}}, 8},
      {"a1", {{1, 1, {-2}}, {2, 1, {0, 1}}, {3, -1, {6, 2}}, {3, 3, {2, 2}}}, 4},
      {"a2", {{1, 1, {2}}, {2, 1, {0, 1}}, {3, -1, {-6, -2}}, {3, 3, {-2, -2}}}, 4},
      {"b1", {{0, 0, {1}}, {1, -1, {-2}}, {2, -1, {0, -1}}, {3, -3, {2, 2}}, {3, 1, {6, 2}}}, 4},
      {"b2", {{0, 0, {1}}, {1, -1, {2}}, {2, -1, {0, -1}}, {3, -3, {-2, -2}}, {3, 1, {-6, -2}}}, 4},
      {"mean", {{2, 1, {0, 1}}, {4, 2, {0, -1, -2}}, {4, 0, {0, -5, -1}}, {6, 3, {0, 1, 0, 4}}, {6, 1, {0, 1, 24, 3}}, {6, -1, {0, 11, 4, 2}}}, 8},
      {"second", {{2, 1, {1}}, {4, 2, {-2, -2, 1}}, {4, 0, {-6, -2}}, {6, 3, {3, 3, 3, -4}}, {6, 1, {24, 36, -4, -2}}, {6, -1, {17, 12, 5}}}, 8},
  };
  return tables;
}

const TableSeries& small_coupling_table(const std::string& name) {
  for (const auto& t : small_coupling_tables())
    if (t.name == name) return t;
  throw ParseError("unknown table series: " + name);
}

namespace {

DeltaPoly dpoly(std::initializer_list<long> c) {
  std::vector<Rational> v;
  for (long x : c) v.emplace_back(x);
  return DeltaPoly(v);
}

}  // namespace

ExactSeries table_mean_over_alpha() {
  ExactSeries s(2, 2);
  s.set({0, 0}, dpoly({0, 1}));
  s.set({1, 0}, dpoly({0, 1, 1}));
  s.set({0, 1}, dpoly({0, 1, 1}));
  s.set({2, 0}, dpoly({0, 2, 5, 2}));
  s.set({1, 1}, dpoly({0, 6, 8, 4}));
  s.set({0, 2}, dpoly({0, 2, 5, 2}));
  return s;
}

ExactSeries table_second_reduced() {
  ExactSeries s(2, 1);
  s.set({0, 0}, dpoly({0, 1, 1}));
  s.set({1, 0}, dpoly({0, 2, 5, 2}));
  s.set({0, 1}, dpoly({0, 3, 4, 2}));
  return s;
}

// ---------------------------------------------------------------------------
// Elliptic parameterization

cplx q_from_delta(double delta) {
  if (delta < 2.0 && delta > -2.0) return std::exp(kI * std::acos(delta / 2.0));
  if (delta > 2.0) return {(delta - std::sqrt(delta * delta - 4.0)) / 2.0, 0.0};
  throw RangeError("δ = 2 gives a degenerate elliptic frame");
}

EllipticFrame elliptic_frame_from_endpoints(double a1, double a2, double b1, double b2, double alpha_app,
                                            double beta_app, double delta) {
  if (!(a1 < a2 && a2 < b1 && b1 < b2)) throw RegimeError("regime error: endpoints are not ordered a1 < a2 < b1 < b2");
  EllipticFrame f;
  f.a1 = a1;
  f.a2 = a2;
  f.b1 = b1;
  f.b2 = b2;
  f.alpha = alpha_app;
  f.beta = beta_app;
  f.delta = delta;
  f.k2 = (b2 - b1) * (a2 - a1) / ((b2 - a2) * (b1 - a1));
  const double k = std::sqrt(f.k2), kp = std::sqrt(1.0 - f.k2);
  f.K = std::comp_ellint_1(k);
  f.Kp = std::comp_ellint_1(kp);
  // sn²(u_inf) = (a1 − b1)/(b2 − b1) < 0, so u_inf = i·v with sc(v, k') known.
  const double v = std::ellint_1(kp, std::atan(std::sqrt((b1 - a1) / (b2 - b1))));
  f.u_inf = kI * v;
  f.z_m1 = -0.5 * kI * std::sqrt((b1 - a1) * (b2 - a2));
  f.p = std::exp(-kPi * f.Kp / f.K);
  f.kappa = f.p * std::exp(2.0 * kPi * v / f.K);
  f.q = q_from_delta(delta);
  f.nu = std::log(f.q) / (kI * kPi);
  return f;
}

EllipticFrame elliptic_frame_from_pk(double p, double kappa, double delta) {
  if (!(p > 0.0 && p < 0.05)) throw RangeError("p outside the validated range (0, 0.05)");
  if (!(kappa >= 0.5 && kappa <= 2.0)) throw RangeError("κ outside the validated range [0.5, 2]");
  auto ev = [&](const char* name) { return small_coupling_table(name).evaluate(p, kappa, delta); };
  return elliptic_frame_from_endpoints(ev("a1"), ev("a2"), ev("b1"), ev("b2"), ev("alpha"), ev("beta"), delta);
}

namespace {

EllipticFrame frame_of(const CoupledMeasures& m) {
  return elliptic_frame_from_endpoints(m.tilde_plus_lower(), m.tilde_plus_upper(), m.tilde_minus_lower(),
                                       m.tilde_minus_upper(), m.couplings.alpha_app(), m.couplings.beta_app(),
                                       m.delta);
}

}  // namespace

EllipticFrame elliptic_frame_solved(double p, double kappa, double delta) {
  if (!(p > 0.0 && p < 0.05)) throw RangeError("p outside the validated range (0, 0.05)");
  if (!(kappa >= 0.5 && kappa <= 2.0)) throw RangeError("κ outside the validated range [0.5, 2]");
  Eigen::VectorXd x(2);
  x << std::log(small_coupling_table("alpha").evaluate(p, kappa, delta)),
      std::log(small_coupling_table("beta").evaluate(p, kappa, delta));
  auto frame_at = [&](const Eigen::VectorXd& v) {
    return frame_of(doublecup_minimize(DoubleCupCouplings::from_appendix(std::exp(v[0]), std::exp(v[1])), delta));
  };
  const double res = hybrid_solve(
      [&](const Eigen::VectorXd& v, Eigen::VectorXd& out) {
        try {
          const EllipticFrame f = frame_at(v);
          out << std::log(f.p / p), std::log(f.kappa / kappa);
        } catch (const std::exception&) {
          out << NAN, NAN;
        }
      },
      x);
  if (!(res < 1e-12)) throw ConvergenceError("frame equations not solved (residual " + residual_text(res) + ")");
  return frame_at(x);
}

namespace {

// Jacobi θ_1 in the variable πu/(2K) with nome e^{−πK'/K}:
// Σ_n (−1)^n e^{−(n+½)²πK'/K} (e^{iw_n u} ∓ e^{−iw_n u}), w_n = (2n+1)π/(2K).
// Exponents are combined before exponentiation so large Im u does not overflow.
cplx theta_sum(cplx u, double K, double Kp, bool derivative) {
  cplx acc = 0.0;
  const double im = std::abs(u.imag());
  for (int n = 0; n < 2000; ++n) {
    const double h = n + 0.5;
    const double w = (2.0 * n + 1.0) * kPi / (2.0 * K);
    const double g = -h * h * kPi * Kp / K;
    const cplx ep = std::exp(g + kI * w * u), em = std::exp(g - kI * w * u);
    // 2 sin(wu) = −i(e^{iwu} − e^{−iwu}), 2w cos(wu) = w(e^{iwu} + e^{−iwu})
    const double sign = n % 2 ? -1.0 : 1.0;
    const cplx term = sign * (derivative ? w * (ep + em) : -kI * (ep - em));
    acc += term;
    const bool past_peak = h * Kp > im;
    if (n > 2 && past_peak && std::abs(term) <= 1e-17 * std::abs(acc)) break;
  }
  return acc;
}

}  // namespace

cplx theta(cplx u, double K, double Kp) { return theta_sum(u, K, Kp, false); }

cplx theta_prime(cplx u, double K, double Kp) { return theta_sum(u, K, Kp, true); }

namespace {

cplx sqrt_quartic(cplx w, const EllipticFrame& f) { return segment_sqrt(w, f.a1, f.a2) * segment_sqrt(w, f.b1, f.b2); }

// sn(u, k)² for complex u from real Jacobi functions and the addition formula.
cplx sn_squared(cplx u, double k2) {
  const double k = std::sqrt(k2), kp = std::sqrt(1.0 - k2);
  double cn, dn, cn1, dn1;
  const double sn = boost::math::jacobi_elliptic(k, u.real(), &cn, &dn);
  const double sn1 = boost::math::jacobi_elliptic(kp, u.imag(), &cn1, &dn1);
  const double den = cn1 * cn1 + k2 * sn * sn * sn1 * sn1;
  const cplx s = cplx(sn * dn1, cn * dn * sn1 * cn1) / den;
  return s * s;
}

}  // namespace

cplx elliptic_map_z(cplx u, const EllipticFrame& f) {
  const double c = (f.a1 - f.b1) / (f.b2 - f.b1);
  const cplx s = sn_squared(u, f.k2);
  if (std::abs(s - c) < 1e-300) throw PoleError("z(u) has a pole at u_inf");
  return (s * f.a1 - c * f.b2) / (s - c);
}

cplx elliptic_map_u(cplx z, const EllipticFrame& f) {
  const double x = z.real();
  const bool real = z.imag() == 0.0;
  if (real && x == f.b2) return 0.0;
  if (real && ((x >= f.a1 && x <= f.a2) || (x >= f.b1 && x <= f.b2)))
    throw BranchError("z lies on a cut of the elliptic parameterization");
  cplx dir;
  if (!real)
    dir = z.imag() > 0 ? kI : -kI;
  else if (x > f.b2)
    dir = 1.0;
  else if (x < f.a1)
    dir = -1.0;
  else
    dir = kI;  // gap between the cuts, approached from above
  boost::math::quadrature::exp_sinh<double> integrator;
  auto integrand = [&](double s) { return dir / sqrt_quartic(z + dir * s, f); };
  const double re = integrator.integrate([&](double s) { return integrand(s).real(); });
  const double im = integrator.integrate([&](double s) { return integrand(s).imag(); });
  const double C = std::sqrt((f.b1 - f.a1) * (f.b2 - f.a2));
  return f.u_inf - 0.5 * kI * C * cplx(re, im);
}

cplx residue_scale_numeric(const EllipticFrame& f) {
  const double eps = 1e-4 * f.K;
  return 0.5 * eps * (elliptic_map_z(f.u_inf + eps, f) - elliptic_map_z(f.u_inf - eps, f));
}

cplx phi_coefficient(const EllipticFrame& f, int sign) {
  const cplx q = f.q;
  const cplx qs = sign > 0 ? q : 1.0 / q;
  const cplx two_nu_k = 2.0 * f.nu * f.K;
  return -static_cast<double>(sign) * f.z_m1 * theta_prime(0.0, f.K, f.Kp) / theta(two_nu_k, f.K, f.Kp) /
         (q - 1.0 / q) * (1.0 / f.alpha + qs / f.beta);
}

cplx phi_plus(const EllipticFrame& f, cplx u) {
  const cplx two_nu_k = 2.0 * f.nu * f.K;
  const cplx dm = theta(u - f.u_inf, f.K, f.Kp), dp = theta(u + f.u_inf, f.K, f.Kp);
  if (std::abs(dm) < 1e-13 || std::abs(dp) < 1e-13) throw PoleError("φ_+ has a pole at ±u_inf");
  return phi_coefficient(f, +1) * theta(u - f.u_inf - two_nu_k, f.K, f.Kp) / dm +
         phi_coefficient(f, -1) * theta(u + f.u_inf - two_nu_k, f.K, f.Kp) / dp;
}

cplx phi_minus(const EllipticFrame& f, cplx u) { return -phi_plus(f, -u); }

namespace {

cplx r_term(const EllipticFrame& f, cplx z, int sign) {
  const cplx qs = sign > 0 ? f.q : 1.0 / f.q;
  const cplx pp = z / f.alpha, pm = (z - 1.0) / f.beta;
  return (qs * pp + qs * qs * pm) / (1.0 - qs * qs);
}

}  // namespace

cplx omega_plus(const EllipticFrame& f, cplx u) {
  const cplx z = elliptic_map_z(u, f);
  const cplx q = f.q;
  return (phi_plus(f, u) - phi_minus(f, u) + r_term(f, z, +1) - r_term(f, z, -1)) / (q - 1.0 / q);
}

cplx omega_minus(const EllipticFrame& f, cplx u) {
  const cplx z = elliptic_map_z(u, f);
  return f.q * omega_plus(f, u) - phi_plus(f, u) - r_term(f, z, +1);
}

}  // namespace looplab
