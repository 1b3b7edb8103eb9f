#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "looplab/errors.hpp"

namespace looplab {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

Rational parse_rational(const std::string& text);
std::string rational_to_string(const Rational& r);
double rational_to_double(const Rational& r);

// Polynomial in the loop fugacity symbol d with rational coefficients.
class DeltaPoly {
 public:
  DeltaPoly() = default;
  DeltaPoly(long c);  // NOLINT(google-explicit-constructor)
  DeltaPoly(const Rational& c);  // NOLINT(google-explicit-constructor)
  explicit DeltaPoly(std::vector<Rational> coeffs);

  static DeltaPoly delta();
  static DeltaPoly monomial(int degree, const Rational& c = 1);

  const std::vector<Rational>& coeffs() const { return c_; }
  int degree() const { return static_cast<int>(c_.size()) - 1; }
  bool is_zero() const { return c_.empty(); }
  bool is_constant() const { return c_.size() <= 1; }
  Rational coeff(int k) const;

  double eval(double d) const;
  Rational eval(const Rational& d) const;

  DeltaPoly& operator+=(const DeltaPoly& o);
  DeltaPoly& operator-=(const DeltaPoly& o);
  DeltaPoly& operator*=(const DeltaPoly& o);
  DeltaPoly operator-() const;
  friend DeltaPoly operator+(DeltaPoly a, const DeltaPoly& b) { return a += b; }
  friend DeltaPoly operator-(DeltaPoly a, const DeltaPoly& b) { return a -= b; }
  friend DeltaPoly operator*(DeltaPoly a, const DeltaPoly& b) { return a *= b; }
  friend bool operator==(const DeltaPoly& a, const DeltaPoly& b) { return a.c_ == b.c_; }
  friend bool operator!=(const DeltaPoly& a, const DeltaPoly& b) { return !(a == b); }

  // Human-readable form, e.g. "δ^2+δ".
  std::string pretty(const std::string& symbol = "δ") const;
  // Coefficient list, lowest degree first, e.g. "[0, 1, 1]".
  std::string list_string() const;
  static DeltaPoly parse_list(const std::string& text);

 private:
  void trim();
  std::vector<Rational> c_;
};

template <class S>
struct ScalarTraits;

template <>
struct ScalarTraits<Rational> {
  static constexpr const char* name = "rational";
  static Rational zero() { return 0; }
  static Rational one() { return 1; }
  static Rational from_rational(const Rational& r) { return r; }
  static bool is_zero(const Rational& a) { return a == 0; }
  static Rational divide(const Rational& a, const Rational& b) {
    if (b == 0) throw InversionError("division by zero rational");
    return a / b;
  }
  static double to_double(const Rational& a, double /*delta*/) { return rational_to_double(a); }
  static std::string to_string(const Rational& a) { return rational_to_string(a); }
  static Rational parse(const std::string& s) { return parse_rational(s); }
};

template <>
struct ScalarTraits<DeltaPoly> {
  static constexpr const char* name = "qdelta";
  static DeltaPoly zero() { return {}; }
  static DeltaPoly one() { return DeltaPoly(1); }
  static DeltaPoly from_rational(const Rational& r) { return DeltaPoly(r); }
  static bool is_zero(const DeltaPoly& a) { return a.is_zero(); }
  static DeltaPoly divide(const DeltaPoly& a, const DeltaPoly& b) {
    if (!b.is_constant() || b.is_zero())
      throw InversionError("ℚ[δ] division requires a nonzero rational divisor");
    DeltaPoly r = a;
    r *= DeltaPoly(Rational(1) / b.coeff(0));
    return r;
  }
  static double to_double(const DeltaPoly& a, double delta) { return a.eval(delta); }
  static std::string to_string(const DeltaPoly& a) { return a.list_string(); }
  static DeltaPoly parse(const std::string& s) { return DeltaPoly::parse_list(s); }
};

template <>
struct ScalarTraits<double> {
  static constexpr const char* name = "double";
  static double zero() { return 0.0; }
  static double one() { return 1.0; }
  static double from_rational(const Rational& r) { return rational_to_double(r); }
  static bool is_zero(double a) { return a == 0.0; }
  static double divide(double a, double b) {
    if (b == 0.0) throw InversionError("division by zero");
    return a / b;
  }
  static double to_double(double a, double /*delta*/) { return a; }
  static std::string to_string(double a) {
    std::ostringstream os;
    os << std::setprecision(17) << a;
    return os.str();
  }
  static double parse(const std::string& s) {
    try {
      size_t pos = 0;
      double v = std::stod(s, &pos);
      if (s.find_first_not_of(" \t", pos) != std::string::npos) throw ParseError("trailing text");
      return v;
    } catch (const std::logic_error&) {
      throw ParseError("bad floating-point coefficient: " + s);
    }
  }
};

using Exponent = std::vector<int>;

inline int total_degree(const Exponent& e) { return std::accumulate(e.begin(), e.end(), 0); }

// Orders exponents by total degree, then lexicographically.
struct GradedLess {
  bool operator()(const Exponent& a, const Exponent& b) const {
    int da = total_degree(a), db = total_degree(b);
    if (da != db) return da < db;
    return a < b;
  }
};

// Truncated multivariate power series in t_1..t_k. Only nonzero
// coefficients are stored, and nothing above total degree N.
template <class S>
class CouplingSeries {
 public:
  using Traits = ScalarTraits<S>;
  using Terms = std::map<Exponent, S, GradedLess>;

  CouplingSeries() = default;
  CouplingSeries(int num_vars, int max_degree) : k_(num_vars), n_(max_degree) {
    if (num_vars < 0 || max_degree < 0) throw DimensionError("negative series shape");
  }

  static CouplingSeries constant(int num_vars, int max_degree, const S& c) {
    CouplingSeries s(num_vars, max_degree);
    s.set(Exponent(num_vars, 0), c);
    return s;
  }
  static CouplingSeries variable(int num_vars, int max_degree, int i, const S& c = Traits::one()) {
    CouplingSeries s(num_vars, max_degree);
    if (i < 0 || i >= num_vars) throw DimensionError("variable index out of range");
    Exponent e(num_vars, 0);
    e[i] = 1;
    s.set(e, c);
    return s;
  }

  int num_vars() const { return k_; }
  int max_degree() const { return n_; }
  const Terms& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  S coeff(const Exponent& e) const {
    check_exponent(e);
    auto it = terms_.find(e);
    return it == terms_.end() ? Traits::zero() : it->second;
  }
  S constant_term() const { return coeff(Exponent(k_, 0)); }

  void set(const Exponent& e, const S& c) {
    check_exponent(e);
    if (total_degree(e) > n_) return;
    if (Traits::is_zero(c))
      terms_.erase(e);
    else
      terms_[e] = c;
  }
  void add_to(const Exponent& e, const S& c) {
    check_exponent(e);
    if (total_degree(e) > n_ || Traits::is_zero(c)) return;
    auto it = terms_.find(e);
    if (it == terms_.end()) {
      terms_.emplace(e, c);
    } else {
      it->second += c;
      if (Traits::is_zero(it->second)) terms_.erase(it);
    }
  }

  CouplingSeries truncated(int max_degree) const {
    CouplingSeries r(k_, std::min(max_degree, n_));
    for (const auto& [e, c] : terms_)
      if (total_degree(e) <= r.n_) r.terms_.emplace(e, c);
    return r;
  }

  CouplingSeries& operator+=(const CouplingSeries& o) {
    same_shape(o);
    if (o.n_ < n_) *this = truncated(o.n_);
    for (const auto& [e, c] : o.terms_) add_to(e, c);
    return *this;
  }
  CouplingSeries& operator-=(const CouplingSeries& o) {
    same_shape(o);
    if (o.n_ < n_) *this = truncated(o.n_);
    for (const auto& [e, c] : o.terms_) add_to(e, -c);
    return *this;
  }
  CouplingSeries operator-() const {
    CouplingSeries r(k_, n_);
    for (const auto& [e, c] : terms_) r.terms_.emplace(e, -c);
    return r;
  }
  CouplingSeries& operator*=(const S& s) {
    if (Traits::is_zero(s)) {
      terms_.clear();
      return *this;
    }
    for (auto it = terms_.begin(); it != terms_.end();) {
      it->second *= s;
      if (Traits::is_zero(it->second))
        it = terms_.erase(it);
      else
        ++it;
    }
    return *this;
  }
  friend CouplingSeries operator+(CouplingSeries a, const CouplingSeries& b) { return a += b; }
  friend CouplingSeries operator-(CouplingSeries a, const CouplingSeries& b) { return a -= b; }
  friend CouplingSeries operator*(CouplingSeries a, const S& s) { return a *= s; }
  friend CouplingSeries operator*(const S& s, CouplingSeries a) { return a *= s; }

  friend CouplingSeries operator*(const CouplingSeries& a, const CouplingSeries& b) {
    a.same_shape(b);
    CouplingSeries r(a.k_, std::min(a.n_, b.n_));
    Exponent e(a.k_);
    for (const auto& [ea, ca] : a.terms_) {
      int da = total_degree(ea);
      if (da > r.n_) break;
      for (const auto& [eb, cb] : b.terms_) {
        if (da + total_degree(eb) > r.n_) break;
        for (int i = 0; i < a.k_; ++i) e[i] = ea[i] + eb[i];
        r.add_to(e, ca * cb);
      }
    }
    return r;
  }
  CouplingSeries& operator*=(const CouplingSeries& o) { return *this = *this * o; }

  friend bool operator==(const CouplingSeries& a, const CouplingSeries& b) {
    return a.k_ == b.k_ && a.n_ == b.n_ && a.terms_ == b.terms_;
  }
  friend bool operator!=(const CouplingSeries& a, const CouplingSeries& b) { return !(a == b); }

  template <class F>
  auto map_coeffs(F f) const -> CouplingSeries<decltype(f(std::declval<S>()))> {
    CouplingSeries<decltype(f(std::declval<S>()))> r(k_, n_);
    for (const auto& [e, c] : terms_) r.set(e, f(c));
    return r;
  }

  // Evaluate at numeric couplings; ℚ[δ] coefficients are evaluated at delta.
  double evaluate(const std::vector<double>& t, double delta = 0.0) const {
    if (static_cast<int>(t.size()) != k_) throw DimensionError("coupling vector size mismatch");
    double sum = 0.0;
    for (const auto& [e, c] : terms_) {
      double m = Traits::to_double(c, delta);
      for (int i = 0; i < k_; ++i) m *= std::pow(t[i], e[i]);
      sum += m;
    }
    return sum;
  }

  // Plain-text format: a header line followed by "n_1,...,n_k : coefficient".
  void write(std::ostream& os) const {
    os << "# looplab-series vars=" << k_ << " order=" << n_ << " scalar=" << Traits::name << "\n";
    for (const auto& [e, c] : terms_) {
      for (int i = 0; i < k_; ++i) os << (i ? "," : "") << e[i];
      os << " : " << Traits::to_string(c) << "\n";
    }
  }
  std::string to_text() const {
    std::ostringstream os;
    write(os);
    return os.str();
  }
  static CouplingSeries read(std::istream& is);
  static CouplingSeries from_text(const std::string& text) {
    std::istringstream is(text);
    return read(is);
  }

 private:
  void check_exponent(const Exponent& e) const {
    if (static_cast<int>(e.size()) != k_) throw DimensionError("exponent length does not match num_vars");
    for (int v : e)
      if (v < 0) throw DimensionError("negative exponent");
  }
  void same_shape(const CouplingSeries& o) const {
    if (o.k_ != k_) throw DimensionError("series have different numbers of variables");
  }

  int k_ = 0;
  int n_ = 0;
  Terms terms_;
};

template <class S>
CouplingSeries<S> CouplingSeries<S>::read(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ParseError("empty series text");
  int k = -1, n = -1;
  std::string scalar;
  {
    std::istringstream hs(line);
    std::string hash, tag;
    hs >> hash >> tag;
    if (hash != "#" || tag != "looplab-series") throw ParseError("missing series header");
    std::string kv;
    while (hs >> kv) {
      auto eq = kv.find('=');
      if (eq == std::string::npos) throw ParseError("bad header field: " + kv);
      std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
      if (key == "vars") k = std::stoi(val);
      else if (key == "order") n = std::stoi(val);
      else if (key == "scalar") scalar = val;
    }
  }
  if (k < 0 || n < 0) throw ParseError("series header lacks vars/order");
  if (scalar != Traits::name) throw ParseError("series scalar mode mismatch: " + scalar);
  CouplingSeries r(k, n);
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto colon = line.find(" : ");
    if (colon == std::string::npos) throw ParseError("record lacks ' : ' separator: " + line);
    std::string lhs = line.substr(0, colon);
    Exponent e;
    std::istringstream es(lhs);
    std::string part;
    while (std::getline(es, part, ',')) {
      if (part.find_first_not_of(" ") == std::string::npos) continue;
      e.push_back(std::stoi(part));
    }
    if (static_cast<int>(e.size()) != k) throw ParseError("record exponent length mismatch: " + line);
    r.add_to(e, Traits::parse(line.substr(colon + 3)));
  }
  return r;
}

// outer(inner) for a univariate outer series; inner must have zero constant term.
template <class S>
CouplingSeries<S> series_compose_univariate(const CouplingSeries<S>& outer, const CouplingSeries<S>& inner) {
  using Traits = ScalarTraits<S>;
  if (outer.num_vars() != 1) throw DimensionError("outer series must be univariate");
  if (!Traits::is_zero(inner.constant_term()))
    throw CompositionError("inner series has a nonzero constant term");
  const int k = inner.num_vars();
  const int order = std::min(inner.max_degree(), outer.max_degree());
  CouplingSeries<S> result(k, order);
  CouplingSeries<S> power = CouplingSeries<S>::constant(k, order, Traits::one());
  CouplingSeries<S> in = inner.truncated(order);
  for (int j = 0; j <= order; ++j) {
    S c = outer.coeff(Exponent{j});
    if (!Traits::is_zero(c)) result += power * c;
    power = power * in;
  }
  return result;
}

// Compositional inverse of a univariate series f(z) = a_1 z + a_2 z^2 + ...
// by coefficient matching of f(g(x)) = x.
template <class S>
CouplingSeries<S> series_inverse_univariate(const CouplingSeries<S>& f) {
  using Traits = ScalarTraits<S>;
  if (f.num_vars() != 1) throw DimensionError("series reversion needs a univariate series");
  if (!Traits::is_zero(f.constant_term())) throw InversionError("series reversion needs f(0) = 0");
  const int n = f.max_degree();
  S a1 = f.coeff(Exponent{1});
  if (Traits::is_zero(a1)) throw InversionError("vanishing linear coefficient, series not invertible");
  CouplingSeries<S> g(1, n);
  g.set(Exponent{1}, Traits::divide(Traits::one(), a1));
  for (int m = 2; m <= n; ++m) {
    CouplingSeries<S> fg = series_compose_univariate(f, g);
    S c = fg.coeff(Exponent{m});
    g.set(Exponent{m}, -Traits::divide(c, a1));
  }
  return g;
}

// Multiplicative inverse 1/a; the constant term must be invertible.
template <class S>
CouplingSeries<S> series_reciprocal(const CouplingSeries<S>& a) {
  using Traits = ScalarTraits<S>;
  S c0 = a.constant_term();
  S inv0 = Traits::divide(Traits::one(), c0);
  // 1/a = inv0 * 1/(1 - x) with x = 1 - inv0 * a, x has no constant term.
  CouplingSeries<S> x = CouplingSeries<S>::constant(a.num_vars(), a.max_degree(), Traits::one()) - a * inv0;
  CouplingSeries<S> result = CouplingSeries<S>::constant(a.num_vars(), a.max_degree(), Traits::one());
  CouplingSeries<S> power = result;
  for (int j = 1; j <= a.max_degree(); ++j) {
    power = power * x;
    if (power.is_zero()) break;
    result += power;
  }
  return result * inv0;
}

template <class S>
CouplingSeries<double> to_double_series(const CouplingSeries<S>& s, double delta) {
  return s.map_coeffs([delta](const S& c) { return ScalarTraits<S>::to_double(c, delta); });
}

using ExactSeries = CouplingSeries<DeltaPoly>;
using RationalSeries = CouplingSeries<Rational>;
using FloatSeries = CouplingSeries<double>;

}  // namespace looplab
