#include "looplab/series.hpp"

#include <algorithm>

namespace looplab {

Rational parse_rational(const std::string& text) {
  std::string s;
  for (char ch : text)
    if (ch != ' ' && ch != '\t') s.push_back(ch);
  if (s.empty()) throw ParseError("empty rational");
  auto valid_int = [](const std::string& t) {
    if (t.empty()) return false;
    size_t i = (t[0] == '-' || t[0] == '+') ? 1 : 0;
    if (i == t.size()) return false;
    return std::all_of(t.begin() + static_cast<long>(i), t.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  auto slash = s.find('/');
  std::string num = s.substr(0, slash);
  std::string den = slash == std::string::npos ? "1" : s.substr(slash + 1);
  if (!valid_int(num) || !valid_int(den)) throw ParseError("bad rational: " + text);
  if (num[0] == '+') num.erase(0, 1);
  if (den[0] == '+') den.erase(0, 1);
  BigInt n(num), d(den);
  if (d == 0) throw ParseError("zero denominator: " + text);
  return Rational(n, d);
}

std::string rational_to_string(const Rational& r) {
  BigInt n = boost::multiprecision::numerator(r);
  BigInt d = boost::multiprecision::denominator(r);
  if (d == 1) return n.str();
  return n.str() + "/" + d.str();
}

double rational_to_double(const Rational& r) { return r.convert_to<double>(); }

DeltaPoly::DeltaPoly(long c) {
  if (c != 0) c_.push_back(Rational(c));
}

DeltaPoly::DeltaPoly(const Rational& c) {
  if (c != 0) c_.push_back(c);
}

DeltaPoly::DeltaPoly(std::vector<Rational> coeffs) : c_(std::move(coeffs)) { trim(); }

DeltaPoly DeltaPoly::delta() { return monomial(1, 1); }

DeltaPoly DeltaPoly::monomial(int degree, const Rational& c) {
  std::vector<Rational> v(static_cast<size_t>(degree) + 1, Rational(0));
  v.back() = c;
  return DeltaPoly(std::move(v));
}

Rational DeltaPoly::coeff(int k) const {
  if (k < 0 || k >= static_cast<int>(c_.size())) return 0;
  return c_[static_cast<size_t>(k)];
}

void DeltaPoly::trim() {
  while (!c_.empty() && c_.back() == 0) c_.pop_back();
}

double DeltaPoly::eval(double d) const {
  double acc = 0.0;
  for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * d + rational_to_double(*it);
  return acc;
}

Rational DeltaPoly::eval(const Rational& d) const {
  Rational acc = 0;
  for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * d + *it;
  return acc;
}

DeltaPoly& DeltaPoly::operator+=(const DeltaPoly& o) {
  if (o.c_.size() > c_.size()) c_.resize(o.c_.size(), Rational(0));
  for (size_t i = 0; i < o.c_.size(); ++i) c_[i] += o.c_[i];
  trim();
  return *this;
}

DeltaPoly& DeltaPoly::operator-=(const DeltaPoly& o) {
  if (o.c_.size() > c_.size()) c_.resize(o.c_.size(), Rational(0));
  for (size_t i = 0; i < o.c_.size(); ++i) c_[i] -= o.c_[i];
  trim();
  return *this;
}

DeltaPoly& DeltaPoly::operator*=(const DeltaPoly& o) {
  if (c_.empty() || o.c_.empty()) {
    c_.clear();
    return *this;
  }
  std::vector<Rational> r(c_.size() + o.c_.size() - 1, Rational(0));
  for (size_t i = 0; i < c_.size(); ++i)
    for (size_t j = 0; j < o.c_.size(); ++j) r[i + j] += c_[i] * o.c_[j];
  c_ = std::move(r);
  trim();
  return *this;
}

DeltaPoly DeltaPoly::operator-() const {
  DeltaPoly r = *this;
  for (auto& c : r.c_) c = -c;
  return r;
}

std::string DeltaPoly::pretty(const std::string& symbol) const {
  if (c_.empty()) return "0";
  std::string out;
  for (int k = degree(); k >= 0; --k) {
    const Rational& c = c_[static_cast<size_t>(k)];
    if (c == 0) continue;
    Rational mag = c < 0 ? Rational(-c) : c;
    if (!out.empty())
      out += c < 0 ? "-" : "+";
    else if (c < 0)
      out += "-";
    bool unit = mag == 1;
    if (k == 0 || !unit) out += rational_to_string(mag);
    if (k > 0) {
      if (!unit) out += "*";
      out += symbol;
      if (k > 1) out += "^" + std::to_string(k);
    }
  }
  return out;
}

std::string DeltaPoly::list_string() const {
  std::string out = "[";
  for (size_t i = 0; i < c_.size(); ++i) {
    if (i) out += ", ";
    out += rational_to_string(c_[i]);
  }
  return out + "]";
}

DeltaPoly DeltaPoly::parse_list(const std::string& text) {
  auto l = text.find('['), r = text.rfind(']');
  if (l == std::string::npos || r == std::string::npos || r < l)
    throw ParseError("δ-polynomial must be a bracketed list: " + text);
  std::string body = text.substr(l + 1, r - l - 1);
  std::vector<Rational> v;
  std::istringstream is(body);
  std::string part;
  while (std::getline(is, part, ',')) {
    if (part.find_first_not_of(" \t") == std::string::npos) continue;
    v.push_back(parse_rational(part));
  }
  return DeltaPoly(std::move(v));
}

}  // namespace looplab
