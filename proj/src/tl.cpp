#include "looplab/tl.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <sstream>

namespace looplab {

bool is_noncrossing_pairing(const std::vector<int>& partner) {
  const int n = static_cast<int>(partner.size());
  std::vector<int> stack;
  for (int i = 0; i < n; ++i) {
    int j = partner[static_cast<size_t>(i)];
    if (j < 0 || j >= n || j == i || partner[static_cast<size_t>(j)] != i) return false;
    if (j > i) {
      stack.push_back(i);
    } else {
      if (stack.empty() || stack.back() != j) return false;
      stack.pop_back();
    }
  }
  return stack.empty();
}

TLDiagram::TLDiagram(std::vector<int> partner, int sign) : partner_(std::move(partner)), sign_(sign) {
  if (sign != 1 && sign != -1) throw ShadingError("shading sign must be +1 or -1");
  if (partner_.size() % 2 != 0) throw DimensionError("TL diagram needs an even number of points");
  if (!is_noncrossing_pairing(partner_)) throw ShapeError("pairing is not a non-crossing involution");
  for (int i = 0; i < num_points(); ++i)
    if (label(i) == label(partner_[static_cast<size_t>(i)])) throw ShadingError("string joins points of equal shading parity");
}

TLDiagram TLDiagram::unnested(int n, int sign) {
  std::vector<int> p(static_cast<size_t>(2 * n));
  for (int i = 0; i < n; ++i) {
    p[static_cast<size_t>(2 * i)] = 2 * i + 1;
    p[static_cast<size_t>(2 * i + 1)] = 2 * i;
  }
  return TLDiagram(std::move(p), sign);
}

TLDiagram TLDiagram::nested(int n, int sign) {
  std::vector<int> p(static_cast<size_t>(2 * n));
  for (int i = 0; i < 2 * n; ++i) p[static_cast<size_t>(i)] = 2 * n - 1 - i;
  return TLDiagram(std::move(p), sign);
}

TLDiagram TLDiagram::parse(const std::string& text) {
  std::string s;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
  if (s.size() < 2 || (s[0] != '+' && s[0] != '-') || s[1] != ':')
    throw ParseError("diagram must start with '+:' or '-:' : " + text);
  int sign = s[0] == '+' ? 1 : -1;
  std::vector<std::pair<int, int>> pairs;
  size_t i = 2;
  while (i < s.size()) {
    if (s[i] != '(') throw ParseError("expected '(' in diagram: " + text);
    auto close = s.find(')', i);
    auto comma = s.find(',', i);
    if (close == std::string::npos || comma == std::string::npos || comma > close)
      throw ParseError("malformed pair in diagram: " + text);
    try {
      int a = std::stoi(s.substr(i + 1, comma - i - 1));
      int b = std::stoi(s.substr(comma + 1, close - comma - 1));
      pairs.emplace_back(a, b);
    } catch (const std::logic_error&) {
      throw ParseError("non-numeric point in diagram: " + text);
    }
    i = close + 1;
  }
  const int n = static_cast<int>(pairs.size()) * 2;
  std::vector<int> p(static_cast<size_t>(n), -1);
  for (auto [a, b] : pairs) {
    if (a < 1 || b < 1 || a > n || b > n || a == b) throw ParseError("point index out of range: " + text);
    if (p[static_cast<size_t>(a - 1)] != -1 || p[static_cast<size_t>(b - 1)] != -1)
      throw ParseError("point used twice: " + text);
    p[static_cast<size_t>(a - 1)] = b - 1;
    p[static_cast<size_t>(b - 1)] = a - 1;
  }
  try {
    return TLDiagram(std::move(p), sign);
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("invalid diagram '") + text + "': " + e.what());
  }
}

std::string TLDiagram::to_string() const {
  std::string out = sign_ > 0 ? "+:" : "-:";
  for (int i = 0; i < num_points(); ++i)
    if (partner(i) > i) out += "(" + std::to_string(i + 1) + "," + std::to_string(partner(i) + 1) + ")";
  return out;
}

namespace {

void gen_pairings(std::vector<int>& p, int first, std::vector<std::vector<int>>& out) {
  const int n = static_cast<int>(p.size());
  while (first < n && p[static_cast<size_t>(first)] != -1) ++first;
  if (first == n) {
    out.push_back(p);
    return;
  }
  // Pair `first` with a free j that leaves an even number of free points enclosed.
  for (int j = first + 1; j < n; ++j) {
    if (p[static_cast<size_t>(j)] != -1) break;
    if ((j - first) % 2 == 0) continue;
    p[static_cast<size_t>(first)] = j;
    p[static_cast<size_t>(j)] = first;
    gen_pairings(p, first + 1, out);
    p[static_cast<size_t>(first)] = -1;
    p[static_cast<size_t>(j)] = -1;
  }
}

int find_root(std::vector<int>& parent, int x) {
  while (parent[static_cast<size_t>(x)] != x) {
    parent[static_cast<size_t>(x)] = parent[static_cast<size_t>(parent[static_cast<size_t>(x)])];
    x = parent[static_cast<size_t>(x)];
  }
  return x;
}

}  // namespace

std::vector<TLDiagram> generate_tl(int k, int sign) {
  if (k < 0) throw DimensionError("negative strand count");
  std::vector<int> p(static_cast<size_t>(2 * k), -1);
  std::vector<std::vector<int>> raw;
  gen_pairings(p, 0, raw);
  std::vector<TLDiagram> out;
  out.reserve(raw.size());
  for (auto& r : raw) out.emplace_back(std::move(r), sign);
  return out;
}

int closure_loops(const TLDiagram& a, const TLDiagram& b) {
  if (a.num_points() != b.num_points()) throw DimensionError("closure of diagrams with different sizes");
  if (a.sign() != b.sign()) throw ShadingError("closure of diagrams with incompatible shading");
  const int n = a.num_points();
  std::vector<int> parent(static_cast<size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  auto unite = [&](int x, int y) { parent[static_cast<size_t>(find_root(parent, x))] = find_root(parent, y); };
  for (int i = 0; i < n; ++i) {
    unite(i, a.partner(i));
    unite(i, b.partner(i));
  }
  int loops = 0;
  for (int i = 0; i < n; ++i)
    if (find_root(parent, i) == i) ++loops;
  return loops;
}

TLDiagram wedge(const TLDiagram& a, const TLDiagram& b) {
  if (a.sign() != b.sign()) throw ShadingError("wedge of diagrams with mismatched shading at the junction");
  std::vector<int> p = a.pairing();
  const int off = a.num_points();
  for (int i = 0; i < b.num_points(); ++i) p.push_back(b.partner(i) + off);
  return TLDiagram(std::move(p), a.sign());
}

int ColoredTLDiagram::partner(int i) const {
  int c = color[static_cast<size_t>(i)];
  std::vector<int> idx;
  for (int j = 0; j < num_points(); ++j)
    if (color[static_cast<size_t>(j)] == c) idx.push_back(j);
  int pos = static_cast<int>(std::find(idx.begin(), idx.end(), i) - idx.begin());
  const TLDiagram& d = c == 0 ? red : black;
  return idx[static_cast<size_t>(d.partner(pos))];
}

int ColoredTLDiagram::label(int i) const {
  int c = color[static_cast<size_t>(i)];
  int pos = 0;
  for (int j = 0; j < i; ++j)
    if (color[static_cast<size_t>(j)] == c) ++pos;
  return (c == 0 ? red : black).label(pos);
}

std::string ColoredTLDiagram::to_string() const {
  std::string cs;
  for (int c : color) cs.push_back(c == 0 ? 'R' : 'B');
  return "colors=" + cs + " red=" + red.to_string() + " black=" + black.to_string();
}

std::vector<ColoredTLDiagram> stitch_product_diagrams(int n, int red_sign, int black_sign) {
  if (n < 0) throw DimensionError("negative strand count");
  std::vector<ColoredTLDiagram> out;
  const int m = 2 * n;
  for (unsigned mask = 0; mask < (1u << m); ++mask) {
    int reds = 0;
    std::vector<int> color(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i) {
      color[static_cast<size_t>(i)] = (mask >> i) & 1u ? 1 : 0;
      if (color[static_cast<size_t>(i)] == 0) ++reds;
    }
    if (reds % 2 != 0) continue;
    for (const auto& r : generate_tl(reds / 2, red_sign))
      for (const auto& b : generate_tl((m - reds) / 2, black_sign)) out.push_back({color, r, b});
  }
  return out;
}

}  // namespace looplab
