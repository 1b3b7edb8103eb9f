#include "looplab/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <sstream>

namespace looplab {

BipartiteGraph::BipartiteGraph(std::vector<bool> plus, const std::vector<std::pair<int, int>>& undirected,
                               std::vector<std::string> names, const std::vector<int>& colors)
    : plus_(std::move(plus)), names_(std::move(names)) {
  const int n = num_vertices();
  if (n == 0) throw ShapeError("graph has no vertices");
  if (names_.empty())
    for (int v = 0; v < n; ++v) names_.push_back(std::to_string(v + 1));
  if (static_cast<int>(names_.size()) != n) throw ShapeError("vertex name count mismatch");
  out_.assign(static_cast<size_t>(n), {});
  for (size_t i = 0; i < undirected.size(); ++i) {
    auto [u, v] = undirected[i];
    if (u < 0 || v < 0 || u >= n || v >= n) throw ShapeError("edge endpoint out of range");
    if (plus_[static_cast<size_t>(u)] == plus_[static_cast<size_t>(v)])
      throw ShapeError("edge does not cross the bipartition");
    int c = colors.empty() ? 0 : colors[i];
    int e = num_edges();
    edges_.push_back({u, v, e + 1, c});
    edges_.push_back({v, u, e, c});
    out_[static_cast<size_t>(u)].push_back(e);
    out_[static_cast<size_t>(v)].push_back(e + 1);
  }
  // Connectivity.
  std::vector<bool> seen(static_cast<size_t>(n), false);
  std::queue<int> q;
  q.push(0);
  seen[0] = true;
  while (!q.empty()) {
    int v = q.front();
    q.pop();
    for (int e : out_[static_cast<size_t>(v)]) {
      int w = edges_[static_cast<size_t>(e)].target;
      if (!seen[static_cast<size_t>(w)]) {
        seen[static_cast<size_t>(w)] = true;
        q.push(w);
      }
    }
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) throw ShapeError("graph is not connected");
}

int BipartiteGraph::find_vertex(const std::string& name) const {
  for (int v = 0; v < num_vertices(); ++v)
    if (names_[static_cast<size_t>(v)] == name) return v;
  throw ParseError("unknown vertex: " + name);
}

std::vector<int> BipartiteGraph::plus_edges() const {
  std::vector<int> r;
  for (int e = 0; e < num_edges(); ++e)
    if (is_plus(edge(e).source)) r.push_back(e);
  return r;
}

std::vector<std::vector<int>> BipartiteGraph::adjacency() const {
  std::vector<std::vector<int>> a(static_cast<size_t>(num_vertices()),
                                  std::vector<int>(static_cast<size_t>(num_vertices()), 0));
  for (const auto& e : edges_) a[static_cast<size_t>(e.source)][static_cast<size_t>(e.target)] += 1;
  return a;
}

BipartiteGraph BipartiteGraph::load(std::istream& is) {
  std::vector<bool> plus;
  std::vector<std::string> names;
  std::vector<std::pair<std::string, std::string>> raw;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string kind;
    if (!(ls >> kind) || kind[0] == '#') continue;
    if (kind == "vertex") {
      std::string name, parity;
      if (!(ls >> name >> parity) || (parity != "+" && parity != "-"))
        throw ParseError("line " + std::to_string(lineno) + ": expected 'vertex <name> <+|->'");
      if (std::find(names.begin(), names.end(), name) != names.end())
        throw ParseError("line " + std::to_string(lineno) + ": duplicate vertex " + name);
      names.push_back(name);
      plus.push_back(parity == "+");
    } else if (kind == "edge") {
      std::string a, b;
      if (!(ls >> a >> b)) throw ParseError("line " + std::to_string(lineno) + ": expected 'edge <a> <b>'");
      raw.emplace_back(a, b);
    } else {
      throw ParseError("line " + std::to_string(lineno) + ": unknown record '" + kind + "'");
    }
  }
  std::vector<std::pair<int, int>> und;
  auto index = [&](const std::string& nm) {
    auto it = std::find(names.begin(), names.end(), nm);
    if (it == names.end()) throw ParseError("edge references unknown vertex " + nm);
    return static_cast<int>(it - names.begin());
  };
  for (auto& [a, b] : raw) und.emplace_back(index(a), index(b));
  return BipartiteGraph(std::move(plus), und, std::move(names));
}

bool PerronData::is_boundary(int v) const { return std::find(boundary.begin(), boundary.end(), v) != boundary.end(); }

int WeightedGraph::first_vertex(bool plus) const {
  for (int v = 0; v < num_vertices(); ++v)
    if (graph.is_plus(v) == plus && !perron.is_boundary(v)) return v;
  throw ShapeError("graph has no vertex of the requested parity");
}

std::vector<double> sigma_from_mu(const BipartiteGraph& g, const std::vector<double>& mu) {
  std::vector<double> s(static_cast<size_t>(g.num_edges()));
  for (int e = 0; e < g.num_edges(); ++e)
    s[static_cast<size_t>(e)] =
        std::sqrt(mu[static_cast<size_t>(g.edge(e).target)] / mu[static_cast<size_t>(g.edge(e).source)]);
  return s;
}

PerronData perron_power_iteration(const BipartiteGraph& g, int base, double tol) {
  const int n = g.num_vertices();
  std::vector<double> x(static_cast<size_t>(n), 1.0), y(static_cast<size_t>(n));
  double lambda = 0.0;
  for (int it = 0; it < 200000; ++it) {
    for (int v = 0; v < n; ++v) {
      double s = x[static_cast<size_t>(v)];
      for (int e : g.out_edges(v)) s += x[static_cast<size_t>(g.edge(e).target)];
      y[static_cast<size_t>(v)] = s;
    }
    double norm = 0.0, dot = 0.0;
    for (int v = 0; v < n; ++v) {
      norm += y[static_cast<size_t>(v)] * y[static_cast<size_t>(v)];
      dot += y[static_cast<size_t>(v)] * x[static_cast<size_t>(v)];
    }
    double xx = 0.0;
    for (double xv : x) xx += xv * xv;
    double rq = dot / xx;
    norm = std::sqrt(norm);
    double diff = 0.0;
    for (int v = 0; v < n; ++v) {
      double nv = y[static_cast<size_t>(v)] / norm;
      diff = std::max(diff, std::abs(nv - x[static_cast<size_t>(v)] / std::sqrt(xx)));
      y[static_cast<size_t>(v)] = nv;
    }
    x.swap(y);
    if (std::abs(rq - lambda) < tol * rq && diff < tol) {
      lambda = rq;
      break;
    }
    lambda = rq;
  }
  PerronData pd;
  pd.delta = lambda - 1.0;
  double b = x[static_cast<size_t>(base)];
  for (double& v : x) v /= b;
  pd.mu = x;
  pd.sigma = sigma_from_mu(g, pd.mu);
  return pd;
}

WeightedGraph with_perron(const std::string& label, const BipartiteGraph& g) {
  return {label, g, perron_power_iteration(g)};
}

WeightedGraph make_a_n(int n) {
  if (n < 2) throw std::invalid_argument("A_n requires n >= 2");
  std::vector<bool> plus;
  std::vector<std::pair<int, int>> und;
  for (int v = 0; v < n; ++v) plus.push_back(v % 2 == 0);
  for (int v = 0; v + 1 < n; ++v) und.emplace_back(v, v + 1);
  BipartiteGraph g(plus, und);
  PerronData pd;
  const double h = std::numbers::pi / (n + 1);
  pd.delta = 2.0 * std::cos(h);
  for (int v = 1; v <= n; ++v) pd.mu.push_back(std::sin(v * h) / std::sin(h));
  pd.sigma = sigma_from_mu(g, pd.mu);
  return {"A" + std::to_string(n), g, pd};
}

WeightedGraph make_two_vertex(int n) {
  if (n < 1) throw std::invalid_argument("two-vertex graph needs at least one edge");
  std::vector<std::pair<int, int>> und(static_cast<size_t>(n), {0, 1});
  BipartiteGraph g({true, false}, und);
  PerronData pd;
  pd.delta = n;
  pd.mu = {1.0, 1.0};
  pd.sigma.assign(static_cast<size_t>(g.num_edges()), 1.0);
  return {"two" + std::to_string(n), g, pd};
}

WeightedGraph make_a_large(double delta, int length) {
  if (delta < 2.0) throw std::invalid_argument("the A_large chain is for delta >= 2; use A_n below 2");
  if (length < 3) throw std::invalid_argument("A_large chain too short");
  std::vector<bool> plus;
  std::vector<std::pair<int, int>> und;
  for (int v = 0; v < length; ++v) plus.push_back(v % 2 == 0);
  for (int v = 0; v + 1 < length; ++v) und.emplace_back(v, v + 1);
  BipartiteGraph g(plus, und);
  PerronData pd;
  pd.delta = delta;
  // μ(j) = [j]_q solves μ(j-1) + μ(j+1) = δ μ(j) with μ(0) = 0.
  if (delta == 2.0) {
    for (int j = 1; j <= length; ++j) pd.mu.push_back(j);
  } else {
    const double q = (delta + std::sqrt(delta * delta - 4.0)) / 2.0;
    for (int j = 1; j <= length; ++j) pd.mu.push_back((std::pow(q, j) - std::pow(q, -j)) / (q - 1.0 / q));
  }
  pd.sigma = sigma_from_mu(g, pd.mu);
  pd.boundary = {length - 1};
  std::ostringstream os;
  os << "Alarge:" << delta << ":" << length;
  return {os.str(), g, pd};
}

WeightedGraph product_graph(const WeightedGraph& red, const WeightedGraph& black) {
  const int nr = red.num_vertices(), nb = black.num_vertices();
  auto id = [nb](int vr, int vb) { return vr * nb + vb; };
  std::vector<bool> plus;
  std::vector<std::string> names;
  std::vector<double> mu;
  for (int vr = 0; vr < nr; ++vr)
    for (int vb = 0; vb < nb; ++vb) {
      plus.push_back(red.graph.is_plus(vr) == black.graph.is_plus(vb));
      names.push_back("(" + red.graph.name(vr) + "," + black.graph.name(vb) + ")");
      mu.push_back(red.mu(vr) * black.mu(vb));
    }
  std::vector<std::pair<int, int>> und;
  std::vector<int> colors;
  for (int e = 0; e < red.graph.num_edges(); e += 2)
    for (int vb = 0; vb < nb; ++vb) {
      und.emplace_back(id(red.graph.edge(e).source, vb), id(red.graph.edge(e).target, vb));
      colors.push_back(0);
    }
  for (int f = 0; f < black.graph.num_edges(); f += 2)
    for (int vr = 0; vr < nr; ++vr) {
      und.emplace_back(id(vr, black.graph.edge(f).source), id(vr, black.graph.edge(f).target));
      colors.push_back(1);
    }
  BipartiteGraph g(plus, und, names, colors);
  PerronData pd;
  pd.delta = red.delta() + black.delta();
  pd.mu = mu;
  pd.sigma = sigma_from_mu(g, mu);
  return {red.label + "x" + black.label, g, pd};
}

WeightedGraph rescale_mu(const WeightedGraph& g, double c) {
  WeightedGraph r = g;
  for (double& m : r.perron.mu) m *= c;
  r.perron.sigma = sigma_from_mu(r.graph, r.perron.mu);
  return r;
}

WeightedGraph named_graph(const std::string& name) {
  try {
    if (name.rfind("Alarge:", 0) == 0) {
      std::string rest = name.substr(7);
      auto colon = rest.find(':');
      double d = std::stod(rest.substr(0, colon));
      int len = colon == std::string::npos ? 24 : std::stoi(rest.substr(colon + 1));
      return make_a_large(d, len);
    }
    if (name.rfind("two", 0) == 0) return make_two_vertex(std::stoi(name.substr(3)));
    if (name.size() > 1 && name[0] == 'A') return make_a_n(std::stoi(name.substr(1)));
  } catch (const std::logic_error&) {
  }
  throw ParseError("unknown graph name: " + name);
}

bool is_closed_loop(const BipartiteGraph& g, const Loop& w) {
  int v = w.base;
  for (int e : w.edges) {
    if (e < 0 || e >= g.num_edges() || g.edge(e).source != v) return false;
    v = g.edge(e).target;
  }
  return v == w.base;
}

std::string loop_to_string(const Loop& w) {
  std::string s = std::to_string(w.base) + " ;";
  for (int e : w.edges) s += " " + std::to_string(e);
  return s;
}

void GraphPAElement::add(const Loop& w, double c) {
  if (g_ && !is_closed_loop(g_->graph, w)) throw ShapeError("element key is not a closed loop");
  c_[w] += c;
}

int GraphPAElement::homogeneous_length() const {
  int len = -1;
  for (const auto& [w, c] : c_) {
    if (len == -1) len = w.length();
    else if (len != w.length()) return -1;
  }
  return len;
}

namespace {

void extend_loops(const std::vector<int>& partner, const std::vector<int>& colors, const WeightedGraph& g, int pos,
                  int v, Loop& cur, std::vector<Loop>& out) {
  const int n = static_cast<int>(partner.size());
  if (pos == n) {
    if (v == cur.base) out.push_back(cur);
    return;
  }
  int j = partner[static_cast<size_t>(pos)];
  if (j < pos) {
    int e = g.graph.edge(cur.edges[static_cast<size_t>(j)]).reverse;
    if (g.graph.edge(e).source != v) return;
    cur.edges.push_back(e);
    extend_loops(partner, colors, g, pos + 1, g.graph.edge(e).target, cur, out);
    cur.edges.pop_back();
    return;
  }
  for (int e : g.graph.out_edges(v)) {
    if (!colors.empty() && g.graph.edge(e).color != colors[static_cast<size_t>(pos)]) continue;
    cur.edges.push_back(e);
    extend_loops(partner, colors, g, pos + 1, g.graph.edge(e).target, cur, out);
    cur.edges.pop_back();
  }
}

}  // namespace

bool touches_boundary(const WeightedGraph& g, const Loop& w) {
  if (g.perron.is_boundary(w.base)) return true;
  for (int e : w.edges)
    if (g.perron.is_boundary(g.graph.edge(e).target)) return true;
  return false;
}

std::vector<Loop> compatible_loops(const std::vector<int>& partner, const WeightedGraph& g, int base,
                                   const std::vector<int>& colors, bool allow_boundary) {
  std::vector<Loop> out;
  Loop cur{base, {}};
  extend_loops(partner, colors, g, 0, base, cur, out);
  if (!allow_boundary)
    for (const auto& w : out)
      if (touches_boundary(g, w)) throw ClosureError("loop reaches the truncated end of the chain " + g.label);
  return out;
}

double sigma_weight(const std::vector<int>& partner, const WeightedGraph& g, const Loop& w) {
  if (static_cast<int>(partner.size()) != w.length()) return 0.0;
  double s = 1.0;
  for (int i = 0; i < w.length(); ++i) {
    int j = partner[static_cast<size_t>(i)];
    if (j > i) {
      if (w.edges[static_cast<size_t>(j)] != g.graph.edge(w.edges[static_cast<size_t>(i)]).reverse) return 0.0;
      s *= g.sigma(w.edges[static_cast<size_t>(i)]);
    }
  }
  return s;
}

GraphPAElement embed_tl(const TLDiagram& d, const WeightedGraph& g) {
  GraphPAElement x(&g);
  for (int v = 0; v < g.num_vertices(); ++v) {
    if (g.graph.is_plus(v) != (d.sign() > 0) || g.perron.is_boundary(v)) continue;
    for (const auto& w : compatible_loops(d.pairing(), g, v)) x.add(w, sigma_weight(d.pairing(), g, w));
  }
  return x;
}

GraphPAElement embed_colored(const ColoredTLDiagram& d, const WeightedGraph& g, bool start_plus) {
  std::vector<int> partner(static_cast<size_t>(d.num_points()));
  for (int i = 0; i < d.num_points(); ++i) partner[static_cast<size_t>(i)] = d.partner(i);
  GraphPAElement x(&g);
  for (int v = 0; v < g.num_vertices(); ++v) {
    if (g.graph.is_plus(v) != start_plus) continue;
    for (const auto& w : compatible_loops(partner, g, v, d.color)) x.add(w, sigma_weight(partner, g, w));
  }
  return x;
}

double tr0(const GraphPAElement& x, int v) {
  int len = x.homogeneous_length();
  if (len < 0 && !x.coefficients().empty()) throw ShapeError("tr0 needs a homogeneous element");
  if (len < 0) return 0.0;
  if (len % 2 != 0) return 0.0;
  const auto basis = generate_tl(len / 2);
  const WeightedGraph& g = *x.graph();
  double total = 0.0;
  for (const auto& [w, c] : x.coefficients()) {
    if (w.base != v) continue;
    double s = 0.0;
    for (const auto& b : basis) s += sigma_weight(b.pairing(), g, w);
    total += c * s;
  }
  return total;
}

}  // namespace looplab
