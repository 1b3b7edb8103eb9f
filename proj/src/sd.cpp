#include "looplab/sd.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace looplab {

int PotentialSpec::degree() const {
  int d = 0;
  for (const auto& t : terms) d = std::max(d, t.num_points());
  return d;
}

namespace {

struct CyclicData {
  std::vector<std::vector<std::vector<CyclicTerm>>> terms;  // [term][edge]
  std::vector<std::vector<int>> count;
  std::vector<std::vector<bool>> tainted;
};

// For every potential term B_i and every oriented edge f, collect the paths
// w_{j+1}...w_{2n} w_1...w_{j-1} over loops w in the support of B_i with
// w_j = f, weighted by σ_B(w)·μ(s(w)).
CyclicData build_cyclic(const WeightedGraph& g, const PotentialSpec& pot) {
  const int ne = g.graph.num_edges();
  CyclicData cd;
  for (const auto& term : pot.terms) {
    if (term.coupling < 0 || term.coupling >= pot.num_couplings)
      throw DimensionError("potential coupling index out of range");
    if (term.num_points() == 0) throw ShapeError("potential terms need at least one string");
    std::vector<int> partner(static_cast<size_t>(term.num_points()));
    std::vector<int> colors;
    bool start_plus = term.diagram.sign() > 0;
    if (term.colored) {
      for (int i = 0; i < term.num_points(); ++i) partner[static_cast<size_t>(i)] = term.colored->partner(i);
      colors = term.colored->color;
      start_plus = term.start_plus;
    } else {
      partner = term.diagram.pairing();
    }
    std::vector<std::map<std::vector<int>, double>> acc(static_cast<size_t>(ne));
    std::vector<int> count(static_cast<size_t>(ne), 0);
    std::vector<bool> tainted(static_cast<size_t>(ne), false);
    for (int v = 0; v < g.num_vertices(); ++v) {
      if (g.graph.is_plus(v) != start_plus) continue;
      for (const Loop& w : compatible_loops(partner, g, v, colors, true)) {
        const bool bad = touches_boundary(g, w);
        const double weight = sigma_weight(partner, g, w) * g.mu(w.base);
        const int len = w.length();
        for (int j = 0; j < len; ++j) {
          const int f = w.edges[static_cast<size_t>(j)];
          ++count[static_cast<size_t>(f)];
          if (bad) {
            tainted[static_cast<size_t>(f)] = true;
            continue;
          }
          std::vector<int> path;
          for (int r = 1; r < len; ++r) path.push_back(w.edges[static_cast<size_t>((j + r) % len)]);
          acc[static_cast<size_t>(f)][path] += weight;
        }
      }
    }
    std::vector<std::vector<CyclicTerm>> per_edge(static_cast<size_t>(ne));
    for (int f = 0; f < ne; ++f)
      for (auto& [path, wt] : acc[static_cast<size_t>(f)]) per_edge[static_cast<size_t>(f)].push_back({path, wt});
    cd.terms.push_back(std::move(per_edge));
    cd.count.push_back(std::move(count));
    cd.tainted.push_back(std::move(tainted));
  }
  return cd;
}

}  // namespace

WordTable::WordTable(const WeightedGraph& g, PotentialSpec potential, int max_length, int max_order)
    : g_(&g), pot_(std::move(potential)), lmax_(max_length), nmax_(max_order) {
  if (max_length < 0 || max_order < 0) throw std::invalid_argument("negative word-table bounds");
  CyclicData cd = build_cyclic(g, pot_);
  cyclic_ = std::move(cd.terms);
  cyclic_count_ = std::move(cd.count);
  tainted_ = std::move(cd.tainted);
}

const std::vector<CyclicTerm>& WordTable::cyclic_derivative(int term_index, int f) const {
  if (tainted_[static_cast<size_t>(term_index)][static_cast<size_t>(f)])
    throw ClosureError("potential term " + std::to_string(term_index) + " reaches the truncated end of " +
                       g_->label + " through edge " + std::to_string(f));
  return cyclic_[static_cast<size_t>(term_index)][static_cast<size_t>(f)];
}

int WordTable::cyclic_count(int term_index, int f) const {
  return cyclic_count_[static_cast<size_t>(term_index)][static_cast<size_t>(f)];
}

const FloatSeries& WordTable::tau(const Loop& w) {
  if (!is_closed_loop(g_->graph, w)) throw ShapeError("word is not a closed loop: " + loop_to_string(w));
  auto it = memo_order_.find(w);
  if (it == memo_order_.end() || it->second < nmax_) {
    FloatSeries s = compute(w, nmax_);
    memo_[w] = std::move(s);
    memo_order_[w] = nmax_;
  }
  return memo_.at(w);
}

// The recursion solved here, for a loop u·e at v = t(e) (u runs from v to s(e)):
//
//   τ(u e) = σ(e)^{-1} Σ_{u = w1 e° w2} τ(w1) τ(w2)
//          + Σ_i t_i σ(e)^{-1} Σ_w (μ(s(w))/μ(s(e))) σ_{B_i}(w) τ(u · D_{e°} w),
//
// where w runs over the loops of B_i, D_{e°}w = Σ_{w = w1 e° w2} w2 w1 is the
// cyclic derivative, and τ(1_v) = 1. The two forms of the equation, one with
// the weight μ(s(w))/μ(s(e)) written inside the cyclic derivative and one
// with it folded into σ-weighted traces, agree after using
// σ(g_{i+1})²…σ(g_s)² = μ(s(g_1))/μ(t(g_i)) along a loop. The interaction
// term lowers the t-order by one, so order m only needs order m−1 data on
// longer words and the system is triangular. At t = 0 this gives
// τ(e e°) = σ(e), so Σ_e σ(e) τ(e e°) = δ.
FloatSeries WordTable::compute(const Loop& w, int order) {
  const int k = pot_.num_couplings;
  FloatSeries result(k, order);
  const int len = w.length();
  if (len == 0) {
    result.set(Exponent(static_cast<size_t>(k), 0), 1.0);
    return result;
  }
  if (len % 2 != 0) return result;
  if (len > lmax_)
    throw ClosureError("Schwinger-Dyson recursion needs a word of length " + std::to_string(len) +
                       " but max_length is " + std::to_string(lmax_));
  const BipartiteGraph& gr = g_->graph;
  const int e = w.edges.back();
  const int f = gr.edge(e).reverse;
  const double inv_sigma = 1.0 / g_->sigma(e);
  const int v = w.base;
  const int se = gr.edge(e).source;

  auto fetch = [&](const Loop& x, int ord) -> const FloatSeries& {
    auto it = memo_order_.find(x);
    if (it == memo_order_.end() || it->second < ord) {
      FloatSeries s = compute(x, ord);
      memo_[x] = std::move(s);
      memo_order_[x] = ord;
    }
    return memo_.at(x);
  };

  // Splitting term: occurrences of e° inside u.
  for (int p = 0; p + 1 < len; ++p) {
    if (w.edges[static_cast<size_t>(p)] != f) continue;
    if (p % 2 != 0) continue;  // w1 must have even length
    Loop w1{v, std::vector<int>(w.edges.begin(), w.edges.begin() + p)};
    Loop w2{se, std::vector<int>(w.edges.begin() + p + 1, w.edges.end() - 1)};
    fetch(w1, order);
    const FloatSeries& b = fetch(w2, order);
    const FloatSeries& a = memo_.at(w1);
    Exponent ex(static_cast<size_t>(k));
    for (const auto& [ea, ca] : a.terms()) {
      const int da = total_degree(ea);
      if (da > order) break;
      for (const auto& [eb, cb] : b.terms()) {
        if (da + total_degree(eb) > order) break;
        for (int i = 0; i < k; ++i) ex[static_cast<size_t>(i)] = ea[static_cast<size_t>(i)] + eb[static_cast<size_t>(i)];
        result.add_to(ex, inv_sigma * ca * cb);
      }
    }
  }

  // Interaction term.
  if (order >= 1) {
    const double scale = inv_sigma / g_->mu(se);
    for (size_t ti = 0; ti < pot_.terms.size(); ++ti) {
      const int ci = pot_.terms[ti].coupling;
      for (const CyclicTerm& ct : cyclic_derivative(static_cast<int>(ti), f)) {
        Loop x{v, std::vector<int>(w.edges.begin(), w.edges.end() - 1)};
        x.edges.insert(x.edges.end(), ct.path.begin(), ct.path.end());
        const FloatSeries& s = fetch(x, order - 1);
        const double c = scale * ct.weight;
        for (const auto& [ex, cx] : s.terms()) {
          if (total_degree(ex) > order - 1) break;
          Exponent shifted = ex;
          shifted[static_cast<size_t>(ci)] += 1;
          result.add_to(shifted, c * cx);
        }
      }
    }
  }
  return result;
}

void WordTable::dump(std::ostream& os) const {
  for (const auto& [w, s] : memo_) {
    os << w.base << " ;";
    for (int e : w.edges) os << " " << e;
    os << " ;\n";
    s.write(os);
  }
}

WordTable solve_sd(const WeightedGraph& g, const PotentialSpec& potential, int max_length, int max_order) {
  return WordTable(g, potential, max_length, max_order);
}

namespace {

FloatSeries observable_impl(WordTable& table, const std::vector<int>& partner, const std::vector<int>& colors,
                            int v) {
  const WeightedGraph& g = table.graph();
  FloatSeries out(table.potential().num_couplings, table.max_order());
  for (const Loop& w : compatible_loops(partner, g, v, colors)) {
    double s = sigma_weight(partner, g, w);
    if (s == 0.0) continue;
    out += table.tau(w) * s;
  }
  return out;
}

}  // namespace

FloatSeries observable_from_table(WordTable& table, const TLDiagram& s, int v) {
  return observable_impl(table, s.pairing(), {}, v);
}

FloatSeries observable_from_table(WordTable& table, const ColoredTLDiagram& s, int v) {
  std::vector<int> partner(static_cast<size_t>(s.num_points()));
  for (int i = 0; i < s.num_points(); ++i) partner[static_cast<size_t>(i)] = s.partner(i);
  return observable_impl(table, partner, s.color, v);
}

ContractionReport contraction_bound(const WeightedGraph& g, const PotentialSpec& potential,
                                    const std::vector<double>& t, double K, double gamma) {
  if (!(K > 0.0) || !(gamma > 0.0) || !(gamma < 1.0 / K))
    throw std::invalid_argument("contraction bound needs K > 0 and 0 < gamma < 1/K");
  if (static_cast<int>(t.size()) != potential.num_couplings) throw DimensionError("coupling vector size mismatch");
  const BipartiteGraph& gr = g.graph;
  CyclicData cd = build_cyclic(g, potential);
  ContractionReport r;
  r.degree = potential.degree();
  r.m = INFINITY;
  for (int e = 0; e < gr.num_edges(); ++e) {
    const double prod = g.mu(gr.edge(e).source) * g.mu(gr.edge(e).target);
    r.m = std::min(r.m, std::sqrt(prod));
    const int f = gr.edge(e).reverse;
    double sum = 0.0;
    for (size_t i = 0; i < potential.terms.size(); ++i)
      sum += std::abs(t[static_cast<size_t>(potential.terms[i].coupling)]) * cd.count[i][static_cast<size_t>(f)];
    r.a_t = std::max(r.a_t, sum / std::sqrt(prod));
  }
  r.factor = gamma * gamma / (r.m * (1.0 - gamma * K));
  if (r.a_t > 0.0) r.factor += r.a_t * std::pow(gamma, 2 - r.degree);
  r.certified = r.factor < 1.0;
  return r;
}

ContractionReport best_contraction_bound(const WeightedGraph& g, const PotentialSpec& potential,
                                         const std::vector<double>& t, double K, int grid) {
  ContractionReport best;
  best.factor = INFINITY;
  for (int i = 1; i <= grid; ++i) {
    const double gamma = (static_cast<double>(i) / (grid + 1)) / K;
    ContractionReport r = contraction_bound(g, potential, t, K, gamma);
    if (r.factor < best.factor) best = r;
  }
  return best;
}

Loop rotate_loop(const WeightedGraph& g, const Loop& w, int r) {
  const int len = w.length();
  if (len == 0) return w;
  r = ((r % len) + len) % len;
  Loop out{g.graph.edge(w.edges[static_cast<size_t>(r)]).source, {}};
  for (int j = 0; j < len; ++j) out.edges.push_back(w.edges[static_cast<size_t>((r + j) % len)]);
  return out;
}

std::vector<int> reverse_path(const WeightedGraph& g, const std::vector<int>& path) {
  std::vector<int> out;
  for (auto it = path.rbegin(); it != path.rend(); ++it) out.push_back(g.graph.edge(*it).reverse);
  return out;
}

std::vector<std::vector<int>> paths_from(const WeightedGraph& g, int v, int max_len) {
  std::vector<std::vector<int>> out{{}};
  std::vector<std::pair<std::vector<int>, int>> frontier{{{}, v}};
  for (int len = 1; len <= max_len; ++len) {
    std::vector<std::pair<std::vector<int>, int>> next;
    for (const auto& [p, end] : frontier)
      for (int e : g.graph.out_edges(end)) {
        auto q = p;
        q.push_back(e);
        out.push_back(q);
        next.emplace_back(std::move(q), g.graph.edge(e).target);
      }
    frontier = std::move(next);
  }
  return out;
}

double hankel_min_eigenvalue(WordTable& table, int v, const std::vector<std::vector<int>>& paths,
                             const std::vector<double>& t) {
  const WeightedGraph& g = table.graph();
  const int n = static_cast<int>(paths.size());
  auto endpoint = [&](const std::vector<int>& p) { return p.empty() ? v : g.graph.edge(p.back()).target; };
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const auto& pi = paths[static_cast<size_t>(i)];
      const auto& pj = paths[static_cast<size_t>(j)];
      if (endpoint(pi) != endpoint(pj)) continue;
      Loop w{v, pi};
      auto rj = reverse_path(g, pj);
      w.edges.insert(w.edges.end(), rj.begin(), rj.end());
      h(i, j) = table.tau(w).evaluate(t);
    }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (h + h.transpose()));
  return es.eigenvalues().minCoeff();
}

}  // namespace looplab
