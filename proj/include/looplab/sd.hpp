#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <utility>
#include <vector>

#include "looplab/graph.hpp"
#include "looplab/series.hpp"
#include "looplab/tl.hpp"

namespace looplab {

struct PotentialTerm {
  TLDiagram diagram;  // B_i
  int coupling = 0;   // index i of t_i
  // Two-colour vertex on a product graph; when set, `diagram` is ignored and
  // loops start at vertices of parity `start_plus`.
  std::optional<ColoredTLDiagram> colored;
  bool start_plus = true;

  int num_points() const { return colored ? colored->num_points() : diagram.num_points(); }
};

// W = Σ_i t_i B_i, with every B_i embedded into the graph planar algebra.
struct PotentialSpec {
  std::vector<PotentialTerm> terms;
  int num_couplings = 0;

  // Largest point count among the B_i (0 for an empty potential).
  int degree() const;
};

// One term of the cyclic derivative D_f(B_i) for an oriented edge f: a path
// from t(f) to s(f) with weight Σ σ_B(w)·μ(s(w)) over the (w, position)
// pairs producing it.
struct CyclicTerm {
  std::vector<int> path;
  double weight = 0.0;
};

// Solution of the Schwinger-Dyson equation as formal power series in the
// couplings. Entries are produced on demand by memoised recursion; the
// memo is the word table.
class WordTable {
 public:
  WordTable(const WeightedGraph& g, PotentialSpec potential, int max_length, int max_order);

  const WeightedGraph& graph() const { return *g_; }
  const PotentialSpec& potential() const { return pot_; }
  int max_length() const { return lmax_; }
  int max_order() const { return nmax_; }

  // τ_t(w) truncated at max_order. Throws ClosureError when the recursion
  // needs a word longer than max_length.
  const FloatSeries& tau(const Loop& w);
  const std::map<Loop, FloatSeries>& entries() const { return memo_; }

  // Records "base_vertex ; edge_sequence ; series" with the series in the
  // series text format (header line followed by coefficient records).
  void dump(std::ostream& os) const;

  // Terms of D_f(B_i); throws ClosureError when B_i has a loop through f
  // that touches a truncated boundary vertex.
  const std::vector<CyclicTerm>& cyclic_derivative(int term_index, int f) const;
  // Number of (loop, position) pairs contributing to D_f(B_i).
  int cyclic_count(int term_index, int f) const;

 private:
  FloatSeries compute(const Loop& w, int order);

  const WeightedGraph* g_;
  PotentialSpec pot_;
  int lmax_;
  int nmax_;
  // Memo keyed by word; each entry is valid up to memo_order_[w].
  std::map<Loop, FloatSeries> memo_;
  std::map<Loop, int> memo_order_;
  std::vector<std::vector<std::vector<CyclicTerm>>> cyclic_;  // [term][edge]
  std::vector<std::vector<int>> cyclic_count_;
  std::vector<std::vector<bool>> tainted_;
  FloatSeries scratch_;
};

WordTable solve_sd(const WeightedGraph& g, const PotentialSpec& potential, int max_length, int max_order);

// Σ_w σ_S(w)·τ_t(w) over loops w at v compatible with S.
FloatSeries observable_from_table(WordTable& table, const TLDiagram& s, int v);
// Same for a two-colour diagram on a product graph.
FloatSeries observable_from_table(WordTable& table, const ColoredTLDiagram& s, int v);

struct ContractionReport {
  double factor = 0.0;
  double m = 0.0;         // min_e sqrt(μ(s(e))μ(t(e)))
  double a_t = 0.0;       // A(t)
  int degree = 0;         // D
  bool certified = false;  // factor < 1
};

// γ²/(m(1−γK)) + A(t)γ^{2−D} with A(t) = max_e (μ(s(e))μ(t(e)))^{-1/2} Σ_i |t_i| k_i^e,
// where k_i^e counts the (loop, position) terms of D_{e°}(B_i).
ContractionReport contraction_bound(const WeightedGraph& g, const PotentialSpec& potential,
                                    const std::vector<double>& t, double K, double gamma);
// Smallest factor over a grid of γ in (0, 1/K).
ContractionReport best_contraction_bound(const WeightedGraph& g, const PotentialSpec& potential,
                                         const std::vector<double>& t, double K, int grid = 2000);

// Loop w rotated to start at position r (base moves to s(e_r)).
Loop rotate_loop(const WeightedGraph& g, const Loop& w, int r);
// w* : reversed order, each edge replaced by its reverse.
std::vector<int> reverse_path(const WeightedGraph& g, const std::vector<int>& path);
// Paths of length <= max_len starting at v (the empty path included).
std::vector<std::vector<int>> paths_from(const WeightedGraph& g, int v, int max_len);

// Smallest eigenvalue of the matrix [τ_t(w_i w_j*)] over the given paths at
// v (entries vanish when t(w_i) != t(w_j)), evaluated at numeric t.
double hankel_min_eigenvalue(WordTable& table, int v, const std::vector<std::vector<int>>& paths,
                             const std::vector<double>& t);

}  // namespace looplab
