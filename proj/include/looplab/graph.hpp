#pragma once

#include <istream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "looplab/errors.hpp"
#include "looplab/tl.hpp"

namespace looplab {

struct Edge {
  int source = 0;
  int target = 0;
  int reverse = 0;  // index of e°
  int color = 0;    // 0 red, 1 black (only meaningful on product graphs)
};

// Finite connected bipartite graph with oriented edges; every undirected
// edge {u, v} yields the pair e, e° with s(e°) = t(e).
class BipartiteGraph {
 public:
  BipartiteGraph() = default;
  BipartiteGraph(std::vector<bool> plus, const std::vector<std::pair<int, int>>& undirected,
                 std::vector<std::string> names = {}, const std::vector<int>& colors = {});

  int num_vertices() const { return static_cast<int>(plus_.size()); }
  int num_edges() const { return static_cast<int>(edges_.size()); }
  bool is_plus(int v) const { return plus_[static_cast<size_t>(v)]; }
  const Edge& edge(int e) const { return edges_[static_cast<size_t>(e)]; }
  const std::vector<int>& out_edges(int v) const { return out_[static_cast<size_t>(v)]; }
  const std::string& name(int v) const { return names_[static_cast<size_t>(v)]; }
  int find_vertex(const std::string& name) const;
  // Oriented edges leaving V_+ (the stored half of each pair in matrix_mc).
  std::vector<int> plus_edges() const;
  std::vector<std::vector<int>> adjacency() const;

  // Text format, one record per line:
  //   vertex <name> <+|->
  //   edge <name> <name>
  // Lines starting with '#' are comments.
  static BipartiteGraph load(std::istream& is);

 private:
  std::vector<bool> plus_;
  std::vector<std::string> names_;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> out_;
};

struct PerronData {
  double delta = 0.0;
  std::vector<double> mu;
  std::vector<double> sigma;  // per oriented edge
  // Vertices where Adjacency·μ = δμ is not imposed (the cut end of a
  // truncated infinite chain). Loops must never visit them.
  std::vector<int> boundary;

  bool is_boundary(int v) const;
};

struct WeightedGraph {
  std::string label;
  BipartiteGraph graph;
  PerronData perron;

  int num_vertices() const { return graph.num_vertices(); }
  double sigma(int e) const { return perron.sigma[static_cast<size_t>(e)]; }
  double mu(int v) const { return perron.mu[static_cast<size_t>(v)]; }
  double delta() const { return perron.delta; }
  // First vertex of the requested parity (the default base vertex).
  int first_vertex(bool plus) const;
};

// Perron-Frobenius pair by power iteration on (A + I), normalised so that
// μ(base) = 1.
PerronData perron_power_iteration(const BipartiteGraph& g, int base = 0, double tol = 1e-14);
std::vector<double> sigma_from_mu(const BipartiteGraph& g, const std::vector<double>& mu);

WeightedGraph make_a_n(int n);
WeightedGraph make_two_vertex(int n);
// Chain 1..length carrying the eigenvector μ(j) = [j]_q of the half-infinite
// chain, δ = q + 1/q >= 2. The last vertex is a boundary vertex.
WeightedGraph make_a_large(double delta, int length);
WeightedGraph product_graph(const WeightedGraph& red, const WeightedGraph& black);
WeightedGraph rescale_mu(const WeightedGraph& g, double c);
WeightedGraph with_perron(const std::string& label, const BipartiteGraph& g);
// Names: "A<n>", "two<n>", "Alarge:<delta>[:<length>]".
WeightedGraph named_graph(const std::string& name);

// Closed path e_1...e_m starting at `base`; the empty edge list is the
// trivial loop at base.
struct Loop {
  int base = 0;
  std::vector<int> edges;

  int length() const { return static_cast<int>(edges.size()); }
  friend bool operator<(const Loop& a, const Loop& b) {
    if (a.base != b.base) return a.base < b.base;
    return a.edges < b.edges;
  }
  friend bool operator==(const Loop& a, const Loop& b) { return a.base == b.base && a.edges == b.edges; }
};

bool is_closed_loop(const BipartiteGraph& g, const Loop& w);
std::string loop_to_string(const Loop& w);

class GraphPAElement {
 public:
  GraphPAElement() = default;
  explicit GraphPAElement(const WeightedGraph* g) : g_(g) {}

  const WeightedGraph* graph() const { return g_; }
  const std::map<Loop, double>& coefficients() const { return c_; }
  void add(const Loop& w, double c);
  // Length shared by all supported loops, or -1 when inhomogeneous/empty.
  int homogeneous_length() const;

 private:
  const WeightedGraph* g_ = nullptr;
  std::map<Loop, double> c_;
};

// Loops at `base` compatible with the pairing, i.e. e_j = e_i° when i ~ j
// (i < j). `colors` optionally restricts point i to edges of colour colors[i].
// Loops visiting a boundary vertex raise ClosureError unless allow_boundary.
std::vector<Loop> compatible_loops(const std::vector<int>& partner, const WeightedGraph& g, int base,
                                   const std::vector<int>& colors = {}, bool allow_boundary = false);
bool touches_boundary(const WeightedGraph& g, const Loop& w);
// σ_B(w): product of σ over the earlier endpoint of each pair, or 0 when w
// is not compatible with the pairing.
double sigma_weight(const std::vector<int>& partner, const WeightedGraph& g, const Loop& w);

GraphPAElement embed_tl(const TLDiagram& d, const WeightedGraph& g);
// Embedding of a two-colour diagram on a product graph; loops start at
// vertices of parity `start_plus`.
GraphPAElement embed_colored(const ColoredTLDiagram& d, const WeightedGraph& g, bool start_plus = true);

// Tr_0(x)(v) = Σ_w x(w) Σ_{B ∈ TL(k)} σ_B(w) over loops w at v.
double tr0(const GraphPAElement& x, int v);

}  // namespace looplab
