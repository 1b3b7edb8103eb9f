#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "looplab/graph.hpp"
#include "looplab/sd.hpp"

namespace looplab {

// How block sizes are derived from μ(v)·M.
//   Floor:       one chain with ⌊μ(v)M⌋ (at least 1).
//   Interpolate: chains at every floor/ceil combination of the non-integer
//                sizes; estimates are combined multilinearly in the
//                fractional parts, which removes the O(1/M) rounding bias.
enum class Rounding { Floor, Interpolate };

struct EnsembleSpec {
  WeightedGraph graph;
  double M = 0.0;
  double K = 4.0;
  PotentialSpec potential;
  std::vector<double> couplings;  // numeric t_i
  std::uint64_t seed = 1;
  // Explicit block sizes per vertex; empty means ⌊μ(v)M⌋.
  std::vector<int> dims;

  void validate() const;
  std::vector<int> block_dims() const;
};

// One complex block A_e per e ∈ E_+; A_{e°} is the adjoint and never stored.
class MatrixEnsembleState {
 public:
  MatrixEnsembleState() = default;
  MatrixEnsembleState(const BipartiteGraph& g, std::vector<int> dims);

  int num_blocks() const { return static_cast<int>(blocks_.size()); }
  const std::vector<int>& dims() const { return dims_; }
  int dim(int v) const { return dims_[static_cast<size_t>(v)]; }
  const Eigen::MatrixXcd& block(int k) const { return blocks_[static_cast<size_t>(k)]; }
  Eigen::MatrixXcd& block(int k) { return blocks_[static_cast<size_t>(k)]; }
  // Oriented edge stored in block k.
  int block_edge(int k) const { return plus_edges_[static_cast<size_t>(k)]; }
  int block_of(int e) const { return block_of_[static_cast<size_t>(e)]; }
  bool is_adjoint(int e) const { return adjoint_[static_cast<size_t>(e)]; }
  // A_e, materialised (the adjoint of the stored block for e ∉ E_+).
  Eigen::MatrixXcd matrix(int e) const;

 private:
  std::vector<int> dims_;
  std::vector<int> plus_edges_;
  std::vector<int> block_of_;
  std::vector<bool> adjoint_;
  std::vector<Eigen::MatrixXcd> blocks_;
};

// Independent draw from the base Gaussian measure: complex entries with
// E|a|² = (M_{s(e)}M_{t(e)})^{-1/2}.
MatrixEnsembleState sample_gaussian(const EnsembleSpec& spec, std::uint64_t stream = 0);

// Operator norm by power iteration on A A* with the given relative tolerance.
double operator_norm(const Eigen::MatrixXcd& a, double rel_tol = 1e-8);

// Tr(A_w) (unnormalised) and the normalised estimator value
// (1/(μ(v)M))·Σ_w x(w)·Re Tr(A_w) over the loops of x based at v.
std::complex<double> trace_word(const MatrixEnsembleState& s, const BipartiteGraph& g, const Loop& w);
double normalized_trace(const MatrixEnsembleState& s, const EnsembleSpec& spec, const GraphPAElement& x, int v);

// The weighted loop sum M·Σ_i t_i Σ_w μ(s(w))σ_{B_i}(w)·Re Tr(A_w),
// evaluated through Gram matrices for words of length 2 and 4 and through
// explicit products otherwise.
class PotentialEvaluator {
 public:
  PotentialEvaluator(const EnsembleSpec& spec);

  double value(const MatrixEnsembleState& s) const;
  // Σ_v μ(v)² Σ_w σ_{B_i}(w)·(1/(μ(v)M))Re Tr(A_w) for the single term i, the
  // integrand of the coupling-derivative identity for the free energy.
  double coupling_derivative(const MatrixEnsembleState& s, int coupling) const;
  bool empty() const { return pairs_.empty() && singles_.empty() && general_.empty(); }

 private:
  friend class MetropolisChain;
  struct Pair {
    int x, y;  // oriented edges with s(x) = s(y); the term is c·Tr(G_x G_y), G_x = A_x A_x*
    double c;
    int coupling;
  };
  struct Single {
    int x;  // c·Tr(A_x A_x*)
    double c;
    int coupling;
  };
  struct General {
    Loop w;
    double c;
    int coupling;
  };
  const EnsembleSpec* spec_;
  std::vector<Pair> pairs_;
  std::vector<Single> singles_;
  std::vector<General> general_;
};

struct ChainOptions {
  long sweeps = 1000;   // retained-phase sweeps
  long burn_in = 200;   // adaptation sweeps, discarded
  int thin = 1;         // report every thin-th sweep
  double initial_step = 0.3;
  double target_low = 0.23;
  double target_high = 0.5;
};

struct ChainReport {
  long proposals = 0;
  long accepted = 0;
  long cutoff_rejections = 0;
  long retained = 0;
  std::vector<double> steps;  // frozen pCN step per block
  std::vector<std::string> warnings;

  double acceptance() const { return proposals ? static_cast<double>(accepted) / static_cast<double>(proposals) : 0.0; }
};

// Metropolis chain on μ_t^{M,K}. Each sweep proposes once per block with the
// preconditioned Crank-Nicolson move A' = ρA + β·ξ, ρ = sqrt(1−β²), ξ drawn
// from the base Gaussian of that block. The move is reversible for the base
// measure, so the acceptance probability is min(1, exp(ΔV)) on the cutoff
// set and 0 outside it.
class MetropolisChain {
 public:
  MetropolisChain(const EnsembleSpec& spec, std::uint64_t stream = 0);

  const MatrixEnsembleState& state() const { return state_; }
  const PotentialEvaluator& potential() const { return pot_; }
  double potential_value() const { return v_; }
  // One proposal per block; returns the number accepted.
  int sweep();
  void set_steps(std::vector<double> steps) { steps_ = std::move(steps); }
  const std::vector<double>& steps() const { return steps_; }
  ChainReport& report() { return report_; }
  // Per-block proposal and acceptance counts since the last reset.
  const std::vector<long>& block_accepted() const { return block_accepted_; }
  const std::vector<long>& block_proposed() const { return block_proposed_; }
  void reset_counts();

  // log of the full target density (base Gaussian, potential, cutoff) up to
  // a constant; -inf outside the cutoff set.
  double log_target(const MatrixEnsembleState& s) const;
  // log q(from -> to) for the pCN move on block k, up to a constant.
  double log_proposal(const MatrixEnsembleState& from, const MatrixEnsembleState& to, int k) const;
  // log of the Metropolis acceptance probability for the move from -> to on block k.
  double log_acceptance(const MatrixEnsembleState& from, const MatrixEnsembleState& to, int k) const;

 private:
  bool within_cutoff(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd* gram) const;
  // t_i·c·Tr(G_x G_y) from the stored Gram matrices.
  double pair_term_value(size_t pair_index) const;

  const EnsembleSpec* spec_;
  PotentialEvaluator pot_;
  MatrixEnsembleState state_;
  std::vector<double> steps_;
  std::vector<double> base_sd_;  // per block, sqrt of E|a|²
  std::uint64_t stream_;
  struct Rng;
  std::shared_ptr<Rng> rng_;
  // Gram matrices (lower triangle) for the oriented edges the potential needs.
  std::vector<Eigen::MatrixXcd> gram_;
  std::vector<bool> gram_needed_;
  std::vector<double> pair_value_;
  double v_ = 0.0;
  ChainReport report_;
  std::vector<long> block_accepted_, block_proposed_;
  // Terms touching each block.
  std::vector<std::vector<int>> block_pairs_, block_singles_, block_general_;
};

// Runs burn-in with step adaptation, freezes the steps, then calls
// on_sample on every thin-th retained state. Aborts with NumericError on a
// non-finite log-density.
ChainReport mcmc_run(const EnsembleSpec& spec, const ChainOptions& opts,
                     const std::function<void(const MatrixEnsembleState&)>& on_sample, std::uint64_t stream = 0);

struct TraceEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  long samples = 0;
};

// Batch-means estimate over a correlated series (batch count capped at 50).
TraceEstimate batch_means(const std::vector<double>& series, int max_batches = 50);
// Weighted combination Σ w_k X_k of independent estimates.
TraceEstimate combine_estimates(const std::vector<TraceEstimate>& parts, const std::vector<double>& weights);

// (1/(μ(v)M))·Tr(A_w) over a stored chain.
TraceEstimate estimate_word(const std::vector<MatrixEnsembleState>& chain, const EnsembleSpec& spec, const Loop& w);

// Block-size variants and their interpolation weights.
struct DimsVariant {
  std::vector<int> dims;
  double weight = 1.0;
};
std::vector<DimsVariant> rounding_variants(const EnsembleSpec& spec, Rounding mode);

struct ObservableRequest {
  std::string name;
  GraphPAElement element;
  int vertex = 0;
};

struct EnsembleEstimates {
  std::vector<TraceEstimate> estimates;  // one per request
  std::vector<ChainReport> chains;       // one per variant
  std::vector<DimsVariant> variants;
};

EnsembleEstimates estimate_observables(const EnsembleSpec& spec, const ChainOptions& opts,
                                       const std::vector<ObservableRequest>& requests,
                                       Rounding mode = Rounding::Floor);

// F_t − F_0 = Σ_i t_i ∫_0^1 E_{αt}[Σ_v μ(v)² Σ_w σ_{B_i}(w) tr(A_w)] dα by
// Gauss-Legendre quadrature with `nodes` points; one chain per node.
struct FreeEnergyEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::vector<TraceEstimate> per_coupling;  // t_i·∫(...) for each i
};
FreeEnergyEstimate estimate_free_energy_derivative(const EnsembleSpec& spec, int nodes, const ChainOptions& opts,
                                                   Rounding mode = Rounding::Floor);

// Binary checkpoint: "LLMC" magic, uint32 version (1), uint32 block count,
// then per block uint64 rows, uint64 cols and rows·cols row-major
// (re, im) little-endian doubles.
void write_checkpoint(std::ostream& os, const MatrixEnsembleState& s);
// Reads blocks into a state built for the given graph and dims; throws
// ParseError when the layout does not match.
MatrixEnsembleState read_checkpoint(std::istream& is, const BipartiteGraph& g, const std::vector<int>& dims);

// One JSON object per observable: spec, seed, version string, estimate.
std::string manifest_record(const EnsembleSpec& spec, const std::string& observable, const TraceEstimate& est,
                            const ChainOptions& opts, Rounding mode);

// Version string captured at configure time ("git describe").
const char* build_version();

}  // namespace looplab
