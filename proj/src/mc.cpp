#include "looplab/mc.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include <boost/math/special_functions/legendre.hpp>
#include <boost/random/normal_distribution.hpp>

#include "json.hpp"
#include "looplab/errors.hpp"

#ifndef LOOPLAB_VERSION
#define LOOPLAB_VERSION "unknown"
#endif

namespace looplab {

namespace {

constexpr double kIntegerSlack = 1e-9;

double base_variance(int rows, int cols) { return 1.0 / std::sqrt(static_cast<double>(rows) * cols); }

// Re Tr(G H) for Hermitian G, H given by their lower triangles.
double hermitian_inner(const Eigen::MatrixXcd& g, const Eigen::MatrixXcd& h) {
  const Eigen::Index n = g.rows();
  double diag = 0.0, off = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const std::complex<double>* gc = g.data() + j * n;
    const std::complex<double>* hc = h.data() + j * n;
    diag += gc[j].real() * hc[j].real();
    for (Eigen::Index i = j + 1; i < n; ++i) off += gc[i].real() * hc[i].real() + gc[i].imag() * hc[i].imag();
  }
  return diag + 2.0 * off;
}

// Lower triangle of A A* (adjoint = false) or A* A (adjoint = true).
void gram_lower(const Eigen::MatrixXcd& a, bool adjoint, Eigen::MatrixXcd& out) {
  const Eigen::Index n = adjoint ? a.cols() : a.rows();
  out.setZero(n, n);
  if (adjoint)
    out.selfadjointView<Eigen::Lower>().rankUpdate(a.adjoint());
  else
    out.selfadjointView<Eigen::Lower>().rankUpdate(a);
}

std::vector<int> term_partner(const PotentialTerm& term, std::vector<int>& colors, bool& start_plus) {
  std::vector<int> partner(static_cast<size_t>(term.num_points()));
  start_plus = term.diagram.sign() > 0;
  colors.clear();
  if (term.colored) {
    for (int i = 0; i < term.num_points(); ++i) partner[static_cast<size_t>(i)] = term.colored->partner(i);
    colors = term.colored->color;
    start_plus = term.start_plus;
  } else {
    partner = term.diagram.pairing();
  }
  return partner;
}

}  // namespace

struct MetropolisChain::Rng {
  std::mt19937_64 engine;
  boost::random::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform{0.0, 1.0};

  Rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    engine.seed(seq);
  }

  // Complex entries with E|a|² = sd².
  void fill(Eigen::MatrixXcd& m, double sd) {
    const double s = sd / std::sqrt(2.0);
    std::complex<double>* p = m.data();
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double re = normal(engine);
      const double im = normal(engine);
      p[i] = {s * re, s * im};
    }
  }
};

// ---------------------------------------------------------------------------
// EnsembleSpec

void EnsembleSpec::validate() const {
  if (!(K > 2.0)) throw std::invalid_argument("the cutoff K must be strictly greater than 2");
  if (!(M > 0.0)) throw std::invalid_argument("the size scale M must be positive");
  if (static_cast<int>(couplings.size()) != potential.num_couplings)
    throw DimensionError("expected " + std::to_string(potential.num_couplings) + " couplings, got " +
                         std::to_string(couplings.size()));
  if (!dims.empty()) {
    if (static_cast<int>(dims.size()) != graph.num_vertices()) throw DimensionError("one block size per vertex required");
    for (int d : dims)
      if (d < 1) throw std::invalid_argument("block sizes must be at least 1");
  }
  if (!graph.perron.boundary.empty())
    throw std::invalid_argument("matrix ensembles need a finite graph without a truncated boundary");
}

std::vector<int> EnsembleSpec::block_dims() const {
  if (!dims.empty()) return dims;
  std::vector<int> out;
  for (int v = 0; v < graph.num_vertices(); ++v)
    out.push_back(std::max(1, static_cast<int>(std::floor(graph.mu(v) * M + kIntegerSlack))));
  return out;
}

std::vector<DimsVariant> rounding_variants(const EnsembleSpec& spec, Rounding mode) {
  if (mode == Rounding::Floor || !spec.dims.empty()) return {DimsVariant{spec.block_dims(), 1.0}};
  std::vector<int> base = spec.block_dims();
  std::vector<int> frac_vertices;
  std::vector<double> frac;
  for (int v = 0; v < spec.graph.num_vertices(); ++v) {
    const double x = spec.graph.mu(v) * spec.M;
    const double f = x - std::floor(x + kIntegerSlack);
    if (f > kIntegerSlack && x >= 1.0) {
      frac_vertices.push_back(v);
      frac.push_back(f);
    }
  }
  if (frac_vertices.size() > 4)
    throw ResourceError("interpolated rounding needs 2^" + std::to_string(frac_vertices.size()) + " chains");
  std::vector<DimsVariant> out;
  const int n = static_cast<int>(frac_vertices.size());
  for (int mask = 0; mask < (1 << n); ++mask) {
    DimsVariant dv{base, 1.0};
    for (int j = 0; j < n; ++j) {
      const bool up = (mask >> j) & 1;
      if (up) ++dv.dims[static_cast<size_t>(frac_vertices[static_cast<size_t>(j)])];
      dv.weight *= up ? frac[static_cast<size_t>(j)] : 1.0 - frac[static_cast<size_t>(j)];
    }
    out.push_back(std::move(dv));
  }
  return out;
}

// ---------------------------------------------------------------------------
// State

MatrixEnsembleState::MatrixEnsembleState(const BipartiteGraph& g, std::vector<int> dims) : dims_(std::move(dims)) {
  if (static_cast<int>(dims_.size()) != g.num_vertices()) throw DimensionError("one block size per vertex required");
  plus_edges_ = g.plus_edges();
  block_of_.assign(static_cast<size_t>(g.num_edges()), -1);
  adjoint_.assign(static_cast<size_t>(g.num_edges()), false);
  for (size_t k = 0; k < plus_edges_.size(); ++k) {
    const Edge& e = g.edge(plus_edges_[k]);
    block_of_[static_cast<size_t>(plus_edges_[k])] = static_cast<int>(k);
    block_of_[static_cast<size_t>(e.reverse)] = static_cast<int>(k);
    adjoint_[static_cast<size_t>(e.reverse)] = true;
    blocks_.emplace_back(Eigen::MatrixXcd::Zero(dims_[static_cast<size_t>(e.source)], dims_[static_cast<size_t>(e.target)]));
  }
}

Eigen::MatrixXcd MatrixEnsembleState::matrix(int e) const {
  const auto& b = blocks_[static_cast<size_t>(block_of(e))];
  if (is_adjoint(e)) return b.adjoint();
  return b;
}

MatrixEnsembleState sample_gaussian(const EnsembleSpec& spec, std::uint64_t stream) {
  spec.validate();
  MatrixEnsembleState s(spec.graph.graph, spec.block_dims());
  std::mt19937_64 engine;
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0x5eedu};
  engine.seed(seq);
  boost::random::normal_distribution<double> normal;
  for (int k = 0; k < s.num_blocks(); ++k) {
    auto& b = s.block(k);
    const double sd = std::sqrt(base_variance(static_cast<int>(b.rows()), static_cast<int>(b.cols())));
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      const double re = normal(engine), im = normal(engine);
      b.data()[i] = {sd / std::sqrt(2.0) * re, sd / std::sqrt(2.0) * im};
    }
  }
  return s;
}

double operator_norm(const Eigen::MatrixXcd& a, double rel_tol) {
  if (a.size() == 0) return 0.0;
  Eigen::VectorXcd v(a.rows());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = 1.0 + 0.1 * std::sin(static_cast<double>(i) + 1.0);
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < 100000; ++it) {
    Eigen::VectorXcd u = a * (a.adjoint() * v);
    const double next = v.dot(u).real();
    const double norm = u.norm();
    if (norm == 0.0) return 0.0;
    v = u / norm;
    if (it > 0 && std::abs(next - lambda) <= rel_tol * next) return std::sqrt(next);
    lambda = next;
  }
  throw ConvergenceError("power iteration for the operator norm did not converge");
}

std::complex<double> trace_word(const MatrixEnsembleState& s, const BipartiteGraph& g, const Loop& w) {
  if (!is_closed_loop(g, w)) throw ShapeError("word is not a closed loop: " + loop_to_string(w));
  if (w.edges.empty()) return static_cast<double>(s.dim(w.base));
  if (w.length() == 2 && w.edges[1] == g.edge(w.edges[0]).reverse) return s.block(s.block_of(w.edges[0])).squaredNorm();
  Eigen::MatrixXcd acc = s.matrix(w.edges[0]);
  for (int j = 1; j < w.length(); ++j) {
    const int e = w.edges[static_cast<size_t>(j)];
    const auto& b = s.block(s.block_of(e));
    if (s.is_adjoint(e))
      acc = acc * b.adjoint();
    else
      acc = acc * b;
  }
  return acc.trace();
}

double normalized_trace(const MatrixEnsembleState& s, const EnsembleSpec& spec, const GraphPAElement& x, int v) {
  double total = 0.0;
  for (const auto& [w, c] : x.coefficients())
    if (w.base == v) total += c * trace_word(s, spec.graph.graph, w).real();
  return total / (spec.graph.mu(v) * spec.M);
}

// ---------------------------------------------------------------------------
// Potential

PotentialEvaluator::PotentialEvaluator(const EnsembleSpec& spec) : spec_(&spec) {
  const auto& g = spec.graph;
  const auto& gr = g.graph;
  for (const auto& term : spec.potential.terms) {
    std::vector<int> colors;
    bool start_plus = true;
    const std::vector<int> partner = term_partner(term, colors, start_plus);
    for (int v = 0; v < g.num_vertices(); ++v) {
      if (gr.is_plus(v) != start_plus) continue;
      for (const Loop& w : compatible_loops(partner, g, v, colors)) {
        const double c = spec.M * g.mu(v) * sigma_weight(partner, g, w);
        if (c == 0.0) continue;
        const auto& e = w.edges;
        auto rev = [&](int x) { return gr.edge(x).reverse; };
        if (w.length() == 2 && e[1] == rev(e[0])) {
          singles_.push_back({e[0], c, term.coupling});
        } else if (w.length() == 4 && e[1] == rev(e[0]) && e[3] == rev(e[2])) {
          pairs_.push_back({e[0], e[2], c, term.coupling});
        } else if (w.length() == 4 && e[3] == rev(e[0]) && e[2] == rev(e[1])) {
          pairs_.push_back({rev(e[0]), e[1], c, term.coupling});
        } else {
          general_.push_back({w, c, term.coupling});
        }
      }
    }
  }
}

namespace {

// Tr(G_x G_y) = ‖A_x* A_y‖_F².
double pair_trace(const MatrixEnsembleState& s, int x, int y) {
  return (s.matrix(x).adjoint() * s.matrix(y)).squaredNorm();
}

}  // namespace

double PotentialEvaluator::value(const MatrixEnsembleState& s) const {
  const auto& t = spec_->couplings;
  double v = 0.0;
  for (const auto& p : pairs_) v += t[static_cast<size_t>(p.coupling)] * p.c * pair_trace(s, p.x, p.y);
  for (const auto& q : singles_) v += t[static_cast<size_t>(q.coupling)] * q.c * s.block(s.block_of(q.x)).squaredNorm();
  for (const auto& g : general_)
    v += t[static_cast<size_t>(g.coupling)] * g.c * trace_word(s, spec_->graph.graph, g.w).real();
  return v;
}

double PotentialEvaluator::coupling_derivative(const MatrixEnsembleState& s, int coupling) const {
  double v = 0.0;
  for (const auto& p : pairs_)
    if (p.coupling == coupling) v += p.c * pair_trace(s, p.x, p.y);
  for (const auto& q : singles_)
    if (q.coupling == coupling) v += q.c * s.block(s.block_of(q.x)).squaredNorm();
  for (const auto& g : general_)
    if (g.coupling == coupling) v += g.c * trace_word(s, spec_->graph.graph, g.w).real();
  return v / (spec_->M * spec_->M);
}

// ---------------------------------------------------------------------------
// Chain

MetropolisChain::MetropolisChain(const EnsembleSpec& spec, std::uint64_t stream)
    : spec_(&spec), pot_(spec), stream_(stream), rng_(std::make_shared<Rng>(spec.seed, stream)) {
  spec.validate();
  const auto& gr = spec.graph.graph;
  state_ = MatrixEnsembleState(gr, spec.block_dims());
  const int nb = state_.num_blocks();
  for (int k = 0; k < nb; ++k) {
    const auto& b = state_.block(k);
    base_sd_.push_back(std::sqrt(base_variance(static_cast<int>(b.rows()), static_cast<int>(b.cols()))));
  }
  steps_.assign(static_cast<size_t>(nb), 0.3);
  block_accepted_.assign(static_cast<size_t>(nb), 0);
  block_proposed_.assign(static_cast<size_t>(nb), 0);

  // Initial state: base Gaussian draw inside the cutoff set.
  for (int attempt = 0;; ++attempt) {
    for (int k = 0; k < nb; ++k) rng_->fill(state_.block(k), base_sd_[static_cast<size_t>(k)]);
    bool ok = true;
    for (int k = 0; k < nb && ok; ++k) ok = within_cutoff(state_.block(k), nullptr);
    if (ok) break;
    if (attempt == 1000) throw RegimeError("no base Gaussian draw inside the cutoff set after 1000 attempts");
  }

  gram_needed_.assign(static_cast<size_t>(gr.num_edges()), false);
  for (const auto& p : pot_.pairs_) gram_needed_[static_cast<size_t>(p.x)] = gram_needed_[static_cast<size_t>(p.y)] = true;
  gram_.resize(static_cast<size_t>(gr.num_edges()));
  for (int e = 0; e < gr.num_edges(); ++e)
    if (gram_needed_[static_cast<size_t>(e)]) gram_lower(state_.block(state_.block_of(e)), state_.is_adjoint(e), gram_[static_cast<size_t>(e)]);

  block_pairs_.resize(static_cast<size_t>(nb));
  block_singles_.resize(static_cast<size_t>(nb));
  block_general_.resize(static_cast<size_t>(nb));
  for (size_t i = 0; i < pot_.pairs_.size(); ++i) {
    const auto& p = pot_.pairs_[i];
    const int a = state_.block_of(p.x), b = state_.block_of(p.y);
    block_pairs_[static_cast<size_t>(a)].push_back(static_cast<int>(i));
    if (b != a) block_pairs_[static_cast<size_t>(b)].push_back(static_cast<int>(i));
    pair_value_.push_back(pair_term_value(i));
  }
  for (size_t i = 0; i < pot_.singles_.size(); ++i)
    block_singles_[static_cast<size_t>(state_.block_of(pot_.singles_[i].x))].push_back(static_cast<int>(i));
  for (size_t i = 0; i < pot_.general_.size(); ++i) {
    std::vector<bool> seen(static_cast<size_t>(nb), false);
    for (int e : pot_.general_[i].w.edges) {
      const int k = state_.block_of(e);
      if (!seen[static_cast<size_t>(k)]) block_general_[static_cast<size_t>(k)].push_back(static_cast<int>(i));
      seen[static_cast<size_t>(k)] = true;
    }
  }
  v_ = pot_.value(state_);
}

double MetropolisChain::pair_term_value(size_t pair_index) const {
  const auto& p = pot_.pairs_[pair_index];
  return spec_->couplings[static_cast<size_t>(p.coupling)] * p.c *
         hermitian_inner(gram_[static_cast<size_t>(p.x)], gram_[static_cast<size_t>(p.y)]);
}

void MetropolisChain::reset_counts() {
  std::fill(block_accepted_.begin(), block_accepted_.end(), 0);
  std::fill(block_proposed_.begin(), block_proposed_.end(), 0);
}

bool MetropolisChain::within_cutoff(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd* gram) const {
  const double k2 = spec_->K * spec_->K;
  // ‖A‖⁴ = λ_max(G)² <= ‖G‖_F², a certified shortcut before power iteration.
  Eigen::MatrixXcd local;
  if (gram == nullptr) {
    gram_lower(a, a.rows() > a.cols(), local);
    gram = &local;
  }
  if (hermitian_inner(*gram, *gram) <= k2 * k2) return true;
  return operator_norm(a) <= spec_->K;
}

int MetropolisChain::sweep() {
  const auto& gr = spec_->graph.graph;
  const auto& t = spec_->couplings;
  int accepted_now = 0;
  Eigen::MatrixXcd proposal, noise;
  std::vector<Eigen::MatrixXcd> new_gram(2);
  std::vector<double> new_pairs;
  for (int k = 0; k < state_.num_blocks(); ++k) {
    const size_t ku = static_cast<size_t>(k);
    auto& a = state_.block(k);
    const double beta = steps_[ku];
    const double rho = std::sqrt(std::max(0.0, 1.0 - beta * beta));
    noise.resize(a.rows(), a.cols());
    rng_->fill(noise, base_sd_[ku] * beta);
    proposal = rho * a + noise;
    ++block_proposed_[ku];
    ++report_.proposals;

    const int e = state_.block_edge(k);
    const int eb = gr.edge(e).reverse;
    const bool need_e = gram_needed_[static_cast<size_t>(e)], need_eb = gram_needed_[static_cast<size_t>(eb)];
    if (need_e) gram_lower(proposal, false, new_gram[0]);
    if (need_eb) gram_lower(proposal, true, new_gram[1]);
    const Eigen::MatrixXcd* any_gram = need_e ? &new_gram[0] : need_eb ? &new_gram[1] : nullptr;
    if (!within_cutoff(proposal, any_gram)) {
      ++report_.cutoff_rejections;
      continue;
    }

    auto gram_of = [&](int x) -> const Eigen::MatrixXcd& {
      if (x == e) return new_gram[0];
      if (x == eb) return new_gram[1];
      return gram_[static_cast<size_t>(x)];
    };
    double delta = 0.0;
    new_pairs.clear();
    for (int i : block_pairs_[ku]) {
      const auto& p = pot_.pairs_[static_cast<size_t>(i)];
      const double nv = t[static_cast<size_t>(p.coupling)] * p.c * hermitian_inner(gram_of(p.x), gram_of(p.y));
      new_pairs.push_back(nv);
      delta += nv - pair_value_[static_cast<size_t>(i)];
    }
    if (!block_singles_[ku].empty()) {
      const double dn = proposal.squaredNorm() - a.squaredNorm();
      for (int i : block_singles_[ku]) {
        const auto& q = pot_.singles_[static_cast<size_t>(i)];
        delta += t[static_cast<size_t>(q.coupling)] * q.c * dn;
      }
    }
    if (!block_general_[ku].empty()) {
      double before = 0.0, after = 0.0;
      for (int i : block_general_[ku]) {
        const auto& g = pot_.general_[static_cast<size_t>(i)];
        before += t[static_cast<size_t>(g.coupling)] * g.c * trace_word(state_, gr, g.w).real();
      }
      a.swap(proposal);
      for (int i : block_general_[ku]) {
        const auto& g = pot_.general_[static_cast<size_t>(i)];
        after += t[static_cast<size_t>(g.coupling)] * g.c * trace_word(state_, gr, g.w).real();
      }
      a.swap(proposal);
      delta += after - before;
    }
    if (!std::isfinite(delta)) {
      std::ostringstream msg;
      msg << "non-finite log-density difference on block " << k << " (edge " << e << "), potential " << v_
          << ", step " << beta << ", proposal norm " << proposal.norm();
      throw NumericError(msg.str());
    }
    if (delta >= 0.0 || std::log(rng_->uniform(rng_->engine)) < delta) {
      a.swap(proposal);
      if (need_e) gram_[static_cast<size_t>(e)].swap(new_gram[0]);
      if (need_eb) gram_[static_cast<size_t>(eb)].swap(new_gram[1]);
      for (size_t j = 0; j < block_pairs_[ku].size(); ++j)
        pair_value_[static_cast<size_t>(block_pairs_[ku][j])] = new_pairs[j];
      v_ += delta;
      ++block_accepted_[ku];
      ++report_.accepted;
      ++accepted_now;
    }
  }
  return accepted_now;
}

double MetropolisChain::log_target(const MatrixEnsembleState& s) const {
  double quad = 0.0;
  for (int k = 0; k < s.num_blocks(); ++k) {
    if (operator_norm(s.block(k), 1e-12) > spec_->K) return -std::numeric_limits<double>::infinity();
    const double sd = base_sd_[static_cast<size_t>(k)];
    quad += s.block(k).squaredNorm() / (sd * sd);
  }
  return pot_.value(s) - quad;
}

double MetropolisChain::log_proposal(const MatrixEnsembleState& from, const MatrixEnsembleState& to, int k) const {
  const double beta = steps_[static_cast<size_t>(k)];
  const double rho = std::sqrt(std::max(0.0, 1.0 - beta * beta));
  const double sd = base_sd_[static_cast<size_t>(k)] * beta;
  return -(to.block(k) - rho * from.block(k)).squaredNorm() / (sd * sd);
}

double MetropolisChain::log_acceptance(const MatrixEnsembleState& from, const MatrixEnsembleState& to, int k) const {
  if (operator_norm(to.block(k), 1e-12) > spec_->K) return -std::numeric_limits<double>::infinity();
  return std::min(0.0, pot_.value(to) - pot_.value(from));
}

// ---------------------------------------------------------------------------
// Runs and estimators

ChainReport mcmc_run(const EnsembleSpec& spec, const ChainOptions& opts,
                     const std::function<void(const MatrixEnsembleState&)>& on_sample, std::uint64_t stream) {
  if (opts.sweeps < 0 || opts.burn_in < 0 || opts.thin < 1) throw std::invalid_argument("invalid chain options");
  MetropolisChain chain(spec, stream);
  std::vector<std::string> warnings;
  if (!chain.potential().empty()) {
    try {
      const auto bound = best_contraction_bound(spec.graph, spec.potential, spec.couplings, spec.K);
      if (!bound.certified) {
        std::ostringstream msg;
        msg << "couplings lie outside the certified contraction regime (best factor " << bound.factor << ")";
        warnings.push_back(msg.str());
      }
    } catch (const std::exception& ex) {
      warnings.push_back(std::string("contraction bound unavailable: ") + ex.what());
    }
  }
  chain.set_steps(std::vector<double>(static_cast<size_t>(chain.state().num_blocks()), opts.initial_step));
  constexpr long kWindow = 50;
  for (long s = 0; s < opts.burn_in; ++s) {
    chain.sweep();
    if ((s + 1) % kWindow == 0) {
      std::vector<double> steps = chain.steps();
      for (size_t k = 0; k < steps.size(); ++k) {
        const double rate = static_cast<double>(chain.block_accepted()[k]) / static_cast<double>(chain.block_proposed()[k]);
        if (rate < opts.target_low) steps[k] *= 0.7;
        if (rate > opts.target_high) steps[k] = std::min(1.0, steps[k] * 1.3);
      }
      chain.set_steps(std::move(steps));
      chain.reset_counts();
    }
  }
  chain.report() = ChainReport{};
  chain.reset_counts();
  for (long s = 0; s < opts.sweeps; ++s) {
    chain.sweep();
    if ((s + 1) % opts.thin == 0) {
      on_sample(chain.state());
      ++chain.report().retained;
    }
  }
  ChainReport out = chain.report();
  out.steps = chain.steps();
  out.warnings = std::move(warnings);
  return out;
}

TraceEstimate batch_means(const std::vector<double>& series, int max_batches) {
  const long n = static_cast<long>(series.size());
  if (n == 0) throw std::invalid_argument("empty chain");
  TraceEstimate est;
  est.samples = n;
  est.mean = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(n);
  const long b = std::min<long>(max_batches, n);
  if (b < 2) return est;
  const long size = n / b;
  std::vector<double> means;
  for (long j = 0; j < b; ++j) {
    double s = 0.0;
    for (long i = j * size; i < (j + 1) * size; ++i) s += series[static_cast<size_t>(i)];
    means.push_back(s / static_cast<double>(size));
  }
  const double m = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(b);
  double var = 0.0;
  for (double x : means) var += (x - m) * (x - m);
  var /= static_cast<double>(b - 1);
  est.std_error = std::sqrt(var / static_cast<double>(b));
  return est;
}

TraceEstimate combine_estimates(const std::vector<TraceEstimate>& parts, const std::vector<double>& weights) {
  if (parts.size() != weights.size()) throw DimensionError("one weight per estimate required");
  TraceEstimate out;
  double var = 0.0;
  for (size_t i = 0; i < parts.size(); ++i) {
    out.mean += weights[i] * parts[i].mean;
    var += weights[i] * weights[i] * parts[i].std_error * parts[i].std_error;
    out.samples += parts[i].samples;
  }
  out.std_error = std::sqrt(var);
  return out;
}

TraceEstimate estimate_word(const std::vector<MatrixEnsembleState>& chain, const EnsembleSpec& spec, const Loop& w) {
  if (chain.empty()) throw std::invalid_argument("empty chain");
  std::vector<double> values;
  const double norm = spec.graph.mu(w.base) * spec.M;
  for (const auto& s : chain) values.push_back(trace_word(s, spec.graph.graph, w).real() / norm);
  return batch_means(values);
}

namespace {

using StateFunctional = std::function<double(const MatrixEnsembleState&)>;

std::vector<TraceEstimate> run_variants(const EnsembleSpec& spec, const ChainOptions& opts, Rounding mode,
                                        const std::vector<StateFunctional>& fs, std::vector<ChainReport>* reports,
                                        std::vector<DimsVariant>* variants_out, std::uint64_t stream_base = 0) {
  const auto variants = rounding_variants(spec, mode);
  std::vector<std::vector<TraceEstimate>> per(fs.size());
  std::vector<double> weights;
  for (size_t j = 0; j < variants.size(); ++j) {
    EnsembleSpec vs = spec;
    vs.dims = variants[j].dims;
    std::vector<std::vector<double>> series(fs.size());
    auto report = mcmc_run(
        vs, opts,
        [&](const MatrixEnsembleState& s) {
          for (size_t i = 0; i < fs.size(); ++i) series[i].push_back(fs[i](s));
        },
        stream_base + j);
    for (size_t i = 0; i < fs.size(); ++i) per[i].push_back(batch_means(series[i]));
    weights.push_back(variants[j].weight);
    if (reports) reports->push_back(std::move(report));
  }
  if (variants_out) *variants_out = variants;
  std::vector<TraceEstimate> out;
  for (size_t i = 0; i < fs.size(); ++i) out.push_back(combine_estimates(per[i], weights));
  return out;
}

}  // namespace

EnsembleEstimates estimate_observables(const EnsembleSpec& spec, const ChainOptions& opts,
                                       const std::vector<ObservableRequest>& requests, Rounding mode) {
  spec.validate();
  std::vector<StateFunctional> fs;
  for (const auto& r : requests)
    fs.push_back([&spec, &r](const MatrixEnsembleState& s) { return normalized_trace(s, spec, r.element, r.vertex); });
  EnsembleEstimates out;
  out.estimates = run_variants(spec, opts, mode, fs, &out.chains, &out.variants);
  return out;
}

FreeEnergyEstimate estimate_free_energy_derivative(const EnsembleSpec& spec, int nodes, const ChainOptions& opts,
                                                   Rounding mode) {
  spec.validate();
  if (nodes < 1) throw std::invalid_argument("the α grid needs at least one node");
  // Gauss-Legendre nodes on [−1, 1] mapped to [0, 1].
  std::vector<double> x, w;
  for (double z : boost::math::legendre_p_zeros<double>(nodes)) {
    const double dp = boost::math::legendre_p_prime(nodes, z);
    const double wt = 2.0 / ((1.0 - z * z) * dp * dp);
    x.push_back(z);
    w.push_back(wt);
    if (z != 0.0) {
      x.push_back(-z);
      w.push_back(wt);
    }
  }
  const int k = spec.potential.num_couplings;
  FreeEnergyEstimate out;
  out.per_coupling.assign(static_cast<size_t>(k), TraceEstimate{});
  std::vector<double> var(static_cast<size_t>(k), 0.0);
  for (size_t j = 0; j < x.size(); ++j) {
    const double alpha = 0.5 * (x[j] + 1.0);
    const double weight = 0.5 * w[j];
    EnsembleSpec node = spec;
    for (auto& t : node.couplings) t *= alpha;
    std::vector<StateFunctional> fs;
    PotentialEvaluator pe(node);
    for (int i = 0; i < k; ++i)
      fs.push_back([&pe, i](const MatrixEnsembleState& s) { return pe.coupling_derivative(s, i); });
    const auto est = run_variants(node, opts, mode, fs, nullptr, nullptr, 1000 * (j + 1));
    for (int i = 0; i < k; ++i) {
      const double ti = spec.couplings[static_cast<size_t>(i)];
      auto& pc = out.per_coupling[static_cast<size_t>(i)];
      pc.mean += ti * weight * est[static_cast<size_t>(i)].mean;
      var[static_cast<size_t>(i)] += std::pow(ti * weight * est[static_cast<size_t>(i)].std_error, 2);
      pc.samples += est[static_cast<size_t>(i)].samples;
    }
  }
  double total_var = 0.0;
  for (int i = 0; i < k; ++i) {
    auto& pc = out.per_coupling[static_cast<size_t>(i)];
    pc.std_error = std::sqrt(var[static_cast<size_t>(i)]);
    out.value += pc.mean;
    total_var += var[static_cast<size_t>(i)];
  }
  out.std_error = std::sqrt(total_var);
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw ParseError("truncated checkpoint");
  return v;
}

}  // namespace

void write_checkpoint(std::ostream& os, const MatrixEnsembleState& s) {
  os.write("LLMC", 4);
  put<std::uint32_t>(os, 1);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(s.num_blocks()));
  for (int k = 0; k < s.num_blocks(); ++k) {
    const auto& b = s.block(k);
    put<std::uint64_t>(os, static_cast<std::uint64_t>(b.rows()));
    put<std::uint64_t>(os, static_cast<std::uint64_t>(b.cols()));
    for (Eigen::Index i = 0; i < b.rows(); ++i)
      for (Eigen::Index j = 0; j < b.cols(); ++j) {
        put<double>(os, b(i, j).real());
        put<double>(os, b(i, j).imag());
      }
  }
}

MatrixEnsembleState read_checkpoint(std::istream& is, const BipartiteGraph& g, const std::vector<int>& dims) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "LLMC", 4) != 0) throw ParseError("not a looplab checkpoint");
  if (get<std::uint32_t>(is) != 1) throw ParseError("unsupported checkpoint version");
  MatrixEnsembleState s(g, dims);
  if (get<std::uint32_t>(is) != static_cast<std::uint32_t>(s.num_blocks()))
    throw ParseError("checkpoint block count does not match the graph");
  for (int k = 0; k < s.num_blocks(); ++k) {
    auto& b = s.block(k);
    const auto rows = get<std::uint64_t>(is), cols = get<std::uint64_t>(is);
    if (rows != static_cast<std::uint64_t>(b.rows()) || cols != static_cast<std::uint64_t>(b.cols()))
      throw ParseError("checkpoint block " + std::to_string(k) + " has the wrong dimensions");
    for (Eigen::Index i = 0; i < b.rows(); ++i)
      for (Eigen::Index j = 0; j < b.cols(); ++j) {
        const double re = get<double>(is);
        const double im = get<double>(is);
        b(i, j) = {re, im};
      }
  }
  return s;
}

std::string manifest_record(const EnsembleSpec& spec, const std::string& observable, const TraceEstimate& est,
                            const ChainOptions& opts, Rounding mode) {
  nlohmann::json j;
  j["graph"] = spec.graph.label;
  j["delta"] = spec.graph.delta();
  j["M"] = spec.M;
  j["K"] = spec.K;
  j["couplings"] = spec.couplings;
  j["seed"] = spec.seed;
  j["dims"] = spec.block_dims();
  j["rounding"] = mode == Rounding::Floor ? "floor" : "interpolate";
  j["sweeps"] = opts.sweeps;
  j["burn_in"] = opts.burn_in;
  j["thin"] = opts.thin;
  j["version"] = build_version();
  j["observable"] = observable;
  j["mean"] = est.mean;
  j["stderr"] = est.std_error;
  j["samples"] = est.samples;
  return j.dump();
}

const char* build_version() { return LOOPLAB_VERSION; }

}  // namespace looplab
