#include "looplab/enumerate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace looplab {

namespace {

constexpr int kMaxHalfEdges = 24;

int uf_find(std::vector<int>& p, int x) {
  while (p[static_cast<size_t>(x)] != x) {
    p[static_cast<size_t>(x)] = p[static_cast<size_t>(p[static_cast<size_t>(x)])];
    x = p[static_cast<size_t>(x)];
  }
  return x;
}

class MatchingSearch {
 public:
  MatchingSearch(const std::vector<DiskSpec>& disks, const std::vector<bool>& shaded,
                 const std::vector<bool>& counts_loops, bool vacuum, EnumerationStats* stats,
                 const std::function<void(const std::vector<int>&)>& cb)
      : shaded_(shaded), counts_(counts_loops), vacuum_(vacuum), stats_(stats), cb_(cb) {
    num_disks_ = static_cast<int>(disks.size());
    for (int d = 0; d < num_disks_; ++d) {
      const DiskSpec& ds = disks[static_cast<size_t>(d)];
      const int off = static_cast<int>(disk_.size());
      const int n = static_cast<int>(ds.partner.size());
      offset_.push_back(off);
      size_.push_back(n);
      for (int i = 0; i < n; ++i) {
        disk_.push_back(d);
        local_.push_back(i);
        internal_.push_back(ds.partner[static_cast<size_t>(i)] < 0 ? -1 : off + ds.partner[static_cast<size_t>(i)]);
        label_.push_back(ds.label[static_cast<size_t>(i)]);
        color_.push_back(ds.color[static_cast<size_t>(i)]);
        int r = ds.external ? (i + n - 1) % n : (i + 1) % n;
        rot_.push_back(off + r);
      }
    }
    h_ = static_cast<int>(disk_.size());
    if (h_ > kMaxHalfEdges)
      throw ResourceError("configuration has " + std::to_string(h_) + " half-edges; the limit is " +
                          std::to_string(kMaxHalfEdges));
    match_.assign(static_cast<size_t>(h_), -1);
    chords_.assign(static_cast<size_t>(num_disks_), {});
  }

  void run() {
    if (h_ == 0) {
      // A lone disk without boundary points: one configuration, no loops.
      if (!vacuum_ && num_disks_ == 1) accept_trivial();
      return;
    }
    recurse(0);
  }

 private:
  bool allowed(int a, int b) const {
    if (color_[static_cast<size_t>(a)] != color_[static_cast<size_t>(b)]) return false;
    if (shaded_[static_cast<size_t>(color_[static_cast<size_t>(a)])] &&
        label_[static_cast<size_t>(a)] == label_[static_cast<size_t>(b)])
      return false;
    return true;
  }

  bool crosses_same_disk(int a, int b) const {
    int d = disk_[static_cast<size_t>(a)];
    int x = std::min(local_[static_cast<size_t>(a)], local_[static_cast<size_t>(b)]);
    int y = std::max(local_[static_cast<size_t>(a)], local_[static_cast<size_t>(b)]);
    for (auto [c, e] : chords_[static_cast<size_t>(d)]) {
      bool cin = c > x && c < y, ein = e > x && e < y;
      if (cin != ein) return true;
    }
    return false;
  }

  void recurse(int from) {
    int h = from;
    while (h < h_ && match_[static_cast<size_t>(h)] != -1) ++h;
    if (h == h_) {
      leaf();
      return;
    }
    for (int g = h + 1; g < h_; ++g) {
      if (match_[static_cast<size_t>(g)] != -1 || !allowed(h, g)) continue;
      bool same = disk_[static_cast<size_t>(h)] == disk_[static_cast<size_t>(g)];
      if (same && crosses_same_disk(h, g)) continue;
      match_[static_cast<size_t>(h)] = g;
      match_[static_cast<size_t>(g)] = h;
      if (same) {
        int a = local_[static_cast<size_t>(h)], b = local_[static_cast<size_t>(g)];
        chords_[static_cast<size_t>(disk_[static_cast<size_t>(h)])].emplace_back(std::min(a, b), std::max(a, b));
      }
      recurse(h + 1);
      if (same) chords_[static_cast<size_t>(disk_[static_cast<size_t>(h)])].pop_back();
      match_[static_cast<size_t>(h)] = -1;
      match_[static_cast<size_t>(g)] = -1;
    }
  }

  void leaf() {
    if (stats_) ++stats_->matchings_completed;
    // Connectivity of disks through strings.
    std::vector<int> dp(static_cast<size_t>(num_disks_));
    std::iota(dp.begin(), dp.end(), 0);
    for (int h = 0; h < h_; ++h)
      dp[static_cast<size_t>(uf_find(dp, disk_[static_cast<size_t>(h)]))] =
          uf_find(dp, disk_[static_cast<size_t>(match_[static_cast<size_t>(h)])]);
    int root = uf_find(dp, 0);
    for (int d = 1; d < num_disks_; ++d)
      if (uf_find(dp, d) != root) {
        if (stats_) ++stats_->rejected_disconnected;
        return;
      }
    // Faces: cycles of rot∘match.
    std::vector<char> seen(static_cast<size_t>(h_), 0);
    int faces = 0;
    for (int h = 0; h < h_; ++h) {
      if (seen[static_cast<size_t>(h)]) continue;
      ++faces;
      int x = h;
      while (!seen[static_cast<size_t>(x)]) {
        seen[static_cast<size_t>(x)] = 1;
        x = rot_[static_cast<size_t>(match_[static_cast<size_t>(x)])];
      }
    }
    const int euler = num_disks_ - h_ / 2 + faces;
    if (euler != 2) {
      if (stats_) ++stats_->rejected_genus;
      return;
    }
    // Re-verify shading on the accepted matching.
    for (int h = 0; h < h_; ++h) {
      int g = match_[static_cast<size_t>(h)];
      if (g == h || match_[static_cast<size_t>(g)] != h || !allowed(h, g))
        throw std::logic_error("accepted configuration violates the shading rule");
    }
    if (stats_) {
      ++stats_->accepted;
      ++stats_->shading_verified;
      ++stats_->euler_verified;
    }
    // Loops: components of internal pairing ∪ matching.
    std::vector<int> lp(static_cast<size_t>(h_));
    std::iota(lp.begin(), lp.end(), 0);
    for (int h = 0; h < h_; ++h) {
      lp[static_cast<size_t>(uf_find(lp, h))] = uf_find(lp, match_[static_cast<size_t>(h)]);
      if (internal_[static_cast<size_t>(h)] >= 0)
        lp[static_cast<size_t>(uf_find(lp, h))] = uf_find(lp, internal_[static_cast<size_t>(h)]);
    }
    std::vector<int> loops(counts_.size(), 0);
    for (int h = 0; h < h_; ++h)
      if (uf_find(lp, h) == h && counts_[static_cast<size_t>(color_[static_cast<size_t>(h)])])
        ++loops[static_cast<size_t>(color_[static_cast<size_t>(h)])];
    cb_(loops);
  }

  void accept_trivial() {
    if (stats_) {
      ++stats_->matchings_completed;
      ++stats_->accepted;
      ++stats_->shading_verified;
      ++stats_->euler_verified;
    }
    cb_(std::vector<int>(counts_.size(), 0));
  }

  const std::vector<bool>& shaded_;
  const std::vector<bool>& counts_;
  bool vacuum_;
  EnumerationStats* stats_;
  const std::function<void(const std::vector<int>&)>& cb_;
  int num_disks_ = 0;
  int h_ = 0;
  std::vector<int> offset_, size_, disk_, local_, internal_, label_, color_, rot_, match_;
  std::vector<std::vector<std::pair<int, int>>> chords_;
};

// All exponent vectors of length k with total degree <= n.
void exponents_upto(int k, int n, std::vector<Exponent>& out, Exponent& cur, int pos, int left) {
  if (pos == k) {
    out.push_back(cur);
    return;
  }
  for (int r = 0; r <= left; ++r) {
    cur[static_cast<size_t>(pos)] = r;
    exponents_upto(k, n, out, cur, pos + 1, left - r);
  }
}

std::vector<Exponent> all_exponents(int k, int n) {
  std::vector<Exponent> out;
  Exponent cur(static_cast<size_t>(k), 0);
  exponents_upto(k, n, out, cur, 0, n);
  return out;
}

Rational factorial(int n) {
  Rational f = 1;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

void check_types(const std::vector<VertexType>& types, int num_couplings) {
  for (const auto& t : types) {
    if (t.coupling < 0 || t.coupling >= num_couplings) throw DimensionError("vertex coupling index out of range");
    if (t.diagram.num_points() == 0) throw ShapeError("vertex types need at least one string");
  }
}

ExactSeries run_series(const std::optional<TLDiagram>& external, const std::vector<VertexType>& types,
                       int num_couplings, int max_order, bool vacuum, EnumerationStats* stats) {
  check_types(types, num_couplings);
  ExactSeries result(num_couplings, max_order);
  const int nt = static_cast<int>(types.size());
  const std::vector<bool> shaded{true}, counts{true};
  for (const Exponent& r : all_exponents(nt, max_order)) {
    int total = std::accumulate(r.begin(), r.end(), 0);
    if (vacuum && total == 0) continue;
    std::vector<DiskSpec> disks;
    if (external) disks.push_back(disk_from_diagram(*external, true));
    Rational weight = 1;
    Exponent coupling_exp(static_cast<size_t>(num_couplings), 0);
    for (int i = 0; i < nt; ++i) {
      for (int c = 0; c < r[static_cast<size_t>(i)]; ++c)
        disks.push_back(disk_from_diagram(types[static_cast<size_t>(i)].diagram, false));
      weight /= factorial(r[static_cast<size_t>(i)]);
      coupling_exp[static_cast<size_t>(types[static_cast<size_t>(i)].coupling)] += r[static_cast<size_t>(i)];
    }
    std::map<int, long> by_loops;
    long before = stats ? stats->accepted : 0;
    enumerate_configurations(disks, shaded, counts, vacuum, stats,
                             [&](const std::vector<int>& loops) { ++by_loops[loops[0]]; });
    if (stats) stats->accepted_by_order[r] += stats->accepted - before;
    DeltaPoly value;
    for (auto [l, c] : by_loops) value += DeltaPoly::monomial(l, Rational(c));
    if (!value.is_zero()) result.add_to(coupling_exp, value * DeltaPoly(weight));
  }
  return result;
}

}  // namespace

void enumerate_configurations(const std::vector<DiskSpec>& disks, const std::vector<bool>& color_shaded,
                              const std::vector<bool>& counts_loops, bool vacuum, EnumerationStats* stats,
                              const std::function<void(const std::vector<int>&)>& on_accept) {
  MatchingSearch search(disks, color_shaded, counts_loops, vacuum, stats, on_accept);
  search.run();
}

DiskSpec disk_from_diagram(const TLDiagram& d, bool external) {
  DiskSpec s;
  s.external = external;
  for (int i = 0; i < d.num_points(); ++i) {
    s.partner.push_back(d.partner(i));
    // The outside of the external disk sees its boundary with the opposite orientation.
    s.label.push_back(external ? 1 - d.label(i) : d.label(i));
    s.color.push_back(0);
  }
  return s;
}

ExactSeries observable_series(const ConfigurationProblem& prob, EnumerationStats* stats) {
  if (!prob.external) throw ShapeError("observable_series needs an external diagram; use free_energy_series");
  return run_series(prob.external, prob.vertex_types, prob.num_couplings, prob.max_order, false, stats);
}

ExactSeries free_energy_series(const std::vector<VertexType>& types, int num_couplings, int max_order,
                               EnumerationStats* stats) {
  return run_series(std::nullopt, types, num_couplings, max_order, true, stats);
}

namespace {

DiskSpec colored_disk(const ColoredTLDiagram& d, bool external) {
  DiskSpec s;
  s.external = external;
  for (int i = 0; i < d.num_points(); ++i) {
    s.partner.push_back(d.partner(i));
    s.label.push_back(external ? 1 - d.label(i) : d.label(i));
    s.color.push_back(d.color[static_cast<size_t>(i)]);
  }
  return s;
}

}  // namespace

StitchedSeries stitched_observable_series(const ColoredTLDiagram& external,
                                          const std::vector<ColoredVertexType>& types, int num_couplings,
                                          int max_order, EnumerationStats* stats) {
  StitchedSeries result;
  const int nt = static_cast<int>(types.size());
  const std::vector<bool> shaded{true, true}, counts{true, true};
  for (const Exponent& r : all_exponents(nt, max_order)) {
    std::vector<DiskSpec> disks{colored_disk(external, true)};
    Rational weight = 1;
    Exponent coupling_exp(static_cast<size_t>(num_couplings), 0);
    for (int i = 0; i < nt; ++i) {
      const auto& t = types[static_cast<size_t>(i)];
      if (t.coupling < 0 || t.coupling >= num_couplings) throw DimensionError("vertex coupling index out of range");
      for (int c = 0; c < r[static_cast<size_t>(i)]; ++c) disks.push_back(colored_disk(t.diagram, false));
      weight /= factorial(r[static_cast<size_t>(i)]);
      coupling_exp[static_cast<size_t>(t.coupling)] += r[static_cast<size_t>(i)];
    }
    enumerate_configurations(disks, shaded, counts, false, stats, [&](const std::vector<int>& loops) {
      result[coupling_exp][{loops[0], loops[1]}] += weight;
    });
  }
  return result;
}

FloatSeries evaluate_stitched(const StitchedSeries& s, int num_couplings, int max_order, double delta_r,
                              double delta_b) {
  FloatSeries out(num_couplings, max_order);
  for (const auto& [e, poly] : s) {
    double v = 0.0;
    for (const auto& [lk, c] : poly)
      v += rational_to_double(c) * std::pow(delta_r, lk.first) * std::pow(delta_b, lk.second);
    out.add_to(e, v);
  }
  return out;
}

DeltaPoly strip_configurations(int p, int n, int l, int k, EnumerationStats* stats) {
  if (p < 0 || n < 0 || l < 0 || k < 0) throw std::invalid_argument("negative strip-configuration count");
  // Colours: 0 strings (shaded), 1 strips in unshaded regions, 2 strips in shaded regions.
  std::vector<DiskSpec> disks;
  DiskSpec ext;
  ext.external = true;
  for (int i = 0; i < 2 * n; ++i) {
    ext.partner.push_back(i ^ 1);
    ext.label.push_back(1 - (i % 2));
    ext.color.push_back(0);
  }
  for (int j = 0; j < p; ++j) {
    ext.partner.push_back(-1);
    ext.label.push_back(0);
    ext.color.push_back(1);
  }
  disks.push_back(ext);
  auto half_vertex = [](bool shaded_region) {
    DiskSpec h;
    h.partner = {-1, 2, 1};
    h.color = {shaded_region ? 2 : 1, 0, 0};
    // "+:(1,2)" for an unshaded strip region, "-:(1,2)" for a shaded one.
    h.label = shaded_region ? std::vector<int>{0, 1, 0} : std::vector<int>{0, 0, 1};
    return h;
  };
  for (int i = 0; i < l; ++i) disks.push_back(half_vertex(false));
  for (int i = 0; i < k; ++i) disks.push_back(half_vertex(true));
  std::map<int, long> by_loops;
  enumerate_configurations(disks, {true, false, false}, {true, false, false}, false, stats,
                           [&](const std::vector<int>& loops) { ++by_loops[loops[0]]; });
  DeltaPoly v;
  for (auto [lc, c] : by_loops) v += DeltaPoly::monomial(lc, Rational(c));
  return v;
}

namespace {

Rational binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  return factorial(n) / (factorial(k) * factorial(n - k));
}

}  // namespace

namespace {

using StripMemo = std::map<std::array<int, 4>, DeltaPoly>;

DeltaPoly strip_recurrence_memo(int p, int n, int l, int k, StripMemo& memo) {
  if (p < 0 || n < 0 || l < 0 || k < 0) return {};
  std::array<int, 4> key{p, n, l, k};
  if (auto it = memo.find(key); it != memo.end()) return it->second;
  DeltaPoly total;
  if (p == 0) {
    total = strip_configurations(0, n, l, k);
  } else {
    for (int p1 = 0; p1 <= p - 2; ++p1)
      for (int l1 = 0; l1 <= l; ++l1)
        for (int k1 = 0; k1 <= k; ++k1) {
          DeltaPoly inner = strip_recurrence_memo(p1, 0, l1, k1, memo);
          if (inner.is_zero()) continue;
          DeltaPoly outer = strip_recurrence_memo(p - p1 - 2, n, l - l1, k - k1, memo);
          if (outer.is_zero()) continue;
          total += inner * outer * DeltaPoly(binomial(k, k1) * binomial(l, l1));
        }
    if (l > 0) total += DeltaPoly(Rational(l)) * strip_recurrence_memo(p - 1, n + 1, l - 1, k, memo);
  }
  memo[key] = total;
  return total;
}

}  // namespace

DeltaPoly strip_recurrence(int p, int n, int l, int k) {
  StripMemo memo;
  return strip_recurrence_memo(p, n, l, k, memo);
}

}  // namespace looplab
