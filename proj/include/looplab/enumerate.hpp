#pragma once

#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "looplab/series.hpp"
#include "looplab/tl.hpp"

namespace looplab {

struct VertexType {
  TLDiagram diagram;
  int coupling = 0;  // index i of t_i
};

struct ConfigurationProblem {
  std::optional<TLDiagram> external;  // empty optional: vacuum (free energy)
  std::vector<VertexType> vertex_types;
  int num_couplings = 0;
  int max_order = 0;
};

struct EnumerationStats {
  long matchings_completed = 0;  // complete shading-consistent matchings reached
  long accepted = 0;
  long shading_verified = 0;  // accepted configurations whose shading was re-verified
  long euler_verified = 0;    // accepted configurations with V - E + F = 2
  long rejected_disconnected = 0;
  long rejected_genus = 0;
  std::map<Exponent, long> accepted_by_order;  // keyed by per-type copy counts
};

// One disk of a configuration: the external disk or a labelled vertex copy.
// partner[i] is the internal pairing (-1 for points without one, e.g. strip
// ends), colour[i] the string species, label[i] the shading label.
struct DiskSpec {
  std::vector<int> partner;
  std::vector<int> label;
  std::vector<int> color;
  bool external = false;
};

// Enumerates matchings of all boundary points that join points of equal
// colour and (for shaded colours) opposite labels, keeping those that are
// connected and genus 0. The callback receives the number of closed loops
// per colour (colours with counts_loops = false report 0).
void enumerate_configurations(const std::vector<DiskSpec>& disks, const std::vector<bool>& color_shaded,
                              const std::vector<bool>& counts_loops, bool vacuum, EnumerationStats* stats,
                              const std::function<void(const std::vector<int>&)>& on_accept);

DiskSpec disk_from_diagram(const TLDiagram& d, bool external);

ExactSeries observable_series(const ConfigurationProblem& prob, EnumerationStats* stats = nullptr);
ExactSeries free_energy_series(const std::vector<VertexType>& types, int num_couplings, int max_order,
                               EnumerationStats* stats = nullptr);

// Polynomial in two loop fugacities (δ_r, δ_b): coefficient by loop counts.
using BiDeltaPoly = std::map<std::pair<int, int>, Rational>;
using StitchedSeries = std::map<Exponent, BiDeltaPoly, GradedLess>;

struct ColoredVertexType {
  ColoredTLDiagram diagram;
  int coupling = 0;
};

StitchedSeries stitched_observable_series(const ColoredTLDiagram& external,
                                          const std::vector<ColoredVertexType>& types, int num_couplings,
                                          int max_order, EnumerationStats* stats = nullptr);
FloatSeries evaluate_stitched(const StitchedSeries& s, int num_couplings, int max_order, double delta_r,
                              double delta_b);

// Number (weighted by δ^{#loops}) of configurations over B_{n,p}: n
// unnested cups with shaded interior followed by p strips in the unshaded
// region, using l labelled unshaded and k labelled shaded half-vertices
// (one cup plus one strip each).
DeltaPoly strip_configurations(int p, int n, int l, int k, EnumerationStats* stats = nullptr);
// C(p,n,l,k) from the gluing recurrence; p = 0 values come from
// strip_configurations.
DeltaPoly strip_recurrence(int p, int n, int l, int k);

}  // namespace looplab
