#pragma once

#include <string>
#include <vector>

#include "looplab/errors.hpp"

namespace looplab {

// Shaded Temperley-Lieb box: a non-crossing pairing of 2k boundary points,
// numbered clockwise from the marked segment. sign = +1 when the marked
// segment borders an unshaded region, -1 otherwise. Points are 0-based
// internally and 1-based in the text notation "+:(1,2)(3,6)(4,5)".
class TLDiagram {
 public:
  TLDiagram() = default;
  TLDiagram(std::vector<int> partner, int sign);

  static TLDiagram empty(int sign = +1) { return TLDiagram({}, sign); }
  static TLDiagram cup(int sign = +1) { return TLDiagram({1, 0}, sign); }
  // n unnested cups (1,2)(3,4)...
  static TLDiagram unnested(int n, int sign = +1);
  // n nested strings (1,2n)(2,2n-1)...
  static TLDiagram nested(int n, int sign = +1);
  static TLDiagram parse(const std::string& text);

  int num_points() const { return static_cast<int>(partner_.size()); }
  int num_strings() const { return num_points() / 2; }
  int sign() const { return sign_; }
  int partner(int i) const { return partner_[static_cast<size_t>(i)]; }
  const std::vector<int>& pairing() const { return partner_; }

  // Shading label of boundary point i: 0 when the segment preceding it is
  // unshaded. Strings join points of opposite labels.
  int label(int i) const { return (i + (sign_ < 0 ? 1 : 0)) % 2; }

  std::string to_string() const;

  friend bool operator==(const TLDiagram& a, const TLDiagram& b) {
    return a.sign_ == b.sign_ && a.partner_ == b.partner_;
  }
  friend bool operator!=(const TLDiagram& a, const TLDiagram& b) { return !(a == b); }
  friend bool operator<(const TLDiagram& a, const TLDiagram& b) {
    if (a.sign_ != b.sign_) return a.sign_ < b.sign_;
    return a.partner_ < b.partner_;
  }

 private:
  std::vector<int> partner_;
  int sign_ = +1;
};

bool is_noncrossing_pairing(const std::vector<int>& partner);

std::vector<TLDiagram> generate_tl(int k, int sign = +1);

// Number of closed loops when b is reflected and glued onto a.
int closure_loops(const TLDiagram& a, const TLDiagram& b);

TLDiagram wedge(const TLDiagram& a, const TLDiagram& b);

// Two-colour superposition: each boundary point is red (0) or black (1); the
// restriction to each colour is a shaded TL diagram. Red and black strings
// may cross each other.
struct ColoredTLDiagram {
  std::vector<int> color;
  TLDiagram red;
  TLDiagram black;

  int num_points() const { return static_cast<int>(color.size()); }
  // Partner of point i in the full 2n-point numbering.
  int partner(int i) const;
  // Shading label of point i inside its colour class.
  int label(int i) const;
  std::string to_string() const;
};

std::vector<ColoredTLDiagram> stitch_product_diagrams(int n, int red_sign = +1, int black_sign = +1);

}  // namespace looplab
