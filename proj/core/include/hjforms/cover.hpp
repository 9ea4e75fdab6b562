#pragma once

#include "hjforms/forms.hpp"
#include "hjforms/space.hpp"

#include <Eigen/Dense>

#include <vector>

namespace hjforms {

/// Deck coordinate h in Z^k.
using Sheet = Eigen::VectorXi;

/// Truncated covering graph on which a cocycle gains a primitive.
///
/// Sheets are the h in [-H, H]^k, enumerated lexicographically; lifted vertex
/// (x, h) has index sheet_index(h) * n + x. Deck directions are the spanning
/// tree chords with nonzero period, so an exact cocycle gives k = 0 and a
/// single sheet. A deck chord a -> b joins (a, h) to (b, h + e_j); every other
/// edge stays inside its sheet.
class CoverWindow {
 public:
  /// Throws ValidationError for H < 0, beta <= 0 or a cocycle of the wrong size.
  static CoverWindow build(const GraphSpace& base, const Cocycle& omega, int h_max, double beta);

  const GraphSpace& base() const { return base_; }
  /// Lifted graph, carrying the lifted measure m~ (not normalized).
  const GraphSpace& lifted() const { return lifted_; }
  int rank() const { return static_cast<int>(deck_chords_.size()); }
  int h_max() const { return h_max_; }
  double beta() const { return beta_; }
  /// Periods of the deck chords, in deck-direction order.
  const Field& periods() const { return periods_; }
  /// Base edge index of each deck direction.
  const std::vector<int>& deck_chords() const { return deck_chords_; }
  const CycleBasis& basis() const { return basis_; }

  int num_sheets() const { return num_sheets_; }
  int num_vertices() const { return lifted_.num_vertices(); }

  /// -1 when h lies outside the window.
  int index(int x, const Sheet& h) const;
  int project(int v) const { return v % n_; }
  Sheet sheet(int v) const;
  /// Base edge under each lifted edge.
  int base_edge(int lifted_edge) const { return base_edge_[static_cast<std::size_t>(lifted_edge)]; }

  /// phi(x, h) = f0(x) + h . P.
  const Field& phi() const { return phi_; }
  /// m~(x, h) = m(x).
  const Field& lifted_measure() const { return lifted_.measure(); }
  /// m^ = e^{2 beta phi} m~.
  Field weighted_measure() const;

  /// Lifted indices of the zero sheet, in base vertex order.
  std::vector<int> fundamental_domain() const;
  /// T_shift(v), or -1 when the image leaves the window.
  int translate(int v, const Sheet& shift) const;
  /// True when some deck chord at v points out of the window.
  bool truncated(int v) const { return truncated_[static_cast<std::size_t>(v)] != 0; }

  /// Unique lift starting at (path.front(), start). Throws WindowExceeded.
  VertexPath lift_path(const VertexPath& path, const Sheet& start) const;

  /// omega composed with the projection, as a cocycle on the lifted graph.
  Cocycle pullback(const Cocycle& omega) const;
  /// max over lifted edges of |d phi - omega o sigma|.
  double exactness_defect(const Cocycle& omega) const;

  /// Lifts the values of a base field to every sheet.
  Field lift_field(const Field& f) const;

  /// Throws WindowExceeded when a path of `steps` moves from the zero sheet
  /// can reach a truncated vertex and then need the missing edge.
  void require_reach(int steps) const;

 private:
  CoverWindow(const GraphSpace& base, GraphSpace lifted) : base_(base), lifted_(std::move(lifted)) {}

  GraphSpace base_;
  GraphSpace lifted_;
  int n_ = 0;
  int h_max_ = 0;
  double beta_ = 1.0;
  int num_sheets_ = 1;
  CycleBasis basis_;
  std::vector<int> deck_chords_;
  std::vector<int> deck_of_edge_;  ///< deck direction per base edge, -1 otherwise
  Field periods_;
  Field phi_;
  std::vector<int> base_edge_;
  std::vector<char> truncated_;
};

}  // namespace hjforms
