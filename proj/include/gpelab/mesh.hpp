#ifndef GPELAB_MESH_HPP
#define GPELAB_MESH_HPP

#include <cstddef>
#include <vector>

#include "gpelab/util.hpp"

namespace gpelab {

/// Uniform partition of (a, b) into n_elements equal intervals. Element j is
/// [a + j h, a + (j+1) h]; nodes are numbered 0..n_elements left to right and
/// only interior nodes carry degrees of freedom (homogeneous Dirichlet).
struct Mesh1D {
  double a = 0;
  double b = 1;
  std::size_t n_elements = 2;

  double h() const { return (b - a) / static_cast<double>(n_elements); }
  double node(std::size_t i) const { return a + static_cast<double>(i) * h(); }
  std::size_t n_interior() const { return n_elements - 1; }
};

Mesh1D uniform_mesh(double a, double b, std::size_t n_elements);

/// Nested coarse/fine pair over the same interval: fine refines coarse by an
/// integer factor, so every coarse node is also a fine node.
struct RefinementPair {
  Mesh1D coarse;
  Mesh1D fine;
  std::size_t factor = 2;
};

RefinementPair refinement_pair(const Mesh1D& coarse, const Mesh1D& fine);

/// Inclusive contiguous element (or dof) index range.
struct IndexRange {
  std::size_t lo = 0;
  std::size_t hi = 0;
  std::size_t size() const { return hi - lo + 1; }
  bool contains(std::size_t i) const { return i >= lo && i <= hi; }
};

/// One-dimensional patch of element K grown by `layers` neighbor layers on
/// each side, clipped at the domain boundary.
IndexRange element_patch(const Mesh1D& mesh, std::size_t K, std::size_t layers);

/// Fine element range covered by a coarse element range.
IndexRange fine_range(const RefinementPair& pair, IndexRange coarse_elements);

/// Coordinates of the interior nodes, in increasing order. Interior node i
/// (dof index i) sits at mesh node i+1.
std::vector<double> interior_nodes(const Mesh1D& mesh);

} // namespace gpelab

#endif
