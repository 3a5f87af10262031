#include "gpelab/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace gpelab {

Mesh1D uniform_mesh(double a, double b, std::size_t n_elements) {
  require(b > a, "uniform_mesh: b must exceed a");
  require(n_elements >= 2, "uniform_mesh: need at least 2 elements");
  return Mesh1D{a, b, n_elements};
}

RefinementPair refinement_pair(const Mesh1D& coarse, const Mesh1D& fine) {
  require(coarse.a == fine.a && coarse.b == fine.b,
          "refinement_pair: meshes cover different intervals");
  require(fine.n_elements > coarse.n_elements,
          "refinement_pair: fine mesh must be strictly finer");
  require(fine.n_elements % coarse.n_elements == 0,
          "refinement_pair: fine mesh is not a refinement of the coarse mesh");
  return RefinementPair{coarse, fine, fine.n_elements / coarse.n_elements};
}

IndexRange element_patch(const Mesh1D& mesh, std::size_t K, std::size_t layers) {
  if (K >= mesh.n_elements) {
    std::ostringstream os;
    os << "element_patch: element " << K << " outside mesh with "
       << mesh.n_elements << " elements";
    throw Error(os.str());
  }
  const std::size_t lo = K > layers ? K - layers : 0;
  const std::size_t hi = std::min(mesh.n_elements - 1, K + layers);
  return IndexRange{lo, hi};
}

IndexRange fine_range(const RefinementPair& pair, IndexRange coarse_elements) {
  require(coarse_elements.lo <= coarse_elements.hi &&
              coarse_elements.hi < pair.coarse.n_elements,
          "fine_range: invalid coarse element range");
  return IndexRange{pair.factor * coarse_elements.lo,
                    pair.factor * (coarse_elements.hi + 1) - 1};
}

std::vector<double> interior_nodes(const Mesh1D& mesh) {
  std::vector<double> x(mesh.n_interior());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = mesh.node(i + 1);
  return x;
}

} // namespace gpelab
