#ifndef GPELAB_SNAPSHOT_HPP
#define GPELAB_SNAPSHOT_HPP

#include <map>
#include <string>

#include "gpelab/fem.hpp"

namespace gpelab {

/// State snapshot: a text header describing the mesh, creation parameters and
/// a content checksum, followed by the coefficients as interleaved
/// real/imaginary little-endian doubles.
struct Snapshot {
  double a = 0;
  double b = 0;
  std::size_t n_elements = 0;
  int order = 1;
  double time = 0;
  std::map<std::string, std::string> extras; // free-form metadata
  CVec coefficients;

  FESpace space() const { return FESpace(uniform_mesh(a, b, n_elements), order); }
  FEFunction function() const { return FEFunction(space(), coefficients); }
};

Snapshot make_snapshot(const FEFunction& u, double time);

void write_snapshot(const std::string& path, const Snapshot& snap);
Snapshot read_snapshot(const std::string& path);

/// FNV-1a checksum of a file's bytes (for run manifests).
std::uint64_t file_checksum(const std::string& path);

} // namespace gpelab

#endif
