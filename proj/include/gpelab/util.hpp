#ifndef GPELAB_UTIL_HPP
#define GPELAB_UTIL_HPP

#include <complex>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace gpelab {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;
using RVec = std::vector<double>;

/// Error type carrying a human-readable context message. Every failure in the
/// library surfaces as one of these; the CLI translates them to exit codes.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

// FNV-1a 64-bit, used for content checksums in snapshot and cache files.
inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t seed = 0xcbf29ce484222325ull) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

/// Static-chunked parallel loop. Chunks are assigned deterministically, so
/// results written to disjoint slots do not depend on the thread count.
inline void parallel_for(std::size_t n, unsigned n_threads,
                         const std::function<void(std::size_t, std::size_t)>& body) {
  if (n == 0) return;
  if (n_threads <= 1 || n == 1) {
    body(0, n);
    return;
  }
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(n_threads, n));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([=, &body] { body(lo, hi); });
  }
  for (auto& t : pool) t.join();
}

/// Least-squares slope of y against x (used for convergence-order fits).
inline double least_squares_slope(const std::vector<double>& x,
                                  const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2,
          "least_squares_slope: need at least two points");
  double xm = 0, ym = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xm += x[i];
    ym += y[i];
  }
  xm /= static_cast<double>(x.size());
  ym /= static_cast<double>(x.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - xm) * (y[i] - ym);
    sxx += (x[i] - xm) * (x[i] - xm);
  }
  require(sxx > 0, "least_squares_slope: degenerate abscissae");
  return sxy / sxx;
}

} // namespace gpelab

#endif
