#include "gpelab/snapshot.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace gpelab {

namespace {

void write_le_f64(std::ostream& os, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 8);
}

double read_le_f64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

std::uint64_t payload_checksum(const CVec& coeffs) {
  std::uint64_t h = fnv1a(nullptr, 0);
  for (const cplx& c : coeffs) {
    const double re = c.real(), im = c.imag();
    h = fnv1a(&re, 8, h);
    h = fnv1a(&im, 8, h);
  }
  return h;
}

} // namespace

Snapshot make_snapshot(const FEFunction& u, double time) {
  Snapshot s;
  s.a = u.space.mesh().a;
  s.b = u.space.mesh().b;
  s.n_elements = u.space.mesh().n_elements;
  s.order = u.space.order();
  s.time = time;
  s.coefficients = u.coefficients;
  return s;
}

void write_snapshot(const std::string& path, const Snapshot& snap) {
  std::ofstream os(path, std::ios::binary);
  require(os.good(), "write_snapshot: cannot open '" + path + "'");
  os << "gpelab-snapshot v1\n";
  char line[256];
  std::snprintf(line, sizeof(line), "a %.17g\nb %.17g\n", snap.a, snap.b);
  os << line;
  os << "n_elements " << snap.n_elements << "\n";
  os << "order " << snap.order << "\n";
  std::snprintf(line, sizeof(line), "time %.17g\n", snap.time);
  os << line;
  for (const auto& [k, v] : snap.extras) {
    require(k.find(' ') == std::string::npos, "write_snapshot: key contains space");
    os << "x:" << k << " " << v << "\n";
  }
  std::snprintf(line, sizeof(line), "checksum %016llx\n",
                static_cast<unsigned long long>(payload_checksum(snap.coefficients)));
  os << line;
  os << "data " << snap.coefficients.size() << "\n";
  for (const cplx& c : snap.coefficients) {
    write_le_f64(os, c.real());
    write_le_f64(os, c.imag());
  }
  require(os.good(), "write_snapshot: write failed for '" + path + "'");
}

Snapshot read_snapshot(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), "read_snapshot: cannot open '" + path + "'");
  std::string magic;
  std::getline(is, magic);
  require(magic == "gpelab-snapshot v1", "read_snapshot: bad header in '" + path + "'");
  Snapshot s;
  std::uint64_t checksum = 0;
  std::size_t count = 0;
  std::string key;
  while (is >> key) {
    if (key == "a") is >> s.a;
    else if (key == "b") is >> s.b;
    else if (key == "n_elements") is >> s.n_elements;
    else if (key == "order") is >> s.order;
    else if (key == "time") is >> s.time;
    else if (key == "checksum") is >> std::hex >> checksum >> std::dec;
    else if (key.rfind("x:", 0) == 0) {
      std::string value;
      is >> value;
      s.extras[key.substr(2)] = value;
    } else if (key == "data") {
      is >> count;
      is.ignore(1);
      break;
    } else {
      throw Error("read_snapshot: unknown header key '" + key + "' in '" + path + "'");
    }
  }
  require(is.good(), "read_snapshot: truncated header in '" + path + "'");
  s.coefficients.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double re = read_le_f64(is);
    const double im = read_le_f64(is);
    s.coefficients[i] = cplx(re, im);
  }
  require(is.good(), "read_snapshot: truncated payload in '" + path + "'");
  require(payload_checksum(s.coefficients) == checksum,
          "read_snapshot: checksum mismatch in '" + path + "'");
  return s;
}

std::uint64_t file_checksum(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), "file_checksum: cannot open '" + path + "'");
  std::uint64_t h = fnv1a(nullptr, 0);
  char buf[65536];
  while (is.read(buf, sizeof(buf)) || is.gcount() > 0)
    h = fnv1a(buf, static_cast<std::size_t>(is.gcount()), h);
  return h;
}

} // namespace gpelab
