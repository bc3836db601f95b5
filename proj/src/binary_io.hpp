#pragma once

// Little helpers for the library's binary containers. Values are written in
// host byte order; all supported targets are little-endian.

#include "ma2gcn/error.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <type_traits>
#include <vector>

namespace ma2gcn::io {

static_assert(std::endian::native == std::endian::little, "binary containers assume little-endian");

template <typename T>
void write_pod(std::ostream &os, const T &v) {
  static_assert(std::is_trivially_copyable_v<T>);
  os.write(reinterpret_cast<const char *>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream &is) {
  static_assert(std::is_trivially_copyable_v<T>);
  T v{};
  if (!is.read(reinterpret_cast<char *>(&v), sizeof(T)))
    throw Error(ErrorKind::IoError, "truncated binary file");
  return v;
}

inline void write_doubles(std::ostream &os, const std::vector<double> &v) {
  os.write(reinterpret_cast<const char *>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
}

inline std::vector<double> read_doubles(std::istream &is, std::size_t n) {
  std::vector<double> v(n);
  if (!is.read(reinterpret_cast<char *>(v.data()), static_cast<std::streamsize>(n * sizeof(double))))
    throw Error(ErrorKind::IoError, "truncated binary file");
  return v;
}

inline void write_string(std::ostream &os, const std::string &s) {
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream &is) {
  const auto n = read_pod<std::uint32_t>(is);
  std::string s(n, '\0');
  if (!is.read(s.data(), n))
    throw Error(ErrorKind::IoError, "truncated binary file");
  return s;
}

inline std::ofstream open_out(const std::string &path, bool binary = true) {
  std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
  if (!os)
    throw Error(ErrorKind::IoError, "cannot write " + path);
  return os;
}

inline std::ifstream open_in(const std::string &path, bool binary = true) {
  std::ifstream is(path, binary ? std::ios::binary : std::ios::in);
  if (!is)
    throw Error(ErrorKind::IoError, "cannot read " + path);
  return is;
}

} // namespace ma2gcn::io
