#pragma once

// PointCloud persistence.
//
// Binary layout (little-endian):
//   "JFLD" | version u32 | S u64 | N u64 | K u64 | S*N f64 points | S*K f64 params
// CSV layout: header dim_0..dim_{N-1},param_0..param_{K-1}, one sample per row.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "jointfold/core_geometry.hpp"

namespace jointfold {

inline constexpr std::array<char, 4> kCloudMagic{'J', 'F', 'L', 'D'};
inline constexpr std::uint32_t kCloudFormatVersion = 1;

namespace detail {

template <class T>
T to_little_endian(T value) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  } else {
    return value;
  }
}

template <class T>
void put_le(std::ostream& out, T value) {
  const T le = to_little_endian(value);
  out.write(reinterpret_cast<const char*>(&le), sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw InputError("cloud file truncated");
  return to_little_endian(value);
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline void write_cloud_binary(std::ostream& out, const PointCloud& cloud) {
  cloud.validate();
  out.write(kCloudMagic.data(), kCloudMagic.size());
  detail::put_le<std::uint32_t>(out, kCloudFormatVersion);
  detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(cloud.size()));
  detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(cloud.ambient_dim()));
  detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(cloud.param_dim()));
  for (Index i = 0; i < cloud.points.size(); ++i) detail::put_le(out, cloud.points.data()[i]);
  for (Index i = 0; i < cloud.params.size(); ++i) detail::put_le(out, cloud.params.data()[i]);
  if (!out) throw InputError("failed writing cloud");
}

inline PointCloud read_cloud_binary(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kCloudMagic) throw InputError("not a JFLD cloud file (bad magic)");
  const auto version = detail::get_le<std::uint32_t>(in);
  if (version != kCloudFormatVersion)
    throw InputError("unsupported JFLD version " + std::to_string(version));
  const auto s = detail::get_le<std::uint64_t>(in);
  const auto n = detail::get_le<std::uint64_t>(in);
  const auto k = detail::get_le<std::uint64_t>(in);
  constexpr std::uint64_t kLimit = std::uint64_t{1} << 40;
  if (s == 0 || n == 0 || s > kLimit || n > kLimit || k > kLimit || s * (n + k) > kLimit)
    throw InputError("JFLD header sizes out of range");
  PointCloud cloud;
  cloud.points.resize(static_cast<Index>(s), static_cast<Index>(n));
  cloud.params.resize(static_cast<Index>(s), static_cast<Index>(k));
  for (Index i = 0; i < cloud.points.size(); ++i)
    cloud.points.data()[i] = detail::get_le<double>(in);
  for (Index i = 0; i < cloud.params.size(); ++i)
    cloud.params.data()[i] = detail::get_le<double>(in);
  cloud.validate();
  return cloud;
}

inline void save_cloud(const std::string& path, const PointCloud& cloud) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open " + path);
  write_cloud_binary(out, cloud);
}

inline PointCloud load_cloud(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  return read_cloud_binary(in);
}

inline void write_cloud_csv(std::ostream& out, const PointCloud& cloud) {
  cloud.validate();
  for (Index c = 0; c < cloud.ambient_dim(); ++c) out << (c ? "," : "") << "dim_" << c;
  for (Index c = 0; c < cloud.param_dim(); ++c) out << ",param_" << c;
  out << '\n';
  for (Index i = 0; i < cloud.size(); ++i) {
    for (Index c = 0; c < cloud.ambient_dim(); ++c)
      out << (c ? "," : "") << detail::format_double(cloud.points(i, c));
    for (Index c = 0; c < cloud.param_dim(); ++c)
      out << ',' << detail::format_double(cloud.params(i, c));
    out << '\n';
  }
}

inline PointCloud read_cloud_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty cloud CSV");
  Index n = 0, k = 0;
  {
    std::stringstream header(line);
    std::string field;
    while (std::getline(header, field, ',')) {
      if (!field.empty() && field.back() == '\r') field.pop_back();
      if (field == "dim_" + std::to_string(n) && k == 0) {
        ++n;
      } else if (field == "param_" + std::to_string(k)) {
        ++k;
      } else {
        throw InputError("unexpected CSV header field '" + field + "'");
      }
    }
  }
  if (n == 0) throw InputError("cloud CSV header has no dim_ columns");
  std::vector<double> values;
  Index rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::stringstream row(line);
    std::string field;
    Index count = 0;
    while (std::getline(row, field, ',')) {
      if (!field.empty() && field.back() == '\r') field.pop_back();
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(field, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != field.size())
        throw InputError("bad number '" + field + "' in cloud CSV row " + std::to_string(rows + 1));
      values.push_back(v);
      ++count;
    }
    if (count != n + k)
      throw InputError("cloud CSV row " + std::to_string(rows + 1) + " has " +
                       std::to_string(count) + " fields, expected " + std::to_string(n + k));
    ++rows;
  }
  PointCloud cloud;
  cloud.points.resize(rows, n);
  cloud.params.resize(rows, k);
  for (Index i = 0; i < rows; ++i) {
    for (Index c = 0; c < n; ++c) cloud.points(i, c) = values[static_cast<std::size_t>(i * (n + k) + c)];
    for (Index c = 0; c < k; ++c) cloud.params(i, c) = values[static_cast<std::size_t>(i * (n + k) + n + c)];
  }
  cloud.validate();
  return cloud;
}

}  // namespace jointfold
