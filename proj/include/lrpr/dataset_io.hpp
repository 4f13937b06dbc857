#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lrpr/core.hpp"
#include "lrpr/datagen.hpp"

namespace lrpr {

// On-disk dataset description. Blobs are little-endian 64-bit floats,
// column-major, with complex values stored as (real, imaginary) pairs:
//   a: M consecutive column-major P x N complex blocks
//   y: real P x M
//   x: complex N x M (optional ground truth)
struct DatasetManifest {
  int format_version = 1;
  Index n = 0, m = 0, p = 0;
  std::optional<int> r_true;
  std::uint64_t seed = 0;
  std::optional<double> beta_true;
  std::string a_file = "a.bin";
  std::string y_file = "y.bin";
  std::optional<std::string> x_file;
};

namespace detail {

inline void append_f64le(std::string& buf, const double* data, size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    buf.append(reinterpret_cast<const char*>(data), count * sizeof(double));
  } else {
    for (size_t k = 0; k < count; ++k) {
      const auto bits = std::bit_cast<std::uint64_t>(data[k]);
      for (int i = 0; i < 8; ++i)
        buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
    }
  }
}

inline void parse_f64le(const char* buf, double* out, size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(out, buf, count * sizeof(double));
  } else {
    for (size_t k = 0; k < count; ++k) {
      std::uint64_t bits = 0;
      for (int i = 0; i < 8; ++i)
        bits |= static_cast<std::uint64_t>(
                    static_cast<unsigned char>(buf[8 * k + i]))
                << (8 * i);
      out[k] = std::bit_cast<double>(bits);
    }
  }
}

inline void write_blob(const std::filesystem::path& path,
                       const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

inline std::string read_blob_exact(const std::filesystem::path& path,
                                   std::uintmax_t expected_bytes) {
  std::error_code ec;
  const auto actual = std::filesystem::file_size(path, ec);
  if (ec) throw IoError("cannot stat: " + path.string());
  if (actual != expected_bytes)
    throw LengthMismatch(path.string() + ": expected " +
                         std::to_string(expected_bytes) + " bytes, found " +
                         std::to_string(actual));
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path.string());
  std::string bytes(static_cast<size_t>(expected_bytes), '\0');
  f.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("read failed: " + path.string());
  return bytes;
}

}  // namespace detail

// Writes the manifest (JSON) plus the binary blobs next to it.
inline void write_dataset(const MeasurementSet& ms,
                          const std::optional<SignalMatrix>& x,
                          const std::filesystem::path& manifest_path,
                          std::uint64_t seed = 0) {
  ms.validate();
  if (x && (x->rows() != ms.n || x->cols() != ms.m))
    throw Error("write_dataset: ground truth shape mismatch");

  const auto dir = manifest_path.parent_path();
  if (!dir.empty()) std::filesystem::create_directories(dir);

  DatasetManifest man;
  man.n = ms.n;
  man.m = ms.m;
  man.p = ms.p;
  man.seed = seed;
  man.beta_true = ms.beta_true;
  if (x) {
    man.x_file = "x.bin";
    man.r_true = x->rank_hint;
  }

  std::string a_bytes;
  a_bytes.reserve(static_cast<size_t>(ms.m) * ms.p * ms.n * 16);
  for (const auto& am : ms.a)
    detail::append_f64le(a_bytes,
                         reinterpret_cast<const double*>(am.data()),
                         static_cast<size_t>(am.size()) * 2);
  detail::write_blob(dir / man.a_file, a_bytes);

  std::string y_bytes;
  detail::append_f64le(y_bytes, ms.y.data(), static_cast<size_t>(ms.y.size()));
  detail::write_blob(dir / man.y_file, y_bytes);

  if (x) {
    std::string x_bytes;
    detail::append_f64le(x_bytes,
                         reinterpret_cast<const double*>(x->x.data()),
                         static_cast<size_t>(x->x.size()) * 2);
    detail::write_blob(dir / *man.x_file, x_bytes);
  }

  nlohmann::json j;
  j["format_version"] = man.format_version;
  j["n"] = man.n;
  j["m"] = man.m;
  j["p"] = man.p;
  j["seed"] = man.seed;
  if (man.r_true) j["r_true"] = *man.r_true;
  if (man.beta_true) j["beta_true"] = *man.beta_true;
  j["files"]["a"] = man.a_file;
  j["files"]["y"] = man.y_file;
  if (man.x_file) j["files"]["x"] = *man.x_file;

  std::ofstream f(manifest_path, std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + manifest_path.string());
  f << j.dump(2) << '\n';
  if (!f) throw IoError("write failed: " + manifest_path.string());
}

struct Dataset {
  MeasurementSet ms;
  std::optional<SignalMatrix> x;
  DatasetManifest manifest;
};

// Exact inverse of write_dataset. Blob byte lengths must match the manifest
// dimensions exactly.
inline Dataset read_dataset(const std::filesystem::path& manifest_path) {
  std::ifstream f(manifest_path);
  if (!f) throw IoError("cannot open: " + manifest_path.string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("invalid manifest JSON (" + manifest_path.string() +
                  "): " + e.what());
  }

  Dataset ds;
  auto& man = ds.manifest;
  try {
    man.format_version = j.at("format_version").get<int>();
    if (man.format_version != 1)
      throw UnsupportedVersion("manifest format_version " +
                               std::to_string(man.format_version) +
                               " is not supported");
    man.n = j.at("n").get<Index>();
    man.m = j.at("m").get<Index>();
    man.p = j.at("p").get<Index>();
    man.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("r_true")) man.r_true = j["r_true"].get<int>();
    if (j.contains("beta_true")) man.beta_true = j["beta_true"].get<double>();
    man.a_file = j.at("files").at("a").get<std::string>();
    man.y_file = j.at("files").at("y").get<std::string>();
    if (j.at("files").contains("x"))
      man.x_file = j["files"]["x"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("manifest field error (" + manifest_path.string() +
                  "): " + e.what());
  }
  if (man.n < 1 || man.m < 1 || man.p < 1)
    throw IoError("manifest dimensions must be positive: " +
                  manifest_path.string());

  const auto dir = manifest_path.parent_path();
  auto& ms = ds.ms;
  ms.n = man.n;
  ms.m = man.m;
  ms.p = man.p;
  ms.beta_true = man.beta_true;

  const size_t per_block = static_cast<size_t>(man.p) * man.n * 2;
  const auto a_bytes = detail::read_blob_exact(
      dir / man.a_file,
      static_cast<std::uintmax_t>(man.m) * per_block * sizeof(double));
  ms.a.resize(man.m);
  for (Index m = 0; m < man.m; ++m) {
    ms.a[m].resize(man.p, man.n);
    detail::parse_f64le(
        a_bytes.data() + static_cast<size_t>(m) * per_block * sizeof(double),
        reinterpret_cast<double*>(ms.a[m].data()), per_block);
  }

  const auto y_bytes = detail::read_blob_exact(
      dir / man.y_file,
      static_cast<std::uintmax_t>(man.p) * man.m * sizeof(double));
  ms.y.resize(man.p, man.m);
  detail::parse_f64le(y_bytes.data(), ms.y.data(),
                      static_cast<size_t>(man.p) * man.m);

  if (man.x_file) {
    const auto x_bytes = detail::read_blob_exact(
        dir / *man.x_file,
        static_cast<std::uintmax_t>(man.n) * man.m * 2 * sizeof(double));
    SignalMatrix x;
    x.x.resize(man.n, man.m);
    detail::parse_f64le(x_bytes.data(), reinterpret_cast<double*>(x.x.data()),
                        static_cast<size_t>(man.n) * man.m * 2);
    x.rank_hint = man.r_true;
    ds.x = std::move(x);
  }

  ms.validate();
  return ds;
}

}  // namespace lrpr
