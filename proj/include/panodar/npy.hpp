#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include "panodar/error.hpp"
#include "panodar/grid.hpp"

namespace panodar {

static_assert(std::endian::native == std::endian::little,
              "tensor interchange assumes a little-endian host");

namespace npy {

struct RawTensor {
  std::string descr;          // '<f4', '|u1' or '<u2'
  std::vector<size_t> shape;  // C-order
  std::vector<char> payload;  // raw little-endian bytes
};

namespace detail {

inline void fail(const std::filesystem::path& path, size_t offset, const std::string& what) {
  throw FormatError(path.string() + ": " + what + " (byte offset " + std::to_string(offset) + ")");
}

/// Writes the file atomically: a temp sibling is renamed into place only
/// after a complete write, so failures never leave partial output.
inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  const std::filesystem::path tmp =
      path.parent_path() / (path.filename().string() + ".tmp-" + std::to_string(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(tmp.string() + ": cannot open for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw FormatError(tmp.string() + ": write failed");
    }
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string() + ": cannot open");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

/// Extracts the quoted/keyed fields from the version 1.0 header dict.
/// Only the three mandated keys are recognized.
inline void parse_header_dict(const std::filesystem::path& path, const std::string& dict,
                              size_t dict_offset, std::string& descr, bool& fortran,
                              std::vector<size_t>& shape) {
  auto find_key = [&](const std::string& key) {
    const std::string quoted = "'" + key + "'";
    const size_t pos = dict.find(quoted);
    if (pos == std::string::npos) fail(path, dict_offset, "header dict missing key " + quoted);
    size_t colon = dict.find(':', pos + quoted.size());
    if (colon == std::string::npos) fail(path, dict_offset + pos, "malformed header dict");
    ++colon;
    while (colon < dict.size() && dict[colon] == ' ') ++colon;
    return colon;
  };

  size_t p = find_key("descr");
  if (p >= dict.size() || dict[p] != '\'') fail(path, dict_offset + p, "descr must be a string");
  const size_t close = dict.find('\'', p + 1);
  if (close == std::string::npos) fail(path, dict_offset + p, "unterminated descr string");
  descr = dict.substr(p + 1, close - p - 1);

  p = find_key("fortran_order");
  if (dict.compare(p, 4, "True") == 0) {
    fortran = true;
  } else if (dict.compare(p, 5, "False") == 0) {
    fortran = false;
  } else {
    fail(path, dict_offset + p, "fortran_order must be True or False");
  }

  p = find_key("shape");
  if (p >= dict.size() || dict[p] != '(') fail(path, dict_offset + p, "shape must be a tuple");
  const size_t close_paren = dict.find(')', p);
  if (close_paren == std::string::npos) fail(path, dict_offset + p, "unterminated shape tuple");
  shape.clear();
  size_t q = p + 1;
  while (q < close_paren) {
    while (q < close_paren && (dict[q] == ' ' || dict[q] == ',')) ++q;
    if (q >= close_paren) break;
    size_t end = q;
    while (end < close_paren && dict[end] >= '0' && dict[end] <= '9') ++end;
    if (end == q) fail(path, dict_offset + q, "shape tuple holds a non-integer");
    shape.push_back(static_cast<size_t>(std::stoull(dict.substr(q, end - q))));
    q = end;
  }
}

}  // namespace detail

inline size_t element_size(const std::string& descr) {
  if (descr == "<f4") return 4;
  if (descr == "|u1") return 1;
  if (descr == "<u2") return 2;
  return 0;
}

/// Parses a version 1.0 file. Structural deviations are hard errors that
/// name the offending offset; big-endian or Fortran-order data is rejected.
inline RawTensor read_raw(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file(path);
  static constexpr char kMagic[6] = {'\x93', 'N', 'U', 'M', 'P', 'Y'};
  if (bytes.size() < 10 || std::memcmp(bytes.data(), kMagic, 6) != 0) {
    detail::fail(path, 0, "not an NPY file (bad magic)");
  }
  const uint8_t major = static_cast<uint8_t>(bytes[6]);
  const uint8_t minor = static_cast<uint8_t>(bytes[7]);
  if (major != 1 || minor != 0) {
    detail::fail(path, 6,
                 "unsupported NPY version " + std::to_string(major) + "." + std::to_string(minor) +
                     ", expected 1.0");
  }
  uint16_t header_len = 0;
  std::memcpy(&header_len, bytes.data() + 8, 2);
  const size_t data_start = 10 + static_cast<size_t>(header_len);
  if (bytes.size() < data_start) detail::fail(path, 8, "header length exceeds file size");

  RawTensor t;
  bool fortran = false;
  detail::parse_header_dict(path, bytes.substr(10, header_len), 10, t.descr, fortran, t.shape);
  if (t.descr.size() > 0 && t.descr[0] == '>') {
    detail::fail(path, 10, "big-endian dtype '" + t.descr + "' rejected, expected little-endian");
  }
  const size_t elem = element_size(t.descr);
  if (elem == 0) {
    detail::fail(path, 10, "unsupported dtype '" + t.descr + "', expected <f4, |u1 or <u2");
  }
  if (fortran) detail::fail(path, 10, "fortran_order=True rejected, expected C-contiguous");
  if (t.shape.empty()) detail::fail(path, 10, "zero-rank tensors unsupported");

  size_t count = 1;
  for (size_t d : t.shape) count *= d;
  const size_t expected = count * elem;
  if (bytes.size() - data_start != expected) {
    detail::fail(path, data_start,
                 "payload is " + std::to_string(bytes.size() - data_start) + " bytes, shape wants " +
                     std::to_string(expected));
  }
  t.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(data_start), bytes.end());
  return t;
}

inline void write_raw(const std::filesystem::path& path, const RawTensor& t) {
  std::string dict = "{'descr': '" + t.descr + "', 'fortran_order': False, 'shape': (";
  for (size_t i = 0; i < t.shape.size(); ++i) {
    dict += std::to_string(t.shape[i]);
    if (i + 1 < t.shape.size()) dict += ", ";
  }
  if (t.shape.size() == 1) dict += ",";
  dict += "), }";
  // Pad with spaces so the data section starts on a 64-byte boundary,
  // terminated by a newline (the numpy 1.0 writer layout).
  const size_t unpadded = 10 + dict.size() + 1;
  const size_t padding = (64 - unpadded % 64) % 64;
  dict.append(padding, ' ');
  dict.push_back('\n');

  std::string bytes;
  bytes.reserve(10 + dict.size() + t.payload.size());
  bytes.append("\x93NUMPY", 6);
  bytes.push_back('\x01');
  bytes.push_back('\x00');
  const uint16_t header_len = static_cast<uint16_t>(dict.size());
  bytes.append(reinterpret_cast<const char*>(&header_len), 2);
  bytes.append(dict);
  bytes.append(t.payload.data(), t.payload.size());
  detail::write_file(path, bytes);
}

}  // namespace npy

/// Reads a float32 (C, H, W) logits grid. Non-finite payload values are a
/// format error because no valid producer emits them.
inline LogitsGrid read_logits(const std::filesystem::path& path) {
  const npy::RawTensor t = npy::read_raw(path);
  if (t.descr != "<f4" || t.shape.size() != 3) {
    throw FormatError(path.string() + ": expected float32 rank-3 (C,H,W) logits, found '" +
                      t.descr + "' rank-" + std::to_string(t.shape.size()));
  }
  std::vector<float> values(t.payload.size() / 4);
  std::memcpy(values.data(), t.payload.data(), t.payload.size());
  for (float v : values) {
    if (!std::isfinite(v)) throw FormatError(path.string() + ": non-finite value in payload");
  }
  return LogitsGrid::from_values(static_cast<int>(t.shape[0]), static_cast<int>(t.shape[1]),
                                 static_cast<int>(t.shape[2]), std::move(values));
}

/// Reads a uint8/uint16 (H, W) label map. `wide_out`, when non-null,
/// reports whether the file stored uint16.
inline LabelMap read_labels(const std::filesystem::path& path, bool* wide_out = nullptr) {
  const npy::RawTensor t = npy::read_raw(path);
  if ((t.descr != "|u1" && t.descr != "<u2") || t.shape.size() != 2) {
    throw FormatError(path.string() + ": expected uint8/uint16 rank-2 (H,W) labels, found '" +
                      t.descr + "' rank-" + std::to_string(t.shape.size()));
  }
  const int h = static_cast<int>(t.shape[0]);
  const int w = static_cast<int>(t.shape[1]);
  std::vector<uint16_t> labels(static_cast<size_t>(h) * w);
  if (t.descr == "|u1") {
    for (size_t i = 0; i < labels.size(); ++i) {
      labels[i] = static_cast<uint8_t>(t.payload[i]);
    }
    if (wide_out != nullptr) *wide_out = false;
  } else {
    std::memcpy(labels.data(), t.payload.data(), t.payload.size());
    if (wide_out != nullptr) *wide_out = true;
  }
  return LabelMap::from_labels(h, w, std::move(labels));
}

/// Either tensor kind, discriminated by dtype/rank.
inline std::variant<LogitsGrid, LabelMap> read_tensor(const std::filesystem::path& path) {
  const npy::RawTensor probe = npy::read_raw(path);
  if (probe.descr == "<f4") return read_logits(path);
  return read_labels(path);
}

inline void write_tensor(const LogitsGrid& g, const std::filesystem::path& path) {
  npy::RawTensor t;
  t.descr = "<f4";
  t.shape = {static_cast<size_t>(g.classes()), static_cast<size_t>(g.height()),
             static_cast<size_t>(g.width())};
  t.payload.resize(g.size() * 4);
  std::memcpy(t.payload.data(), g.values().data(), t.payload.size());
  npy::write_raw(path, t);
}

/// Labels serialize as uint8 unless a value needs uint16 or `wide` forces it.
inline void write_tensor(const LabelMap& m, const std::filesystem::path& path, bool wide = false) {
  bool need_wide = wide;
  for (uint16_t v : m.labels()) {
    if (v > 255) need_wide = true;
  }
  npy::RawTensor t;
  t.shape = {static_cast<size_t>(m.height()), static_cast<size_t>(m.width())};
  if (need_wide) {
    t.descr = "<u2";
    t.payload.resize(m.size() * 2);
    std::memcpy(t.payload.data(), m.labels().data(), t.payload.size());
  } else {
    t.descr = "|u1";
    t.payload.resize(m.size());
    for (size_t i = 0; i < m.size(); ++i) t.payload[i] = static_cast<char>(m.labels()[i] & 0xff);
  }
  npy::write_raw(path, t);
}

}  // namespace panodar
