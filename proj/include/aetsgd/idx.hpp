#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "aetsgd/error.hpp"
#include "aetsgd/objectives.hpp"

// IDX container (MNIST family): big-endian u32 magic, big-endian u32
// dimension sizes, then raw unsigned bytes.
namespace aetsgd::idx {

inline constexpr std::uint32_t kImagesMagic = 0x00000803;
inline constexpr std::uint32_t kLabelsMagic = 0x00000801;

namespace detail {

inline std::uint32_t read_be32(const std::vector<std::uint8_t>& buf, std::size_t off, const std::string& what) {
  if (off + 4 > buf.size()) throw TruncatedError(what + ": truncated header");
  return (std::uint32_t{buf[off]} << 24) | (std::uint32_t{buf[off + 1]} << 16) |
         (std::uint32_t{buf[off + 2]} << 8) | std::uint32_t{buf[off + 3]};
}

inline void write_be32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
  buf.push_back(static_cast<std::uint8_t>(v >> 24));
  buf.push_back(static_cast<std::uint8_t>(v >> 16));
  buf.push_back(static_cast<std::uint8_t>(v >> 8));
  buf.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace detail

inline std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path + "'");
}

struct Images {
  std::uint32_t count = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::uint8_t> pixels;
};

inline Images parse_images(const std::vector<std::uint8_t>& buf, const std::string& what = "images") {
  const auto magic = detail::read_be32(buf, 0, what);
  if (magic != kImagesMagic) throw BadMagicError(what + ": bad magic number");
  Images im;
  im.count = detail::read_be32(buf, 4, what);
  im.rows = detail::read_be32(buf, 8, what);
  im.cols = detail::read_be32(buf, 12, what);
  const std::uint64_t payload = std::uint64_t{im.count} * im.rows * im.cols;
  if (buf.size() - 16 < payload) throw TruncatedError(what + ": truncated payload");
  im.pixels.assign(buf.begin() + 16, buf.begin() + 16 + static_cast<std::ptrdiff_t>(payload));
  return im;
}

inline std::vector<std::uint8_t> parse_labels(const std::vector<std::uint8_t>& buf,
                                              const std::string& what = "labels") {
  const auto magic = detail::read_be32(buf, 0, what);
  if (magic != kLabelsMagic) throw BadMagicError(what + ": bad magic number");
  const auto count = detail::read_be32(buf, 4, what);
  if (buf.size() - 8 < count) throw TruncatedError(what + ": truncated payload");
  return {buf.begin() + 8, buf.begin() + 8 + count};
}

// Pixels scale by 1/255; labels are the raw byte values.
inline Dataset to_dataset(const Images& im, const std::vector<std::uint8_t>& labels) {
  if (labels.size() != im.count)
    throw CountMismatchError("image count " + std::to_string(im.count) + " != label count " +
                             std::to_string(labels.size()));
  if (im.count == 0 || im.rows * im.cols == 0) throw FormatError("idx: empty dataset");
  Dataset ds;
  ds.dim = std::size_t{im.rows} * im.cols;
  ds.features.resize(im.pixels.size());
  std::transform(im.pixels.begin(), im.pixels.end(), ds.features.begin(),
                 [](std::uint8_t b) { return static_cast<double>(b) / 255.0; });
  ds.labels.assign(labels.begin(), labels.end());
  ds.classes = static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end())) + 1;
  return ds;
}

inline Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  const auto im = parse_images(read_file(images_path), images_path);
  const auto lb = parse_labels(read_file(labels_path), labels_path);
  return to_dataset(im, lb);
}

inline std::vector<std::uint8_t> encode_images(const Images& im) {
  std::vector<std::uint8_t> buf;
  detail::write_be32(buf, kImagesMagic);
  detail::write_be32(buf, im.count);
  detail::write_be32(buf, im.rows);
  detail::write_be32(buf, im.cols);
  buf.insert(buf.end(), im.pixels.begin(), im.pixels.end());
  return buf;
}

inline std::vector<std::uint8_t> encode_labels(const std::vector<std::uint8_t>& labels) {
  std::vector<std::uint8_t> buf;
  detail::write_be32(buf, kLabelsMagic);
  detail::write_be32(buf, static_cast<std::uint32_t>(labels.size()));
  buf.insert(buf.end(), labels.begin(), labels.end());
  return buf;
}

// Quantizes a dataset into IDX bytes as a 1 x dim image per sample. Feature
// values are clamped to [0, 1] before scaling to 0..255.
inline std::pair<std::vector<std::uint8_t>, std::vector<std::uint8_t>> encode_dataset(const Dataset& ds) {
  if (!ds.labeled()) throw ValidationError("idx export needs a labeled dataset");
  Images im;
  im.count = static_cast<std::uint32_t>(ds.size());
  im.rows = 1;
  im.cols = static_cast<std::uint32_t>(ds.dim);
  im.pixels.reserve(ds.features.size());
  for (double v : ds.features)
    im.pixels.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  std::vector<std::uint8_t> lb(ds.labels.begin(), ds.labels.end());
  return {encode_images(im), encode_labels(lb)};
}

}  // namespace aetsgd::idx
