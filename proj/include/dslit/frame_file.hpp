#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dslit/error.hpp"
#include "dslit/sensor.hpp"

namespace dslit {

// Frame file layout, little-endian:
//   0  "BIFR"            4 bytes
//   4  version = 0x01    u8
//   5  width             u16
//   7  height            u16
//   9  frame count       u32
//  13  bits per pixel=16 u8
//  14  reserved (zero)   7 bytes
//  21  frames, row-major, u16 per pixel
inline constexpr std::array<char, 4> kFrameMagic{'B', 'I', 'F', 'R'};
inline constexpr std::uint8_t kFrameVersion = 0x01;
inline constexpr std::size_t kFrameHeaderSize = 21;

struct FrameFileHeader {
  std::uint16_t width = 0;
  std::uint16_t height = 0;
  std::uint32_t frame_count = 0;
  std::uint8_t bits_per_pixel = 16;

  std::uint64_t frame_bytes() const { return std::uint64_t{width} * height * 2; }
  std::uint64_t file_size() const { return kFrameHeaderSize + frame_bytes() * frame_count; }
};

namespace detail {

inline void put_le(std::uint8_t* p, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

inline std::uint64_t get_le(const std::uint8_t* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= std::uint64_t{p[i]} << (8 * i);
  return v;
}

}  // namespace detail

inline std::array<std::uint8_t, kFrameHeaderSize> encode_header(const FrameFileHeader& h) {
  std::array<std::uint8_t, kFrameHeaderSize> b{};
  std::memcpy(b.data(), kFrameMagic.data(), 4);
  b[4] = kFrameVersion;
  detail::put_le(&b[5], h.width, 2);
  detail::put_le(&b[7], h.height, 2);
  detail::put_le(&b[9], h.frame_count, 4);
  b[13] = h.bits_per_pixel;
  return b;
}

/// Parses and validates a header; `file_size` (when known) is checked against the frame count.
inline FrameFileHeader decode_header(const std::uint8_t* b, std::size_t available, std::uint64_t file_size) {
  if (available < kFrameHeaderSize) throw FormatError(available, "truncated header");
  for (std::size_t i = 0; i < 4; ++i)
    if (b[i] != static_cast<std::uint8_t>(kFrameMagic[i])) throw FormatError(i, "bad magic bytes");
  if (b[4] != kFrameVersion) throw FormatError(4, "unsupported version " + std::to_string(b[4]));
  FrameFileHeader h;
  h.width = static_cast<std::uint16_t>(detail::get_le(&b[5], 2));
  h.height = static_cast<std::uint16_t>(detail::get_le(&b[7], 2));
  h.frame_count = static_cast<std::uint32_t>(detail::get_le(&b[9], 4));
  h.bits_per_pixel = b[13];
  if (h.width == 0) throw FormatError(5, "zero width");
  if (h.height == 0) throw FormatError(7, "zero height");
  if (h.bits_per_pixel != 16) throw FormatError(13, "unsupported bits per pixel " + std::to_string(h.bits_per_pixel));
  for (std::size_t i = 14; i < kFrameHeaderSize; ++i)
    if (b[i] != 0) throw FormatError(i, "reserved byte is not zero");
  if (file_size < h.file_size()) throw FormatError(file_size, "file truncated: expected " + std::to_string(h.file_size()) + " bytes");
  if (file_size > h.file_size()) throw FormatError(h.file_size(), "trailing bytes after last frame");
  return h;
}

/// Streams frames to disk; the frame count is fixed up front and checked on close.
class FrameWriter {
 public:
  FrameWriter(const std::filesystem::path& path, std::uint16_t width, std::uint16_t height, std::uint32_t frame_count)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc), header_{width, height, frame_count, 16} {
    if (!out_) throw Error(ErrorKind::io, "cannot open " + path.string() + " for writing");
    const auto h = encode_header(header_);
    out_.write(reinterpret_cast<const char*>(h.data()), static_cast<std::streamsize>(h.size()));
    row_.resize(static_cast<std::size_t>(width) * 2);
  }

  void write(const Frame& f) {
    if (f.width != header_.width || f.height != header_.height)
      throw Error(ErrorKind::invalid_parameter, "frame dimensions differ from file header");
    if (written_ >= header_.frame_count) throw Error(ErrorKind::io, "more frames than declared in header");
    for (int r = 0; r < f.height; ++r) {
      for (int c = 0; c < f.width; ++c) detail::put_le(&row_[static_cast<std::size_t>(c) * 2], f.at(r, c), 2);
      out_.write(reinterpret_cast<const char*>(row_.data()), static_cast<std::streamsize>(row_.size()));
    }
    if (!out_) throw Error(ErrorKind::io, "write failed at frame " + std::to_string(written_) + " of " + path_.string());
    ++written_;
  }

  void close() {
    if (!out_.is_open()) return;
    out_.close();
    if (written_ != header_.frame_count)
      throw Error(ErrorKind::io, "wrote " + std::to_string(written_) + " of " + std::to_string(header_.frame_count) +
                                     " declared frames");
  }

  ~FrameWriter() {
    if (out_.is_open()) out_.close();
  }

  std::uint32_t written() const { return written_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  FrameFileHeader header_;
  std::vector<std::uint8_t> row_;
  std::uint32_t written_ = 0;
};

/// Sequential reader with random access by frame index.
class FrameReader {
 public:
  explicit FrameReader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw Error(ErrorKind::io, "cannot open " + path.string());
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    if (ec) throw Error(ErrorKind::io, "cannot stat " + path.string());
    std::array<std::uint8_t, kFrameHeaderSize> b{};
    in_.read(reinterpret_cast<char*>(b.data()), static_cast<std::streamsize>(b.size()));
    header_ = decode_header(b.data(), static_cast<std::size_t>(in_.gcount()), size);
    buf_.resize(header_.frame_bytes());
  }

  const FrameFileHeader& header() const { return header_; }
  std::uint32_t frame_count() const { return header_.frame_count; }
  std::uint32_t next_index() const { return next_; }

  bool read(Frame& f) {
    if (next_ >= header_.frame_count) return false;
    seek_if_needed();
    in_.read(reinterpret_cast<char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
    if (in_.gcount() != static_cast<std::streamsize>(buf_.size()))
      throw FormatError(kFrameHeaderSize + header_.frame_bytes() * next_ + static_cast<std::uint64_t>(in_.gcount()),
                        "unexpected end of file in frame " + std::to_string(next_));
    if (f.width != header_.width || f.height != header_.height) f = Frame(header_.width, header_.height);
    for (std::size_t i = 0; i < f.pixels.size(); ++i)
      f.pixels[i] = static_cast<std::uint16_t>(detail::get_le(&buf_[2 * i], 2));
    ++next_;
    return true;
  }

  void seek(std::uint32_t index) {
    if (index > header_.frame_count) throw Error(ErrorKind::out_of_range, "frame index past end of file");
    next_ = index;
    dirty_ = true;
  }

 private:
  void seek_if_needed() {
    if (!dirty_) return;
    in_.seekg(static_cast<std::streamoff>(kFrameHeaderSize + header_.frame_bytes() * next_));
    dirty_ = false;
  }

  std::filesystem::path path_;
  std::ifstream in_;
  FrameFileHeader header_;
  std::vector<std::uint8_t> buf_;
  std::uint32_t next_ = 0;
  bool dirty_ = false;
};

}  // namespace dslit
