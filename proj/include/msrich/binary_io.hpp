#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "msrich/errors.hpp"

namespace msrich {

// Little-endian binary file helpers shared by the field/dataset/model formats.
// Doubles are IEEE-754 binary64; this code assumes (and static_asserts) a
// little-endian host, which covers every platform the toolchain targets.

static_assert(std::endian::native == std::endian::little, "writers assume a little-endian host");
static_assert(sizeof(double) == 8);

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot open " + path + " for writing");
  }

  void magic(const char tag[4]) { out_.write(tag, 4); }
  void u8(std::uint8_t v) { raw(&v, 1); }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void f64(double v) { raw(&v, 8); }
  void f64_array(std::span<const double> v) { raw(v.data(), 8 * v.size()); }

  void finish() {
    out_.flush();
    if (!out_) throw IoError("write failure on " + path_);
  }

 private:
  void raw(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), n); }
  std::string path_;
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open " + path + " for reading");
  }

  void expect_magic(const char tag[4]) {
    char got[4] = {};
    raw(got, 4);
    if (std::memcmp(got, tag, 4) != 0) {
      throw IoError(path_ + ": bad magic, expected \"" + std::string(tag, 4) + "\"");
    }
  }
  std::uint8_t u8() {
    std::uint8_t v;
    raw(&v, 1);
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    raw(&v, 8);
    return v;
  }
  double f64() {
    double v;
    raw(&v, 8);
    return v;
  }
  std::vector<double> f64_array(std::size_t n) {
    std::vector<double> v(n);
    raw(v.data(), 8 * n);
    return v;
  }
  void expect_eof() {
    in_.peek();
    if (!in_.eof()) throw IoError(path_ + ": trailing bytes after payload");
  }

 private:
  void raw(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), n);
    if (static_cast<std::size_t>(in_.gcount()) != n) throw IoError(path_ + ": truncated file");
  }
  std::string path_;
  std::ifstream in_;
};

}  // namespace msrich
