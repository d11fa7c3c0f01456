#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ps2man {

/// Little binary writer/reader pair for checkpoints. Everything is written
/// verbatim (little-endian host assumed), so save -> load -> save is
/// byte-identical.
class BinWriter {
 public:
  explicit BinWriter(const std::string& path)
      : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open for writing: " + path);
  }

  void u32(uint32_t v) { raw(&v, sizeof v); }
  void u64(uint64_t v) { raw(&v, sizeof v); }
  void i64(int64_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void str(const std::string& s) {
    u64(s.size());
    raw(s.data(), s.size());
  }
  void floats(const std::vector<float>& v) {
    u64(v.size());
    raw(v.data(), v.size() * sizeof(float));
  }
  bool good() const { return bool(out_); }

 private:
  void raw(const void* p, size_t n) {
    out_.write(static_cast<const char*>(p), std::streamsize(n));
  }
  std::ofstream out_;
};

class BinReader {
 public:
  explicit BinReader(const std::string& path) : in_(path, std::ios::binary) {
    if (!in_) throw std::runtime_error("cannot open for reading: " + path);
  }

  uint32_t u32() { return get<uint32_t>(); }
  uint64_t u64() { return get<uint64_t>(); }
  int64_t i64() { return get<int64_t>(); }
  double f64() { return get<double>(); }
  std::string str() {
    std::string s(u64(), '\0');
    raw(s.data(), s.size());
    return s;
  }
  std::vector<float> floats() {
    std::vector<float> v(u64());
    raw(v.data(), v.size() * sizeof(float));
    return v;
  }

 private:
  template <class T>
  T get() {
    T v;
    raw(&v, sizeof v);
    return v;
  }
  void raw(void* p, size_t n) {
    in_.read(static_cast<char*>(p), std::streamsize(n));
    if (!in_) throw std::runtime_error("truncated checkpoint file");
  }
  std::ifstream in_;
};

}  // namespace ps2man
