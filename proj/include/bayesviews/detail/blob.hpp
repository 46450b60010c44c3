#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>

namespace bayesviews::detail {

/// Little binary writer/reader pair used for model checkpoints. Doubles are
/// stored bit-for-bit, so snapshot/restore round-trips exactly.
class BlobWriter {
 public:
  void tag(const std::string& magic) { buf_.append(magic); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void i32(std::int32_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void vec(const Eigen::VectorXd& v) {
    i32(static_cast<std::int32_t>(v.size()));
    raw(v.data(), sizeof(double) * v.size());
  }
  void mat(const Eigen::MatrixXd& m) {
    i32(static_cast<std::int32_t>(m.rows()));
    i32(static_cast<std::int32_t>(m.cols()));
    raw(m.data(), sizeof(double) * m.size());
  }
  const std::string& str() const { return buf_; }

 private:
  void raw(const void* p, std::size_t bytes) {
    buf_.append(static_cast<const char*>(p), bytes);
  }
  std::string buf_;
};

class BlobReader {
 public:
  explicit BlobReader(const std::string& data) : data_(data) {}

  void expect(const std::string& magic) {
    if (data_.compare(pos_, magic.size(), magic) != 0) {
      throw std::runtime_error("checkpoint header mismatch; expected '" + magic + "'");
    }
    pos_ += magic.size();
  }
  std::uint64_t u64() { std::uint64_t v; raw(&v, sizeof v); return v; }
  std::int32_t i32() { std::int32_t v; raw(&v, sizeof v); return v; }
  double f64() { double v; raw(&v, sizeof v); return v; }
  Eigen::VectorXd vec() {
    const int n = i32();
    Eigen::VectorXd v(n);
    raw(v.data(), sizeof(double) * n);
    return v;
  }
  Eigen::MatrixXd mat() {
    const int r = i32();
    const int c = i32();
    Eigen::MatrixXd m(r, c);
    raw(m.data(), sizeof(double) * m.size());
    return m;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void raw(void* p, std::size_t bytes) {
    if (pos_ + bytes > data_.size()) throw std::runtime_error("truncated checkpoint");
    std::memcpy(p, data_.data() + pos_, bytes);
    pos_ += bytes;
  }
  const std::string& data_;
  std::size_t pos_ = 0;
};

}  // namespace bayesviews::detail
