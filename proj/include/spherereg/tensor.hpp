#pragma once

#include <array>
#include <string>

#include <Eigen/Core>

#include "spherereg/error.hpp"

namespace spherereg {

/// Dense (channel, radial, elevation, azimuth) tensor, azimuth fastest.
template <typename Scalar>
class Tensor4 {
 public:
  using Shape = std::array<Eigen::Index, 4>;
  using Storage = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Tensor4() : shape_{0, 0, 0, 0} {}
  explicit Tensor4(const Shape& shape) : shape_(shape), data_(Storage::Zero(numel_of(shape))) {}
  Tensor4(Eigen::Index c, Eigen::Index n, Eigen::Index m, Eigen::Index k) : Tensor4(Shape{c, n, m, k}) {}

  const Shape& shape() const { return shape_; }
  Eigen::Index channels() const { return shape_[0]; }
  Eigen::Index radial() const { return shape_[1]; }
  Eigen::Index elevation() const { return shape_[2]; }
  Eigen::Index azimuth() const { return shape_[3]; }
  Eigen::Index size() const { return data_.size(); }

  Scalar& operator()(Eigen::Index c, Eigen::Index n, Eigen::Index m, Eigen::Index k) {
    return data_[offset(c, n, m, k)];
  }
  Scalar operator()(Eigen::Index c, Eigen::Index n, Eigen::Index m, Eigen::Index k) const {
    return data_[offset(c, n, m, k)];
  }

  Eigen::Index offset(Eigen::Index c, Eigen::Index n, Eigen::Index m, Eigen::Index k) const {
    return ((c * shape_[1] + n) * shape_[2] + m) * shape_[3] + k;
  }

  Storage& data() { return data_; }
  const Storage& data() const { return data_; }

  /// Channel-major view: one row per channel.
  Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> channel_rows() {
    return {data_.data(), shape_[0], shape_[1] * shape_[2] * shape_[3]};
  }
  Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> channel_rows()
      const {
    return {data_.data(), shape_[0], shape_[1] * shape_[2] * shape_[3]};
  }

  void set_zero() { data_.setZero(); }

  template <typename Other>
  Tensor4<Other> cast() const {
    Tensor4<Other> out(shape_);
    out.data() = data_.template cast<Other>();
    return out;
  }

  static Eigen::Index numel_of(const Shape& s) { return s[0] * s[1] * s[2] * s[3]; }

 private:
  Shape shape_;
  Storage data_;
};

using Tensor4d = Tensor4<double>;

inline std::string shape_string(const Tensor4d::Shape& s) {
  return "(" + std::to_string(s[0]) + "," + std::to_string(s[1]) + "," + std::to_string(s[2]) + "," +
         std::to_string(s[3]) + ")";
}

/// out(c,n,m,k) = in(c,n,m,(k - shift) mod K)
template <typename Scalar>
Tensor4<Scalar> shift_azimuth(const Tensor4<Scalar>& in, Eigen::Index shift) {
  Tensor4<Scalar> out(in.shape());
  const Eigen::Index K = in.azimuth();
  const Eigen::Index s = ((shift % K) + K) % K;
  for (Eigen::Index c = 0; c < in.channels(); ++c)
    for (Eigen::Index n = 0; n < in.radial(); ++n)
      for (Eigen::Index m = 0; m < in.elevation(); ++m)
        for (Eigen::Index k = 0; k < K; ++k) out(c, n, m, (k + s) % K) = in(c, n, m, k);
  return out;
}

}  // namespace spherereg
