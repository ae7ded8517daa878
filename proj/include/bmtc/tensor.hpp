#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bmtc/matrix.hpp"

namespace bmtc {

struct Dims {
  std::size_t n1 = 0, n2 = 0, n3 = 0;
  std::size_t count() const { return n1 * n2 * n3; }
  bool operator==(const Dims&) const = default;
};

// Dense third-order tensor. The linearization is fixed: entry (i,j,k) lives
// at offset ((i*n2)+j)*n3 + k, i.e. the third index is fastest and the tube
// (i,j,:) is contiguous. Under this layout tvec() is the identity on the
// buffer, so the vectorized least-squares reformulations cost nothing.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t n1, std::size_t n2, std::size_t n3);
  Tensor3(Dims d) : Tensor3(d.n1, d.n2, d.n3) {}
  Tensor3(std::size_t n1, std::size_t n2, std::size_t n3,
          std::vector<double> data);

  Dims dims() const { return {n1_, n2_, n3_}; }
  std::size_t n1() const { return n1_; }
  std::size_t n2() const { return n2_; }
  std::size_t n3() const { return n3_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * n2_ + j) * n3_ + k];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * n2_ + j) * n3_ + k];
  }

  // Contiguous view of the tube (i,j,:).
  std::span<double> tube(std::size_t i, std::size_t j) {
    return {data_.data() + (i * n2_ + j) * n3_, n3_};
  }
  std::span<const double> tube(std::size_t i, std::size_t j) const {
    return {data_.data() + (i * n2_ + j) * n3_, n3_};
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool same_dims(const Tensor3& o) const { return dims() == o.dims(); }
  bool all_finite() const;

 private:
  std::size_t n1_ = 0, n2_ = 0, n3_ = 0;
  std::vector<double> data_;
};

// Matrix views of a tensor obtained by fixing one index, squeezed to two
// dimensions: lateral fixes j (rows i, cols k), frontal fixes k (rows i,
// cols j), horizontal fixes i (rows j, cols k).
enum class SliceKind { lateral, frontal, horizontal };

class SliceRef {
 public:
  SliceRef(const Tensor3& parent, SliceKind kind, std::size_t index);

  SliceKind kind() const { return kind_; }
  std::size_t index() const { return index_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double operator()(std::size_t r, std::size_t c) const;

  Matrix to_matrix() const;

 private:
  const Tensor3* parent_;
  SliceKind kind_;
  std::size_t index_;
  std::size_t rows_, cols_;
};

// Writes a matrix back into the slice position (the inverse of
// SliceRef::to_matrix for matching shapes).
void set_slice(Tensor3& t, SliceKind kind, std::size_t index, const Matrix& m);

// The index set of observed entries plus their values. Flags are dense (one
// byte per entry in storage order); values are compact, holding exactly one
// double per set flag, in storage order.
class ObservationMask {
 public:
  ObservationMask(Dims dims, std::vector<std::uint8_t> flags,
                  std::vector<double> values);

  // Copies the flagged entries of t as the observed values.
  static ObservationMask from_tensor(const Tensor3& t,
                                     std::vector<std::uint8_t> flags);

  Dims dims() const { return dims_; }
  std::size_t observed_count() const { return values_.size(); }
  std::span<const std::uint8_t> flags() const { return flags_; }
  std::span<const double> values() const { return values_; }

  bool observed(std::size_t i, std::size_t j, std::size_t k) const {
    return flags_[(i * dims_.n2 + j) * dims_.n3 + k] != 0;
  }

  // Reconstructs the dense tensor with observed values on the flags and
  // `fill` elsewhere.
  Tensor3 to_tensor(double fill = 0.0) const;

 private:
  Dims dims_;
  std::vector<std::uint8_t> flags_;
  std::vector<double> values_;
};

// Cyclic transpose: result has dims (n2,n3,n1) and entry (j,k,i) = x(i,j,k).
// Applying it three times returns the original tensor bit-for-bit.
Tensor3 transpose_cycle(const Tensor3& x);

// Tube-wise vectorization: block (i,j) of the result (i outer, j inner) is
// the tube x(i,j,:). With this storage layout the result equals the buffer.
std::vector<double> tvec(const Tensor3& x);

// Inverse of tvec. Throws std::invalid_argument on length mismatch.
Tensor3 tfold(std::span<const double> v, Dims dims);

double frobenius_norm(const Tensor3& x);

// ||xhat - xgt||_F / ||xgt||_F. Throws std::domain_error when ||xgt|| = 0.
double relative_error(const Tensor3& xhat, const Tensor3& xgt);

// Observed entries replaced by the mask's values; the rest of x untouched.
Tensor3 project_observed(const Tensor3& x, const ObservationMask& mask);

}  // namespace bmtc
