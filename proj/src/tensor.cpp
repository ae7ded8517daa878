#include "bmtc/tensor.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "bmtc/kernels.hpp"

namespace bmtc {

Tensor3::Tensor3(std::size_t n1, std::size_t n2, std::size_t n3)
    : n1_(n1), n2_(n2), n3_(n3), data_(n1 * n2 * n3, 0.0) {
  if (n1 == 0 || n2 == 0 || n3 == 0)
    throw std::invalid_argument("Tensor3: dimensions must be positive");
}

Tensor3::Tensor3(std::size_t n1, std::size_t n2, std::size_t n3,
                 std::vector<double> data)
    : n1_(n1), n2_(n2), n3_(n3), data_(std::move(data)) {
  if (n1 == 0 || n2 == 0 || n3 == 0)
    throw std::invalid_argument("Tensor3: dimensions must be positive");
  if (data_.size() != n1 * n2 * n3)
    throw std::invalid_argument("Tensor3: buffer length does not match dims");
}

bool Tensor3::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

SliceRef::SliceRef(const Tensor3& parent, SliceKind kind, std::size_t index)
    : parent_(&parent), kind_(kind), index_(index) {
  switch (kind) {
    case SliceKind::lateral:
      if (index >= parent.n2())
        throw std::invalid_argument("SliceRef: lateral index out of range");
      rows_ = parent.n1();
      cols_ = parent.n3();
      break;
    case SliceKind::frontal:
      if (index >= parent.n3())
        throw std::invalid_argument("SliceRef: frontal index out of range");
      rows_ = parent.n1();
      cols_ = parent.n2();
      break;
    case SliceKind::horizontal:
      if (index >= parent.n1())
        throw std::invalid_argument("SliceRef: horizontal index out of range");
      rows_ = parent.n2();
      cols_ = parent.n3();
      break;
  }
}

double SliceRef::operator()(std::size_t r, std::size_t c) const {
  switch (kind_) {
    case SliceKind::lateral:
      return (*parent_)(r, index_, c);
    case SliceKind::frontal:
      return (*parent_)(r, c, index_);
    case SliceKind::horizontal:
    default:
      return (*parent_)(index_, r, c);
  }
}

Matrix SliceRef::to_matrix() const {
  Matrix m(rows_, cols_);
  switch (kind_) {
    case SliceKind::lateral:
      // row r is the tube (r, index, :)
      for (std::size_t r = 0; r < rows_; ++r) {
        auto t = parent_->tube(r, index_);
        std::memcpy(m.row(r).data(), t.data(), cols_ * sizeof(double));
      }
      break;
    case SliceKind::frontal:
      for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) m(r, c) = (*parent_)(r, c, index_);
      break;
    case SliceKind::horizontal:
      // the whole slice (index, :, :) is one contiguous block
      std::memcpy(m.data(), parent_->tube(index_, 0).data(),
                  rows_ * cols_ * sizeof(double));
      break;
  }
  return m;
}

void set_slice(Tensor3& t, SliceKind kind, std::size_t index, const Matrix& m) {
  SliceRef ref(t, kind, index);  // bounds check + shape source
  if (m.rows() != ref.rows() || m.cols() != ref.cols())
    throw std::invalid_argument("set_slice: matrix shape does not match slice");
  switch (kind) {
    case SliceKind::lateral:
      for (std::size_t r = 0; r < m.rows(); ++r)
        std::memcpy(t.tube(r, index).data(), m.row(r).data(),
                    m.cols() * sizeof(double));
      break;
    case SliceKind::frontal:
      for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) t(r, c, index) = m(r, c);
      break;
    case SliceKind::horizontal:
      std::memcpy(t.tube(index, 0).data(), m.data(),
                  m.rows() * m.cols() * sizeof(double));
      break;
  }
}

ObservationMask::ObservationMask(Dims dims, std::vector<std::uint8_t> flags,
                                 std::vector<double> values)
    : dims_(dims), flags_(std::move(flags)), values_(std::move(values)) {
  if (flags_.size() != dims_.count())
    throw std::invalid_argument("ObservationMask: flag count does not match dims");
  std::size_t observed = 0;
  for (std::uint8_t f : flags_) observed += (f != 0);
  if (values_.size() != observed)
    throw std::invalid_argument(
        "ObservationMask: values must hold exactly one entry per set flag");
}

ObservationMask ObservationMask::from_tensor(const Tensor3& t,
                                             std::vector<std::uint8_t> flags) {
  if (flags.size() != t.size())
    throw std::invalid_argument("ObservationMask: flag count does not match dims");
  std::vector<double> values;
  for (std::size_t e = 0; e < flags.size(); ++e)
    if (flags[e]) values.push_back(t.data()[e]);
  return ObservationMask(t.dims(), std::move(flags), std::move(values));
}

Tensor3 ObservationMask::to_tensor(double fill) const {
  Tensor3 t(dims_);
  std::size_t c = 0;
  for (std::size_t e = 0; e < flags_.size(); ++e)
    t.data()[e] = flags_[e] ? values_[c++] : fill;
  return t;
}

Tensor3 transpose_cycle(const Tensor3& x) {
  Tensor3 out(x.n2(), x.n3(), x.n1());
  for (std::size_t i = 0; i < x.n1(); ++i)
    for (std::size_t j = 0; j < x.n2(); ++j) {
      auto t = x.tube(i, j);
      for (std::size_t k = 0; k < x.n3(); ++k) out(j, k, i) = t[k];
    }
  return out;
}

std::vector<double> tvec(const Tensor3& x) {
  return {x.data(), x.data() + x.size()};
}

Tensor3 tfold(std::span<const double> v, Dims dims) {
  if (v.size() != dims.count())
    throw std::invalid_argument("tfold: vector length does not match dims");
  return Tensor3(dims.n1, dims.n2, dims.n3, {v.begin(), v.end()});
}

double frobenius_norm(const Tensor3& x) {
  return std::sqrt(kernels::ops().sum_sq(x.data(), x.size()));
}

double relative_error(const Tensor3& xhat, const Tensor3& xgt) {
  if (!xhat.same_dims(xgt))
    throw std::invalid_argument("relative_error: dimension mismatch");
  const double denom = frobenius_norm(xgt);
  if (denom == 0.0)
    throw std::domain_error("relative_error: ground truth has zero norm");
  double acc = 0.0;
  for (std::size_t e = 0; e < xhat.size(); ++e) {
    const double d = xhat.data()[e] - xgt.data()[e];
    acc += d * d;
  }
  return std::sqrt(acc) / denom;
}

Tensor3 project_observed(const Tensor3& x, const ObservationMask& mask) {
  if (x.dims() != mask.dims())
    throw std::invalid_argument("project_observed: dimension mismatch");
  Tensor3 out = x;
  auto flags = mask.flags();
  auto values = mask.values();
  std::size_t c = 0;
  for (std::size_t e = 0; e < flags.size(); ++e)
    if (flags[e]) out.data()[e] = values[c++];
  return out;
}

}  // namespace bmtc
