#include <cmath>
#include <cstring>
#include <stdexcept>
#include <vector>

#include "bmtc/rng.hpp"
#include "bmtc/tensor.hpp"
#include "doctest.h"

namespace {

using namespace bmtc;

Tensor3 random_tensor(std::size_t n1, std::size_t n2, std::size_t n3,
                      Rng& rng) {
  Tensor3 t(n1, n2, n3);
  for (std::size_t i = 0; i < t.size(); ++i)
    t.data()[i] = 2.0 * rng.uniform01() - 1.0;
  return t;
}

}  // namespace

TEST_CASE("tensor: storage layout is row-major with contiguous tubes") {
  Tensor3 t(2, 3, 4);
  double v = 0.0;
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t k = 0; k < 4; ++k) t(i, j, k) = v++;

  v = 0.0;
  for (std::size_t f = 0; f < t.size(); ++f) CHECK(t.data()[f] == v++);

  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      auto tube = t.tube(i, j);
      CHECK(tube.size() == 4);
      CHECK(tube.data() == t.data() + (i * 3 + j) * 4);
      for (std::size_t k = 0; k < 4; ++k) CHECK(tube[k] == t(i, j, k));
    }

  CHECK(t.dims() == Dims{2, 3, 4});
  CHECK(t.dims().count() == 24);
}

TEST_CASE("tensor: transpose_cycle maps (i,j,k) to (j,k,i)") {
  Rng rng(5);
  Tensor3 t = random_tensor(3, 4, 5, rng);
  Tensor3 tt = transpose_cycle(t);
  CHECK(tt.dims() == Dims{4, 5, 3});
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t k = 0; k < 5; ++k) CHECK(tt(j, k, i) == t(i, j, k));
}

TEST_CASE("tensor: triple transpose is the identity bitwise") {
  Rng rng(6);
  for (int it = 0; it < 10; ++it) {
    std::size_t n1 = 1 + rng.uniform_index(6);
    std::size_t n2 = 1 + rng.uniform_index(6);
    std::size_t n3 = 1 + rng.uniform_index(6);
    Tensor3 t = random_tensor(n1, n2, n3, rng);
    Tensor3 ttt = transpose_cycle(transpose_cycle(transpose_cycle(t)));
    REQUIRE(ttt.dims() == t.dims());
    CHECK(std::memcmp(ttt.data(), t.data(), t.size() * sizeof(double)) == 0);
  }
}

TEST_CASE("tensor: tvec is the storage buffer and tfold inverts it") {
  Rng rng(7);
  Tensor3 t = random_tensor(4, 2, 6, rng);
  std::vector<double> v = tvec(t);
  REQUIRE(v.size() == t.size());
  CHECK(std::memcmp(v.data(), t.data(), v.size() * sizeof(double)) == 0);

  Tensor3 back = tfold(v, t.dims());
  CHECK(std::memcmp(back.data(), t.data(), v.size() * sizeof(double)) == 0);

  CHECK_THROWS_AS(tfold(v, Dims{4, 2, 7}), std::invalid_argument);
}

TEST_CASE("tensor: slice views agree with direct indexing") {
  Rng rng(8);
  Tensor3 t = random_tensor(3, 4, 5, rng);

  SUBCASE("lateral fixes j, rows i, cols k") {
    for (std::size_t j = 0; j < 4; ++j) {
      SliceRef s(t, SliceKind::lateral, j);
      REQUIRE(s.rows() == 3);
      REQUIRE(s.cols() == 5);
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t k = 0; k < 5; ++k) CHECK(s(i, k) == t(i, j, k));
      Matrix m = s.to_matrix();
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t k = 0; k < 5; ++k) CHECK(m(i, k) == t(i, j, k));
    }
  }
  SUBCASE("frontal fixes k, rows i, cols j") {
    for (std::size_t k = 0; k < 5; ++k) {
      SliceRef s(t, SliceKind::frontal, k);
      REQUIRE(s.rows() == 3);
      REQUIRE(s.cols() == 4);
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 4; ++j) CHECK(s(i, j) == t(i, j, k));
    }
  }
  SUBCASE("horizontal fixes i, rows j, cols k") {
    for (std::size_t i = 0; i < 3; ++i) {
      SliceRef s(t, SliceKind::horizontal, i);
      REQUIRE(s.rows() == 4);
      REQUIRE(s.cols() == 5);
      for (std::size_t j = 0; j < 4; ++j)
        for (std::size_t k = 0; k < 5; ++k) CHECK(s(j, k) == t(i, j, k));
    }
  }
}

TEST_CASE("tensor: set_slice writes back exactly what to_matrix reads") {
  Rng rng(9);
  Tensor3 t = random_tensor(3, 4, 5, rng);
  for (SliceKind kind :
       {SliceKind::lateral, SliceKind::frontal, SliceKind::horizontal}) {
    std::size_t count = kind == SliceKind::lateral    ? t.n2()
                        : kind == SliceKind::frontal  ? t.n3()
                                                      : t.n1();
    for (std::size_t idx = 0; idx < count; ++idx) {
      Tensor3 u = t;
      Matrix m = SliceRef(t, kind, idx).to_matrix();
      for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) += 1.0;
      set_slice(u, kind, idx, m);
      Matrix back = SliceRef(u, kind, idx).to_matrix();
      for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) CHECK(back(r, c) == m(r, c));
      // entries outside the slice untouched
      double off_diff = 0.0;
      for (std::size_t i = 0; i < t.n1(); ++i)
        for (std::size_t j = 0; j < t.n2(); ++j)
          for (std::size_t k = 0; k < t.n3(); ++k) {
            bool in_slice = (kind == SliceKind::lateral && j == idx) ||
                            (kind == SliceKind::frontal && k == idx) ||
                            (kind == SliceKind::horizontal && i == idx);
            if (!in_slice) off_diff += std::abs(u(i, j, k) - t(i, j, k));
          }
      CHECK(off_diff == 0.0);
    }
  }
}

TEST_CASE("tensor: observation mask round-trips flags and values") {
  Rng rng(10);
  Tensor3 t = random_tensor(4, 3, 5, rng);
  std::vector<std::uint8_t> flags(t.size());
  for (auto& f : flags) f = rng.uniform01() < 0.4 ? 1 : 0;

  ObservationMask mask = ObservationMask::from_tensor(t, flags);
  CHECK(mask.dims() == t.dims());

  std::size_t expected = 0;
  for (auto f : flags) expected += f;
  CHECK(mask.observed_count() == expected);

  // values run over observed entries in storage order
  std::size_t vi = 0;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t k = 0; k < 5; ++k) {
        bool obs = flags[(i * 3 + j) * 5 + k] != 0;
        CHECK(mask.observed(i, j, k) == obs);
        if (obs) CHECK(mask.values()[vi++] == t(i, j, k));
      }
  CHECK(vi == mask.observed_count());

  Tensor3 filled = mask.to_tensor(-7.0);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t k = 0; k < 5; ++k)
        CHECK(filled(i, j, k) == (mask.observed(i, j, k) ? t(i, j, k) : -7.0));
}

TEST_CASE("tensor: project_observed overwrites exactly the mask support") {
  Rng rng(12);
  Tensor3 t = random_tensor(4, 4, 4, rng);
  std::vector<std::uint8_t> flags(t.size());
  for (auto& f : flags) f = rng.uniform01() < 0.5 ? 1 : 0;
  ObservationMask mask = ObservationMask::from_tensor(t, flags);

  Tensor3 x = random_tensor(4, 4, 4, rng);
  Tensor3 p = project_observed(x, mask);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t k = 0; k < 4; ++k)
        CHECK(p(i, j, k) == (mask.observed(i, j, k) ? t(i, j, k) : x(i, j, k)));
}

TEST_CASE("tensor: norms and relative error match loop oracles") {
  Rng rng(13);
  Tensor3 a = random_tensor(3, 5, 2, rng);
  Tensor3 b = random_tensor(3, 5, 2, rng);

  double ss = 0.0;
  for (std::size_t f = 0; f < a.size(); ++f) ss += a.data()[f] * a.data()[f];
  CHECK(frobenius_norm(a) == doctest::Approx(std::sqrt(ss)).epsilon(1e-14));

  double dd = 0.0;
  for (std::size_t f = 0; f < a.size(); ++f) {
    double d = a.data()[f] - b.data()[f];
    dd += d * d;
  }
  CHECK(relative_error(a, b) ==
        doctest::Approx(std::sqrt(dd) / std::sqrt(frobenius_norm(b) *
                                                  frobenius_norm(b)))
            .epsilon(1e-12));
}

TEST_CASE("tensor: all_finite flags NaN and infinity") {
  Tensor3 t(2, 2, 2);
  CHECK(t.all_finite());
  t(1, 0, 1) = std::nan("");
  CHECK(!t.all_finite());
  t(1, 0, 1) = 0.0;
  t(0, 1, 0) = HUGE_VAL;
  CHECK(!t.all_finite());
}
