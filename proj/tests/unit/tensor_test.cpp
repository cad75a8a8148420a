#include <gtest/gtest.h>

#include <random>

#include "prospect/nn/tensor.hpp"
#include "prospect/random.hpp"

namespace prospect {
namespace {

TEST(Tensor2D, ConstructorRejectsWrongLength) {
  EXPECT_THROW(Tensor2D(2, 3, std::vector<double>(5)), ShapeError);
  EXPECT_THROW(Tensor2D::from_rows({{1, 2}, {3}}), ShapeError);
}

TEST(Tensor2D, MatmulMatchesScalarLoop) {
  Rng rng(11);
  std::normal_distribution<double> n;
  Tensor2D a(5, 7), b(7, 3);
  for (double& v : a.values()) v = n(rng);
  for (double& v : b.values()) v = n(rng);
  const auto c = matmul(a, b);
  const auto ct = matmul_transpose_lhs(a.transposed(), b);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < 7; ++k) s += a(i, k) * b(k, j);
      EXPECT_NEAR(c(i, j), s, 1e-12);
      EXPECT_NEAR(ct(i, j), s, 1e-12);
    }
  }
  EXPECT_THROW(matmul(a, a), ShapeError);
}

TEST(Tensor2D, ConcatAndSelect) {
  const auto a = Tensor2D::from_rows({{1, 2}, {3, 4}});
  const auto b = Tensor2D::from_rows({{5}, {6}});
  EXPECT_EQ(hconcat(a, b), Tensor2D::from_rows({{1, 2, 5}, {3, 4, 6}}));
  const std::vector<std::size_t> idx{1, 1, 0};
  EXPECT_EQ(a.select_rows(idx), Tensor2D::from_rows({{3, 4}, {3, 4}, {1, 2}}));
  EXPECT_THROW(hconcat(a, Tensor2D(3, 1)), ShapeError);
}

TEST(Tensor2D, FiniteCheck) {
  auto t = Tensor2D::from_rows({{1, 2}});
  EXPECT_NO_THROW(require_finite(t, "t"));
  t(0, 1) = std::nan("");
  EXPECT_THROW(require_finite(t, "t"), NonFiniteError);
}

}  // namespace
}  // namespace prospect
