#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace airwrite;
using airwrite::testing::make_params;
using airwrite::testing::probe;
using airwrite::testing::random_constant;
using airwrite::testing::random_parameter;

TEST(Autodiff, SelfAdditionHasGradientTwo) {
  Value x = Value::scalar(3.0, true);
  backward(add(x, x));
  EXPECT_DOUBLE_EQ(x.grad()[0], 2.0);
}

TEST(Autodiff, SharedSubexpressionIsCountedOnce) {
  // y = (x*x) + (x*x) reuses one node; dy/dx = 4x.
  Value x = Value::scalar(1.5, true);
  Value sq = mul(x, x);
  backward(add(sq, sq));
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
}

TEST(Autodiff, LeafGradientsAccumulateAcrossCalls) {
  Value x = Value::scalar(2.0, true);
  Value y = mul(x, x);
  backward(y);
  backward(y);
  EXPECT_DOUBLE_EQ(x.grad()[0], 8.0);
  x.zero_grad();
  backward(y);
  EXPECT_DOUBLE_EQ(x.grad()[0], 4.0);
}

TEST(Autodiff, NonScalarRootIsRejected) {
  Value x = Value::parameter({3}, {1, 2, 3});
  try {
    backward(x);
    FAIL() << "expected invalid_root";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_root);
  }
}

TEST(Autodiff, NoGradGuardRecordsNothing) {
  Value x = Value::scalar(2.0, true);
  Value y;
  {
    NoGradGuard guard;
    EXPECT_FALSE(grad_enabled());
    y = mul(x, x);
  }
  EXPECT_TRUE(grad_enabled());
  EXPECT_FALSE(y.requires_grad());
  backward(y);
  EXPECT_EQ(x.grad()[0], 0.0);
}

TEST(Autodiff, ConstantsDoNotReceiveGradients) {
  Value c = Value::constant({2}, {1, 2});
  Value p = Value::parameter({2}, {3, 4});
  backward(sum(mul(c, p)));
  EXPECT_TRUE(c.grad().empty());
  EXPECT_DOUBLE_EQ(p.grad()[0], 1.0);
  EXPECT_DOUBLE_EQ(p.grad()[1], 2.0);
}

TEST(Autodiff, LeavesAboveRankThreeAreRejected) {
  EXPECT_THROW(Value::zeros({1, 1, 1, 1}), Error);
  EXPECT_THROW(Value::constant({2}, {1, 2, 3}), Error);
}

TEST(Autodiff, ElementwiseAndStructuralOpsPassGradCheck) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    Value a = random_parameter({3, 4}, rng);
    Value b = random_parameter({3, 4}, rng);
    Value row = random_parameter({4}, rng);
    Value u = random_parameter({3}, rng);
    auto params = make_params({{"a", a}, {"b", b}, {"row", row}, {"u", u}});
    auto f = [&] {
      Value h = add_row(mul(sub(a, b), a), row);
      Value t = transpose(h);                       // [4 x 3]
      Value parts = concat_cols({slice_cols(h, 0, 2), slice_cols(h, 2, 4)});
      Value stacked = concat_rows({slice_rows(parts, 1, 3), slice_rows(parts, 0, 1)});
      Value o = outer_add(u, reshape(mean_rows(t), {3}));
      return add(add(probe(t, 11), probe(stacked, 12)),
                 add(probe(o, 13), add(mean(scale(neg(h), 0.5)), pick(concat({u, row}), 5))));
    };
    EXPECT_LT(grad_check(f, params), 1e-6) << "seed " << seed;
  }
}

TEST(Autodiff, MatmulMatchesNaiveProductAndPassesGradCheck) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    Value a = random_parameter({3, 5}, rng);
    Value b = random_parameter({5, 2}, rng);
    Value c = matmul(a, b);
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 2; ++j) {
        double want = 0.0;
        for (std::size_t k = 0; k < 5; ++k) want += a.data()[i * 5 + k] * b.data()[k * 2 + j];
        EXPECT_NEAR(c.data()[i * 2 + j], want, 1e-14);
      }
    }
    auto params = make_params({{"a", a}, {"b", b}});
    EXPECT_LT(grad_check([&] { return probe(matmul(a, b), seed); }, params), 1e-6);
  }
}

TEST(Autodiff, ShapeMismatchesThrow) {
  Value a = Value::zeros({2, 3});
  Value b = Value::zeros({3, 2});
  EXPECT_THROW(add(a, b), Error);
  EXPECT_THROW(matmul(a, a), Error);
  EXPECT_THROW(slice_cols(a, 2, 2), Error);
  EXPECT_THROW(concat_rows({a, b}), Error);
}

TEST(GradCheck, DetectsAWrongGradient) {
  // An op whose backward rule is deliberately off by a factor of two.
  Value x = Value::parameter({2}, {0.3, -0.7});
  auto params = make_params({{"x", x}});
  auto broken = [&] {
    std::vector<double> out(x.data().begin(), x.data().end());
    Value y = Value::from_op({2}, std::move(out), {x}, [](const detail::Node& n) {
      double* g = detail::parent_grad(n, 0);
      for (std::size_t i = 0; i < 2; ++i) g[i] += 2.0 * n.grad[i];
    });
    return sum(y);
  };
  const auto result = grad_check_detailed(broken, params);
  EXPECT_NEAR(result.max_relative_error, 0.5, 1e-6);
  EXPECT_EQ(result.worst_path, "x");
}
