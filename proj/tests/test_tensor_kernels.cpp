#include "mpox/kernels.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace mpox;

namespace {

std::vector<double> flat(const TensorD& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace

TEST(Tensor, ShapeInvariants) {
  TensorF t({2, 3, 4, 5});
  EXPECT_EQ(t.size(), 120);
  EXPECT_EQ(t.rank(), 4u);
  EXPECT_THROW(TensorF({2, 0}), ShapeError);
  EXPECT_THROW(TensorF({1, 1, 1, 1, 1}), ShapeError);
  EXPECT_THROW(TensorF({2, 2}, {1.f, 2.f, 3.f}), ShapeError);
  EXPECT_THROW(t.reshaped({7}), ShapeError);
  EXPECT_EQ(t.reshaped({120}).size(), 120);
}

TEST(Tensor, FinitePredicate) {
  TensorF t({3});
  EXPECT_TRUE(t.all_finite());
  t[1] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_FALSE(t.all_finite());
  t[1] = std::numeric_limits<float>::infinity();
  EXPECT_FALSE(t.all_finite());
}

TEST(ConvOutputShape, Examples) {
  EXPECT_EQ(conv_output_shape({5, 5, 1, 1, 3, 3, 1, 0}).first, 3);
  EXPECT_EQ(conv_output_shape({224, 224, 3, 16, 3, 3, 1, 1}).first, 224);
  EXPECT_EQ(conv_output_shape({224, 224, 3, 16, 3, 3, 2, 0}).first, 111);
  EXPECT_THROW(conv_output_shape({2, 2, 1, 1, 3, 3, 1, 0}), ShapeError);
}

TEST(ConvOutputShape, SamePaddingPreservesSize) {
  for (Index s : {1, 2, 7, 31, 224}) {
    const auto g = ConvGeometry::make(s, s + 1, 3, 4, Padding::kSame);
    EXPECT_EQ(g.padding, 1);
    EXPECT_EQ(conv_output_shape(g), std::make_pair(s, s + 1));
  }
}

TEST(Conv2dForward, FiveByFiveOnesKernelGivesWindowSums) {
  TensorF x({1, 5, 5, 1});
  for (Index i = 0; i < 25; ++i) x[i] = float(i + 1);
  const TensorF w = TensorF::ones({3, 3, 1, 1});
  const TensorF y = conv2d_forward(x, w, TensorF({1}), ConvGeometry::make(5, 5, 1, 1, Padding::kValid));
  ASSERT_EQ(y.shape(), (Shape{1, 3, 3, 1}));
  const float expected[9] = {63, 72, 81, 108, 117, 126, 153, 162, 171};
  for (Index i = 0; i < 9; ++i) EXPECT_FLOAT_EQ(y[i], expected[i]);
}

TEST(Conv2dForward, IdentityKernelSamePadding) {
  Rng rng(3);
  const TensorF x = oracle::random_tensor<float>({2, 6, 5, 3}, rng);
  TensorF w({3, 3, 3, 3});
  for (Index c = 0; c < 3; ++c) w[((1 * 3 + 1) * 3 + c) * 3 + c] = 1.0f;
  const TensorF y = conv2d_forward(x, w, TensorF({3}), ConvGeometry::make(6, 5, 3, 3, Padding::kSame));
  EXPECT_EQ(y, x);
}

TEST(Conv2dForward, MatchesNestedLoopOracle) {
  Rng rng(11);
  const TensorF x = oracle::random_tensor<float>({1, 4, 4, 2}, rng);
  const TensorF w = oracle::random_tensor<float>({3, 3, 2, 3}, rng);
  const TensorF b = oracle::random_tensor<float>({3}, rng);
  for (auto mode : {Padding::kValid, Padding::kSame}) {
    const auto g = ConvGeometry::make(4, 4, 2, 3, mode);
    const TensorF got = conv2d_forward(x, w, b, g);
    const TensorF want = oracle::naive_conv2d(x, w, b, 1, g.padding);
    ASSERT_EQ(got.shape(), want.shape());
    for (Index i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-5 * std::max(1.0f, std::abs(want[i])));
  }
}

TEST(Conv2dForward, BitwiseOracleOnExactValuesIn64Bit) {
  // Small integers keep every partial sum exact, so summation order is moot.
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Index h = 3 + Index(rng.below(6)), w = 3 + Index(rng.below(6));
    const Index c = 1 + Index(rng.below(3)), o = 1 + Index(rng.below(4));
    TensorD x({2, h, w, c}), k({3, 3, c, o}), b({o});
    for (auto* t : {&x, &k, &b})
      for (Index i = 0; i < t->size(); ++i) (*t)[i] = double(Index(rng.below(9)) - 4);
    const Index stride = 1 + Index(rng.below(2));
    const Index pad = Index(rng.below(2));
    const ConvGeometry g{h, w, c, o, 3, 3, stride, pad};
    EXPECT_EQ(conv2d_forward(x, k, b, g), oracle::naive_conv2d(x, k, b, stride, pad));
  }
}

TEST(Conv2dForward, ShapeCalculusProperty) {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const Index h = 1 + Index(rng.below(20)), w = 1 + Index(rng.below(20));
    const Index stride = 1 + Index(rng.below(3)), pad = Index(rng.below(3));
    const ConvGeometry g{h, w, 2, 3, 3, 3, stride, pad};
    const Index oh = (h - 3 + 2 * pad) / stride + 1, ow = (w - 3 + 2 * pad) / stride + 1;
    if (h - 3 + 2 * pad < 0 || w - 3 + 2 * pad < 0) {
      EXPECT_THROW(conv_output_shape(g), ShapeError);
      continue;
    }
    const TensorF y = conv2d_forward(TensorF({1, h, w, 2}), TensorF({3, 3, 2, 3}), TensorF({3}), g);
    EXPECT_EQ(y.shape(), (Shape{1, oh, ow, 3}));
  }
}

TEST(Conv2dForward, LinearInInputWithoutBias) {
  Rng rng(23);
  const TensorF x = oracle::random_tensor<float>({2, 7, 6, 3}, rng);
  const TensorF w = oracle::random_tensor<float>({3, 3, 3, 4}, rng);
  const auto g = ConvGeometry::make(7, 6, 3, 4, Padding::kSame);
  const float a = 2.75f;
  const TensorF lhs = conv2d_forward(scale(x, a), w, TensorF({4}), g);
  const TensorF rhs = scale(conv2d_forward(x, w, TensorF({4}), g), a);
  for (Index i = 0; i < lhs.size(); ++i)
    EXPECT_NEAR(lhs[i], rhs[i], 1e-5 * std::max(1.0f, std::abs(rhs[i])));
}

TEST(Conv2dForward, ShapeMismatchNamesDimension) {
  const auto g = ConvGeometry::make(4, 4, 2, 3, Padding::kSame);
  try {
    conv2d_forward(TensorF({1, 4, 4, 5}), TensorF({3, 3, 2, 3}), TensorF({3}), g);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("in_channels"), std::string::npos);
  }
  try {
    conv2d_forward(TensorF({1, 5, 4, 2}), TensorF({3, 3, 2, 3}), TensorF({3}), g);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("height"), std::string::npos);
  }
  EXPECT_THROW(conv2d_forward(TensorF({1, 4, 4, 2}), TensorF({3, 3, 2, 3}), TensorF({2}), g), ShapeError);
}

TEST(Conv2dBackward, ZeroUpstreamGivesZeroGradients) {
  Rng rng(2);
  const TensorF x = oracle::random_tensor<float>({2, 5, 5, 2}, rng);
  const TensorF w = oracle::random_tensor<float>({3, 3, 2, 4}, rng);
  const auto g = ConvGeometry::make(5, 5, 2, 4, Padding::kSame);
  const auto grads = conv2d_backward(x, w, TensorF({2, 5, 5, 4}), g);
  EXPECT_TRUE((grads.input.array() == 0).all());
  EXPECT_TRUE((grads.weights.array() == 0).all());
  EXPECT_TRUE((grads.bias.array() == 0).all());
}

TEST(Conv2dBackward, SingleOutputWeightGradientIsInputWindow) {
  Rng rng(9);
  const TensorF x = oracle::random_tensor<float>({1, 3, 3, 1}, rng);
  const TensorF w = oracle::random_tensor<float>({3, 3, 1, 1}, rng);
  const auto grads = conv2d_backward(x, w, TensorF::ones({1, 1, 1, 1}),
                                     ConvGeometry::make(3, 3, 1, 1, Padding::kValid));
  for (Index i = 0; i < 9; ++i) EXPECT_FLOAT_EQ(grads.weights[i], x[i]);
  EXPECT_FLOAT_EQ(grads.bias[0], 1.0f);
  for (Index i = 0; i < 9; ++i) EXPECT_FLOAT_EQ(grads.input[i], w[i]);
}

TEST(Conv2dBackward, MatchesCentralDifferences) {
  Rng rng(31);
  for (auto mode : {Padding::kValid, Padding::kSame}) {
    TensorD x = oracle::random_tensor<double>({2, 5, 4, 2}, rng);
    TensorD w = oracle::random_tensor<double>({3, 3, 2, 3}, rng);
    TensorD b = oracle::random_tensor<double>({3}, rng);
    const auto g = ConvGeometry::make(5, 4, 2, 3, mode);
    const auto [oh, ow] = conv_output_shape(g);
    const TensorD r = oracle::random_tensor<double>({2, oh, ow, 3}, rng);
    auto loss = [&] { return (conv2d_forward(x, w, b, g).array() * r.array()).sum(); };
    const auto grads = conv2d_backward(x, w, r, g);
    EXPECT_LT(oracle::max_relative_error(flat(grads.input), oracle::central_difference(loss, x.values(), 1e-3)), 1e-4);
    EXPECT_LT(oracle::max_relative_error(flat(grads.weights), oracle::central_difference(loss, w.values(), 1e-3)), 1e-4);
    EXPECT_LT(oracle::max_relative_error(flat(grads.bias), oracle::central_difference(loss, b.values(), 1e-3)), 1e-4);
  }
}

TEST(MaxPool, FourByFourExample) {
  const TensorF x({1, 4, 4, 1}, {1, 3, 2, 1, 4, 6, 6, 8, 3, 1, 1, 0, 1, 2, 2, 4});
  const auto r = maxpool2d_forward(x);
  EXPECT_EQ(r.output, TensorF({1, 2, 2, 1}, {6, 8, 3, 4}));
  const TensorF g = maxpool2d_backward(r, TensorF::ones({1, 2, 2, 1}));
  const TensorF want({1, 4, 4, 1}, {0, 0, 0, 0, 0, 1, 0, 1, 1, 0, 0, 0, 0, 0, 0, 1});
  EXPECT_EQ(g, want);
}

TEST(MaxPool, ConstantInputAndTies) {
  const TensorF x({1, 4, 6, 2}, 0.25f);
  const auto r = maxpool2d_forward(x);
  EXPECT_EQ(r.output.shape(), (Shape{1, 2, 3, 2}));
  EXPECT_TRUE((r.output.array() == 0.25f).all());
  const TensorF g = maxpool2d_backward(r, TensorF::ones(r.output.shape()));
  // Each window's top-left element (lowest flat index) wins.
  for (Index y = 0; y < 4; ++y)
    for (Index x2 = 0; x2 < 6; ++x2)
      for (Index c = 0; c < 2; ++c)
        EXPECT_EQ(g.at(0, y, x2, c), (y % 2 == 0 && x2 % 2 == 0) ? 1.0f : 0.0f);
  EXPECT_EQ(sum(g), float(r.output.size()));
}

TEST(MaxPool, ZeroUpstream) {
  Rng rng(4);
  const auto r = maxpool2d_forward(oracle::random_tensor<float>({2, 6, 6, 3}, rng));
  EXPECT_TRUE((maxpool2d_backward(r, TensorF(r.output.shape())).array() == 0).all());
}

TEST(MaxPool, ChainedShapes) {
  Index s = 224;
  std::vector<Index> chain{s};
  for (int i = 0; i < 6; ++i) chain.push_back(s = pool_output_shape(s, s, {}).first);
  EXPECT_EQ(chain, (std::vector<Index>{224, 112, 56, 28, 14, 7, 3}));
  EXPECT_THROW(pool_output_shape(1, 4, {}), ShapeError);
}

TEST(MaxPool, MassConservationProperty) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const Index h = 2 + Index(rng.below(9)), w = 2 + Index(rng.below(9));
    const auto r = maxpool2d_forward(oracle::random_tensor<float>({2, h, w, 3}, rng));
    // Integer-valued upstream keeps float sums exact.
    TensorF up(r.output.shape());
    for (Index i = 0; i < up.size(); ++i) up[i] = float(Index(rng.below(7)) - 3);
    EXPECT_EQ(sum(maxpool2d_backward(r, up)), sum(up));
  }
}

TEST(MaxPool, MatchesCentralDifferences) {
  Rng rng(12);
  TensorD x({2, 6, 4, 2});
  // Distinct, well-separated values so no perturbation flips a window winner.
  std::vector<double> vals(std::size_t(x.size()));
  for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = double(i) * 0.1;
  rng.shuffle(vals);
  for (Index i = 0; i < x.size(); ++i) x[i] = vals[std::size_t(i)];
  const auto r0 = maxpool2d_forward(x);
  const TensorD up = oracle::random_tensor<double>(r0.output.shape(), rng);
  auto loss = [&] { return (maxpool2d_forward(x).output.array() * up.array()).sum(); };
  const auto numeric = oracle::central_difference(loss, x.values(), 1e-3);
  EXPECT_LT(oracle::max_relative_error(flat(maxpool2d_backward(r0, up)), numeric), 1e-4);
}

TEST(Matmul, Examples) {
  const TensorF a({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(matmul(a, TensorF({2, 2}, {1, 0, 0, 1})), a);
  EXPECT_EQ(matmul(a, TensorF({2, 1}, {5, 6})), TensorF({2, 1}, {17, 39}));
  EXPECT_EQ(matmul(TensorF({1, 4608}), TensorF({4608, 256})).shape(), (Shape{1, 256}));
  EXPECT_THROW(matmul(a, TensorF({3, 1})), ShapeError);
}

TEST(Elementwise, Basics) {
  const TensorF a({2, 2}, {1, 2, 3, 4});
  const TensorF b({2, 2}, {5, 6, 7, 8});
  EXPECT_EQ(add(a, b), TensorF({2, 2}, {6, 8, 10, 12}));
  EXPECT_EQ(mul(a, b), TensorF({2, 2}, {5, 12, 21, 32}));
  EXPECT_EQ(scale(a, 2.0f), TensorF({2, 2}, {2, 4, 6, 8}));
  EXPECT_EQ(sum(a), 10.0f);
  EXPECT_EQ(sum_rows(a), TensorF({2}, {4, 6}));
  EXPECT_EQ(transpose(a), TensorF({2, 2}, {1, 3, 2, 4}));
  EXPECT_THROW(add(a, TensorF({4})), ShapeError);
}
