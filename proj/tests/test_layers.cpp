#include <doctest.h>

#include <string>

#include "sigspp/layers.hpp"
#include "test_support.hpp"

using namespace sigspp;
using sigspp::test::random_tensor;

namespace {

// Direct six-loop cross-correlation, the independent reference for conv.
template <typename T>
Tensor4<T> conv_oracle(const Tensor4<T>& input, const Tensor4<T>& weights,
                       const std::vector<T>& bias, int stride, int padding) {
  const int out_h = conv_out_dim(input.height(), weights.height(), stride, padding);
  const int out_w = conv_out_dim(input.width(), weights.width(), stride, padding);
  Tensor4<T> out(input.batch(), weights.batch(), out_h, out_w);
  for (int n = 0; n < input.batch(); ++n) {
    for (int f = 0; f < weights.batch(); ++f) {
      for (int oh = 0; oh < out_h; ++oh) {
        for (int ow = 0; ow < out_w; ++ow) {
          double acc = bias[static_cast<std::size_t>(f)];
          for (int c = 0; c < input.channels(); ++c) {
            for (int kh = 0; kh < weights.height(); ++kh) {
              for (int kw = 0; kw < weights.width(); ++kw) {
                const int ih = oh * stride - padding + kh;
                const int iw = ow * stride - padding + kw;
                if (ih < 0 || ih >= input.height() || iw < 0 || iw >= input.width()) continue;
                acc += static_cast<double>(input(n, c, ih, iw)) * weights(f, c, kh, kw);
              }
            }
          }
          out(n, f, oh, ow) = static_cast<T>(acc);
        }
      }
    }
  }
  return out;
}

// Nested-loop max pooling reference.
template <typename T>
Tensor4<T> pool_oracle(const Tensor4<T>& input, int size, int stride, int padding) {
  const int out_h = conv_out_dim(input.height(), size, stride, padding);
  const int out_w = conv_out_dim(input.width(), size, stride, padding);
  Tensor4<T> out(input.batch(), input.channels(), out_h, out_w);
  for (int n = 0; n < input.batch(); ++n) {
    for (int c = 0; c < input.channels(); ++c) {
      for (int oh = 0; oh < out_h; ++oh) {
        for (int ow = 0; ow < out_w; ++ow) {
          double best = -1e300;
          for (int kh = 0; kh < size; ++kh) {
            for (int kw = 0; kw < size; ++kw) {
              const int ih = oh * stride - padding + kh;
              const int iw = ow * stride - padding + kw;
              if (ih < 0 || ih >= input.height() || iw < 0 || iw >= input.width()) continue;
              best = std::max(best, static_cast<double>(input(n, c, ih, iw)));
            }
          }
          out(n, c, oh, ow) = static_cast<T>(best);
        }
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("conv: all-ones 3x3 filter over all-ones 3x3 input sums to 9") {
  Tensor4<double> input(1, 1, 3, 3);
  input.fill(1.0);
  Tensor4<double> weights(1, 1, 3, 3);
  weights.fill(1.0);
  const auto out = conv2d_forward(input, weights, std::vector<double>{0.0}, 1, 0);
  CHECK(out.dims() == std::array<int, 4>{1, 1, 1, 1});
  CHECK(out(0, 0, 0, 0) == doctest::Approx(9.0));
}

TEST_CASE("conv: output size formula") {
  Tensor4<double> input(1, 1, 5, 5);
  Tensor4<double> weights(1, 1, 3, 3);
  const auto out = conv2d_forward(input, weights, std::vector<double>{0.0}, 2, 1);
  CHECK(out.height() == 3);
  CHECK(out.width() == 3);
}

TEST_CASE("conv matches the nested-loop oracle") {
  sigspp::Rng rng(99);
  for (int trial = 0; trial < 5; ++trial) {
    auto input = random_tensor<double>(2, 4, 16, 16, rng);
    auto weights = random_tensor<double>(6, 4, 5, 5, rng);
    std::vector<double> bias(6);
    for (auto& b : bias) b = rng.uniform(-0.5, 0.5);
    const auto got = conv2d_forward(input, weights, bias, 1, 2);
    const auto expected = conv_oracle(input, weights, bias, 1, 2);
    REQUIRE(got.same_shape(expected));
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(std::abs(got.flat(i) - expected.flat(i)) < 1e-10);
    }
  }
}

TEST_CASE("conv with stride and padding matches the oracle") {
  sigspp::Rng rng(123);
  auto input = random_tensor<double>(1, 3, 11, 13, rng);
  auto weights = random_tensor<double>(5, 3, 3, 3, rng);
  std::vector<double> bias(5, 0.25);
  const auto got = conv2d_forward(input, weights, bias, 2, 1);
  const auto expected = conv_oracle(input, weights, bias, 2, 1);
  REQUIRE(got.same_shape(expected));
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(std::abs(got.flat(i) - expected.flat(i)) < 1e-10);
  }
}

TEST_CASE("conv rejects channel mismatch, naming the layer") {
  Tensor4<double> input(1, 2, 4, 4);
  Tensor4<double> weights(1, 3, 3, 3);
  CHECK_THROWS_WITH_AS(conv2d_forward(input, weights, std::vector<double>{0.0}, 1, 0, "conv2"),
                       doctest::Contains("conv2"), ShapeError);
}

TEST_CASE("maxpool: 2x2 window over [[1,2],[3,4]] gives 4") {
  Tensor4<double> input(1, 1, 2, 2);
  input(0, 0, 0, 0) = 1;
  input(0, 0, 0, 1) = 2;
  input(0, 0, 1, 0) = 3;
  input(0, 0, 1, 1) = 4;
  const auto result = maxpool_forward(input, 2, 2, 0);
  CHECK(result.output.size() == 1);
  CHECK(result.output(0, 0, 0, 0) == 4.0);
}

TEST_CASE("maxpool: constant input stays constant") {
  Tensor4<float> input(2, 3, 7, 7);
  input.fill(3.25f);
  const auto result = maxpool_forward(input, 3, 2, 0);
  for (std::size_t i = 0; i < result.output.size(); ++i) {
    CHECK(result.output.flat(i) == 3.25f);
  }
}

TEST_CASE("maxpool matches the nested-loop oracle exactly") {
  sigspp::Rng rng(7);
  auto input = random_tensor<double>(1, 3, 9, 9, rng);
  const auto got = maxpool_forward(input, 3, 3, 0);
  const auto expected = pool_oracle(input, 3, 3, 0);
  REQUIRE(got.output.same_shape(expected));
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(got.output.flat(i) == expected.flat(i));
  }
}

TEST_CASE("maxpool: padding is never selected over real values") {
  // all values negative: a zero-padded border must not win
  Tensor4<double> input(1, 1, 4, 4);
  input.fill(-5.0);
  input(0, 0, 1, 1) = -1.0;
  const auto result = maxpool_forward(input, 3, 3, 1);
  const auto expected = pool_oracle(input, 3, 3, 1);
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(result.output.flat(i) == expected.flat(i));
  }
  CHECK(result.output(0, 0, 0, 0) == -1.0);
}

TEST_CASE("maxpool: window larger than padded input is a shape error") {
  Tensor4<double> input(1, 1, 2, 2);
  CHECK_THROWS_AS(maxpool_forward(input, 5, 1, 0), ShapeError);
}

TEST_CASE("maxpool argmax ties pick the first in row-major order") {
  Tensor4<double> input(1, 1, 2, 2);
  input.fill(1.0);
  const auto result = maxpool_forward(input, 2, 2, 0);
  CHECK(result.argmax[0] == input.index(0, 0, 0, 0));
}

TEST_CASE("maxpool backward routes gradients to the argmax") {
  Tensor4<double> input(1, 1, 2, 2);
  input(0, 0, 0, 0) = 1;
  input(0, 0, 0, 1) = 2;
  input(0, 0, 1, 0) = 3;
  input(0, 0, 1, 1) = 4;
  const auto fwd = maxpool_forward(input, 2, 2, 0);
  Tensor4<double> upstream(1, 1, 1, 1);
  upstream(0, 0, 0, 0) = 2.5;
  const auto grad = maxpool_backward(upstream, fwd.argmax, input.dims());
  CHECK(grad(0, 0, 1, 1) == 2.5);
  CHECK(grad(0, 0, 0, 0) == 0.0);
}

TEST_CASE("fc: identity weights with zero bias reproduce the input") {
  Tensor4<double> input(1, 3, 1, 1);
  input(0, 0, 0, 0) = 1;
  input(0, 1, 0, 0) = 2;
  input(0, 2, 0, 0) = 3;
  std::vector<double> weights(9, 0.0);
  weights[0] = weights[4] = weights[8] = 1.0;  // 3x3 identity, row-major
  const auto out = fc_forward(input, weights, 3, 3, std::vector<double>(3, 0.0));
  CHECK(out(0, 0, 0, 0) == 1.0);
  CHECK(out(0, 1, 0, 0) == 2.0);
  CHECK(out(0, 2, 0, 0) == 3.0);
}

TEST_CASE("fc: K=2 worked example") {
  Tensor4<double> input(1, 2, 1, 1);
  input(0, 0, 0, 0) = 1;
  input(0, 1, 0, 0) = 2;
  const std::vector<double> weights = {1, 0, 0, 1};  // identity
  const std::vector<double> bias = {1, 1};
  const auto out = fc_forward(input, weights, 2, 2, bias);
  CHECK(out(0, 0, 0, 0) == 2.0);
  CHECK(out(0, 1, 0, 0) == 3.0);
}

TEST_CASE("fc matches a naive dot-product oracle") {
  sigspp::Rng rng(41);
  const int batch = 3, in_dim = 17, out_dim = 9;
  auto input = random_tensor<double>(batch, in_dim, 1, 1, rng);
  std::vector<double> weights(static_cast<std::size_t>(in_dim) * out_dim);
  for (auto& w : weights) w = rng.uniform(-1, 1);
  std::vector<double> bias(out_dim);
  for (auto& b : bias) b = rng.uniform(-1, 1);
  const auto out = fc_forward(input, weights, in_dim, out_dim, bias);
  for (int n = 0; n < batch; ++n) {
    for (int m = 0; m < out_dim; ++m) {
      double acc = bias[static_cast<std::size_t>(m)];
      for (int k = 0; k < in_dim; ++k) {
        acc += input(n, k, 0, 0) * weights[static_cast<std::size_t>(k) * out_dim + m];
      }
      CHECK(std::abs(out(n, m, 0, 0) - acc) < 1e-10);
    }
  }
}

TEST_CASE("fc reports expected vs actual K on mismatch") {
  // this is exactly the failure mode spp removes
  Tensor4<double> input(1, 4, 1, 1);
  std::vector<double> weights(6, 0.0);
  try {
    fc_forward(input, weights, 3, 2, std::vector<double>(2, 0.0), "fc1");
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string message = e.what();
    CHECK(message.find("K=3") != std::string::npos);  // expected
    CHECK(message.find("K=4") != std::string::npos);  // actual
    CHECK(message.find("fc1") != std::string::npos);
  }
}

TEST_CASE("relu zeroes negatives and their gradients") {
  Tensor4<double> input(1, 1, 1, 4);
  input(0, 0, 0, 0) = -2;
  input(0, 0, 0, 1) = -0.5;
  input(0, 0, 0, 2) = 0.5;
  input(0, 0, 0, 3) = 2;
  const auto out = relu_forward(input);
  CHECK(out(0, 0, 0, 0) == 0.0);
  CHECK(out(0, 0, 0, 2) == 0.5);
  Tensor4<double> upstream(1, 1, 1, 4);
  upstream.fill(1.0);
  const auto grad = relu_backward(upstream, input);
  CHECK(grad(0, 0, 0, 0) == 0.0);
  CHECK(grad(0, 0, 0, 3) == 1.0);
}
