#pragma once

#include "mpox/tensor.hpp"

#include <limits>
#include <utility>

namespace mpox {

enum class Padding { kValid, kSame };

/// Geometry of a 2-D convolution over NHWC input with HWIO weights.
struct ConvGeometry {
  Index input_h = 0;
  Index input_w = 0;
  Index in_channels = 0;
  Index out_channels = 0;
  Index kernel_h = 3;
  Index kernel_w = 3;
  Index stride = 1;
  Index padding = 0;  // zero rows/columns added on every side

  /// "same" for odd kernels at stride 1 is (k - 1) / 2 zeros per side.
  static ConvGeometry make(Index h, Index w, Index in_c, Index out_c, Padding mode,
                           Index kernel = 3, Index stride = 1) {
    ConvGeometry g{h, w, in_c, out_c, kernel, kernel, stride, 0};
    if (mode == Padding::kSame) g.padding = (kernel - 1) / 2;
    return g;
  }
};

/// Output extent of a strided window: floor((in - k + 2p) / s) + 1.
inline Index window_output_extent(Index input, Index window, Index padding, Index stride) {
  if (stride <= 0) throw ShapeError("stride must be positive, got " + std::to_string(stride));
  const Index span = input - window + 2 * padding;
  if (span < 0) return 0;
  return span / stride + 1;
}

inline std::pair<Index, Index> conv_output_shape(const ConvGeometry& g) {
  const Index oh = window_output_extent(g.input_h, g.kernel_h, g.padding, g.stride);
  const Index ow = window_output_extent(g.input_w, g.kernel_w, g.padding, g.stride);
  if (oh <= 0)
    throw ShapeError("convolution output height is non-positive for input height " +
                     std::to_string(g.input_h));
  if (ow <= 0)
    throw ShapeError("convolution output width is non-positive for input width " +
                     std::to_string(g.input_w));
  return {oh, ow};
}

/// Max pooling geometry; valid padding only.
struct PoolGeometry {
  Index pool = 2;
  Index stride = 2;
};

inline std::pair<Index, Index> pool_output_shape(Index h, Index w, const PoolGeometry& g) {
  const Index oh = window_output_extent(h, g.pool, 0, g.stride);
  const Index ow = window_output_extent(w, g.pool, 0, g.stride);
  if (oh <= 0 || ow <= 0)
    throw ShapeError("max pooling input " + std::to_string(h) + "x" + std::to_string(w) +
                     " is smaller than the pool window " + std::to_string(g.pool));
  return {oh, ow};
}

namespace detail {

template <typename Scalar>
void check_conv_operands(const Tensor<Scalar>& input, const Tensor<Scalar>& weights,
                         const ConvGeometry& g) {
  if (input.rank() != 4) throw ShapeError("conv2d input must be NHWC rank 4");
  if (weights.rank() != 4) throw ShapeError("conv2d weights must be [kh, kw, in, out]");
  if (input.dim(1) != g.input_h)
    throw ShapeError("conv2d input height " + std::to_string(input.dim(1)) +
                     " does not match geometry " + std::to_string(g.input_h));
  if (input.dim(2) != g.input_w)
    throw ShapeError("conv2d input width " + std::to_string(input.dim(2)) +
                     " does not match geometry " + std::to_string(g.input_w));
  if (input.dim(3) != g.in_channels || weights.dim(2) != g.in_channels)
    throw ShapeError("conv2d in_channels mismatch: input has " + std::to_string(input.dim(3)) +
                     ", weights have " + std::to_string(weights.dim(2)) + ", geometry has " +
                     std::to_string(g.in_channels));
  if (weights.dim(3) != g.out_channels)
    throw ShapeError("conv2d out_channels mismatch: weights have " +
                     std::to_string(weights.dim(3)) + ", geometry has " +
                     std::to_string(g.out_channels));
  if (weights.dim(0) != g.kernel_h || weights.dim(1) != g.kernel_w)
    throw ShapeError("conv2d kernel size mismatch: weights are " +
                     std::to_string(weights.dim(0)) + "x" + std::to_string(weights.dim(1)));
}

// Unfolds one image (H, W, C) into rows of receptive fields; row r = output
// pixel r, columns ordered (kh, kw, c) to match the HWIO weight layout.
template <typename Scalar>
void im2col(const Scalar* image, const ConvGeometry& g, Index oh, Index ow,
            MatrixRM<Scalar>& cols) {
  const Index c = g.in_channels;
  cols.resize(oh * ow, g.kernel_h * g.kernel_w * c);
  for (Index y = 0; y < oh; ++y) {
    for (Index x = 0; x < ow; ++x) {
      Scalar* row = cols.row(y * ow + x).data();
      for (Index ky = 0; ky < g.kernel_h; ++ky) {
        const Index iy = y * g.stride + ky - g.padding;
        for (Index kx = 0; kx < g.kernel_w; ++kx) {
          const Index ix = x * g.stride + kx - g.padding;
          Scalar* dst = row + (ky * g.kernel_w + kx) * c;
          if (iy < 0 || iy >= g.input_h || ix < 0 || ix >= g.input_w) {
            std::fill(dst, dst + c, Scalar(0));
          } else {
            const Scalar* src = image + (iy * g.input_w + ix) * c;
            std::copy(src, src + c, dst);
          }
        }
      }
    }
  }
}

template <typename Scalar>
void col2im_add(const MatrixRM<Scalar>& cols, const ConvGeometry& g, Index oh, Index ow,
                Scalar* image) {
  const Index c = g.in_channels;
  for (Index y = 0; y < oh; ++y) {
    for (Index x = 0; x < ow; ++x) {
      const Scalar* row = cols.row(y * ow + x).data();
      for (Index ky = 0; ky < g.kernel_h; ++ky) {
        const Index iy = y * g.stride + ky - g.padding;
        if (iy < 0 || iy >= g.input_h) continue;
        for (Index kx = 0; kx < g.kernel_w; ++kx) {
          const Index ix = x * g.stride + kx - g.padding;
          if (ix < 0 || ix >= g.input_w) continue;
          const Scalar* src = row + (ky * g.kernel_w + kx) * c;
          Scalar* dst = image + (iy * g.input_w + ix) * c;
          for (Index ch = 0; ch < c; ++ch) dst[ch] += src[ch];
        }
      }
    }
  }
}

}  // namespace detail

/// Cross-correlation of NHWC input with HWIO weights plus per-channel bias.
/// Padding cells contribute zeros. Computed per image as im2col followed by
/// a dense product.
template <typename Scalar>
Tensor<Scalar> conv2d_forward(const Tensor<Scalar>& input, const Tensor<Scalar>& weights,
                              const Tensor<Scalar>& bias, const ConvGeometry& g) {
  detail::check_conv_operands(input, weights, g);
  if (bias.size() != g.out_channels)
    throw ShapeError("conv2d bias has " + std::to_string(bias.size()) + " entries, expected " +
                     std::to_string(g.out_channels));
  const auto [oh, ow] = conv_output_shape(g);
  const Index n = input.dim(0);
  Tensor<Scalar> out({n, oh, ow, g.out_channels});
  const Eigen::Map<const MatrixRM<Scalar>> w(weights.data(),
                                             g.kernel_h * g.kernel_w * g.in_channels,
                                             g.out_channels);
  const Eigen::Map<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>> b(bias.data(),
                                                                     g.out_channels);
  const Index in_stride = g.input_h * g.input_w * g.in_channels;
  const Index out_stride = oh * ow * g.out_channels;
  MatrixRM<Scalar> cols;
  for (Index i = 0; i < n; ++i) {
    detail::im2col(input.data() + i * in_stride, g, oh, ow, cols);
    Eigen::Map<MatrixRM<Scalar>> y(out.data() + i * out_stride, oh * ow, g.out_channels);
    y.noalias() = cols * w;
    y.rowwise() += b;
  }
  return out;
}

template <typename Scalar>
struct ConvGradients {
  Tensor<Scalar> input;
  Tensor<Scalar> weights;
  Tensor<Scalar> bias;
};

template <typename Scalar>
ConvGradients<Scalar> conv2d_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& weights,
                                      const Tensor<Scalar>& grad_out, const ConvGeometry& g) {
  detail::check_conv_operands(input, weights, g);
  const auto [oh, ow] = conv_output_shape(g);
  const Index n = input.dim(0);
  const Shape expected{n, oh, ow, g.out_channels};
  if (grad_out.shape() != expected)
    throw ShapeError("conv2d grad_out shape " + shape_to_string(grad_out.shape()) +
                     " does not match forward output " + shape_to_string(expected));

  const Index k = g.kernel_h * g.kernel_w * g.in_channels;
  ConvGradients<Scalar> grads{Tensor<Scalar>::zeros_like(input),
                              Tensor<Scalar>::zeros_like(weights),
                              Tensor<Scalar>({g.out_channels})};
  const Eigen::Map<const MatrixRM<Scalar>> w(weights.data(), k, g.out_channels);
  Eigen::Map<MatrixRM<Scalar>> gw(grads.weights.data(), k, g.out_channels);
  Eigen::Map<Eigen::Matrix<Scalar, 1, Eigen::Dynamic>> gb(grads.bias.data(), g.out_channels);

  const Index in_stride = g.input_h * g.input_w * g.in_channels;
  const Index out_stride = oh * ow * g.out_channels;
  MatrixRM<Scalar> cols;
  MatrixRM<Scalar> grad_cols;
  for (Index i = 0; i < n; ++i) {
    const Eigen::Map<const MatrixRM<Scalar>> gy(grad_out.data() + i * out_stride, oh * ow,
                                                g.out_channels);
    detail::im2col(input.data() + i * in_stride, g, oh, ow, cols);
    gw.noalias() += cols.transpose() * gy;
    gb += gy.colwise().sum();
    grad_cols.noalias() = gy * w.transpose();
    detail::col2im_add(grad_cols, g, oh, ow, grads.input.data() + i * in_stride);
  }
  return grads;
}

/// Pooled values plus, per output element, the flat input index that won.
template <typename Scalar>
struct PoolResult {
  Tensor<Scalar> output;
  std::vector<Index> argmax;
  Shape input_shape;
};

/// Window maximum over NHWC input. Ties resolve to the lowest flat index.
template <typename Scalar>
PoolResult<Scalar> maxpool2d_forward(const Tensor<Scalar>& input, const PoolGeometry& g = {}) {
  if (input.rank() != 4) throw ShapeError("maxpool2d input must be NHWC rank 4");
  const Index n = input.dim(0), h = input.dim(1), w = input.dim(2), c = input.dim(3);
  const auto [oh, ow] = pool_output_shape(h, w, g);
  PoolResult<Scalar> result{Tensor<Scalar>({n, oh, ow, c}), {}, input.shape()};
  result.argmax.resize(static_cast<std::size_t>(result.output.size()));
  Index o = 0;
  for (Index b = 0; b < n; ++b)
    for (Index y = 0; y < oh; ++y)
      for (Index x = 0; x < ow; ++x)
        for (Index ch = 0; ch < c; ++ch, ++o) {
          Index best = -1;
          Scalar best_value = -std::numeric_limits<Scalar>::infinity();
          for (Index py = 0; py < g.pool; ++py)
            for (Index px = 0; px < g.pool; ++px) {
              const Index idx = ((b * h + y * g.stride + py) * w + x * g.stride + px) * c + ch;
              if (best < 0 || input[idx] > best_value) {
                best = idx;
                best_value = input[idx];
              }
            }
          result.output[o] = best_value;
          result.argmax[static_cast<std::size_t>(o)] = best;
        }
  return result;
}

template <typename Scalar>
Tensor<Scalar> maxpool2d_backward(const std::vector<Index>& argmax, const Shape& input_shape,
                                  const Tensor<Scalar>& grad_out) {
  if (static_cast<Index>(argmax.size()) != grad_out.size())
    throw ShapeError("maxpool2d grad_out has " + std::to_string(grad_out.size()) +
                     " elements, argmax map has " + std::to_string(argmax.size()));
  Tensor<Scalar> grad_in(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i)
    grad_in[argmax[i]] += grad_out[static_cast<Index>(i)];
  return grad_in;
}

template <typename Scalar>
Tensor<Scalar> maxpool2d_backward(const PoolResult<Scalar>& forward, const Tensor<Scalar>& grad_out) {
  return maxpool2d_backward(forward.argmax, forward.input_shape, grad_out);
}

// Dense algebra -----------------------------------------------------------

template <typename Scalar>
Tensor<Scalar> matmul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.rank() != 2 || b.rank() != 2) throw ShapeError("matmul operands must be rank 2");
  if (a.dim(1) != b.dim(0))
    throw ShapeError("matmul inner dimension mismatch: " + std::to_string(a.dim(1)) + " vs " +
                     std::to_string(b.dim(0)));
  Tensor<Scalar> out({a.dim(0), b.dim(1)});
  out.matrix().noalias() = a.matrix() * b.matrix();
  return out;
}

template <typename Scalar>
Tensor<Scalar> transpose(const Tensor<Scalar>& a) {
  if (a.rank() != 2) throw ShapeError("transpose operand must be rank 2");
  Tensor<Scalar> out({a.dim(1), a.dim(0)});
  out.matrix() = a.matrix().transpose();
  return out;
}

namespace detail {
template <typename Scalar>
void check_same_shape(const Tensor<Scalar>& a, const Tensor<Scalar>& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + " shape mismatch: " + shape_to_string(a.shape()) +
                     " vs " + shape_to_string(b.shape()));
}
}  // namespace detail

template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::check_same_shape(a, b, "add");
  Tensor<Scalar> out(a.shape());
  out.array() = a.array() + b.array();
  return out;
}

template <typename Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::check_same_shape(a, b, "mul");
  Tensor<Scalar> out(a.shape());
  out.array() = a.array() * b.array();
  return out;
}

template <typename Scalar>
Tensor<Scalar> scale(const Tensor<Scalar>& a, Scalar factor) {
  Tensor<Scalar> out(a.shape());
  out.array() = a.array() * factor;
  return out;
}

template <typename Scalar>
Scalar sum(const Tensor<Scalar>& a) {
  return a.array().sum();
}

/// Sum over all leading axes; result has the trailing dimension's length.
template <typename Scalar>
Tensor<Scalar> sum_rows(const Tensor<Scalar>& a) {
  Tensor<Scalar> out({a.shape().back()});
  Eigen::Map<Eigen::Matrix<Scalar, 1, Eigen::Dynamic>>(out.data(), out.size()) =
      a.matrix().colwise().sum();
  return out;
}

}  // namespace mpox
