#ifndef FORMCAST_OPS_HPP
#define FORMCAST_OPS_HPP

#include "formcast/autodiff.hpp"
#include "formcast/tensor.hpp"

namespace formcast::nn {

struct ConvGeometry {
  Index stride = 1;
  Index pad = 0;
};

/// Output extent of a convolution: floor((in + 2 pad - k) / stride) + 1.
Index conv_out_extent(Index in, Index kernel, const ConvGeometry& g);
/// Output extent of a transposed convolution: (in - 1) stride - 2 pad + k.
Index conv_transpose_out_extent(Index in, Index kernel, const ConvGeometry& g);

/// Cross-correlation. x: (N, Cin, H, W); weight: (Cout, Cin, k, k); bias: (Cout).
template <typename Scalar>
Var<Scalar> conv2d(const Var<Scalar>& x, const Var<Scalar>& weight, const Var<Scalar>& bias,
                   const ConvGeometry& g);

/// Adjoint of conv2d with the same geometry. weight: (Cin, Cout, k, k).
template <typename Scalar>
Var<Scalar> conv_transpose2d(const Var<Scalar>& x, const Var<Scalar>& weight,
                             const Var<Scalar>& bias, const ConvGeometry& g);

template <typename Scalar>
struct BatchNormStats {
  Tensor<Scalar> running_mean;  ///< (C)
  Tensor<Scalar> running_var;   ///< (C), unbiased batch variance
  double momentum = 0.1;
  double eps = 1e-5;

  explicit BatchNormStats(Index channels = 0)
      : running_mean(Shape{channels}), running_var(Shape{channels}, Scalar(1)) {}
};

/// Per-channel normalization. Training mode uses batch statistics (biased
/// variance) and updates the running statistics; eval mode uses the running
/// statistics.
template <typename Scalar>
Var<Scalar> batchnorm2d(const Var<Scalar>& x, const Var<Scalar>& gamma, const Var<Scalar>& beta,
                        BatchNormStats<Scalar>& stats, bool training);

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& x);

template <typename Scalar>
Var<Scalar> sigmoid(const Var<Scalar>& x);

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b);

/// Concatenation along the channel axis of two (N, C, H, W) tensors.
template <typename Scalar>
Var<Scalar> concat_channels(const Var<Scalar>& a, const Var<Scalar>& b);

/// Channels [begin, begin + count) of a (N, C, H, W) tensor.
template <typename Scalar>
Var<Scalar> slice_channels(const Var<Scalar>& x, Index begin, Index count);

/// (N, C, H, W) -> (N, C, 1, 1) spatial mean.
template <typename Scalar>
Var<Scalar> global_avg_pool(const Var<Scalar>& x);

/// y = x W^T + b with x viewed as (N, F). weight: (Cout, F); bias: (Cout).
/// Output is (N, Cout, 1, 1).
template <typename Scalar>
Var<Scalar> linear(const Var<Scalar>& x, const Var<Scalar>& weight, const Var<Scalar>& bias);

/// u * scale + shift with scale, shift of shape (N, C, 1, 1) broadcast over H, W.
template <typename Scalar>
Var<Scalar> channel_affine(const Var<Scalar>& u, const Var<Scalar>& scale,
                           const Var<Scalar>& shift);

/// Mean squared error over every element; returns shape (1).
template <typename Scalar>
Var<Scalar> mse_loss(const Var<Scalar>& prediction, const Var<Scalar>& target);

}  // namespace formcast::nn

#endif  // FORMCAST_OPS_HPP
