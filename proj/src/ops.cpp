#include "formcast/ops.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace formcast::nn {

namespace {

template <typename Scalar>
using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using MapMat = Eigen::Map<RowMat<Scalar>>;
template <typename Scalar>
using CMapMat = Eigen::Map<const RowMat<Scalar>>;

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

void require_rank4(const Shape& s, const char* op) {
  require(s.rank() == 4, std::string(op) + ": expected an (N, C, H, W) tensor, got " + s.str());
}

struct Window {
  Index channels, height, width, kernel, stride, pad, out_h, out_w;
};

// col(c*k*k + ky*k + kx, oy*out_w + ox) = img(c, oy*stride - pad + ky, ox*stride - pad + kx)
template <typename Scalar>
void im2col(const Scalar* img, const Window& w, Scalar* col) {
  const Index plane = w.out_h * w.out_w;
  for (Index c = 0; c < w.channels; ++c) {
    const Scalar* src = img + c * w.height * w.width;
    for (Index ky = 0; ky < w.kernel; ++ky) {
      for (Index kx = 0; kx < w.kernel; ++kx) {
        Scalar* dst = col + ((c * w.kernel + ky) * w.kernel + kx) * plane;
        for (Index oy = 0; oy < w.out_h; ++oy) {
          const Index iy = oy * w.stride - w.pad + ky;
          Scalar* row = dst + oy * w.out_w;
          if (iy < 0 || iy >= w.height) {
            std::fill(row, row + w.out_w, Scalar(0));
            continue;
          }
          const Scalar* line = src + iy * w.width;
          if (w.stride == 1) {
            for (Index ox = 0; ox < w.out_w; ++ox) {
              const Index ix = ox - w.pad + kx;
              row[ox] = (ix >= 0 && ix < w.width) ? line[ix] : Scalar(0);
            }
          } else {
            for (Index ox = 0; ox < w.out_w; ++ox) {
              const Index ix = ox * w.stride - w.pad + kx;
              row[ox] = (ix >= 0 && ix < w.width) ? line[ix] : Scalar(0);
            }
          }
        }
      }
    }
  }
}

template <typename Scalar>
void col2im(const Scalar* col, const Window& w, Scalar* img) {
  const Index plane = w.out_h * w.out_w;
  for (Index c = 0; c < w.channels; ++c) {
    Scalar* dst = img + c * w.height * w.width;
    for (Index ky = 0; ky < w.kernel; ++ky) {
      for (Index kx = 0; kx < w.kernel; ++kx) {
        const Scalar* src = col + ((c * w.kernel + ky) * w.kernel + kx) * plane;
        for (Index oy = 0; oy < w.out_h; ++oy) {
          const Index iy = oy * w.stride - w.pad + ky;
          if (iy < 0 || iy >= w.height) continue;
          const Scalar* row = src + oy * w.out_w;
          Scalar* line = dst + iy * w.width;
          for (Index ox = 0; ox < w.out_w; ++ox) {
            const Index ix = ox * w.stride - w.pad + kx;
            if (ix >= 0 && ix < w.width) line[ix] += row[ox];
          }
        }
      }
    }
  }
}

template <typename Scalar>
bool wants(const Node<Scalar>& node, std::size_t input) {
  return node.inputs[input]->requires_grad;
}

}  // namespace

Index conv_out_extent(Index in, Index kernel, const ConvGeometry& g) {
  require(g.stride >= 1 && g.pad >= 0, "convolution: bad stride/padding");
  const Index span = in + 2 * g.pad - kernel;
  require(span >= 0, "convolution: kernel larger than padded input");
  return span / g.stride + 1;
}

Index conv_transpose_out_extent(Index in, Index kernel, const ConvGeometry& g) {
  require(g.stride >= 1 && g.pad >= 0, "transposed convolution: bad stride/padding");
  const Index out = (in - 1) * g.stride - 2 * g.pad + kernel;
  require(out >= 1, "transposed convolution: empty output");
  return out;
}

template <typename Scalar>
Var<Scalar> conv2d(const Var<Scalar>& x, const Var<Scalar>& weight, const Var<Scalar>& bias,
                   const ConvGeometry& g) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  require_rank4(xs, "conv2d");
  require(ws.rank() == 4 && ws[2] == ws[3], "conv2d: weight must be (Cout, Cin, k, k)");
  require(ws[1] == xs.c(), "conv2d: kernel channels do not match input channels");
  require(bias.shape() == Shape{ws[0]}, "conv2d: bias must be (Cout)");
  const Index cout = ws[0], k = ws[2];
  const Window win{xs.c(), xs.h(), xs.w(), k, g.stride, g.pad, conv_out_extent(xs.h(), k, g),
                   conv_out_extent(xs.w(), k, g)};
  const Index plane = win.out_h * win.out_w;
  const Index patch = win.channels * k * k;

  Tensor<Scalar> out(Shape{xs.n(), cout, win.out_h, win.out_w});
  RowMat<Scalar> col(patch, plane);
  const CMapMat<Scalar> wm(weight.value().data(), cout, patch);
  const auto b = bias.value().array().matrix();
  for (Index n = 0; n < xs.n(); ++n) {
    im2col(x.value().data() + n * win.channels * win.height * win.width, win, col.data());
    MapMat<Scalar> y(out.data() + n * cout * plane, cout, plane);
    y.noalias() = wm * col;
    y.colwise() += b;
  }

  return make_result<Scalar>(std::move(out), {x, weight, bias}, [win, cout, patch, plane](Node<Scalar>& self) {
    const auto& xv = self.inputs[0]->value;
    const auto& wv = self.inputs[1]->value;
    const Index batch = xv.shape().n();
    const CMapMat<Scalar> wm(wv.data(), cout, patch);
    RowMat<Scalar> col(patch, plane);
    RowMat<Scalar> dcol;
    for (Index n = 0; n < batch; ++n) {
      const CMapMat<Scalar> gy(self.grad.data() + n * cout * plane, cout, plane);
      if (wants(self, 1)) {
        im2col(xv.data() + n * win.channels * win.height * win.width, win, col.data());
        MapMat<Scalar>(self.inputs[1]->grad_buffer().data(), cout, patch).noalias() += gy * col.transpose();
      }
      if (wants(self, 2)) {
        self.inputs[2]->grad_buffer().array().matrix() += gy.rowwise().sum();
      }
      if (wants(self, 0)) {
        dcol.noalias() = wm.transpose() * gy;
        col2im(dcol.data(), win,
               self.inputs[0]->grad_buffer().data() + n * win.channels * win.height * win.width);
      }
    }
  });
}

template <typename Scalar>
Var<Scalar> conv_transpose2d(const Var<Scalar>& x, const Var<Scalar>& weight,
                             const Var<Scalar>& bias, const ConvGeometry& g) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  require_rank4(xs, "conv_transpose2d");
  require(ws.rank() == 4 && ws[2] == ws[3], "conv_transpose2d: weight must be (Cin, Cout, k, k)");
  require(ws[0] == xs.c(), "conv_transpose2d: kernel channels do not match input channels");
  require(bias.shape() == Shape{ws[1]}, "conv_transpose2d: bias must be (Cout)");
  const Index cin = ws[0], cout = ws[1], k = ws[2];
  const Index out_h = conv_transpose_out_extent(xs.h(), k, g);
  const Index out_w = conv_transpose_out_extent(xs.w(), k, g);
  // The forward pass scatters through the window of the adjoint convolution
  // that maps (out_h, out_w) back to (H, W).
  const Window win{cout, out_h, out_w, k, g.stride, g.pad, xs.h(), xs.w()};
  require(conv_out_extent(out_h, k, g) == xs.h() && conv_out_extent(out_w, k, g) == xs.w(),
          "conv_transpose2d: geometry is not invertible");
  const Index in_plane = xs.h() * xs.w();
  const Index patch = cout * k * k;

  Tensor<Scalar> out(Shape{xs.n(), cout, out_h, out_w});
  const CMapMat<Scalar> wm(weight.value().data(), cin, patch);
  RowMat<Scalar> cols(patch, in_plane);
  for (Index n = 0; n < xs.n(); ++n) {
    const CMapMat<Scalar> xn(x.value().data() + n * cin * in_plane, cin, in_plane);
    cols.noalias() = wm.transpose() * xn;
    Scalar* y = out.data() + n * cout * out_h * out_w;
    col2im(cols.data(), win, y);
    MapMat<Scalar>(y, cout, out_h * out_w).colwise() += bias.value().array().matrix();
  }

  return make_result<Scalar>(std::move(out), {x, weight, bias}, [win, cin, cout, patch, in_plane](Node<Scalar>& self) {
    const auto& xv = self.inputs[0]->value;
    const auto& wv = self.inputs[1]->value;
    const Index batch = xv.shape().n();
    const Index out_plane = win.height * win.width;
    const CMapMat<Scalar> wm(wv.data(), cin, patch);
    RowMat<Scalar> dcols(patch, in_plane);
    for (Index n = 0; n < batch; ++n) {
      const Scalar* gy = self.grad.data() + n * cout * out_plane;
      im2col(gy, win, dcols.data());
      if (wants(self, 0)) {
        MapMat<Scalar>(self.inputs[0]->grad_buffer().data() + n * cin * in_plane, cin, in_plane).noalias() +=
            wm * dcols;
      }
      if (wants(self, 1)) {
        const CMapMat<Scalar> xn(xv.data() + n * cin * in_plane, cin, in_plane);
        MapMat<Scalar>(self.inputs[1]->grad_buffer().data(), cin, patch).noalias() += xn * dcols.transpose();
      }
      if (wants(self, 2)) {
        self.inputs[2]->grad_buffer().array().matrix() += CMapMat<Scalar>(gy, cout, out_plane).rowwise().sum();
      }
    }
  });
}

template <typename Scalar>
Var<Scalar> batchnorm2d(const Var<Scalar>& x, const Var<Scalar>& gamma, const Var<Scalar>& beta,
                        BatchNormStats<Scalar>& stats, bool training) {
  const Shape& xs = x.shape();
  require_rank4(xs, "batchnorm2d");
  const Index batch = xs.n(), channels = xs.c(), plane = xs.h() * xs.w();
  require(gamma.shape() == Shape{channels} && beta.shape() == Shape{channels},
          "batchnorm2d: gamma/beta must be (C)");
  require(stats.running_mean.size() == channels, "batchnorm2d: running statistics size mismatch");
  if (training) require(batch >= 2, "batchnorm2d: training mode needs a batch of at least 2");

  using Vec = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  const Index count = batch * plane;
  Vec mean(channels), inv_std(channels);
  const Scalar* xd = x.value().data();
  for (Index c = 0; c < channels; ++c) {
    if (training) {
      double sum = 0.0;
      for (Index n = 0; n < batch; ++n) {
        sum += Eigen::Map<const Vec>(xd + (n * channels + c) * plane, plane).template cast<double>().sum();
      }
      const double mu = sum / static_cast<double>(count);
      double sq = 0.0;
      for (Index n = 0; n < batch; ++n) {
        sq += (Eigen::Map<const Vec>(xd + (n * channels + c) * plane, plane).template cast<double>() - mu)
                  .square()
                  .sum();
      }
      const double var = sq / static_cast<double>(count);
      mean[c] = static_cast<Scalar>(mu);
      inv_std[c] = static_cast<Scalar>(1.0 / std::sqrt(var + stats.eps));
      const double unbiased = count > 1 ? var * count / static_cast<double>(count - 1) : var;
      stats.running_mean[c] = static_cast<Scalar>((1.0 - stats.momentum) * stats.running_mean[c] + stats.momentum * mu);
      stats.running_var[c] = static_cast<Scalar>((1.0 - stats.momentum) * stats.running_var[c] + stats.momentum * unbiased);
    } else {
      mean[c] = stats.running_mean[c];
      inv_std[c] = static_cast<Scalar>(1.0 / std::sqrt(static_cast<double>(stats.running_var[c]) + stats.eps));
    }
  }

  Tensor<Scalar> out(xs);
  for (Index n = 0; n < batch; ++n) {
    for (Index c = 0; c < channels; ++c) {
      const Index off = (n * channels + c) * plane;
      const Scalar scale = gamma.value()[c] * inv_std[c];
      Eigen::Map<Vec>(out.data() + off, plane) =
          (Eigen::Map<const Vec>(xd + off, plane) - mean[c]) * scale + beta.value()[c];
    }
  }

  return make_result<Scalar>(std::move(out), {x, gamma, beta}, [mean, inv_std, training](Node<Scalar>& self) {
    const auto& xv = self.inputs[0]->value;
    const auto& gv = self.inputs[1]->value;
    const Index batch = xv.shape().n(), channels = xv.shape().c(), plane = xv.shape().h() * xv.shape().w();
    const auto count = static_cast<Scalar>(batch * plane);
    for (Index c = 0; c < channels; ++c) {
      Scalar sum_dy = 0, sum_dy_xhat = 0;
      for (Index n = 0; n < batch; ++n) {
        const Index off = (n * channels + c) * plane;
        const Eigen::Map<const Vec> dy(self.grad.data() + off, plane);
        const Vec xhat = (Eigen::Map<const Vec>(xv.data() + off, plane) - mean[c]) * inv_std[c];
        sum_dy += dy.sum();
        sum_dy_xhat += (dy * xhat).sum();
      }
      if (wants(self, 1)) self.inputs[1]->grad_buffer()[c] += sum_dy_xhat;
      if (wants(self, 2)) self.inputs[2]->grad_buffer()[c] += sum_dy;
      if (!wants(self, 0)) continue;
      Scalar* gx = self.inputs[0]->grad_buffer().data();
      for (Index n = 0; n < batch; ++n) {
        const Index off = (n * channels + c) * plane;
        const Eigen::Map<const Vec> dy(self.grad.data() + off, plane);
        Eigen::Map<Vec> dx(gx + off, plane);
        if (training) {
          const Vec xhat = (Eigen::Map<const Vec>(xv.data() + off, plane) - mean[c]) * inv_std[c];
          dx += (gv[c] * inv_std[c] / count) * (count * dy - sum_dy - xhat * sum_dy_xhat);
        } else {
          dx += gv[c] * inv_std[c] * dy;
        }
      }
    }
  });
}

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& x) {
  Tensor<Scalar> out(x.shape(), x.value().array().max(Scalar(0)));
  return make_result<Scalar>(std::move(out), {x}, [](Node<Scalar>& self) {
    const auto& xv = self.inputs[0]->value.array();
    self.inputs[0]->grad_buffer().array() += (xv > Scalar(0)).select(self.grad.array(), Scalar(0));
  });
}

template <typename Scalar>
Var<Scalar> sigmoid(const Var<Scalar>& x) {
  Tensor<Scalar> out(x.shape(), Scalar(1) / (Scalar(1) + (-x.value().array()).exp()));
  return make_result<Scalar>(std::move(out), {x}, [](Node<Scalar>& self) {
    const auto& y = self.value.array();
    self.inputs[0]->grad_buffer().array() += self.grad.array() * y * (Scalar(1) - y);
  });
}

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
  require(a.shape() == b.shape(), "add: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  Tensor<Scalar> out(a.shape(), a.value().array() + b.value().array());
  return make_result<Scalar>(std::move(out), {a, b}, [](Node<Scalar>& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (wants(self, k)) self.inputs[k]->grad_buffer().array() += self.grad.array();
    }
  });
}

template <typename Scalar>
Var<Scalar> concat_channels(const Var<Scalar>& a, const Var<Scalar>& b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  require_rank4(as, "concat_channels");
  require_rank4(bs, "concat_channels");
  require(as.n() == bs.n() && as.h() == bs.h() && as.w() == bs.w(),
          "concat_channels: batch and spatial extents must match");
  const Index plane = as.h() * as.w();
  const Index ca = as.c() * plane, cb = bs.c() * plane;
  Tensor<Scalar> out(Shape{as.n(), as.c() + bs.c(), as.h(), as.w()});
  for (Index n = 0; n < as.n(); ++n) {
    std::copy_n(a.value().data() + n * ca, ca, out.data() + n * (ca + cb));
    std::copy_n(b.value().data() + n * cb, cb, out.data() + n * (ca + cb) + ca);
  }
  return make_result<Scalar>(std::move(out), {a, b}, [ca, cb](Node<Scalar>& self) {
    const Index batch = self.value.shape().n();
    for (Index n = 0; n < batch; ++n) {
      const Scalar* g = self.grad.data() + n * (ca + cb);
      if (wants(self, 0)) {
        Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>>(self.inputs[0]->grad_buffer().data() + n * ca, ca) +=
            Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>>(g, ca);
      }
      if (wants(self, 1)) {
        Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>>(self.inputs[1]->grad_buffer().data() + n * cb, cb) +=
            Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>>(g + ca, cb);
      }
    }
  });
}

template <typename Scalar>
Var<Scalar> slice_channels(const Var<Scalar>& x, Index begin, Index count) {
  const Shape& xs = x.shape();
  require_rank4(xs, "slice_channels");
  require(begin >= 0 && count > 0 && begin + count <= xs.c(), "slice_channels: range out of bounds");
  const Index plane = xs.h() * xs.w();
  Tensor<Scalar> out(Shape{xs.n(), count, xs.h(), xs.w()});
  for (Index n = 0; n < xs.n(); ++n) {
    std::copy_n(x.value().data() + (n * xs.c() + begin) * plane, count * plane, out.data() + n * count * plane);
  }
  return make_result<Scalar>(std::move(out), {x}, [begin, count, plane](Node<Scalar>& self) {
    const Shape& in = self.inputs[0]->value.shape();
    Scalar* g = self.inputs[0]->grad_buffer().data();
    for (Index n = 0; n < in.n(); ++n) {
      Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>>(g + (n * in.c() + begin) * plane, count * plane) +=
          Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>>(self.grad.data() + n * count * plane,
                                                                    count * plane);
    }
  });
}

template <typename Scalar>
Var<Scalar> global_avg_pool(const Var<Scalar>& x) {
  const Shape& xs = x.shape();
  require_rank4(xs, "global_avg_pool");
  const Index rows = xs.n() * xs.c(), plane = xs.h() * xs.w();
  Tensor<Scalar> out(Shape{xs.n(), xs.c(), 1, 1});
  out.array() = x.value().matrix(rows, plane).rowwise().mean().array();
  return make_result<Scalar>(std::move(out), {x}, [rows, plane](Node<Scalar>& self) {
    MapMat<Scalar> g(self.inputs[0]->grad_buffer().data(), rows, plane);
    g.colwise() += (self.grad.array() / static_cast<Scalar>(plane)).matrix();
  });
}

template <typename Scalar>
Var<Scalar> linear(const Var<Scalar>& x, const Var<Scalar>& weight, const Var<Scalar>& bias) {
  const Index batch = x.shape()[0];
  const Index features = x.value().size() / std::max<Index>(batch, 1);
  require(weight.shape().rank() == 2 && weight.shape()[1] == features,
          "linear: weight must be (Cout, F) with F matching the input");
  const Index cout = weight.shape()[0];
  require(bias.shape() == Shape{cout}, "linear: bias must be (Cout)");
  Tensor<Scalar> out(Shape{batch, cout, 1, 1});
  out.matrix(batch, cout).noalias() = x.value().matrix(batch, features) * weight.value().matrix(cout, features).transpose();
  out.matrix(batch, cout).rowwise() += bias.value().array().matrix().transpose();
  return make_result<Scalar>(std::move(out), {x, weight, bias}, [batch, features, cout](Node<Scalar>& self) {
    const auto gy = self.grad.matrix(batch, cout);
    if (wants(self, 0)) {
      self.inputs[0]->grad_buffer().matrix(batch, features).noalias() +=
          gy * self.inputs[1]->value.matrix(cout, features);
    }
    if (wants(self, 1)) {
      self.inputs[1]->grad_buffer().matrix(cout, features).noalias() +=
          gy.transpose() * self.inputs[0]->value.matrix(batch, features);
    }
    if (wants(self, 2)) {
      self.inputs[2]->grad_buffer().array().matrix() += gy.colwise().sum().transpose();
    }
  });
}

template <typename Scalar>
Var<Scalar> channel_affine(const Var<Scalar>& u, const Var<Scalar>& scale, const Var<Scalar>& shift) {
  const Shape& us = u.shape();
  require_rank4(us, "channel_affine");
  const Shape per_channel{us.n(), us.c(), 1, 1};
  require(scale.shape() == per_channel && shift.shape() == per_channel,
          "channel_affine: scale/shift must be (N, C, 1, 1)");
  const Index rows = us.n() * us.c(), plane = us.h() * us.w();
  Tensor<Scalar> out(us);
  const auto s = scale.value().array();
  const auto b = shift.value().array();
  out.matrix(rows, plane) = (u.value().matrix(rows, plane).array().colwise() * s).colwise() + b;
  return make_result<Scalar>(std::move(out), {u, scale, shift}, [rows, plane](Node<Scalar>& self) {
    const auto gy = self.grad.matrix(rows, plane).array();
    if (wants(self, 0)) {
      self.inputs[0]->grad_buffer().matrix(rows, plane).array() +=
          gy.colwise() * self.inputs[1]->value.array();
    }
    if (wants(self, 1)) {
      self.inputs[1]->grad_buffer().array() +=
          (gy * self.inputs[0]->value.matrix(rows, plane).array()).rowwise().sum();
    }
    if (wants(self, 2)) self.inputs[2]->grad_buffer().array() += gy.rowwise().sum();
  });
}

template <typename Scalar>
Var<Scalar> mse_loss(const Var<Scalar>& prediction, const Var<Scalar>& target) {
  require(prediction.shape() == target.shape(), "mse_loss: shape mismatch " + prediction.shape().str() +
                                                    " vs " + target.shape().str());
  const auto count = static_cast<double>(prediction.value().size());
  const double sum = (prediction.value().array() - target.value().array()).template cast<double>().square().sum();
  Tensor<Scalar> out(Shape{1}, static_cast<Scalar>(sum / count));
  return make_result<Scalar>(std::move(out), {prediction, target}, [count](Node<Scalar>& self) {
    const Scalar g = self.grad[0] * static_cast<Scalar>(2.0 / count);
    const auto diff = self.inputs[0]->value.array() - self.inputs[1]->value.array();
    if (wants(self, 0)) self.inputs[0]->grad_buffer().array() += g * diff;
    if (wants(self, 1)) self.inputs[1]->grad_buffer().array() -= g * diff;
  });
}

#define FORMCAST_INSTANTIATE_OPS(S)                                                                  \
  template Var<S> conv2d<S>(const Var<S>&, const Var<S>&, const Var<S>&, const ConvGeometry&);      \
  template Var<S> conv_transpose2d<S>(const Var<S>&, const Var<S>&, const Var<S>&,                  \
                                      const ConvGeometry&);                                         \
  template Var<S> batchnorm2d<S>(const Var<S>&, const Var<S>&, const Var<S>&, BatchNormStats<S>&,   \
                                 bool);                                                             \
  template Var<S> relu<S>(const Var<S>&);                                                           \
  template Var<S> sigmoid<S>(const Var<S>&);                                                        \
  template Var<S> add<S>(const Var<S>&, const Var<S>&);                                             \
  template Var<S> concat_channels<S>(const Var<S>&, const Var<S>&);                                 \
  template Var<S> slice_channels<S>(const Var<S>&, Index, Index);                                   \
  template Var<S> global_avg_pool<S>(const Var<S>&);                                                \
  template Var<S> linear<S>(const Var<S>&, const Var<S>&, const Var<S>&);                           \
  template Var<S> channel_affine<S>(const Var<S>&, const Var<S>&, const Var<S>&);                   \
  template Var<S> mse_loss<S>(const Var<S>&, const Var<S>&);

FORMCAST_INSTANTIATE_OPS(float)
FORMCAST_INSTANTIATE_OPS(double)

#undef FORMCAST_INSTANTIATE_OPS

}  // namespace formcast::nn
