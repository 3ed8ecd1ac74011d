#include "geoworld/layers.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace geoworld::nn {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ColMatrix = Eigen::MatrixXd;

struct ConvGeometry {
  std::size_t batch, in_ch, height, width, out_ch, out_h, out_w, stride;
  bool batched;

  std::size_t patch() const { return in_ch * kKernel * kKernel; }
  std::size_t positions() const { return out_h * out_w; }
};

ConvGeometry conv_geometry(const Tensor& input, const LayerParams& params, std::size_t stride) {
  if (stride == 0) throw std::invalid_argument("conv2d: stride must be positive");
  if (input.rank() != 3 && input.rank() != 4) {
    throw std::invalid_argument("conv2d: expected [C,H,W] or [N,C,H,W], got " + shape_string(input.shape()));
  }
  const bool batched = input.rank() == 4;
  const std::size_t off = batched ? 1 : 0;
  ConvGeometry g{};
  g.batched = batched;
  g.batch = batched ? input.dim(0) : 1;
  g.in_ch = input.dim(off);
  g.height = input.dim(off + 1);
  g.width = input.dim(off + 2);
  g.stride = stride;
  const auto& ws = params.weights.shape();
  if (ws.size() != 4 || ws[1] != g.in_ch || ws[2] != kKernel || ws[3] != kKernel) {
    throw std::invalid_argument("conv2d: weight shape " + shape_string(ws) + " incompatible with input " +
                                shape_string(input.shape()));
  }
  g.out_ch = ws[0];
  if (params.bias.size() != g.out_ch) throw std::invalid_argument("conv2d: bias length mismatch");
  if (g.height < kKernel || g.width < kKernel) throw std::invalid_argument("conv2d: input smaller than kernel");
  g.out_h = (g.height - kKernel) / stride + 1;
  g.out_w = (g.width - kKernel) / stride + 1;
  return g;
}

// Column (n*P + p) holds the 3x3xC patch feeding output position p of sample n.
ColMatrix im2col(const Tensor& input, const ConvGeometry& g) {
  ColMatrix cols(g.patch(), g.batch * g.positions());
  const double* src = input.data();
  const std::size_t plane = g.height * g.width;
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
      for (std::size_t ox = 0; ox < g.out_w; ++ox) {
        double* col = cols.col(n * g.positions() + oy * g.out_w + ox).data();
        std::size_t k = 0;
        for (std::size_t c = 0; c < g.in_ch; ++c) {
          const double* chan = src + (n * g.in_ch + c) * plane;
          for (std::size_t ky = 0; ky < kKernel; ++ky) {
            const double* row = chan + (oy * g.stride + ky) * g.width + ox * g.stride;
            col[k++] = row[0];
            col[k++] = row[1];
            col[k++] = row[2];
          }
        }
      }
    }
  }
  return cols;
}

void col2im_add(const ColMatrix& cols, const ConvGeometry& g, Tensor& grad_input) {
  double* dst = grad_input.data();
  const std::size_t plane = g.height * g.width;
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
      for (std::size_t ox = 0; ox < g.out_w; ++ox) {
        const double* col = cols.col(n * g.positions() + oy * g.out_w + ox).data();
        std::size_t k = 0;
        for (std::size_t c = 0; c < g.in_ch; ++c) {
          double* chan = dst + (n * g.in_ch + c) * plane;
          for (std::size_t ky = 0; ky < kKernel; ++ky) {
            double* row = chan + (oy * g.stride + ky) * g.width + ox * g.stride;
            row[0] += col[k++];
            row[1] += col[k++];
            row[2] += col[k++];
          }
        }
      }
    }
  }
}

struct LinearGeometry {
  std::size_t batch, in, out;
  bool batched;
};

LinearGeometry linear_geometry(const Tensor& input, const LayerParams& params) {
  if (input.rank() != 1 && input.rank() != 2) {
    throw std::invalid_argument("linear: expected [n] or [N,n], got " + shape_string(input.shape()));
  }
  LinearGeometry g{};
  g.batched = input.rank() == 2;
  g.batch = g.batched ? input.dim(0) : 1;
  g.in = g.batched ? input.dim(1) : input.dim(0);
  const auto& ws = params.weights.shape();
  if (ws.size() != 2 || ws[1] != g.in) {
    throw std::invalid_argument("linear: weight shape " + shape_string(ws) + " incompatible with input " +
                                shape_string(input.shape()));
  }
  g.out = ws[0];
  if (params.bias.size() != g.out) throw std::invalid_argument("linear: bias length mismatch");
  return g;
}

}  // namespace

LayerParams LayerParams::conv3x3(std::size_t in_channels, std::size_t out_channels) {
  return {Tensor({out_channels, in_channels, kKernel, kKernel}), Tensor({out_channels})};
}

LayerParams LayerParams::dense(std::size_t in_features, std::size_t out_features) {
  return {Tensor({out_features, in_features}), Tensor({out_features})};
}

std::size_t LayerParams::fan_in() const { return weights.size() / weights.dim(0); }

void LayerParams::init_uniform(std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in()));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& w : weights.values()) w = dist(rng);
  for (auto& b : bias.values()) b = dist(rng);
}

Tensor conv2d(const Tensor& input, const LayerParams& params, std::size_t stride) {
  const auto g = conv_geometry(input, params, stride);
  const ColMatrix cols = im2col(input, g);
  Eigen::Map<const RowMatrix> w(params.weights.data(), g.out_ch, g.patch());
  const ColMatrix out = w * cols;

  Shape shape = g.batched ? Shape{g.batch, g.out_ch, g.out_h, g.out_w} : Shape{g.out_ch, g.out_h, g.out_w};
  Tensor result(shape);
  double* dst = result.data();
  const std::size_t p = g.positions();
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t co = 0; co < g.out_ch; ++co) {
      const double b = params.bias[co];
      double* plane = dst + (n * g.out_ch + co) * p;
      for (std::size_t i = 0; i < p; ++i) plane[i] = out(co, n * p + i) + b;
    }
  }
  return result;
}

LayerGrads conv2d_backward(const Tensor& input, const LayerParams& params, std::size_t stride,
                           const Tensor& grad_output) {
  const auto g = conv_geometry(input, params, stride);
  const std::size_t p = g.positions();
  if (grad_output.size() != g.batch * g.out_ch * p) {
    throw std::invalid_argument("conv2d_backward: grad_output shape " + shape_string(grad_output.shape()));
  }
  ColMatrix dout(g.out_ch, g.batch * p);
  const double* src = grad_output.data();
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t co = 0; co < g.out_ch; ++co) {
      const double* plane = src + (n * g.out_ch + co) * p;
      for (std::size_t i = 0; i < p; ++i) dout(co, n * p + i) = plane[i];
    }
  }
  const ColMatrix cols = im2col(input, g);
  Eigen::Map<const RowMatrix> w(params.weights.data(), g.out_ch, g.patch());

  LayerGrads grads{Tensor(input.shape()), Tensor(params.weights.shape()), Tensor(params.bias.shape())};
  Eigen::Map<RowMatrix>(grads.weights.data(), g.out_ch, g.patch()).noalias() = dout * cols.transpose();
  Eigen::Map<Eigen::VectorXd>(grads.bias.data(), g.out_ch) = dout.rowwise().sum();
  const ColMatrix dcols = w.transpose() * dout;
  col2im_add(dcols, g, grads.input);
  return grads;
}

Tensor linear(const Tensor& input, const LayerParams& params) {
  const auto g = linear_geometry(input, params);
  Eigen::Map<const RowMatrix> x(input.data(), g.batch, g.in);
  Eigen::Map<const RowMatrix> w(params.weights.data(), g.out, g.in);
  Eigen::Map<const Eigen::RowVectorXd> b(params.bias.data(), g.out);
  Tensor result(g.batched ? Shape{g.batch, g.out} : Shape{g.out});
  Eigen::Map<RowMatrix> y(result.data(), g.batch, g.out);
  y.noalias() = x * w.transpose();
  y.rowwise() += b;
  return result;
}

LayerGrads linear_backward(const Tensor& input, const LayerParams& params, const Tensor& grad_output) {
  const auto g = linear_geometry(input, params);
  if (grad_output.size() != g.batch * g.out) {
    throw std::invalid_argument("linear_backward: grad_output shape " + shape_string(grad_output.shape()));
  }
  Eigen::Map<const RowMatrix> x(input.data(), g.batch, g.in);
  Eigen::Map<const RowMatrix> w(params.weights.data(), g.out, g.in);
  Eigen::Map<const RowMatrix> dy(grad_output.data(), g.batch, g.out);

  LayerGrads grads{Tensor(input.shape()), Tensor(params.weights.shape()), Tensor(params.bias.shape())};
  Eigen::Map<RowMatrix>(grads.input.data(), g.batch, g.in).noalias() = dy * w;
  Eigen::Map<RowMatrix>(grads.weights.data(), g.out, g.in).noalias() = dy.transpose() * x;
  Eigen::Map<Eigen::RowVectorXd>(grads.bias.data(), g.out) = dy.colwise().sum();
  return grads;
}

Tensor relu(const Tensor& input) {
  Tensor out = input;
  for (auto& v : out.values()) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_output) {
  require_same_shape(input, grad_output, "relu_backward");
  Tensor out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > 0.0 ? grad_output[i] : 0.0;
  return out;
}

}  // namespace geoworld::nn
