#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace chartloc {

template <class S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

// Parameter/gradient storage viewed through Eigen::Map. Max-aligned so the
// product kernels peel identically no matter where the allocator placed the
// buffer; otherwise reruns of the same training job can differ in the last
// bits.
template <class S>
using ParamVec = std::vector<S, Eigen::aligned_allocator<S>>;

enum class Activation : std::uint32_t { linear = 0, relu = 1 };

struct ConvSpec {
  int out_channels = 1;
  int kernel_h = 1;
  int kernel_w = 1;
  Activation act = Activation::relu;
};

struct DenseSpec {
  int width = 1;
  Activation act = Activation::linear;
};

// Stride-1, same-padding convolution stack followed by dense layers; the
// conv output is flattened channel-major (channel, row, column).
struct NetArchitecture {
  int input_h = 2;
  int input_w = 49;
  std::vector<ConvSpec> conv;
  std::vector<DenseSpec> dense;

  // Conv(8,3x3) Conv(8,5x5) Conv(8,8x8) Conv(16,10x10) -> 200 -> 100 -> 2.
  static NetArchitecture chart_default(int input_h, int input_w);
};

// Activation tensors are matrices with one sample per column; a conv
// activation column is the flattened (channels * h * w) volume.
template <class S>
struct NetWorkspace {
  std::vector<MatX<S>> conv_pre;            // per conv layer, post-bias pre-act
  std::vector<MatX<S>> conv_out;            // after activation
  std::vector<std::vector<MatX<S>>> patches;  // per layer, per output row
  std::vector<MatX<S>> dense_pre;
  std::vector<MatX<S>> dense_out;
  MatX<S> input;
};

template <class S>
class ChartNet {
 public:
  ChartNet() = default;
  explicit ChartNet(const NetArchitecture& arch);

  // Uniform fan-in init: W ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases 0.
  void init_weights(std::uint64_t seed);

  const NetArchitecture& architecture() const { return arch_; }
  int input_rows() const { return arch_.input_h; }
  int input_cols() const { return arch_.input_w; }
  int output_dim() const;

  std::size_t param_count() const { return params_.size(); }
  ParamVec<S>& params() { return params_; }
  const ParamVec<S>& params() const { return params_; }
  bool params_finite() const;

  // inputs: (input_h*input_w) x batch, one flattened feature per column
  // (row-major within the column). Returns output_dim x batch.
  MatX<S> forward_batch(const MatX<S>& inputs, NetWorkspace<S>* ws) const;

  // d_out: output_dim x batch. Adds parameter gradients into `grad`
  // (size param_count) using the caches from the matching forward call.
  void backward_batch(const NetWorkspace<S>& ws, const MatX<S>& d_out,
                      ParamVec<S>& grad) const;

  // Single-sample convenience on an input_h x input_w feature matrix.
  Eigen::Vector2d forward(const Eigen::MatrixXd& feature) const;

  void save(const std::string& path) const;
  static ChartNet load(const std::string& path);

 private:
  struct ConvLayer {
    int in_ch, out_ch, kh, kw, pad_top, pad_left;
    std::size_t w_offset, b_offset;  // into params_
    std::size_t w_size() const {
      return static_cast<std::size_t>(out_ch) * kh * in_ch * kw;
    }
  };
  struct DenseLayer {
    int in_dim, out_dim;
    std::size_t w_offset, b_offset;
    std::size_t w_size() const {
      return static_cast<std::size_t>(out_dim) * in_dim;
    }
  };

  void build_layout();

  NetArchitecture arch_;
  std::vector<ConvLayer> conv_;
  std::vector<DenseLayer> dense_;
  ParamVec<S> params_;
};

using ChartNetF = ChartNet<float>;
using ChartNetD = ChartNet<double>;

extern template class ChartNet<float>;
extern template class ChartNet<double>;

}  // namespace chartloc
