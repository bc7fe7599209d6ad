#include "core/net.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "core/common.hpp"
#include "core/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "model files are little-endian");

namespace chartloc {

NetArchitecture NetArchitecture::chart_default(int input_h, int input_w) {
  NetArchitecture arch;
  arch.input_h = input_h;
  arch.input_w = input_w;
  arch.conv = {{8, 3, 3, Activation::relu},
               {8, 5, 5, Activation::relu},
               {8, 8, 8, Activation::relu},
               {16, 10, 10, Activation::relu}};
  arch.dense = {{200, Activation::relu},
                {100, Activation::linear},
                {2, Activation::linear}};
  return arch;
}

template <class S>
ChartNet<S>::ChartNet(const NetArchitecture& arch) : arch_(arch) {
  build_layout();
}

template <class S>
void ChartNet<S>::build_layout() {
  require(arch_.input_h >= 1 && arch_.input_w >= 1, "bad input shape");
  require(!arch_.dense.empty(), "network needs at least one dense layer");

  conv_.clear();
  dense_.clear();
  std::size_t offset = 0;
  int ch = 1;
  for (const ConvSpec& spec : arch_.conv) {
    require(spec.out_channels >= 1 && spec.kernel_h >= 1 && spec.kernel_w >= 1,
            "bad conv spec");
    ConvLayer layer;
    layer.in_ch = ch;
    layer.out_ch = spec.out_channels;
    layer.kh = spec.kernel_h;
    layer.kw = spec.kernel_w;
    layer.pad_top = (spec.kernel_h - 1) / 2;   // TF-style SAME padding
    layer.pad_left = (spec.kernel_w - 1) / 2;
    layer.w_offset = offset;
    offset += layer.w_size();
    layer.b_offset = offset;
    offset += layer.out_ch;
    conv_.push_back(layer);
    ch = layer.out_ch;
  }
  int dim = ch * arch_.input_h * arch_.input_w;
  for (const DenseSpec& spec : arch_.dense) {
    require(spec.width >= 1, "bad dense spec");
    DenseLayer layer;
    layer.in_dim = dim;
    layer.out_dim = spec.width;
    layer.w_offset = offset;
    offset += layer.w_size();
    layer.b_offset = offset;
    offset += layer.out_dim;
    dense_.push_back(layer);
    dim = spec.width;
  }
  params_.assign(offset, S(0));
}

template <class S>
int ChartNet<S>::output_dim() const {
  return dense_.back().out_dim;
}

template <class S>
void ChartNet<S>::init_weights(std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x11E7));
  auto fill = [&](std::size_t w_offset, std::size_t count, int fan_in) {
    const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < count; ++i)
      params_[w_offset + i] = static_cast<S>(rng.uniform(-a, a));
  };
  for (const ConvLayer& l : conv_) {
    fill(l.w_offset, l.w_size(), l.in_ch * l.kh * l.kw);
    std::fill_n(params_.begin() + l.b_offset, l.out_ch, S(0));
  }
  for (const DenseLayer& l : dense_) {
    fill(l.w_offset, l.w_size(), l.in_dim);
    std::fill_n(params_.begin() + l.b_offset, l.out_dim, S(0));
  }
}

template <class S>
bool ChartNet<S>::params_finite() const {
  for (const S v : params_)
    if (!std::isfinite(static_cast<double>(v))) return false;
  return true;
}

namespace {

template <class S>
void apply_activation(Activation act, const MatX<S>& pre, MatX<S>& out) {
  if (act == Activation::relu)
    out = pre.cwiseMax(S(0));
  else
    out = pre;
}

template <class S>
MatX<S> activation_backward(Activation act, const MatX<S>& pre, const MatX<S>& d_out) {
  if (act == Activation::relu)
    return (pre.array() > S(0)).template cast<S>() * d_out.array();
  return d_out;
}

}  // namespace

template <class S>
MatX<S> ChartNet<S>::forward_batch(const MatX<S>& inputs, NetWorkspace<S>* ws) const {
  const int h = arch_.input_h, w = arch_.input_w;
  require(inputs.rows() == static_cast<Eigen::Index>(h) * w,
          "input feature size mismatch");
  const Eigen::Index batch = inputs.cols();

  NetWorkspace<S> local;
  NetWorkspace<S>& c = ws ? *ws : local;
  c.conv_pre.resize(conv_.size());
  c.conv_out.resize(conv_.size());
  c.patches.resize(conv_.size());
  c.dense_pre.resize(dense_.size());
  c.dense_out.resize(dense_.size());
  c.input = inputs;

  const MatX<S>* prev = &c.input;
  for (std::size_t li = 0; li < conv_.size(); ++li) {
    const ConvLayer& l = conv_[li];
    const Eigen::Map<const MatX<S>> weights(params_.data() + l.w_offset, l.out_ch,
                                            static_cast<Eigen::Index>(l.kh) * l.in_ch * l.kw);
    const Eigen::Map<const VecX<S>> bias(params_.data() + l.b_offset, l.out_ch);

    MatX<S>& pre = c.conv_pre[li];
    pre.resize(static_cast<Eigen::Index>(l.out_ch) * h * w, batch);
    c.patches[li].resize(h);

    for (int r = 0; r < h; ++r) {
      // Kernel rows that land on real input rows for this output row; the
      // rest of the kernel only sees zero padding and is skipped entirely.
      const int k_lo = std::max(0, l.pad_top - r);
      const int k_hi = std::min(l.kh - 1, h - 1 + l.pad_top - r);
      const int nk = k_hi - k_lo + 1;
      MatX<S>& patch = c.patches[li][r];
      patch.resize(static_cast<Eigen::Index>(nk) * l.in_ch * l.kw, batch * w);

      for (Eigen::Index s = 0; s < batch; ++s) {
        for (int x = 0; x < w; ++x) {
          S* col = patch.data() + (s * w + x) * patch.rows();
          Eigen::Index p = 0;
          for (int k = k_lo; k <= k_hi; ++k) {
            const int y_in = r - l.pad_top + k;
            for (int ci = 0; ci < l.in_ch; ++ci) {
              const S* in_row =
                  prev->data() + s * prev->rows() +
                  (static_cast<Eigen::Index>(ci) * h + y_in) * w;
              for (int j = 0; j < l.kw; ++j) {
                const int x_in = x - l.pad_left + j;
                col[p++] = (x_in >= 0 && x_in < w) ? in_row[x_in] : S(0);
              }
            }
          }
        }
      }

      const auto w_slice = weights.middleCols(
          static_cast<Eigen::Index>(k_lo) * l.in_ch * l.kw,
          static_cast<Eigen::Index>(nk) * l.in_ch * l.kw);
      MatX<S> block;
      block.noalias() = w_slice * patch;  // out_ch x (batch*w)
      for (Eigen::Index s = 0; s < batch; ++s)
        for (int x = 0; x < w; ++x)
          for (int o = 0; o < l.out_ch; ++o)
            pre((static_cast<Eigen::Index>(o) * h + r) * w + x, s) =
                block(o, s * w + x) + bias(o);
    }
    apply_activation(arch_.conv[li].act, pre, c.conv_out[li]);
    prev = &c.conv_out[li];
  }

  for (std::size_t li = 0; li < dense_.size(); ++li) {
    const DenseLayer& l = dense_[li];
    const Eigen::Map<const MatX<S>> weights(params_.data() + l.w_offset, l.out_dim,
                                            l.in_dim);
    const Eigen::Map<const VecX<S>> bias(params_.data() + l.b_offset, l.out_dim);
    MatX<S>& pre = c.dense_pre[li];
    pre.noalias() = weights * (*prev);
    pre.colwise() += bias;
    apply_activation(arch_.dense[li].act, pre, c.dense_out[li]);
    prev = &c.dense_out[li];
  }
  return *prev;
}

template <class S>
void ChartNet<S>::backward_batch(const NetWorkspace<S>& ws, const MatX<S>& d_out,
                                 ParamVec<S>& grad) const {
  require(grad.size() == params_.size(), "gradient buffer size mismatch");
  const int h = arch_.input_h, w = arch_.input_w;
  const Eigen::Index batch = ws.input.cols();

  MatX<S> d_act = d_out;
  for (std::size_t li = dense_.size(); li-- > 0;) {
    const DenseLayer& l = dense_[li];
    const MatX<S> d_pre = activation_backward(arch_.dense[li].act,
                                              ws.dense_pre[li], d_act);
    const MatX<S>& below =
        li > 0 ? ws.dense_out[li - 1]
               : (conv_.empty() ? ws.input : ws.conv_out.back());
    Eigen::Map<MatX<S>> g_w(grad.data() + l.w_offset, l.out_dim, l.in_dim);
    Eigen::Map<VecX<S>> g_b(grad.data() + l.b_offset, l.out_dim);
    g_w.noalias() += d_pre * below.transpose();
    g_b.noalias() += d_pre.rowwise().sum();
    const Eigen::Map<const MatX<S>> weights(params_.data() + l.w_offset, l.out_dim,
                                            l.in_dim);
    d_act.noalias() = weights.transpose() * d_pre;
  }

  for (std::size_t li = conv_.size(); li-- > 0;) {
    const ConvLayer& l = conv_[li];
    const MatX<S> d_pre =
        activation_backward(arch_.conv[li].act, ws.conv_pre[li], d_act);
    Eigen::Map<MatX<S>> g_w(grad.data() + l.w_offset, l.out_ch,
                            static_cast<Eigen::Index>(l.kh) * l.in_ch * l.kw);
    Eigen::Map<VecX<S>> g_b(grad.data() + l.b_offset, l.out_ch);
    const Eigen::Map<const MatX<S>> weights(params_.data() + l.w_offset, l.out_ch,
                                            static_cast<Eigen::Index>(l.kh) * l.in_ch * l.kw);

    MatX<S> d_below;
    if (li > 0)
      d_below = MatX<S>::Zero(ws.conv_out[li - 1].rows(), batch);

    MatX<S> d_block(l.out_ch, batch * w);
    for (int r = 0; r < h; ++r) {
      const int k_lo = std::max(0, l.pad_top - r);
      const int k_hi = std::min(l.kh - 1, h - 1 + l.pad_top - r);
      const int nk = k_hi - k_lo + 1;
      const MatX<S>& patch = ws.patches[li][r];

      for (Eigen::Index s = 0; s < batch; ++s)
        for (int x = 0; x < w; ++x)
          for (int o = 0; o < l.out_ch; ++o)
            d_block(o, s * w + x) =
                d_pre((static_cast<Eigen::Index>(o) * h + r) * w + x, s);

      auto g_w_slice = g_w.middleCols(
          static_cast<Eigen::Index>(k_lo) * l.in_ch * l.kw,
          static_cast<Eigen::Index>(nk) * l.in_ch * l.kw);
      g_w_slice.noalias() += d_block * patch.transpose();
      g_b.noalias() += d_block.rowwise().sum();

      if (li == 0) continue;  // input gradient is never consumed
      const auto w_slice = weights.middleCols(
          static_cast<Eigen::Index>(k_lo) * l.in_ch * l.kw,
          static_cast<Eigen::Index>(nk) * l.in_ch * l.kw);
      MatX<S> d_patch;
      d_patch.noalias() = w_slice.transpose() * d_block;
      for (Eigen::Index s = 0; s < batch; ++s) {
        for (int x = 0; x < w; ++x) {
          const S* col = d_patch.data() + (s * w + x) * d_patch.rows();
          Eigen::Index p = 0;
          for (int k = k_lo; k <= k_hi; ++k) {
            const int y_in = r - l.pad_top + k;
            for (int ci = 0; ci < l.in_ch; ++ci) {
              S* out_row = d_below.data() + s * d_below.rows() +
                           (static_cast<Eigen::Index>(ci) * h + y_in) * w;
              for (int j = 0; j < l.kw; ++j) {
                const int x_in = x - l.pad_left + j;
                if (x_in >= 0 && x_in < w) out_row[x_in] += col[p];
                ++p;
              }
            }
          }
        }
      }
    }
    if (li > 0) d_act = std::move(d_below);
  }
}

template <class S>
Eigen::Vector2d ChartNet<S>::forward(const Eigen::MatrixXd& feature) const {
  require(feature.rows() == arch_.input_h && feature.cols() == arch_.input_w,
          "feature shape mismatch");
  MatX<S> col(static_cast<Eigen::Index>(arch_.input_h) * arch_.input_w, 1);
  for (int y = 0; y < arch_.input_h; ++y)
    for (int x = 0; x < arch_.input_w; ++x)
      col(static_cast<Eigen::Index>(y) * arch_.input_w + x, 0) =
          static_cast<S>(feature(y, x));
  const MatX<S> out = forward_batch(col, nullptr);
  require(out.rows() == 2, "model output is not 2-D");
  return Eigen::Vector2d(static_cast<double>(out(0, 0)),
                         static_cast<double>(out(1, 0)));
}

namespace {

constexpr char kModelMagic[8] = {'C', 'H', 'A', 'R', 'T', 'M', 'D', 'L'};
constexpr std::uint32_t kModelVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void put_i32(std::ostream& out, std::int32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
std::int32_t get_i32(std::istream& in) {
  std::int32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

}  // namespace

template <class S>
void ChartNet<S>::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot open " + path + " for writing");
  out.write(kModelMagic, sizeof(kModelMagic));
  put_u32(out, kModelVersion);
  put_i32(out, arch_.input_h);
  put_i32(out, arch_.input_w);
  put_u32(out, static_cast<std::uint32_t>(conv_.size()));
  put_u32(out, static_cast<std::uint32_t>(dense_.size()));
  for (std::size_t i = 0; i < conv_.size(); ++i) {
    put_u32(out, 0);  // layer kind: conv
    put_i32(out, conv_[i].in_ch);
    put_i32(out, conv_[i].out_ch);
    put_i32(out, conv_[i].kh);
    put_i32(out, conv_[i].kw);
    put_u32(out, static_cast<std::uint32_t>(arch_.conv[i].act));
  }
  for (std::size_t i = 0; i < dense_.size(); ++i) {
    put_u32(out, 1);  // layer kind: dense
    put_i32(out, dense_[i].in_dim);
    put_i32(out, dense_[i].out_dim);
    put_u32(out, static_cast<std::uint32_t>(arch_.dense[i].act));
  }
  // Weight blobs, layer order, W (column-major) then bias, float32 LE.
  std::vector<float> blob(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i)
    blob[i] = static_cast<float>(params_[i]);
  out.write(reinterpret_cast<const char*>(blob.data()),
            static_cast<std::streamsize>(blob.size() * sizeof(float)));
  if (!out) fail(ErrorCode::io, "short write to " + path);
}

template <class S>
ChartNet<S> ChartNet<S>::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open model file " + path);
  char magic[8] = {};
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kModelMagic, sizeof(magic)) != 0)
    fail(ErrorCode::bad_format, path + " is not a chartloc model file");
  if (get_u32(in) != kModelVersion)
    fail(ErrorCode::bad_format, "unknown model file version");

  NetArchitecture arch;
  arch.input_h = get_i32(in);
  arch.input_w = get_i32(in);
  const std::uint32_t n_conv = get_u32(in);
  const std::uint32_t n_dense = get_u32(in);
  require(arch.input_h >= 1 && arch.input_w >= 1 && n_dense >= 1,
          "corrupt model header", ErrorCode::bad_format);

  int ch = 1;
  for (std::uint32_t i = 0; i < n_conv; ++i) {
    require(get_u32(in) == 0, "layer table out of order", ErrorCode::bad_format);
    const std::int32_t in_ch = get_i32(in);
    ConvSpec spec;
    spec.out_channels = get_i32(in);
    spec.kernel_h = get_i32(in);
    spec.kernel_w = get_i32(in);
    spec.act = static_cast<Activation>(get_u32(in));
    require(in_ch == ch, "conv layer channel chain mismatch", ErrorCode::bad_format);
    arch.conv.push_back(spec);
    ch = spec.out_channels;
  }
  for (std::uint32_t i = 0; i < n_dense; ++i) {
    require(get_u32(in) == 1, "layer table out of order", ErrorCode::bad_format);
    get_i32(in);  // in_dim, implied by the chain
    DenseSpec spec;
    spec.width = get_i32(in);
    spec.act = static_cast<Activation>(get_u32(in));
    arch.dense.push_back(spec);
  }
  if (!in) fail(ErrorCode::bad_format, "truncated model layer table");

  ChartNet net(arch);
  std::vector<float> blob(net.params_.size());
  in.read(reinterpret_cast<char*>(blob.data()),
          static_cast<std::streamsize>(blob.size() * sizeof(float)));
  if (!in) fail(ErrorCode::bad_format, "truncated model weight blob");
  in.peek();
  require(in.eof(), "trailing bytes after model weights", ErrorCode::bad_format);
  for (std::size_t i = 0; i < blob.size(); ++i)
    net.params_[i] = static_cast<S>(blob[i]);
  return net;
}

template class ChartNet<float>;
template class ChartNet<double>;

}  // namespace chartloc
