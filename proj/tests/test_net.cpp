#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "core/common.hpp"
#include "core/net.hpp"
#include "core/rng.hpp"

using namespace chartloc;

namespace {

// Reference evaluation, written independently of the layer code: plain
// nested loops over the documented parameter layout (per layer: W as an
// out x (kh*in_ch*kw) column-major matrix with column (k*in_ch + c)*kw + j,
// then the bias; conv activations flattened channel-major).
std::vector<double> naive_forward(const NetArchitecture& arch,
                                  const ParamVec<double>& params,
                                  std::vector<double> act /* h*w, row-major */) {
  const int h = arch.input_h, w = arch.input_w;
  std::size_t offset = 0;
  int in_ch = 1;
  for (const ConvSpec& spec : arch.conv) {
    const int out_ch = spec.out_channels, kh = spec.kernel_h, kw = spec.kernel_w;
    const int pad_top = (kh - 1) / 2, pad_left = (kw - 1) / 2;
    const std::size_t w_count =
        static_cast<std::size_t>(out_ch) * kh * in_ch * kw;
    const auto weight = [&](int o, int k, int c, int j) {
      const std::size_t col = (static_cast<std::size_t>(k) * in_ch + c) * kw + j;
      return params[offset + col * out_ch + o];
    };
    std::vector<double> next(static_cast<std::size_t>(out_ch) * h * w, 0.0);
    for (int o = 0; o < out_ch; ++o) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          double acc = params[offset + w_count + o];  // bias
          for (int k = 0; k < kh; ++k) {
            const int yy = y - pad_top + k;
            if (yy < 0 || yy >= h) continue;
            for (int c = 0; c < in_ch; ++c) {
              for (int j = 0; j < kw; ++j) {
                const int xx = x - pad_left + j;
                if (xx < 0 || xx >= w) continue;
                acc += weight(o, k, c, j) *
                       act[(static_cast<std::size_t>(c) * h + yy) * w + xx];
              }
            }
          }
          if (spec.act == Activation::relu) acc = std::max(acc, 0.0);
          next[(static_cast<std::size_t>(o) * h + y) * w + x] = acc;
        }
      }
    }
    act = std::move(next);
    offset += w_count + out_ch;
    in_ch = out_ch;
  }
  int dim = in_ch * h * w;
  for (const DenseSpec& spec : arch.dense) {
    const int out_dim = spec.width;
    std::vector<double> next(out_dim, 0.0);
    for (int o = 0; o < out_dim; ++o) {
      double acc = params[offset + static_cast<std::size_t>(out_dim) * dim + o];
      for (int i = 0; i < dim; ++i)
        acc += params[offset + static_cast<std::size_t>(i) * out_dim + o] * act[i];
      next[o] = spec.act == Activation::relu ? std::max(acc, 0.0) : acc;
    }
    act = std::move(next);
    offset += static_cast<std::size_t>(out_dim) * dim + out_dim;
    dim = out_dim;
  }
  return act;
}

NetArchitecture tiny_arch() {
  NetArchitecture arch;
  arch.input_h = 2;
  arch.input_w = 5;
  arch.conv = {{2, 3, 3, Activation::relu}};
  arch.dense = {{8, Activation::relu}, {2, Activation::linear}};
  return arch;
}

}  // namespace

TEST_CASE("Table I architecture has the documented flatten width") {
  const NetArchitecture arch = NetArchitecture::chart_default(2, 49);
  const ChartNetD net(arch);
  // conv stack: (1->8 k3) (8->8 k5) (8->8 k8) (8->16 k10); flatten 16*2*49
  const std::size_t expect = (8 * 1 * 9 + 8) + (8 * 8 * 25 + 8) +
                             (8 * 8 * 64 + 8) + (16 * 8 * 100 + 16) +
                             (1568 * 200 + 200) + (200 * 100 + 100) +
                             (100 * 2 + 2);
  CHECK(net.param_count() == expect);
  CHECK(net.output_dim() == 2);
}

TEST_CASE("all-zero weights map any input to the origin") {
  ChartNetD net(NetArchitecture::chart_default(2, 49));
  Rng rng(1);
  Eigen::MatrixXd y(2, 49);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 49; ++c) y(r, c) = rng.uniform();
  const Eigen::Vector2d out = net.forward(y);
  CHECK(out.x() == 0.0);
  CHECK(out.y() == 0.0);
}

TEST_CASE("forward is deterministic for a fixed seed and input") {
  ChartNetF a(NetArchitecture::chart_default(2, 49));
  ChartNetF b(NetArchitecture::chart_default(2, 49));
  a.init_weights(42);
  b.init_weights(42);
  CHECK(a.params() == b.params());

  Eigen::MatrixXd y = Eigen::MatrixXd::Constant(2, 49, 0.05);
  const Eigen::Vector2d out_a = a.forward(y);
  const Eigen::Vector2d out_b = b.forward(y);
  CHECK(out_a == out_b);

  ChartNetF c(NetArchitecture::chart_default(2, 49));
  c.init_weights(43);
  CHECK(a.params() != c.params());
}

TEST_CASE("forward matches the naive layer-by-layer reference") {
  for (const NetArchitecture& arch :
       {tiny_arch(), NetArchitecture::chart_default(2, 49),
        NetArchitecture::chart_default(3, 21)}) {
    ChartNetD net(arch);
    net.init_weights(7);
    const ParamVec<double>& params = net.params();

    Rng rng(99);
    const int in_dim = arch.input_h * arch.input_w;
    MatX<double> batch(in_dim, 3);
    for (int s = 0; s < 3; ++s)
      for (int i = 0; i < in_dim; ++i) batch(i, s) = rng.normal();

    const MatX<double> out = net.forward_batch(batch, nullptr);
    for (int s = 0; s < 3; ++s) {
      std::vector<double> col(in_dim);
      for (int i = 0; i < in_dim; ++i) col[i] = batch(i, s);
      const std::vector<double> expect = naive_forward(arch, params, col);
      REQUIRE(expect.size() == 2);
      CHECK(out(0, s) == doctest::Approx(expect[0]).epsilon(1e-6));
      CHECK(out(1, s) == doctest::Approx(expect[1]).epsilon(1e-6));
    }
  }
}

TEST_CASE("backward gradient matches central finite differences") {
  const NetArchitecture arch = tiny_arch();
  ChartNetD net(arch);
  net.init_weights(3);
  Rng rng(5);
  MatX<double> input(arch.input_h * arch.input_w, 1);
  for (Eigen::Index i = 0; i < input.rows(); ++i) input(i, 0) = rng.normal();

  // Scalar objective: first output coordinate.
  NetWorkspace<double> ws;
  net.forward_batch(input, &ws);
  ParamVec<double> grad(net.param_count(), 0.0);
  MatX<double> d_out(2, 1);
  d_out << 1.0, 0.0;
  net.backward_batch(ws, d_out, grad);

  ParamVec<double>& params = net.params();
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); i += 7) {  // sample coordinates
    const double h = 1e-6 * std::max(1.0, std::abs(params[i]));
    const double saved = params[i];
    params[i] = saved + h;
    const double up = net.forward_batch(input, nullptr)(0, 0);
    params[i] = saved - h;
    const double dn = net.forward_batch(input, nullptr)(0, 0);
    params[i] = saved;
    const double fd = (up - dn) / (2 * h);
    worst = std::max(worst, std::abs(fd - grad[i]) / std::max(1.0, std::abs(fd)));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("model files round-trip") {
  const std::filesystem::path path =
      std::filesystem::temp_directory_path() / "chartloc_net_roundtrip.bin";
  ChartNetF net(NetArchitecture::chart_default(2, 49));
  net.init_weights(11);
  net.save(path.string());

  const ChartNetF loaded = ChartNetF::load(path.string());
  CHECK(loaded.params() == net.params());
  CHECK(loaded.input_rows() == 2);
  CHECK(loaded.input_cols() == 49);

  Eigen::MatrixXd y = Eigen::MatrixXd::Constant(2, 49, 0.02);
  CHECK(net.forward(y) == loaded.forward(y));

  // Saving the loaded model reproduces the file byte for byte.
  const std::filesystem::path path2 =
      std::filesystem::temp_directory_path() / "chartloc_net_roundtrip2.bin";
  loaded.save(path2.string());
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(f1)), {});
  const std::string b2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(b1 == b2);
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

TEST_CASE("model loader rejects corrupt files") {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / "chartloc_net_corrupt.bin";
  ChartNetF net(tiny_arch());
  net.init_weights(1);
  net.save(path.string());

  // Truncate the weight blob.
  fs::resize_file(path, fs::file_size(path) - 16);
  CHECK_THROWS_AS(ChartNetF::load(path.string()), Error);

  std::ofstream(path, std::ios::trunc) << "not a model";
  CHECK_THROWS_AS(ChartNetF::load(path.string()), Error);
  fs::remove(path);
}

TEST_CASE("forward rejects a feature shape mismatch") {
  ChartNetD net(NetArchitecture::chart_default(2, 49));
  CHECK_THROWS_AS(net.forward(Eigen::MatrixXd::Zero(3, 49)), Error);
  CHECK_THROWS_AS(net.forward(Eigen::MatrixXd::Zero(2, 48)), Error);
}
