#include "core/train.hpp"

#include <cmath>
#include <memory>

#include "core/rng.hpp"
#include "core/threading.hpp"

namespace chartloc {

void TrainConfig::validate() const {
  require(epochs >= 1, "epochs must be >= 1");
  require(pairs_per_epoch >= 1, "pairs_per_epoch must be >= 1");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(learning_rate > 0, "learning rate must be positive");
  require(final_lr_fraction > 0 && final_lr_fraction <= 1.0,
          "final_lr_fraction must be in (0, 1]");
  require(lambda_value >= 0, "lambda must be nonnegative");
  require(lambda_window >= 0, "lambda window must be nonnegative");
  require(hinge_margin > 0, "hinge margin must be positive");
}

LossVariant loss_variant_from_name(const std::string& name) {
  if (name == "split_toa") return LossVariant::split_toa;
  if (name == "pair_toa") return LossVariant::pair_toa;
  if (name == "hinge") return LossVariant::hinge;
  fail(ErrorCode::invalid_argument, "unknown loss variant '" + name + "'");
}

const char* loss_variant_name(LossVariant variant) {
  switch (variant) {
    case LossVariant::split_toa: return "split_toa";
    case LossVariant::pair_toa: return "pair_toa";
    case LossVariant::hinge: return "hinge";
  }
  return "?";
}

namespace {

// Pairs per gradient chunk: chunk boundaries are fixed by the batch layout,
// so the floating-point reduction order does not depend on thread count.
constexpr int kChunkPairs = 8;

struct PairTask {
  std::int32_t n_c = 0;
  std::int32_t n_f = 0;
  double lambda = 0.0;
  double t_hat = 0.0;
};

}  // namespace

TrainResult train(const Dataset& dataset, const TrainConfig& cfg) {
  cfg.validate();
  require(dataset.n_steps >= 2, "training needs at least 2 time steps");
  const bool use_laser = cfg.lambda_value > 0.0 && cfg.lambda_window > 0;
  require(!use_laser || dataset.has_laser,
          "dataset has no laser scans but lambda > 0; "
          "re-simulate with laser data or train with --lambda 0");

  const auto n = static_cast<std::size_t>(dataset.n_steps);
  const int m_count = static_cast<int>(dataset.n_trps);
  const int c_bar = static_cast<int>(dataset.c_bar);
  const int in_dim = m_count * c_bar;

  // Feature columns once, straight from the float32 arrays.
  MatX<float> features(in_dim, n);
  for (std::size_t i = 0; i < n; ++i)
    for (int d = 0; d < in_dim; ++d)
      features(d, i) = dataset.features[i * in_dim + d];

  Eigen::MatrixXd tau(m_count, n);
  for (std::size_t i = 0; i < n; ++i)
    for (int m = 0; m < m_count; ++m)
      tau(m, i) = static_cast<double>(dataset.toa[i * m_count + m]);

  std::unique_ptr<DisplacementEstimator> displacement;
  if (use_laser) {
    std::vector<LaserScan> scans;
    scans.reserve(n);
    for (std::size_t i = 0; i < n; ++i) scans.push_back(dataset.laser_scan(i));
    displacement =
        std::make_unique<DisplacementEstimator>(std::move(scans), cfg.icp, cfg.threads);
  }

  TrainResult result;
  result.model = ChartNetF(NetArchitecture::chart_default(m_count, c_bar));
  result.model.init_weights(cfg.seed);
  ChartNetF& net = result.model;

  const std::size_t n_params = net.param_count();
  ParamVec<float> grad(n_params, 0.0f);
  ParamVec<float> adam_m(n_params, 0.0f);
  ParamVec<float> adam_v(n_params, 0.0f);

  PairLossConfig loss_cfg;
  loss_cfg.variant = cfg.variant;
  loss_cfg.hinge_margin = cfg.hinge_margin;
  loss_cfg.ue_height = dataset.ue_height;

  Rng sampler(derive_seed(cfg.seed, 0x7A17));
  const int steps_per_epoch =
      (cfg.pairs_per_epoch + cfg.batch_size - 1) / cfg.batch_size;
  const int batch = cfg.batch_size;
  const int n_chunks = (batch + kChunkPairs - 1) / kChunkPairs;

  std::vector<PairTask> tasks(batch);
  std::vector<ParamVec<float>> chunk_grad(
      n_chunks, ParamVec<float>(n_params, 0.0f));
  std::vector<double> chunk_loss(n_chunks, 0.0);
  std::vector<NetWorkspace<float>> chunk_ws(n_chunks);

  long long adam_t = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_sum = 0.0;
    for (int step = 0; step < steps_per_epoch; ++step) {
      for (int b = 0; b < batch; ++b) {
        std::size_t n_c, n_f;
        do {
          n_c = sampler.uniform_index(n);
          n_f = sampler.uniform_index(n);
        } while (n_c == n_f);
        tasks[b].n_c = static_cast<std::int32_t>(n_c);
        tasks[b].n_f = static_cast<std::int32_t>(n_f);
        tasks[b].lambda = 0.0;
        tasks[b].t_hat = 0.0;
      }

      if (use_laser) {
        parallel_for_chunked(
            batch, kChunkPairs,
            [&](std::size_t lo, std::size_t hi) {
              for (std::size_t b = lo; b < hi; ++b) {
                PairTask& task = tasks[b];
                if (std::abs(task.n_c - task.n_f) > cfg.lambda_window) continue;
                const auto [t_hat, quality] =
                    displacement->estimate(task.n_c, task.n_f);
                task.t_hat = t_hat;
                task.lambda = cfg.lambda_value * quality;
              }
            },
            cfg.threads);
      }

      parallel_for_chunked(
          batch, kChunkPairs,
          [&](std::size_t lo, std::size_t hi) {
            const std::size_t chunk = lo / kChunkPairs;
            ParamVec<float>& g = chunk_grad[chunk];
            std::fill(g.begin(), g.end(), 0.0f);
            const auto n_pairs = static_cast<Eigen::Index>(hi - lo);

            MatX<float> cols(in_dim, 2 * n_pairs);
            for (Eigen::Index p = 0; p < n_pairs; ++p) {
              cols.col(2 * p) = features.col(tasks[lo + p].n_c);
              cols.col(2 * p + 1) = features.col(tasks[lo + p].n_f);
            }
            NetWorkspace<float>& ws = chunk_ws[chunk];
            const MatX<float> out = net.forward_batch(cols, &ws);

            MatX<float> d_out(2, 2 * n_pairs);
            double loss_sum = 0.0;
            const double scale = 1.0 / batch;
            for (Eigen::Index p = 0; p < n_pairs; ++p) {
              const PairTask& task = tasks[lo + p];
              const Eigen::Vector2d u_c(out(0, 2 * p), out(1, 2 * p));
              const Eigen::Vector2d u_f(out(0, 2 * p + 1), out(1, 2 * p + 1));
              Eigen::Vector2d g_c, g_f;
              loss_sum += total_pair_loss(u_c, u_f, dataset.trps, tau.col(task.n_c),
                                          tau.col(task.n_f), task.lambda, task.t_hat,
                                          loss_cfg, &g_c, &g_f);
              d_out(0, 2 * p) = static_cast<float>(g_c.x() * scale);
              d_out(1, 2 * p) = static_cast<float>(g_c.y() * scale);
              d_out(0, 2 * p + 1) = static_cast<float>(g_f.x() * scale);
              d_out(1, 2 * p + 1) = static_cast<float>(g_f.y() * scale);
            }
            chunk_loss[chunk] = loss_sum;
            net.backward_batch(ws, d_out, g);
          },
          cfg.threads);

      std::fill(grad.begin(), grad.end(), 0.0f);
      double loss = 0.0;
      for (int c = 0; c < n_chunks; ++c) {
        loss += chunk_loss[c];
        const ParamVec<float>& g = chunk_grad[c];
        for (std::size_t i = 0; i < n_params; ++i) grad[i] += g[i];
      }
      loss /= batch;
      if (!std::isfinite(loss))
        fail(ErrorCode::numeric,
             "training diverged: non-finite loss at epoch " +
                 std::to_string(epoch) + " step " + std::to_string(step));

      ++adam_t;
      const double total_steps =
          static_cast<double>(cfg.epochs) * steps_per_epoch;
      const double cosine =
          0.5 * (1.0 + std::cos(M_PI * static_cast<double>(adam_t - 1) /
                                std::max(1.0, total_steps - 1)));
      const double lr = cfg.learning_rate *
                        (cfg.final_lr_fraction +
                         (1.0 - cfg.final_lr_fraction) * cosine);
      const double bc1 = 1.0 - std::pow(cfg.adam_beta1, adam_t);
      const double bc2 = 1.0 - std::pow(cfg.adam_beta2, adam_t);
      const auto b1 = static_cast<float>(cfg.adam_beta1);
      const auto b2 = static_cast<float>(cfg.adam_beta2);
      ParamVec<float>& params = net.params();
      for (std::size_t i = 0; i < n_params; ++i) {
        adam_m[i] = b1 * adam_m[i] + (1.0f - b1) * grad[i];
        adam_v[i] = b2 * adam_v[i] + (1.0f - b2) * grad[i] * grad[i];
        const double m_hat = adam_m[i] / bc1;
        const double v_hat = adam_v[i] / bc2;
        params[i] -= static_cast<float>(lr * m_hat /
                                        (std::sqrt(v_hat) + cfg.adam_eps));
      }

      result.batch_loss.push_back(loss);
      epoch_sum += loss;
    }
    result.epoch_loss.push_back(epoch_sum / steps_per_epoch);
  }

  require(net.params_finite(), "non-finite parameters after training",
          ErrorCode::numeric);
  return result;
}

}  // namespace chartloc
