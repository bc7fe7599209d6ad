#pragma once

#include <Eigen/Dense>
#include <vector>

#include "core/common.hpp"
#include "core/geometry.hpp"
#include "core/net.hpp"

namespace chartloc {

enum class LossVariant { split_toa, pair_toa, hinge };

inline Vec3 lift3d(const Eigen::Vector2d& p, double ue_height) {
  return Vec3(p.x(), p.y(), ue_height);
}

// Norms carry a small epsilon inside the square root so gradients stay
// finite at coincident points.
inline constexpr double kNormGuard = 1e-9;

namespace detail {

// Distance from the lifted chart point to a TRP plus its gradient wrt the
// 2-D chart point.
inline double guarded_trp_distance(const Eigen::Vector2d& u, const Vec3& trp,
                                   double ue_height, Eigen::Vector2d* grad) {
  const Vec3 delta = lift3d(u, ue_height) - trp;
  const double dist = std::sqrt(delta.squaredNorm() + kNormGuard);
  if (grad) *grad = delta.head<2>() / dist;
  return dist;
}

}  // namespace detail

// (||x_m - lift(u)|| - tau*c)^2, the per-sample half of the split pair loss.
inline double toa_sample_term(const Eigen::Vector2d& u, const Vec3& trp,
                              double tau, double ue_height,
                              Eigen::Vector2d* grad_u) {
  Eigen::Vector2d dir;
  const double dist = detail::guarded_trp_distance(u, trp, ue_height, &dir);
  const double resid = dist - tau * kSpeedOfLight;
  if (grad_u) *grad_u = 2.0 * resid * dir;
  return resid * resid;
}

// Pairwise difference form: the sample with the smaller ToA plays the
// "closer" role, so the term is symmetric under swapping the pair.
inline double pair_toa_term(const Eigen::Vector2d& u_c, const Eigen::Vector2d& u_f,
                            const Vec3& trp, double tau_c, double tau_f,
                            double ue_height, Eigen::Vector2d* grad_c,
                            Eigen::Vector2d* grad_f) {
  const bool c_closer = tau_c <= tau_f;
  const Eigen::Vector2d& a = c_closer ? u_c : u_f;  // closer by measured ToA
  const Eigen::Vector2d& b = c_closer ? u_f : u_c;
  Eigen::Vector2d dir_a, dir_b;
  const double dist_a = detail::guarded_trp_distance(a, trp, ue_height, &dir_a);
  const double dist_b = detail::guarded_trp_distance(b, trp, ue_height, &dir_b);
  const double resid = dist_a - dist_b + std::abs(tau_c - tau_f) * kSpeedOfLight;
  if (grad_c && grad_f) {
    const Eigen::Vector2d g_a = 2.0 * resid * dir_a;
    const Eigen::Vector2d g_b = -2.0 * resid * dir_b;
    *grad_c = c_closer ? g_a : g_b;
    *grad_f = c_closer ? g_b : g_a;
  }
  return resid * resid;
}

// Margin form: max(dist_closer - dist_farther + margin, 0).
inline double hinge_term(const Eigen::Vector2d& u_c, const Eigen::Vector2d& u_f,
                         const Vec3& trp, double tau_c, double tau_f,
                         double margin, double ue_height,
                         Eigen::Vector2d* grad_c, Eigen::Vector2d* grad_f) {
  require(margin > 0, "hinge margin must be positive");
  const bool c_closer = tau_c <= tau_f;
  const Eigen::Vector2d& a = c_closer ? u_c : u_f;
  const Eigen::Vector2d& b = c_closer ? u_f : u_c;
  Eigen::Vector2d dir_a, dir_b;
  const double dist_a = detail::guarded_trp_distance(a, trp, ue_height, &dir_a);
  const double dist_b = detail::guarded_trp_distance(b, trp, ue_height, &dir_b);
  const double pre = dist_a - dist_b + margin;
  if (grad_c && grad_f) {
    if (pre > 0.0) {
      *grad_c = c_closer ? dir_a : Eigen::Vector2d(-dir_b);
      *grad_f = c_closer ? Eigen::Vector2d(-dir_b) : dir_a;
    } else {
      grad_c->setZero();
      grad_f->setZero();
    }
  }
  return std::max(pre, 0.0);
}

// (||u_c - u_f|| - T_hat)^2 on the planar chart displacement.
inline double laser_term(const Eigen::Vector2d& u_c, const Eigen::Vector2d& u_f,
                         double t_hat, Eigen::Vector2d* grad_c,
                         Eigen::Vector2d* grad_f) {
  require(t_hat >= 0, "displacement magnitude must be nonnegative");
  const Eigen::Vector2d delta = u_c - u_f;
  const double disp = std::sqrt(delta.squaredNorm() + kNormGuard);
  const double resid = disp - t_hat;
  if (grad_c && grad_f) {
    *grad_c = 2.0 * resid * delta / disp;
    *grad_f = -*grad_c;
  }
  return resid * resid;
}

struct PairLossConfig {
  LossVariant variant = LossVariant::split_toa;
  double hinge_margin = 1.0;
  double ue_height = 1.5;
};

// Total per-pair loss: bilateration terms summed over TRPs plus
// lambda * laser term. grad_c/grad_f receive d(loss)/d(chart point).
inline double total_pair_loss(const Eigen::Vector2d& u_c, const Eigen::Vector2d& u_f,
                              const std::vector<Vec3>& trps,
                              const Eigen::VectorXd& tau_c,
                              const Eigen::VectorXd& tau_f, double lambda,
                              double t_hat, const PairLossConfig& cfg,
                              Eigen::Vector2d* grad_c, Eigen::Vector2d* grad_f) {
  require(lambda >= 0, "lambda must be nonnegative");
  double loss = 0.0;
  if (grad_c) grad_c->setZero();
  if (grad_f) grad_f->setZero();
  Eigen::Vector2d g_c, g_f;
  for (std::size_t m = 0; m < trps.size(); ++m) {
    const auto mi = static_cast<Eigen::Index>(m);
    switch (cfg.variant) {
      case LossVariant::split_toa:
        loss += toa_sample_term(u_c, trps[m], tau_c(mi), cfg.ue_height, &g_c);
        loss += toa_sample_term(u_f, trps[m], tau_f(mi), cfg.ue_height, &g_f);
        break;
      case LossVariant::pair_toa:
        loss += pair_toa_term(u_c, u_f, trps[m], tau_c(mi), tau_f(mi),
                              cfg.ue_height, &g_c, &g_f);
        break;
      case LossVariant::hinge:
        loss += hinge_term(u_c, u_f, trps[m], tau_c(mi), tau_f(mi),
                           cfg.hinge_margin, cfg.ue_height, &g_c, &g_f);
        break;
    }
    if (grad_c) *grad_c += g_c;
    if (grad_f) *grad_f += g_f;
  }
  if (lambda > 0.0) {
    loss += lambda * laser_term(u_c, u_f, t_hat, &g_c, &g_f);
    if (grad_c) *grad_c += lambda * g_c;
    if (grad_f) *grad_f += lambda * g_f;
  }
  return loss;
}

// Loss of a pair as a function of the network parameters: forwards both
// features, applies total_pair_loss, and backpropagates into `grad_theta`
// (accumulated, not reset). Shared by training and the gradient tests.
template <class S>
double pair_loss_theta(const ChartNet<S>& net, const MatX<S>& feature_cols,
                       const std::vector<Vec3>& trps, const Eigen::VectorXd& tau_c,
                       const Eigen::VectorXd& tau_f, double lambda, double t_hat,
                       const PairLossConfig& cfg, ParamVec<S>* grad_theta) {
  require(feature_cols.cols() == 2, "expected exactly the two pair features");
  NetWorkspace<S> ws;
  const MatX<S> out = net.forward_batch(feature_cols, &ws);
  const Eigen::Vector2d u_c(static_cast<double>(out(0, 0)),
                            static_cast<double>(out(1, 0)));
  const Eigen::Vector2d u_f(static_cast<double>(out(0, 1)),
                            static_cast<double>(out(1, 1)));
  Eigen::Vector2d g_c, g_f;
  const double loss =
      total_pair_loss(u_c, u_f, trps, tau_c, tau_f, lambda, t_hat, cfg, &g_c, &g_f);
  if (grad_theta) {
    MatX<S> d_out(2, 2);
    d_out(0, 0) = static_cast<S>(g_c.x());
    d_out(1, 0) = static_cast<S>(g_c.y());
    d_out(0, 1) = static_cast<S>(g_f.x());
    d_out(1, 1) = static_cast<S>(g_f.y());
    net.backward_batch(ws, d_out, *grad_theta);
  }
  return loss;
}

}  // namespace chartloc
