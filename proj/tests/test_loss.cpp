#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "core/common.hpp"
#include "core/loss.hpp"
#include "core/net.hpp"
#include "core/rng.hpp"

using namespace chartloc;

namespace {

constexpr double kNu = kSpeedOfLight;

NetArchitecture tiny_arch() {
  NetArchitecture arch;
  arch.input_h = 2;
  arch.input_w = 5;
  arch.conv = {{2, 3, 3, Activation::relu}};
  arch.dense = {{8, Activation::relu}, {2, Activation::linear}};
  return arch;
}

struct GradCheckSetup {
  std::vector<Vec3> trps = {{0.0, 0.0, 8.0}, {12.0, 9.0, 8.0}};
  double ue_height = 1.5;
  MatX<double> features;
  Eigen::VectorXd tau_c, tau_f;
  double t_hat = 1.7;

  explicit GradCheckSetup(Rng& rng) {
    features.resize(10, 2);
    for (Eigen::Index i = 0; i < features.size(); ++i)
      features.data()[i] = rng.normal();
    tau_c.resize(2);
    tau_f.resize(2);
    for (int m = 0; m < 2; ++m) {
      tau_c(m) = rng.uniform(20.0, 80.0) / kNu;  // 20-80 m ranges
      tau_f(m) = rng.uniform(20.0, 80.0) / kNu;
    }
  }
};

// Relative error between the analytic gradient and central differences over
// all parameters, for the pair loss as a function of theta.
double gradcheck(const PairLossConfig& cfg, double lambda, std::uint64_t seed) {
  Rng rng(seed);
  GradCheckSetup setup(rng);
  ChartNetD net(tiny_arch());
  net.init_weights(rng.next_u64());

  const auto loss_at = [&]() {
    return pair_loss_theta<double>(net, setup.features, setup.trps, setup.tau_c,
                                   setup.tau_f, lambda, setup.t_hat, cfg, nullptr);
  };

  if (cfg.variant == LossVariant::hinge) {
    // Keep every TRP term away from the hinge kink for this parameter draw.
    for (int m = 0; m < 2; ++m) {
      NetWorkspace<double> ws;
      const MatX<double> out = net.forward_batch(setup.features, &ws);
      const Eigen::Vector2d u_c(out(0, 0), out(1, 0));
      const Eigen::Vector2d u_f(out(0, 1), out(1, 1));
      const double pre =
          (lift3d(u_c, cfg.ue_height) - setup.trps[m]).norm() -
          (lift3d(u_f, cfg.ue_height) - setup.trps[m]).norm() + cfg.hinge_margin;
      if (std::abs(pre) < 0.05) return 0.0;  // skip draws near the kink
    }
  }

  ParamVec<double> grad(net.param_count(), 0.0);
  pair_loss_theta<double>(net, setup.features, setup.trps, setup.tau_c,
                          setup.tau_f, lambda, setup.t_hat, cfg, &grad);

  ParamVec<double>& params = net.params();
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double h = 1e-5 * std::max(0.1, std::abs(params[i]));
    const double saved = params[i];
    params[i] = saved + h;
    const double up = loss_at();
    params[i] = saved - h;
    const double dn = loss_at();
    params[i] = saved;
    const double fd = (up - dn) / (2 * h);
    num += (fd - grad[i]) * (fd - grad[i]);
    den += std::max(fd * fd, grad[i] * grad[i]);
  }
  return std::sqrt(num / std::max(den, 1e-30));
}

}  // namespace

TEST_CASE("lift3d pins the known height") {
  CHECK(lift3d({0.0, 0.0}, 1.5) == Vec3(0.0, 0.0, 1.5));
  CHECK(lift3d({3.0, -2.0}, 0.0) == Vec3(3.0, -2.0, 0.0));
  // Same (x, y) as a TRP at 8 m: only the 6.5 m vertical gap remains.
  const Vec3 trp(4.0, 5.0, 8.0);
  CHECK((lift3d({4.0, 5.0}, 1.5) - trp).norm() == doctest::Approx(6.5));
}

TEST_CASE("toa_sample_term is zero at consistent geometry and squares residuals") {
  const Vec3 trp(0.0, 0.0, 8.0);
  const double h = 1.5;
  // Chart point 6 m east: lifted distance sqrt(36 + 42.25) = 8.846...
  const Eigen::Vector2d u(6.0, 0.0);
  const double dist = (lift3d(u, h) - trp).norm();

  CHECK(toa_sample_term(u, trp, dist / kNu, h, nullptr) ==
        doctest::Approx(0.0).epsilon(1e-9));
  // Range residual of 2 m squares to 4.
  CHECK(toa_sample_term(u, trp, (dist - 2.0) / kNu, h, nullptr) ==
        doctest::Approx(4.0).epsilon(1e-6));
}

TEST_CASE("pair_toa_term: consistent pair cancels, one-tap gap squares") {
  const Vec3 trp(0.0, 0.0, 8.0);
  const double h = 1.5;
  const Eigen::Vector2d u_c(3.0, 0.0), u_f(9.0, 0.0);
  const double d_c = (lift3d(u_c, h) - trp).norm();
  const double d_f = (lift3d(u_f, h) - trp).norm();
  CHECK(pair_toa_term(u_c, u_f, trp, d_c / kNu, d_f / kNu, h, nullptr, nullptr) ==
        doctest::Approx(0.0).epsilon(1e-9));

  // Equidistant chart points, measured ToAs one tap apart.
  const double fs = 122.88e6;
  const Eigen::Vector2d a(5.0, 1.0), b(1.0, 5.0);
  const double tau = 40.0 / kNu;
  const double loss =
      pair_toa_term(a, b, trp, tau, tau + 1.0 / fs, h, nullptr, nullptr);
  const double tap_m = kNu / fs;  // 2.4397 m
  CHECK(loss == doctest::Approx(tap_m * tap_m).epsilon(1e-9));
  CHECK(loss == doctest::Approx(5.952).epsilon(1e-3));
}

TEST_CASE("pair_toa_term is symmetric under swapping the pair") {
  Rng rng(8);
  const Vec3 trp(2.0, 3.0, 8.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Vector2d u1(rng.uniform(0, 20), rng.uniform(0, 15));
    const Eigen::Vector2d u2(rng.uniform(0, 20), rng.uniform(0, 15));
    const double t1 = rng.uniform(20, 80) / kNu;
    const double t2 = rng.uniform(20, 80) / kNu;
    const double fwd = pair_toa_term(u1, u2, trp, t1, t2, 1.5, nullptr, nullptr);
    const double bwd = pair_toa_term(u2, u1, trp, t2, t1, 1.5, nullptr, nullptr);
    CHECK(fwd == doctest::Approx(bwd).epsilon(1e-12));
  }
}

TEST_CASE("hinge_term activates only on margin violations") {
  const Vec3 trp(0.0, 0.0, 8.0);
  const double h = 1.5;
  const Eigen::Vector2d u_c(3.0, 0.0), u_f(9.0, 0.0);
  const double d_c = (lift3d(u_c, h) - trp).norm();
  const double d_f = (lift3d(u_f, h) - trp).norm();
  REQUIRE(d_f - d_c > 1.0);  // margin satisfied by more than 1 m

  // Closer roles assigned by ToA; chart already separates them enough.
  CHECK(hinge_term(u_c, u_f, trp, 1e-8, 2e-8, 0.5, h, nullptr, nullptr) == 0.0);

  // Equal chart distances: loss = max(0 + margin, 0) = margin.
  const Eigen::Vector2d a(5.0, 0.0), b(0.0, 5.0);
  CHECK(hinge_term(a, b, trp, 1e-8, 2e-8, 1.0, h, nullptr, nullptr) ==
        doctest::Approx(1.0).epsilon(1e-9));

  CHECK_THROWS_AS(hinge_term(a, b, trp, 1e-8, 2e-8, 0.0, h, nullptr, nullptr),
                  Error);
}

TEST_CASE("laser_term squares the displacement residual") {
  const Eigen::Vector2d u_c(1.0, 1.0), u_f(1.0, 2.0);  // 1 m apart
  CHECK(laser_term(u_c, u_f, 1.0, nullptr, nullptr) ==
        doctest::Approx(0.0).epsilon(1e-9));
  CHECK(laser_term(u_c, u_f, 0.5, nullptr, nullptr) ==
        doctest::Approx(0.25).epsilon(1e-6));
  CHECK_THROWS_AS(laser_term(u_c, u_f, -0.1, nullptr, nullptr), Error);
}

TEST_CASE("laser_term gradient stays finite at coincident points") {
  const Eigen::Vector2d u(2.0, 2.0);
  Eigen::Vector2d g_c, g_f;
  const double loss = laser_term(u, u, 1.0, &g_c, &g_f);
  CHECK(std::isfinite(loss));
  CHECK(std::isfinite(g_c.x()));
  CHECK(std::isfinite(g_f.y()));
}

TEST_CASE("total_pair_loss recomposes from its parts") {
  Rng rng(21);
  const std::vector<Vec3> trps = {{0.0, 0.0, 8.0}, {12.0, 9.0, 8.0}};
  const Eigen::Vector2d u_c(rng.uniform(0, 12), rng.uniform(0, 9));
  const Eigen::Vector2d u_f(rng.uniform(0, 12), rng.uniform(0, 9));
  Eigen::VectorXd tau_c(2), tau_f(2);
  for (int m = 0; m < 2; ++m) {
    tau_c(m) = rng.uniform(10, 60) / kNu;
    tau_f(m) = rng.uniform(10, 60) / kNu;
  }
  const double lambda = 5.0, t_hat = 2.2;

  PairLossConfig cfg;
  cfg.variant = LossVariant::split_toa;
  const double total = total_pair_loss(u_c, u_f, trps, tau_c, tau_f, lambda,
                                       t_hat, cfg, nullptr, nullptr);
  double hand = 0.0;
  for (int m = 0; m < 2; ++m) {
    hand += toa_sample_term(u_c, trps[m], tau_c(m), cfg.ue_height, nullptr);
    hand += toa_sample_term(u_f, trps[m], tau_f(m), cfg.ue_height, nullptr);
  }
  hand += lambda * laser_term(u_c, u_f, t_hat, nullptr, nullptr);
  CHECK(total == doctest::Approx(hand).epsilon(1e-12));

  // lambda = 0 reduces to the pure ToA part and is pair-symmetric.
  const double no_laser = total_pair_loss(u_c, u_f, trps, tau_c, tau_f, 0.0,
                                          0.0, cfg, nullptr, nullptr);
  CHECK(no_laser < total);
  const double swapped = total_pair_loss(u_f, u_c, trps, tau_f, tau_c, 0.0, 0.0,
                                         cfg, nullptr, nullptr);
  CHECK(no_laser == doctest::Approx(swapped).epsilon(1e-12));
}

TEST_CASE("perfect chart with exact measurements has zero loss") {
  const std::vector<Vec3> trps = {{0.0, 0.0, 8.0}, {12.0, 9.0, 8.0}};
  const double h = 1.5;
  const Eigen::Vector2d u_c(4.0, 2.0), u_f(7.0, 6.0);
  Eigen::VectorXd tau_c(2), tau_f(2);
  for (int m = 0; m < 2; ++m) {
    tau_c(m) = (lift3d(u_c, h) - trps[m]).norm() / kNu;
    tau_f(m) = (lift3d(u_f, h) - trps[m]).norm() / kNu;
  }
  const double t_hat = (u_c - u_f).norm();
  for (const LossVariant variant :
       {LossVariant::split_toa, LossVariant::pair_toa}) {
    PairLossConfig cfg;
    cfg.variant = variant;
    const double loss = total_pair_loss(u_c, u_f, trps, tau_c, tau_f, 5.0,
                                        t_hat, cfg, nullptr, nullptr);
    CHECK(loss == doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("analytic gradients match finite differences at 100 random points") {
  struct Case {
    LossVariant variant;
    double lambda;
    const char* name;
  };
  const Case cases[] = {
      {LossVariant::split_toa, 0.0, "split_toa"},
      {LossVariant::pair_toa, 0.0, "pair_toa"},
      {LossVariant::hinge, 0.0, "hinge"},
      {LossVariant::split_toa, 5.0, "split_toa + laser"},
      {LossVariant::pair_toa, 2.5, "pair_toa + laser"},
  };
  for (const Case& c : cases) {
    CAPTURE(c.name);
    PairLossConfig cfg;
    cfg.variant = c.variant;
    double worst = 0.0;
    for (std::uint64_t point = 0; point < 100; ++point)
      worst = std::max(worst, gradcheck(cfg, c.lambda, 1000 + point));
    CHECK(worst <= 1e-4);
  }
}
