#include "core/config.hpp"

#include <cmath>
#include <json.hpp>

#include "core/common.hpp"

using nlohmann::json;

namespace chartloc {

namespace {

json parse_object(const std::string& text, const char* what) {
  if (text.empty()) return json::object();
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::bad_format, std::string(what) + ": " + e.what());
  }
  if (j.is_null()) return json::object();
  require(j.is_object(), std::string(what) + ": expected a JSON object",
          ErrorCode::bad_format);
  return j;
}

// Pulls a field and records it as consumed; leftover keys are rejected.
class FieldReader {
 public:
  FieldReader(const json& j, const char* what) : j_(j), what_(what) {}

  template <class T>
  void get(const char* key, T& out) {
    if (j_.contains(key)) {
      try {
        out = j_.at(key).get<T>();
      } catch (const json::exception& e) {
        fail(ErrorCode::bad_format,
             std::string(what_) + "." + key + ": " + e.what());
      }
      seen_.push_back(key);
    }
  }

  json sub(const char* key) {
    if (!j_.contains(key)) return json::object();
    seen_.push_back(key);
    const json& s = j_.at(key);
    require(s.is_object(), std::string(what_) + "." + key + ": expected object",
            ErrorCode::bad_format);
    return s;
  }

  void mark(const char* key) { seen_.push_back(key); }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      (void)value;
      if (std::find(seen_.begin(), seen_.end(), key) == seen_.end())
        fail(ErrorCode::bad_format,
             std::string(what_) + ": unknown key '" + key + "'");
    }
  }

 private:
  const json& j_;
  const char* what_;
  std::vector<std::string> seen_;
};

IcpConfig icp_from_json(const json& j) {
  IcpConfig cfg;
  FieldReader r(j, "icp");
  r.get("max_iterations", cfg.max_iterations);
  r.get("tol_translation", cfg.tol_translation);
  r.get("tol_rotation", cfg.tol_rotation);
  r.get("reject_distance", cfg.reject_distance);
  r.get("quality_gate", cfg.quality_gate);
  r.finish();
  return cfg;
}

json icp_to_json(const IcpConfig& cfg) {
  json j;
  j["max_iterations"] = cfg.max_iterations;
  j["tol_translation"] = cfg.tol_translation;
  j["tol_rotation"] = cfg.tol_rotation;
  j["reject_distance"] = cfg.reject_distance;
  j["quality_gate"] = cfg.quality_gate;
  return j;
}

}  // namespace

SimParams sim_params_from_json(const std::string& json_text) {
  const json j = parse_object(json_text, "sim config");
  SimParams p;
  FieldReader r(j, "sim config");

  {
    const json sub = r.sub("kinematics");
    FieldReader k(sub, "kinematics");
    k.get("v_max", p.kinematics.v_max);
    k.get("omega_max", p.kinematics.omega_max);
    k.get("dt", p.kinematics.dt);
    k.finish();
  }
  {
    const json sub = r.sub("laser");
    FieldReader l(sub, "laser");
    double deg = p.laser.angular_resolution_rad * 180.0 / M_PI;
    l.get("angular_resolution_deg", deg);
    p.laser.angular_resolution_rad = deg * M_PI / 180.0;
    l.get("noise_sigma", p.laser.noise_sigma);
    l.get("r_max", p.laser.r_max);
    l.finish();
  }
  {
    const json sub = r.sub("channel");
    FieldReader c(sub, "channel");
    c.get("bandwidth_hz", p.channel.bandwidth_hz);
    c.get("sample_rate_hz", p.channel.sample_rate_hz);
    c.get("n_taps", p.channel.n_taps);
    c.get("carrier_wavelength", p.channel.carrier_wavelength);
    bool no_noise = false;
    c.get("snr_db", p.channel.snr_db);
    c.get("noiseless", no_noise);
    if (no_noise) p.channel.snr_db = std::numeric_limits<double>::infinity();
    c.get("reflection_coeff", p.channel.reflection_coeff);
    c.finish();
  }
  r.get("c_bar", p.c_bar);
  r.finish();

  p.channel.validate();
  require(p.c_bar >= 1 && p.c_bar <= p.channel.n_taps, "c_bar out of range");
  return p;
}

std::string sim_params_to_json(const SimParams& p) {
  json j;
  j["kinematics"]["v_max"] = p.kinematics.v_max;
  j["kinematics"]["omega_max"] = p.kinematics.omega_max;
  j["kinematics"]["dt"] = p.kinematics.dt;
  j["laser"]["angular_resolution_deg"] = p.laser.angular_resolution_rad * 180.0 / M_PI;
  j["laser"]["noise_sigma"] = p.laser.noise_sigma;
  j["laser"]["r_max"] = p.laser.r_max;
  j["channel"]["bandwidth_hz"] = p.channel.bandwidth_hz;
  j["channel"]["sample_rate_hz"] = p.channel.sample_rate_hz;
  j["channel"]["n_taps"] = p.channel.n_taps;
  j["channel"]["carrier_wavelength"] = p.channel.carrier_wavelength;
  if (std::isfinite(p.channel.snr_db))
    j["channel"]["snr_db"] = p.channel.snr_db;
  else
    j["channel"]["noiseless"] = true;
  j["channel"]["reflection_coeff"] = p.channel.reflection_coeff;
  j["c_bar"] = p.c_bar;
  return j.dump(2);
}

TrainConfig train_config_from_json(const std::string& json_text) {
  const json j = parse_object(json_text, "train config");
  TrainConfig cfg;
  FieldReader r(j, "train config");
  r.get("epochs", cfg.epochs);
  r.get("pairs_per_epoch", cfg.pairs_per_epoch);
  r.get("batch_size", cfg.batch_size);
  r.get("learning_rate", cfg.learning_rate);
  r.get("final_lr_fraction", cfg.final_lr_fraction);
  r.get("seed", cfg.seed);
  r.get("lambda_value", cfg.lambda_value);
  r.get("lambda_window", cfg.lambda_window);
  std::string variant = loss_variant_name(cfg.variant);
  r.get("loss_variant", variant);
  cfg.variant = loss_variant_from_name(variant);
  r.get("hinge_margin", cfg.hinge_margin);
  r.get("threads", cfg.threads);
  cfg.icp = icp_from_json(r.sub("icp"));
  r.finish();
  cfg.validate();
  return cfg;
}

std::string train_config_to_json(const TrainConfig& cfg) {
  json j;
  j["epochs"] = cfg.epochs;
  j["pairs_per_epoch"] = cfg.pairs_per_epoch;
  j["batch_size"] = cfg.batch_size;
  j["learning_rate"] = cfg.learning_rate;
  j["final_lr_fraction"] = cfg.final_lr_fraction;
  j["seed"] = cfg.seed;
  j["lambda_value"] = cfg.lambda_value;
  j["lambda_window"] = cfg.lambda_window;
  j["loss_variant"] = loss_variant_name(cfg.variant);
  j["hinge_margin"] = cfg.hinge_margin;
  j["threads"] = cfg.threads;
  j["icp"] = icp_to_json(cfg.icp);
  return j.dump(2);
}

PsoConfig pso_config_from_json(const std::string& json_text) {
  const json j = parse_object(json_text, "pso config");
  PsoConfig cfg;
  FieldReader r(j, "pso config");
  r.get("swarm_size", cfg.swarm_size);
  r.get("iterations", cfg.iterations);
  r.get("inertia", cfg.inertia);
  r.get("cognitive", cfg.cognitive);
  r.get("social", cfg.social);
  r.get("seed", cfg.seed);
  if (j.contains("bounds")) {
    r.mark("bounds");
    try {
      for (const auto& b : j.at("bounds"))
        cfg.bounds.emplace_back(double(b.at(0)), double(b.at(1)));
    } catch (const json::exception& e) {
      fail(ErrorCode::bad_format, std::string("pso config.bounds: ") + e.what());
    }
  }
  r.finish();
  return cfg;
}

std::string pso_config_to_json(const PsoConfig& cfg) {
  json j;
  j["swarm_size"] = cfg.swarm_size;
  j["iterations"] = cfg.iterations;
  j["inertia"] = cfg.inertia;
  j["cognitive"] = cfg.cognitive;
  j["social"] = cfg.social;
  j["seed"] = cfg.seed;
  j["bounds"] = json::array();
  for (const auto& [lo, hi] : cfg.bounds) j["bounds"].push_back({lo, hi});
  return j.dump(2);
}

}  // namespace chartloc
