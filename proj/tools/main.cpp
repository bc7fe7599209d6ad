// chartloc command-line pipeline: simulate -> train -> estimate-offset ->
// localize -> evaluate, plus the TDoA baseline and the power-distance
// diagnostic. Every subcommand writes its resolved configuration into the
// output directory so runs can be reproduced exactly.

#include <chartloc/chartloc.h>

#include <CLI11.hpp>
#include <array>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check(chartloc_status st, const std::string& what) {
  if (st == CHARTLOC_OK) return;
  throw CliError(what + ": " + chartloc_last_error() + " (" +
                 chartloc_status_name(st) + ")");
}

struct SceneDeleter {
  void operator()(chartloc_scene* p) const { chartloc_scene_free(p); }
};
struct DatasetDeleter {
  void operator()(chartloc_dataset* p) const { chartloc_dataset_free(p); }
};
struct ModelDeleter {
  void operator()(chartloc_model* p) const { chartloc_model_free(p); }
};
using ScenePtr = std::unique_ptr<chartloc_scene, SceneDeleter>;
using DatasetPtr = std::unique_ptr<chartloc_dataset, DatasetDeleter>;
using ModelPtr = std::unique_ptr<chartloc_model, ModelDeleter>;

std::string take_string(char* s) {
  std::string out = s ? s : "";
  chartloc_string_free(s);
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CliError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw CliError("cannot write " + path.string());
  out << content;
}

json parse_config_arg(const std::string& path) {
  if (path.empty()) return json::object();
  const json j = json::parse(read_text_file(path), nullptr, true, true);
  if (!j.is_object()) throw CliError(path + ": expected a JSON object");
  return j;
}

// Deterministic number formatting for CSV output.
std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

DatasetPtr open_dataset(const std::string& dir, chartloc_dataset_mode mode) {
  chartloc_dataset* ds = nullptr;
  check(chartloc_dataset_open(dir.c_str(), mode, &ds), "open dataset " + dir);
  return DatasetPtr(ds);
}

ModelPtr load_model(const std::string& path) {
  chartloc_model* m = nullptr;
  check(chartloc_model_load(path.c_str(), &m), "load model " + path);
  return ModelPtr(m);
}

void emit_config(const fs::path& out_dir, const json& resolved) {
  fs::create_directories(out_dir);
  write_text_file(out_dir / "config.json", resolved.dump(2) + "\n");
  std::printf("resolved config:\n%s\n", resolved.dump(2).c_str());
}

struct PositionsFile {
  std::vector<double> xyz;  // n*3
  std::size_t size() const { return xyz.size() / 3; }
};

void write_positions_csv(const fs::path& path, const double* positions,
                         std::size_t n, const double* gt /* may be null */) {
  std::ostringstream out;
  out << (gt ? "step,x,y,z,err_m\n" : "step,x,y,z\n");
  for (std::size_t i = 0; i < n; ++i) {
    out << i << ',' << fmt_g(positions[3 * i]) << ',' << fmt_g(positions[3 * i + 1])
        << ',' << fmt_g(positions[3 * i + 2]);
    if (gt) {
      const double dx = positions[3 * i] - gt[3 * i];
      const double dy = positions[3 * i + 1] - gt[3 * i + 1];
      out << ',' << fmt_g(std::sqrt(dx * dx + dy * dy));
    }
    out << '\n';
  }
  write_text_file(path, out.str());
}

PositionsFile read_positions_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CliError("cannot read " + path);
  PositionsFile pf;
  std::string line;
  if (!std::getline(in, line)) throw CliError(path + ": empty positions file");
  if (line.rfind("step,", 0) != 0)
    throw CliError(path + ": missing positions header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<double> fields;
    while (std::getline(ss, field, ',')) fields.push_back(std::stod(field));
    if (fields.size() < 4) throw CliError(path + ": short row '" + line + "'");
    pf.xyz.push_back(fields[1]);
    pf.xyz.push_back(fields[2]);
    pf.xyz.push_back(fields[3]);
  }
  if (pf.xyz.empty()) throw CliError(path + ": no positions");
  return pf;
}

// Nulls the z column of a dataset's ground truth for err reporting.
std::optional<std::vector<double>> maybe_ground_truth(const chartloc_dataset* ds) {
  chartloc_dataset_info info{};
  check(chartloc_dataset_info_get(ds, &info), "dataset info");
  if (!info.has_ground_truth) return std::nullopt;
  double* gt = nullptr;
  std::size_t n = 0;
  check(chartloc_dataset_ground_truth(ds, &gt, &n), "ground truth");
  std::vector<double> out(gt, gt + 3 * n);
  chartloc_buffer_free(gt);
  return out;
}

const char* kDefaultSceneJson = R"({
  "room": [[0, 0], [20, 0], [20, 15], [0, 15]],
  "obstacles": [],
  "trps": [[2.0, 2.0, 8.0], [18.0, 13.0, 8.0]],
  "ue_height": 1.5,
  "trp_height": 8.0
})";

// --- subcommands -----------------------------------------------------------

int cmd_simulate(const std::string& scene_path, const std::string& sim_path,
                 std::int64_t train_steps, std::int64_t test_steps,
                 std::uint64_t train_seed, std::uint64_t test_seed,
                 std::optional<std::uint64_t> master_seed, const std::string& out_dir) {
  if (master_seed) {
    train_seed = *master_seed;
    test_seed = *master_seed + 1;
  }
  const std::string scene_text =
      scene_path.empty() ? kDefaultSceneJson : read_text_file(scene_path);
  const std::string sim_text = sim_path.empty() ? "" : read_text_file(sim_path);

  chartloc_scene* scene_raw = nullptr;
  check(chartloc_scene_parse(scene_text.c_str(), &scene_raw), "parse scene");
  ScenePtr scene(scene_raw);

  char* scene_resolved = nullptr;
  check(chartloc_scene_dump(scene.get(), &scene_resolved), "dump scene");
  char* sim_resolved = nullptr;
  check(chartloc_sim_config_resolve(sim_text.c_str(), &sim_resolved), "sim config");

  json cfg;
  cfg["subcommand"] = "simulate";
  cfg["scene"] = json::parse(take_string(scene_resolved));
  cfg["sim"] = json::parse(take_string(sim_resolved));
  cfg["train_steps"] = train_steps;
  cfg["test_steps"] = test_steps;
  cfg["train_seed"] = train_seed;
  cfg["test_seed"] = test_seed;
  emit_config(out_dir, cfg);

  const std::string scene_json = cfg["scene"].dump();
  const std::string sim_json = cfg["sim"].dump();

  struct Split {
    const char* name;
    std::int64_t steps;
    std::uint64_t seed;
  };
  for (const Split split : {Split{"train", train_steps, train_seed},
                            Split{"test", test_steps, test_seed}}) {
    if (split.steps <= 0) continue;
    chartloc_dataset* ds_raw = nullptr;
    check(chartloc_simulate(scene.get(), sim_json.c_str(), split.seed, split.steps,
                            &ds_raw),
          std::string("simulate ") + split.name);
    DatasetPtr ds(ds_raw);
    const fs::path dir = fs::path(out_dir) / split.name;
    check(chartloc_dataset_write(ds.get(), dir.string().c_str()),
          "write dataset " + dir.string());
    std::printf("wrote %s dataset: %" PRId64 " steps -> %s\n", split.name,
                split.steps, dir.string().c_str());
  }
  return 0;
}

int cmd_train(const std::string& data_dir, const std::string& cfg_path,
              const json& overrides, const std::string& out_dir) {
  json cfg_in = parse_config_arg(cfg_path);
  cfg_in.update(overrides);

  char* resolved = nullptr;
  check(chartloc_train_config_resolve(cfg_in.dump().c_str(), &resolved),
        "train config");
  json cfg;
  cfg["subcommand"] = "train";
  cfg["data"] = data_dir;
  cfg["train"] = json::parse(take_string(resolved));
  emit_config(out_dir, cfg);

  DatasetPtr ds = open_dataset(data_dir, CHARTLOC_DATASET_TRAINING);
  chartloc_model* model_raw = nullptr;
  double* losses = nullptr;
  std::size_t n_losses = 0;
  check(chartloc_train(ds.get(), cfg["train"].dump().c_str(), &model_raw, &losses,
                       &n_losses),
        "train");
  ModelPtr model(model_raw);

  const fs::path out(out_dir);
  check(chartloc_model_save(model.get(), (out / "model.bin").string().c_str()),
        "save model");
  std::ostringstream loss_csv;
  loss_csv << "step,loss\n";
  for (std::size_t i = 0; i < n_losses; ++i)
    loss_csv << i << ',' << fmt_g(losses[i]) << '\n';
  const double final_loss = n_losses ? losses[n_losses - 1] : 0.0;
  chartloc_buffer_free(losses);
  write_text_file(out / "loss.csv", loss_csv.str());
  std::printf("model -> %s (final batch loss %s)\n",
              (out / "model.bin").string().c_str(), fmt_g(final_loss).c_str());
  return 0;
}

int cmd_estimate_offset(const std::string& model_path, const std::string& data_dir,
                        const std::string& cfg_path, const json& overrides,
                        const std::string& out_dir) {
  json cfg_in = parse_config_arg(cfg_path);
  cfg_in.update(overrides);
  char* resolved = nullptr;
  check(chartloc_pso_config_resolve(cfg_in.dump().c_str(), &resolved), "pso config");
  json cfg;
  cfg["subcommand"] = "estimate-offset";
  cfg["model"] = model_path;
  cfg["data"] = data_dir;
  cfg["pso"] = json::parse(take_string(resolved));
  emit_config(out_dir, cfg);

  ModelPtr model = load_model(model_path);
  DatasetPtr ds = open_dataset(data_dir, CHARTLOC_DATASET_TRAINING);
  double bias[3] = {0, 0, 0};
  check(chartloc_estimate_bias(model.get(), ds.get(), cfg["pso"].dump().c_str(), bias),
        "estimate bias");

  const fs::path out(out_dir);
  const float bias_f[3] = {static_cast<float>(bias[0]), static_cast<float>(bias[1]),
                           static_cast<float>(bias[2])};
  std::ofstream bin(out / "bias.bin", std::ios::binary | std::ios::trunc);
  bin.write(reinterpret_cast<const char*>(bias_f), sizeof(bias_f));
  bin.close();

  json manifest;
  manifest["format"] = "chartloc-bias";
  manifest["version"] = 1;
  manifest["dtype"] = "float32";
  manifest["byte_order"] = "little";
  manifest["file"] = "bias.bin";
  manifest["b"] = {bias[0], bias[1], bias[2]};
  write_text_file(out / "bias.json", manifest.dump(2) + "\n");
  std::printf("bias: (%s, %s, %s) m -> %s\n", fmt_g(bias[0]).c_str(),
              fmt_g(bias[1]).c_str(), fmt_g(bias[2]).c_str(),
              (out / "bias.bin").string().c_str());
  return 0;
}

std::array<double, 3> read_bias_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError("cannot read bias file " + path);
  float b[3] = {0, 0, 0};
  in.read(reinterpret_cast<char*>(b), sizeof(b));
  if (!in) throw CliError(path + ": bias file must hold exactly 3 float32");
  in.peek();
  if (!in.eof()) throw CliError(path + ": trailing bytes in bias file");
  return {b[0], b[1], b[2]};
}

int cmd_localize(const std::string& model_path, const std::string& bias_path,
                 const std::string& data_dir, const std::string& out_dir) {
  json cfg;
  cfg["subcommand"] = "localize";
  cfg["model"] = model_path;
  cfg["bias"] = bias_path;
  cfg["data"] = data_dir;
  emit_config(out_dir, cfg);

  ModelPtr model = load_model(model_path);
  DatasetPtr ds = open_dataset(data_dir, CHARTLOC_DATASET_FULL);
  std::array<double, 3> bias = {0, 0, 0};
  if (!bias_path.empty()) bias = read_bias_file(bias_path);

  double* positions = nullptr;
  std::size_t n = 0;
  check(chartloc_localize(model.get(), ds.get(), bias.data(), &positions, &n),
        "localize");
  const auto gt = maybe_ground_truth(ds.get());
  write_positions_csv(fs::path(out_dir) / "positions.csv", positions, n,
                      gt ? gt->data() : nullptr);
  chartloc_buffer_free(positions);
  std::printf("localized %zu steps -> %s\n", n,
              (fs::path(out_dir) / "positions.csv").string().c_str());
  return 0;
}

int cmd_baseline(const std::string& data_dir, const std::string& cfg_path,
                 const json& overrides, const std::string& out_dir) {
  json cfg_in = parse_config_arg(cfg_path);
  cfg_in.update(overrides);
  char* resolved = nullptr;
  check(chartloc_pso_config_resolve(cfg_in.dump().c_str(), &resolved), "pso config");
  json cfg;
  cfg["subcommand"] = "baseline-tdoa";
  cfg["data"] = data_dir;
  cfg["pso"] = json::parse(take_string(resolved));
  emit_config(out_dir, cfg);

  DatasetPtr ds = open_dataset(data_dir, CHARTLOC_DATASET_FULL);
  double* positions = nullptr;
  std::size_t n = 0;
  check(chartloc_tdoa_baseline(ds.get(), cfg["pso"].dump().c_str(), &positions, &n),
        "tdoa baseline");
  const auto gt = maybe_ground_truth(ds.get());
  write_positions_csv(fs::path(out_dir) / "positions.csv", positions, n,
                      gt ? gt->data() : nullptr);
  chartloc_buffer_free(positions);
  std::printf("baseline positions for %zu steps -> %s\n", n,
              (fs::path(out_dir) / "positions.csv").string().c_str());
  return 0;
}

int cmd_evaluate(const std::string& positions_path, const std::string& data_dir,
                 int k, const std::string& out_dir) {
  json cfg;
  cfg["subcommand"] = "evaluate";
  cfg["positions"] = positions_path;
  cfg["data"] = data_dir;
  cfg["k"] = k;
  emit_config(out_dir, cfg);

  DatasetPtr ds = open_dataset(data_dir, CHARTLOC_DATASET_EVALUATION);
  const PositionsFile pf = read_positions_csv(positions_path);

  chartloc_report report{};
  double* errors = nullptr;
  check(chartloc_evaluate(ds.get(), pf.xyz.data(), pf.size(), k, &report, &errors),
        "evaluate");

  json rj;
  rj["ct"] = report.ct;
  rj["tw"] = report.tw;
  rj["ce90_m"] = report.ce90;
  rj["mean_err_m"] = report.mean_err;
  rj["k_neighbors"] = report.k_neighbors;
  rj["n_steps"] = pf.size();
  const fs::path out(out_dir);
  write_text_file(out / "report.json", rj.dump(2) + "\n");

  std::ostringstream err_csv;
  err_csv << "step,err_m\n";
  for (std::size_t i = 0; i < pf.size(); ++i)
    err_csv << i << ',' << fmt_g(errors[i]) << '\n';
  chartloc_buffer_free(errors);
  write_text_file(out / "errors.csv", err_csv.str());

  std::printf("CT=%.4f TW=%.4f CE90=%.3f m mean=%.3f m (k=%d) -> %s\n", report.ct,
              report.tw, report.ce90, report.mean_err, report.k_neighbors,
              (out / "report.json").string().c_str());
  return 0;
}

int cmd_diagnose_power(const std::string& data_dir, double margin_db,
                       std::uint64_t n_triples, std::uint64_t seed,
                       const std::string& out_dir) {
  json cfg;
  cfg["subcommand"] = "diagnose-power";
  cfg["data"] = data_dir;
  cfg["margin_db"] = margin_db;
  cfg["n_triples"] = n_triples;
  cfg["seed"] = seed;
  emit_config(out_dir, cfg);

  DatasetPtr ds = open_dataset(data_dir, CHARTLOC_DATASET_EVALUATION);
  double rate = 0.0;
  check(chartloc_power_distance_check(ds.get(), margin_db, n_triples, seed, &rate),
        "power-distance check");

  json rj;
  rj["margin_db"] = margin_db;
  rj["n_triples"] = n_triples;
  rj["satisfied_rate"] = rate;
  write_text_file(fs::path(out_dir) / "power_check.json", rj.dump(2) + "\n");
  std::printf("power-distance satisfied rate: %.4f (margin %.2f dB, %" PRIu64
              " triples)\n",
              rate, margin_db, n_triples);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"chartloc: self-supervised channel-charting localization toolkit"};
  app.require_subcommand(1);

  // simulate
  std::string sim_scene, sim_cfg, sim_out;
  std::int64_t train_steps = 5000, test_steps = 2000;
  std::uint64_t train_seed = 42, test_seed = 7;
  std::optional<std::uint64_t> master_seed;
  auto* simulate = app.add_subcommand(
      "simulate", "Synthesize train/test datasets from a scene config");
  simulate->add_option("--scene", sim_scene, "Scene JSON (default: 20x15 m, 2 TRPs)");
  simulate->add_option("--sim", sim_cfg, "Simulation parameter JSON");
  simulate->add_option("--train-steps", train_steps, "Training trajectory length");
  simulate->add_option("--test-steps", test_steps, "Test trajectory length (0: skip)");
  simulate->add_option("--train-seed", train_seed, "Training split seed");
  simulate->add_option("--test-seed", test_seed, "Test split seed");
  simulate->add_option("--seed", master_seed,
                       "Master seed (sets train seed, test seed = seed + 1)");
  simulate->add_option("--out", sim_out, "Output directory")->required();

  // train
  std::string train_data, train_cfg_path, train_out, train_variant;
  std::optional<double> train_lambda, train_lr;
  std::optional<int> train_epochs, train_window, train_batch, train_pairs;
  std::optional<std::uint64_t> train_seed_flag;
  auto* train = app.add_subcommand("train", "Train the chart model on a dataset");
  train->add_option("--data", train_data, "Training dataset directory")->required();
  train->add_option("--config", train_cfg_path, "Training config JSON");
  train->add_option("--epochs", train_epochs, "Override epochs");
  train->add_option("--pairs-per-epoch", train_pairs, "Override pairs per epoch");
  train->add_option("--batch-size", train_batch, "Override batch size");
  train->add_option("--lr", train_lr, "Override learning rate");
  train->add_option("--lambda", train_lambda, "Laser loss weight (0 disables)");
  train->add_option("--window", train_window, "Laser pair window in steps");
  train->add_option("--variant", train_variant,
                    "Loss variant: split_toa | pair_toa | hinge");
  train->add_option("--seed", train_seed_flag, "Training seed");
  train->add_option("--out", train_out, "Output directory")->required();

  // estimate-offset
  std::string off_model, off_data, off_cfg, off_out;
  std::optional<std::uint64_t> off_seed;
  auto* offset = app.add_subcommand("estimate-offset",
                                    "Estimate the constant chart offset via PSO");
  offset->add_option("--model", off_model, "Model file")->required();
  offset->add_option("--data", off_data, "Training dataset directory")->required();
  offset->add_option("--config", off_cfg, "PSO config JSON");
  offset->add_option("--seed", off_seed, "PSO seed");
  offset->add_option("--out", off_out, "Output directory")->required();

  // localize
  std::string loc_model, loc_bias, loc_data, loc_out;
  std::optional<std::uint64_t> loc_seed;
  auto* localize = app.add_subcommand("localize", "Chart positions for a dataset");
  localize->add_option("--model", loc_model, "Model file")->required();
  localize->add_option("--bias", loc_bias, "Bias file (bias.bin); omit for zero");
  localize->add_option("--data", loc_data, "Dataset directory")->required();
  localize->add_option("--seed", loc_seed, "Accepted for uniformity (unused)");
  localize->add_option("--out", loc_out, "Output directory")->required();

  // baseline-tdoa
  std::string base_data, base_cfg, base_out;
  std::optional<std::uint64_t> base_seed;
  auto* baseline = app.add_subcommand(
      "baseline-tdoa", "Classical PSO TDoA baseline (needs >= 3 TRPs)");
  baseline->add_option("--data", base_data, "Dataset directory")->required();
  baseline->add_option("--config", base_cfg, "PSO config JSON");
  baseline->add_option("--seed", base_seed, "PSO seed");
  baseline->add_option("--out", base_out, "Output directory")->required();

  // evaluate
  std::string eval_positions, eval_data, eval_out;
  int eval_k = 0;
  std::optional<std::uint64_t> eval_seed;
  auto* evaluate = app.add_subcommand(
      "evaluate", "Score positions against dataset ground truth");
  evaluate->add_option("--positions", eval_positions, "positions.csv")->required();
  evaluate->add_option("--data", eval_data, "Dataset directory (with ground truth)")
      ->required();
  evaluate->add_option("--k", eval_k, "Neighborhood size (0: 5% of N)");
  evaluate->add_option("--seed", eval_seed, "Accepted for uniformity (unused)");
  evaluate->add_option("--out", eval_out, "Output directory")->required();

  // diagnose-power
  std::string diag_data, diag_out;
  double diag_margin = 0.0;
  std::uint64_t diag_triples = 10000, diag_seed = 1;
  auto* diagnose = app.add_subcommand(
      "diagnose-power", "Power-distance consistency rate of a dataset");
  diagnose->add_option("--data", diag_data, "Dataset directory (with ground truth)")
      ->required();
  diagnose->add_option("--margin", diag_margin, "Required power margin in dB");
  diagnose->add_option("--triples", diag_triples, "Number of sampled triples");
  diagnose->add_option("--seed", diag_seed, "Sampling seed");
  diagnose->add_option("--out", diag_out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed())
      return cmd_simulate(sim_scene, sim_cfg, train_steps, test_steps, train_seed,
                          test_seed, master_seed, sim_out);
    if (train->parsed()) {
      json overrides = json::object();
      if (train_epochs) overrides["epochs"] = *train_epochs;
      if (train_pairs) overrides["pairs_per_epoch"] = *train_pairs;
      if (train_batch) overrides["batch_size"] = *train_batch;
      if (train_lr) overrides["learning_rate"] = *train_lr;
      if (train_lambda) overrides["lambda_value"] = *train_lambda;
      if (train_window) overrides["lambda_window"] = *train_window;
      if (!train_variant.empty()) overrides["loss_variant"] = train_variant;
      if (train_seed_flag) overrides["seed"] = *train_seed_flag;
      return cmd_train(train_data, train_cfg_path, overrides, train_out);
    }
    if (offset->parsed()) {
      json overrides = json::object();
      if (off_seed) overrides["seed"] = *off_seed;
      return cmd_estimate_offset(off_model, off_data, off_cfg, overrides, off_out);
    }
    if (localize->parsed())
      return cmd_localize(loc_model, loc_bias, loc_data, loc_out);
    if (baseline->parsed()) {
      json overrides = json::object();
      if (base_seed) overrides["seed"] = *base_seed;
      return cmd_baseline(base_data, base_cfg, overrides, base_out);
    }
    if (evaluate->parsed())
      return cmd_evaluate(eval_positions, eval_data, eval_k, eval_out);
    if (diagnose->parsed())
      return cmd_diagnose_power(diag_data, diag_margin, diag_triples, diag_seed,
                                diag_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "chartloc: %s\n", e.what());
    return 1;
  }
  return 0;
}
