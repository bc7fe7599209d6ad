#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chartloc/chartloc.h>

#include <cstring>
#include <filesystem>
#include <json.hpp>
#include <string>

namespace fs = std::filesystem;

namespace {

const char* kScene = R"({
  "room": [[0, 0], [20, 0], [20, 15], [0, 15]],
  "trps": [[2.0, 2.0, 8.0], [18.0, 13.0, 8.0]],
  "ue_height": 1.5,
  "trp_height": 8.0
})";

struct TempDir {
  fs::path path;
  explicit TempDir(const char* tag)
      : path(fs::temp_directory_path() / (std::string("chartloc_capi_") + tag)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("status names and version strings exist") {
  CHECK(std::strlen(chartloc_version()) > 0);
  CHECK(std::string(chartloc_status_name(CHARTLOC_OK)) == "ok");
  CHECK(std::string(chartloc_status_name(CHARTLOC_ERROR_IO)) == "i/o error");
}

TEST_CASE("null arguments are rejected, not crashed on") {
  CHECK(chartloc_scene_parse(nullptr, nullptr) == CHARTLOC_ERROR_INVALID_ARGUMENT);
  CHECK(chartloc_dataset_open(nullptr, CHARTLOC_DATASET_FULL, nullptr) ==
        CHARTLOC_ERROR_INVALID_ARGUMENT);
  CHECK(std::strlen(chartloc_last_error()) > 0);
}

TEST_CASE("bad scene json reports bad format with a message") {
  chartloc_scene* scene = nullptr;
  CHECK(chartloc_scene_parse("{]", &scene) == CHARTLOC_ERROR_BAD_FORMAT);
  CHECK(scene == nullptr);
  CHECK(std::string(chartloc_last_error()).find("scene") != std::string::npos);

  // Valid JSON, invalid geometry (TRP outside).
  CHECK(chartloc_scene_parse(
            R"({"room": [[0,0],[10,0],[10,10],[0,10]], "trps": [[50, 50, 8]]})",
            &scene) == CHARTLOC_ERROR_INVALID_ARGUMENT);
}

TEST_CASE("config resolvers fill defaults and reject unknown keys") {
  char* resolved = nullptr;
  REQUIRE(chartloc_sim_config_resolve("", &resolved) == CHARTLOC_OK);
  auto sim = nlohmann::json::parse(resolved);
  chartloc_string_free(resolved);
  CHECK(sim["channel"]["sample_rate_hz"] == doctest::Approx(122.88e6));
  CHECK(sim["c_bar"] == 49);
  CHECK(sim["laser"]["angular_resolution_deg"] == doctest::Approx(0.6));

  CHECK(chartloc_sim_config_resolve(R"({"chanel": {}})", &resolved) ==
        CHARTLOC_ERROR_BAD_FORMAT);

  REQUIRE(chartloc_train_config_resolve(R"({"epochs": 3})", &resolved) == CHARTLOC_OK);
  auto train = nlohmann::json::parse(resolved);
  chartloc_string_free(resolved);
  CHECK(train["epochs"] == 3);
  CHECK(train["lambda_value"] == doctest::Approx(5.0));
  CHECK(train["lambda_window"] == 500);
  CHECK(train["loss_variant"] == "split_toa");

  REQUIRE(chartloc_pso_config_resolve(nullptr, &resolved) == CHARTLOC_OK);
  auto pso = nlohmann::json::parse(resolved);
  chartloc_string_free(resolved);
  CHECK(pso["swarm_size"] == 100);
  CHECK(pso["iterations"] == 300);
}

TEST_CASE("full pipeline through the shared library") {
  const TempDir tmp("pipeline");
  chartloc_scene* scene = nullptr;
  REQUIRE(chartloc_scene_parse(kScene, &scene) == CHARTLOC_OK);

  char* scene_json = nullptr;
  REQUIRE(chartloc_scene_dump(scene, &scene_json) == CHARTLOC_OK);
  CHECK(nlohmann::json::parse(scene_json)["trps"].size() == 2);
  chartloc_string_free(scene_json);

  chartloc_dataset* train_ds = nullptr;
  REQUIRE(chartloc_simulate(scene, "", 42, 60, &train_ds) == CHARTLOC_OK);

  chartloc_dataset_info info{};
  REQUIRE(chartloc_dataset_info_get(train_ds, &info) == CHARTLOC_OK);
  CHECK(info.n_steps == 60);
  CHECK(info.n_trps == 2);
  CHECK(info.c_bar == 49);
  CHECK(info.has_laser == 1);
  CHECK(info.has_ground_truth == 1);

  const fs::path ds_dir = tmp.path / "train";
  REQUIRE(chartloc_dataset_write(train_ds, ds_dir.string().c_str()) == CHARTLOC_OK);

  // Reopen in training mode: ground truth must be absent.
  chartloc_dataset* reopened = nullptr;
  REQUIRE(chartloc_dataset_open(ds_dir.string().c_str(), CHARTLOC_DATASET_TRAINING,
                                &reopened) == CHARTLOC_OK);
  chartloc_dataset_info info2{};
  REQUIRE(chartloc_dataset_info_get(reopened, &info2) == CHARTLOC_OK);
  CHECK(info2.has_ground_truth == 0);
  double* gt = nullptr;
  size_t n_gt = 0;
  CHECK(chartloc_dataset_ground_truth(reopened, &gt, &n_gt) ==
        CHARTLOC_ERROR_INVALID_ARGUMENT);

  // Tiny training run.
  chartloc_model* model = nullptr;
  double* losses = nullptr;
  size_t n_losses = 0;
  REQUIRE(chartloc_train(
              reopened,
              R"({"epochs": 2, "pairs_per_epoch": 64, "batch_size": 16, "seed": 3})",
              &model, &losses, &n_losses) == CHARTLOC_OK);
  REQUIRE(n_losses == 8);
  CHECK(losses[0] > 0.0);
  chartloc_buffer_free(losses);

  const fs::path model_path = tmp.path / "model.bin";
  REQUIRE(chartloc_model_save(model, model_path.string().c_str()) == CHARTLOC_OK);
  chartloc_model* loaded = nullptr;
  REQUIRE(chartloc_model_load(model_path.string().c_str(), &loaded) == CHARTLOC_OK);

  // Forward a feature row through both copies.
  std::vector<float> feature(2 * 49, 0.05f);
  double out_a[2], out_b[2];
  REQUIRE(chartloc_model_forward(model, feature.data(), feature.size(), out_a) ==
          CHARTLOC_OK);
  REQUIRE(chartloc_model_forward(loaded, feature.data(), feature.size(), out_b) ==
          CHARTLOC_OK);
  CHECK(out_a[0] == out_b[0]);
  CHECK(out_a[1] == out_b[1]);
  CHECK(chartloc_model_forward(model, feature.data(), 10, out_a) ==
        CHARTLOC_ERROR_INVALID_ARGUMENT);

  // Offset, localization, evaluation.
  double bias[3] = {0, 0, 0};
  REQUIRE(chartloc_estimate_bias(model, reopened,
                                 R"({"swarm_size": 30, "iterations": 60})",
                                 bias) == CHARTLOC_OK);
  CHECK(bias[2] == 0.0);

  chartloc_dataset* eval_ds = nullptr;
  REQUIRE(chartloc_dataset_open(ds_dir.string().c_str(), CHARTLOC_DATASET_EVALUATION,
                                &eval_ds) == CHARTLOC_OK);
  double* positions = nullptr;
  size_t n_pos = 0;
  REQUIRE(chartloc_localize(model, eval_ds, bias, &positions, &n_pos) == CHARTLOC_OK);
  REQUIRE(n_pos == 60);
  CHECK(positions[2] == 1.5);  // z pinned to the UE height

  chartloc_report report{};
  double* errors = nullptr;
  REQUIRE(chartloc_evaluate(eval_ds, positions, n_pos, 0, &report, &errors) ==
          CHARTLOC_OK);
  CHECK(report.k_neighbors == 3);
  CHECK(report.ce90 >= 0.0);
  CHECK(errors[0] >= 0.0);
  chartloc_buffer_free(errors);
  chartloc_buffer_free(positions);

  // TDoA baseline needs 3 TRPs.
  double* base_pos = nullptr;
  size_t n_base = 0;
  CHECK(chartloc_tdoa_baseline(eval_ds, "", &base_pos, &n_base) ==
        CHARTLOC_ERROR_INVALID_ARGUMENT);

  double rate = -1.0;
  REQUIRE(chartloc_power_distance_check(eval_ds, 0.0, 2000, 1, &rate) == CHARTLOC_OK);
  CHECK(rate >= 0.0);
  CHECK(rate <= 1.0);

  chartloc_dataset_free(eval_ds);
  chartloc_model_free(loaded);
  chartloc_model_free(model);
  chartloc_dataset_free(reopened);
  chartloc_dataset_free(train_ds);
  chartloc_scene_free(scene);
}

TEST_CASE("simulate is deterministic through the C API") {
  chartloc_scene* scene = nullptr;
  REQUIRE(chartloc_scene_parse(kScene, &scene) == CHARTLOC_OK);
  const TempDir tmp("det");

  for (const char* name : {"a", "b"}) {
    chartloc_dataset* ds = nullptr;
    REQUIRE(chartloc_simulate(scene, "", 7, 30, &ds) == CHARTLOC_OK);
    REQUIRE(chartloc_dataset_write(ds, (tmp.path / name).string().c_str()) ==
            CHARTLOC_OK);
    chartloc_dataset_free(ds);
  }
  for (const char* file :
       {"manifest.json", "features.f32", "toa.f32", "laser.f32", "ground_truth.f32"}) {
    std::ifstream a(tmp.path / "a" / file, std::ios::binary);
    std::ifstream b(tmp.path / "b" / file, std::ios::binary);
    const std::string ba((std::istreambuf_iterator<char>(a)), {});
    const std::string bb((std::istreambuf_iterator<char>(b)), {});
    CHECK(ba == bb);
    CHECK(!ba.empty());
  }
  chartloc_scene_free(scene);
}
