#include "core/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "core/common.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace chartloc {

Eigen::MatrixXd Dataset::feature_matrix(std::int64_t n) const {
  Eigen::MatrixXd y(n_trps, c_bar);
  const float* base = features.data() + n * n_trps * c_bar;
  for (std::int64_t m = 0; m < n_trps; ++m)
    for (std::int64_t c = 0; c < c_bar; ++c) y(m, c) = base[m * c_bar + c];
  return y;
}

Eigen::VectorXd Dataset::toa_vector(std::int64_t n) const {
  Eigen::VectorXd t(n_trps);
  const float* base = toa.data() + n * n_trps;
  for (std::int64_t m = 0; m < n_trps; ++m) t(m) = base[m];
  return t;
}

LaserScan Dataset::laser_scan(std::int64_t n) const {
  LaserScan scan;
  scan.points.reserve(n_beams);
  const float* base = laser.data() + n * n_beams * 2;
  for (std::int64_t k = 0; k < n_beams; ++k)
    scan.points.emplace_back(base[2 * k], base[2 * k + 1]);
  return scan;
}

Vec3 Dataset::true_position(std::int64_t n) const {
  const float* base = ground_truth.data() + n * 3;
  return Vec3(base[0], base[1], base[2]);
}

void Dataset::validate() const {
  require(n_steps >= 1 && n_trps >= 1 && c_bar >= 1, "empty dataset header");
  auto check = [&](const char* name, std::size_t got, std::size_t want) {
    if (got != want)
      fail(ErrorCode::bad_format,
           std::string("array '") + name + "' holds " + std::to_string(got) +
               " elements, manifest implies " + std::to_string(want));
  };
  check("features", features.size(),
        static_cast<std::size_t>(n_steps * n_trps * c_bar));
  check("toa", toa.size(), static_cast<std::size_t>(n_steps * n_trps));
  if (has_laser) check("laser", laser.size(),
                       static_cast<std::size_t>(n_steps * n_beams * 2));
  if (has_ground_truth)
    check("ground_truth", ground_truth.size(),
          static_cast<std::size_t>(n_steps * 3));
  require(static_cast<std::int64_t>(trps.size()) == n_trps,
          "TRP list length disagrees with n_trps", ErrorCode::bad_format);
}

namespace {

constexpr const char* kManifestName = "manifest.json";

void write_f32(const fs::path& path, const std::vector<float>& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!out) fail(ErrorCode::io, "short write to " + path.string());
}

std::vector<float> read_f32(const fs::path& path, const std::string& name,
                            std::size_t want_elems) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) fail(ErrorCode::io, "missing array file " + path.string());
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != want_elems * sizeof(float))
    fail(ErrorCode::bad_format,
         "array '" + name + "': file " + path.filename().string() + " holds " +
             std::to_string(bytes) + " bytes, manifest implies " +
             std::to_string(want_elems * sizeof(float)));
  in.seekg(0);
  std::vector<float> data(want_elems);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(bytes));
  if (!in) fail(ErrorCode::io, "short read from " + path.string());
  return data;
}

json array_entry(const char* file, std::initializer_list<std::int64_t> shape) {
  json j;
  j["file"] = file;
  j["shape"] = shape;
  return j;
}

}  // namespace

void write_dataset(const Dataset& dataset, const std::string& dir) {
  dataset.validate();
  fs::create_directories(dir);
  const fs::path root(dir);

  json m;
  m["format"] = "chartloc-dataset";
  m["version"] = 1;
  m["byte_order"] = "little";
  m["dtype"] = "float32";
  m["n_steps"] = dataset.n_steps;
  m["n_trps"] = dataset.n_trps;
  m["c_bar"] = dataset.c_bar;
  m["n_beams"] = dataset.n_beams;
  m["sample_rate_hz"] = dataset.sample_rate_hz;
  m["dt"] = dataset.dt;
  m["ue_height"] = dataset.ue_height;
  m["has_laser"] = dataset.has_laser;
  m["has_ground_truth"] = dataset.has_ground_truth;
  m["trp_positions"] = json::array();
  for (const Vec3& t : dataset.trps)
    m["trp_positions"].push_back({t.x(), t.y(), t.z()});
  m["arrays"]["features"] =
      array_entry("features.f32", {dataset.n_steps, dataset.n_trps, dataset.c_bar});
  m["arrays"]["toa"] = array_entry("toa.f32", {dataset.n_steps, dataset.n_trps});
  if (dataset.has_laser)
    m["arrays"]["laser"] =
        array_entry("laser.f32", {dataset.n_steps, dataset.n_beams, 2});
  if (dataset.has_ground_truth)
    m["arrays"]["ground_truth"] =
        array_entry("ground_truth.f32", {dataset.n_steps, 3});

  std::ofstream out(root / kManifestName, std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot write manifest in " + dir);
  out << m.dump(2) << "\n";
  out.close();

  write_f32(root / "features.f32", dataset.features);
  write_f32(root / "toa.f32", dataset.toa);
  if (dataset.has_laser) write_f32(root / "laser.f32", dataset.laser);
  if (dataset.has_ground_truth)
    write_f32(root / "ground_truth.f32", dataset.ground_truth);
}

Dataset read_dataset(const std::string& dir, DatasetMode mode) {
  const fs::path root(dir);
  std::ifstream in(root / kManifestName);
  if (!in) fail(ErrorCode::io, "no dataset manifest in " + dir);
  json m;
  try {
    in >> m;
  } catch (const json::exception& e) {
    fail(ErrorCode::bad_format, std::string("manifest: ") + e.what());
  }

  Dataset ds;
  try {
    require(m.at("format") == "chartloc-dataset", "not a chartloc dataset",
            ErrorCode::bad_format);
    require(m.at("version") == 1, "unknown dataset version", ErrorCode::bad_format);
    require(m.at("dtype") == "float32" && m.at("byte_order") == "little",
            "unsupported array encoding", ErrorCode::bad_format);
    ds.n_steps = m.at("n_steps");
    ds.n_trps = m.at("n_trps");
    ds.c_bar = m.at("c_bar");
    ds.n_beams = m.at("n_beams");
    ds.sample_rate_hz = m.at("sample_rate_hz");
    ds.dt = m.at("dt");
    ds.ue_height = m.at("ue_height");
    ds.has_laser = m.at("has_laser");
    ds.has_ground_truth = m.at("has_ground_truth");
    for (const auto& t : m.at("trp_positions"))
      ds.trps.emplace_back(double(t.at(0)), double(t.at(1)), double(t.at(2)));
  } catch (const json::exception& e) {
    fail(ErrorCode::bad_format, std::string("manifest: ") + e.what());
  }

  auto file_of = [&](const char* name) -> std::string {
    return m.at("arrays").at(name).at("file");
  };

  ds.features = read_f32(root / file_of("features"), "features",
                         static_cast<std::size_t>(ds.n_steps * ds.n_trps * ds.c_bar));
  ds.toa = read_f32(root / file_of("toa"), "toa",
                    static_cast<std::size_t>(ds.n_steps * ds.n_trps));
  if (ds.has_laser)
    ds.laser = read_f32(root / file_of("laser"), "laser",
                        static_cast<std::size_t>(ds.n_steps * ds.n_beams * 2));

  if (mode == DatasetMode::training) {
    // Self-supervision contract: the trainer must not see positions.
    ds.has_ground_truth = false;
  } else if (ds.has_ground_truth) {
    ds.ground_truth = read_f32(root / file_of("ground_truth"), "ground_truth",
                               static_cast<std::size_t>(ds.n_steps * 3));
  } else if (mode == DatasetMode::evaluation) {
    fail(ErrorCode::invalid_argument,
         "dataset in " + dir + " has no ground truth; cannot evaluate");
  }

  ds.validate();
  return ds;
}

}  // namespace chartloc
