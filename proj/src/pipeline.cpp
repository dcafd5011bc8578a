#include "meshforge/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "file_util.hpp"
#include "meshforge/isosurface.hpp"
#include "meshforge/sampling.hpp"

namespace meshforge {

namespace fs = std::filesystem;
using nlohmann::json;

const char* stage_name(Stage stage) {
  switch (stage) {
    case Stage::kFilter: return "filter";
    case Stage::kNormalize: return "normalize";
    case Stage::kWatertight: return "watertight";
    case Stage::kExtractCheck: return "extract_check";
    case Stage::kSample: return "sample";
    case Stage::kTokenize: return "tokenize";
  }
  return "?";
}

const char* status_name(StageStatus status) {
  switch (status) {
    case StageStatus::kPending: return "pending";
    case StageStatus::kDone: return "done";
    case StageStatus::kFailed: return "failed";
    case StageStatus::kSkipped: return "skipped";
  }
  return "?";
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(2 * len, '0');
  for (unsigned int i = 0; i < len; ++i) {
    out[2 * i] = kHex[md[i] >> 4];
    out[2 * i + 1] = kHex[md[i] & 15];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Config

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError("unknown key \"" + key + "\" in " + where);
    }
  }
}

void read_unsigned(const json& obj, const char* key, std::size_t& out) {
  if (!obj.contains(key)) return;
  if (!obj[key].is_number_unsigned()) throw ConfigError(std::string(key) + " must be a non-negative integer");
  out = obj[key].get<std::size_t>();
}

void read_int(const json& obj, const char* key, int& out) {
  if (!obj.contains(key)) return;
  if (!obj[key].is_number_integer()) throw ConfigError(std::string(key) + " must be an integer");
  out = obj[key].get<int>();
}

void read_double(const json& obj, const char* key, double& out) {
  if (!obj.contains(key)) return;
  if (!obj[key].is_number()) throw ConfigError(std::string(key) + " must be a number");
  out = obj[key].get<double>();
}

std::vector<fs::path> expand_input(const fs::path& p) {
  std::error_code ec;
  if (!fs::is_directory(p, ec)) return {p};
  std::vector<fs::path> out;
  fs::directory_iterator it(p, ec);
  if (ec) throw ConfigError("cannot read input directory " + p.string() + ": " + ec.message());
  for (const auto& e : it) {
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".obj" && e.is_regular_file()) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

PipelineConfig PipelineConfig::from_json(std::string_view text, const fs::path& base_dir) {
  PipelineConfig cfg;
  try {
    const json j = json::parse(text);
    check_keys(j, {"schema", "inputs", "output_dir", "stages", "filter", "watertight", "sample", "tokenize", "seed",
                   "workers"},
               "config");
    if (j.contains("schema") && j["schema"] != Manifest::kSchema) throw ConfigError("unsupported config schema");

    if (!j.contains("inputs")) throw ConfigError("config needs \"inputs\"");
    std::vector<std::string> inputs;
    if (j["inputs"].is_string()) {
      inputs.push_back(j["inputs"].get<std::string>());
    } else if (j["inputs"].is_array()) {
      for (const auto& v : j["inputs"]) inputs.push_back(v.get<std::string>());
    } else {
      throw ConfigError("inputs must be a path or a list of paths");
    }
    for (const auto& s : inputs) {
      for (auto& p : expand_input((base_dir / s).lexically_normal())) cfg.inputs.push_back(std::move(p));
    }

    if (!j.contains("output_dir") || !j["output_dir"].is_string()) {
      throw ConfigError("config needs \"output_dir\" (string)");
    }
    cfg.output_dir = (base_dir / j["output_dir"].get<std::string>()).lexically_normal();

    if (j.contains("stages")) {
      const json& s = j["stages"];
      check_keys(s, {"filter", "normalize", "watertight", "extract_check", "sample", "tokenize"}, "stages");
      for (std::size_t k = 0; k < kStageCount; ++k) {
        const char* name = stage_name(kStages[k]);
        if (!s.contains(name)) continue;
        if (!s[name].is_boolean()) throw ConfigError(std::string("stages.") + name + " must be a boolean");
        cfg.enabled[k] = s[name].get<bool>();
      }
    }
    if (j.contains("filter")) {
      const json& f = j["filter"];
      check_keys(f, {"min_faces", "max_faces", "max_materials"}, "filter");
      read_unsigned(f, "min_faces", cfg.filter.min_faces);
      read_unsigned(f, "max_faces", cfg.filter.max_faces);
      read_unsigned(f, "max_materials", cfg.filter.max_materials);
    }
    if (j.contains("watertight")) {
      const json& w = j["watertight"];
      check_keys(w, {"views", "depth_resolution", "volume_resolution", "window", "truncation_voxels"},
                 "watertight");
      read_int(w, "views", cfg.watertight.views);
      read_int(w, "depth_resolution", cfg.watertight.depth_resolution);
      read_int(w, "volume_resolution", cfg.watertight.volume_resolution);
      read_int(w, "window", cfg.watertight.window);
      read_double(w, "truncation_voxels", cfg.watertight.truncation_voxels);
    }
    if (j.contains("sample")) {
      const json& s = j["sample"];
      check_keys(s, {"space", "surface", "near_surface", "near_bias"}, "sample");
      read_unsigned(s, "space", cfg.sample.space);
      read_unsigned(s, "surface", cfg.sample.surface);
      read_unsigned(s, "near_surface", cfg.sample.near_surface);
      read_double(s, "near_bias", cfg.sample.near_bias);
    }
    if (j.contains("tokenize")) {
      const json& t = j["tokenize"];
      check_keys(t, {"blocks", "block_size"}, "tokenize");
      std::size_t b = cfg.codec.blocks, o = cfg.codec.block_size;
      read_unsigned(t, "blocks", b);
      read_unsigned(t, "block_size", o);
      if (b > 0xFFFF || o > 0xFFFF) throw ConfigError("tokenize settings out of range");
      cfg.codec.blocks = static_cast<std::uint32_t>(b);
      cfg.codec.block_size = static_cast<std::uint32_t>(o);
    }
    if (j.contains("seed")) {
      if (!j["seed"].is_number_unsigned()) throw ConfigError("seed must be a non-negative integer");
      cfg.seed = j["seed"].get<std::uint64_t>();
    }
    read_unsigned(j, "workers", cfg.workers);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  if (const char* env = std::getenv("MESHFORGE_WORKERS"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1) throw ConfigError("MESHFORGE_WORKERS must be a positive integer");
    cfg.workers = static_cast<std::size_t>(v);
  }
  return cfg;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  std::string text;
  try {
    text = detail::read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return from_json(text, path.parent_path());
}

void PipelineConfig::validate() const {
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (output_dir.empty()) throw ConfigError("output_dir is empty");
  for (const auto& p : inputs) {
    std::error_code ec;
    if (!fs::is_regular_file(p, ec)) throw ConfigError("input not found: " + p.string());
  }
  if (filter.min_faces > filter.max_faces) throw ConfigError("filter.min_faces exceeds filter.max_faces");
  if (!(sample.near_bias > 0.0)) throw ConfigError("sample.near_bias must be positive");
  try {
    watertight.validate();
    codec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

// ---------------------------------------------------------------------------
// Manifest

bool ManifestEntry::failed() const {
  return std::any_of(stages.begin(), stages.end(), [](const StageRecord& r) { return r.status == StageStatus::kFailed; });
}

bool ManifestEntry::finished() const {
  return std::none_of(stages.begin(), stages.end(),
                      [](const StageRecord& r) { return r.status == StageStatus::kPending; });
}

std::string Manifest::to_json() const {
  json assets_json = json::array();
  for (const auto& e : assets) {
    json stages_json = json::object();
    for (std::size_t k = 0; k < kStageCount; ++k) {
      const StageRecord& r = e.stages[k];
      json outputs = json::array();
      for (const auto& a : r.outputs) outputs.push_back({{"path", a.path}, {"sha256", a.sha256}});
      json s = {{"status", status_name(r.status)}, {"fingerprint", r.fingerprint}, {"outputs", outputs}};
      if (!r.reason.empty()) s["reason"] = r.reason;
      if (!r.stats.empty()) s["stats"] = r.stats;
      stages_json[stage_name(kStages[k])] = std::move(s);
    }
    assets_json.push_back({{"id", e.id}, {"sources", e.sources}, {"stages", std::move(stages_json)}});
  }
  const json doc = {{"schema", kSchema}, {"assets", std::move(assets_json)}};
  return doc.dump(2) + "\n";
}

Manifest Manifest::parse(std::string_view text) {
  Manifest m;
  try {
    const json doc = json::parse(text);
    if (doc.at("schema") != kSchema) throw std::runtime_error("manifest schema is not 1");
    for (const auto& a : doc.at("assets")) {
      ManifestEntry e;
      e.id = a.at("id").get<std::string>();
      e.sources = a.at("sources").get<std::vector<std::string>>();
      for (std::size_t k = 0; k < kStageCount; ++k) {
        const json& s = a.at("stages").at(stage_name(kStages[k]));
        StageRecord& r = e.stages[k];
        const std::string status = s.at("status").get<std::string>();
        bool known = false;
        for (auto st : {StageStatus::kPending, StageStatus::kDone, StageStatus::kFailed, StageStatus::kSkipped}) {
          if (status == status_name(st)) {
            r.status = st;
            known = true;
          }
        }
        if (!known) throw std::runtime_error("unknown stage status \"" + status + "\"");
        r.fingerprint = s.at("fingerprint").get<std::string>();
        r.reason = s.value("reason", "");
        for (const auto& o : s.at("outputs")) {
          r.outputs.push_back({o.at("path").get<std::string>(), o.at("sha256").get<std::string>()});
        }
        if (s.contains("stats")) r.stats = s["stats"];
      }
      m.assets.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

const ManifestEntry* Manifest::find(std::string_view id) const {
  for (const auto& e : assets) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// Stages

namespace {

json stage_params(const PipelineConfig& cfg, std::size_t k) {
  json p = {{"enabled", cfg.enabled[k]}};
  switch (kStages[k]) {
    case Stage::kFilter:
      p["min_faces"] = cfg.filter.min_faces;
      p["max_faces"] = cfg.filter.max_faces;
      p["max_materials"] = cfg.filter.max_materials;
      break;
    case Stage::kWatertight:
      p["views"] = cfg.watertight.views;
      p["depth_resolution"] = cfg.watertight.depth_resolution;
      p["volume_resolution"] = cfg.watertight.volume_resolution;
      p["window"] = cfg.watertight.window;
      p["truncation_voxels"] = cfg.watertight.truncation_voxels;
      break;
    case Stage::kSample:
      p["space"] = cfg.sample.space;
      p["surface"] = cfg.sample.surface;
      p["near_surface"] = cfg.sample.near_surface;
      p["near_bias"] = cfg.sample.near_bias;
      break;
    case Stage::kTokenize:
      p["blocks"] = cfg.codec.blocks;
      p["block_size"] = cfg.codec.block_size;
      break;
    case Stage::kNormalize:
    case Stage::kExtractCheck:
      break;
  }
  return p;
}

/// Failure with a short reason for the manifest.
class StageFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A mesh that is either already in memory or loaded on first use from an
/// OBJ file (the input or an earlier stage's output).
class MeshSource {
 public:
  void set_file(fs::path path) {
    path_ = std::move(path);
    mesh_.reset();
  }
  void set_mesh(TriangleMesh mesh) { mesh_ = std::move(mesh); }
  const TriangleMesh& get() {
    if (!mesh_) mesh_ = parse_obj(detail::read_file(path_)).mesh;
    return *mesh_;
  }

 private:
  fs::path path_;
  std::optional<TriangleMesh> mesh_;
};

class AssetRunner {
 public:
  AssetRunner(const PipelineConfig& cfg, std::size_t module_workers, ManifestEntry entry,
               const ManifestEntry* previous)
      : cfg_(cfg), module_workers_(module_workers), entry_(std::move(entry)), previous_(previous) {
    rel_dir_ = "assets/" + entry_.id;
  }

  ManifestEntry run(std::size_t& executed) {
    const fs::path source = entry_.sources.front();
    current_.set_file(source);
    normalized_.set_file(source);
    std::string fingerprint = sha256_hex(entry_.id + "\nseed=" + std::to_string(cfg_.seed));
    std::string failed_stage;
    for (std::size_t k = 0; k < kStageCount; ++k) {
      fingerprint = sha256_hex(fingerprint + "\n" + stage_name(kStages[k]) + stage_params(cfg_, k).dump());
      StageRecord& rec = entry_.stages[k];
      rec = StageRecord{};
      rec.fingerprint = fingerprint;
      if (!failed_stage.empty()) {
        rec.status = StageStatus::kSkipped;
        rec.reason = "after failed " + failed_stage;
        continue;
      }
      if (!cfg_.enabled[k]) {
        rec.status = StageStatus::kSkipped;
        rec.reason = "disabled";
        continue;
      }
      if (previous_ != nullptr && reusable(previous_->stages[k], fingerprint)) {
        rec = previous_->stages[k];
        if (rec.status == StageStatus::kFailed) {
          failed_stage = stage_name(kStages[k]);
        } else {
          adopt_outputs(kStages[k], rec);
        }
        continue;
      }
      ++executed;
      try {
        execute(kStages[k], rec);
        rec.status = StageStatus::kDone;
      } catch (const StageFailure& e) {
        rec.status = StageStatus::kFailed;
        rec.reason = e.what();
      } catch (const std::exception& e) {
        rec.status = StageStatus::kFailed;
        rec.reason = std::string("error: ") + e.what();
      }
      if (rec.status == StageStatus::kFailed) failed_stage = stage_name(kStages[k]);
    }
    return std::move(entry_);
  }

 private:
  bool reusable(const StageRecord& r, const std::string& fingerprint) const {
    if (r.fingerprint != fingerprint) return false;
    if (r.status == StageStatus::kFailed) return true;
    if (r.status != StageStatus::kDone) return false;
    for (const auto& a : r.outputs) {
      std::string bytes;
      try {
        bytes = detail::read_file(cfg_.output_dir / a.path);
      } catch (const std::exception&) {
        return false;
      }
      if (sha256_hex(bytes) != a.sha256) return false;
    }
    return true;
  }

  void adopt_outputs(Stage stage, const StageRecord& r) {
    if (stage == Stage::kNormalize) {
      current_.set_file(cfg_.output_dir / r.outputs.at(0).path);
      normalized_.set_file(cfg_.output_dir / r.outputs.at(0).path);
    } else if (stage == Stage::kWatertight) {
      current_.set_file(cfg_.output_dir / r.outputs.at(0).path);
    }
  }

  void write_artifact(StageRecord& rec, const std::string& name, const std::string& bytes) {
    const std::string rel = rel_dir_ + "/" + name;
    fs::create_directories(cfg_.output_dir / rel_dir_);
    detail::write_file_atomic(cfg_.output_dir / rel, bytes);
    rec.outputs.push_back({rel, sha256_hex(bytes)});
  }

  // Later stages read the mesh back from the written bytes, so a resumed
  // run sees exactly what a fresh run sees.
  TriangleMesh write_mesh(StageRecord& rec, const std::string& name, const TriangleMesh& mesh) {
    const std::string bytes = write_obj(mesh);
    write_artifact(rec, name, bytes);
    return parse_obj(bytes).mesh;
  }

  std::uint64_t derived_seed(const char* what) const {
    const std::string h = sha256_hex(entry_.id + ":" + std::to_string(cfg_.seed) + ":" + what);
    return std::stoull(h.substr(0, 16), nullptr, 16);
  }

  void execute(Stage stage, StageRecord& rec) {
    switch (stage) {
      case Stage::kFilter: return run_filter(rec);
      case Stage::kNormalize: return run_normalize(rec);
      case Stage::kWatertight: return run_watertight(rec);
      case Stage::kExtractCheck: return run_extract_check(rec);
      case Stage::kSample: return run_sample(rec);
      case Stage::kTokenize: return run_tokenize(rec);
    }
  }

  void run_filter(StageRecord& rec) {
    ObjData obj;
    try {
      obj = parse_obj(detail::read_file(entry_.sources.front()));
    } catch (const ObjError& e) {
      throw StageFailure(std::string("parse_error: ") + e.what());
    }
    if (obj.mesh.triangles.empty()) throw StageFailure("face_count=0");
    const MeshStats stats = compute_stats(obj);
    const FilterVerdict verdict = filter_mesh(stats, cfg_.filter);
    rec.stats = {{"mesh", json::parse(stats_to_json(stats))}, {"verdict", json::parse(verdict_to_json(verdict))}};
    if (!verdict.accepted) {
      std::string reason;
      for (const auto& r : verdict.reasons) reason += (reason.empty() ? "" : ";") + r.to_string();
      throw StageFailure(reason);
    }
    current_.set_mesh(obj.mesh);
    normalized_.set_mesh(std::move(obj.mesh));
  }

  void run_normalize(StageRecord& rec) {
    const auto [mesh, transform] = normalize_to_unit_sphere(current_.get());
    TriangleMesh written = write_mesh(rec, "normalized.obj", mesh);
    rec.stats = {{"center", {transform.center.x, transform.center.y, transform.center.z}},
                 {"scale", transform.scale}};
    current_.set_mesh(written);
    normalized_.set_mesh(std::move(written));
  }

  void run_watertight(StageRecord& rec) {
    WatertightConfig wc = cfg_.watertight;
    wc.workers = module_workers_;
    const TriangleMesh mesh = make_watertight(current_.get(), wc);
    if (mesh.triangles.empty()) throw StageFailure("watertight: empty reconstruction");
    TriangleMesh written = write_mesh(rec, "watertight.obj", mesh);
    rec.stats = {{"vertex_count", written.vertices.size()}, {"face_count", written.triangles.size()}};
    current_.set_mesh(std::move(written));
  }

  void run_extract_check(StageRecord& rec) {
    const WatertightReport w = verify_watertight(current_.get());
    rec.stats = {{"is_closed", w.is_closed},
                 {"is_manifold", w.is_manifold},
                 {"boundary_edges", w.boundary_edge_count},
                 {"non_manifold_edges", w.non_manifold_edge_count},
                 {"inconsistent_edges", w.inconsistent_edge_count},
                 {"non_manifold_vertices", w.non_manifold_vertex_count},
                 {"euler_characteristic", w.euler_characteristic},
                 {"components", connected_components(current_.get())}};
    if (!(w.is_closed && w.is_manifold)) {
      throw StageFailure("not_watertight: boundary_edges=" + std::to_string(w.boundary_edge_count) +
                         ";non_manifold_edges=" + std::to_string(w.non_manifold_edge_count) +
                         ";inconsistent_edges=" + std::to_string(w.inconsistent_edge_count) +
                         ";non_manifold_vertices=" + std::to_string(w.non_manifold_vertex_count));
    }
  }

  void run_sample(StageRecord& rec) {
    const TriangleMesh& mesh = current_.get();
    const CurvatureWeights weights = compute_curvature(mesh);
    rec.stats = json::object();
    auto emit = [&](const PointSampleSet& set, const std::string& stem, const CurvatureWeights* w) {
      write_artifact(rec, stem + ".ply", write_ply(set.data));
      write_artifact(rec, stem + ".json", sample_sidecar_json(set, w));
      rec.stats[stem] = {{"n", set.data.points.size()}, {"seed", set.seed}, {"labeled", set.labeled}};
    };
    if (cfg_.sample.space > 0) {
      emit(sample_space(mesh, cfg_.sample.space, derived_seed("space"), module_workers_), "space", nullptr);
    }
    if (cfg_.sample.surface > 0) {
      emit(sample_surface(mesh, weights, cfg_.sample.surface, derived_seed("surface"), module_workers_), "surface",
           &weights);
    }
    if (cfg_.sample.near_surface > 0) {
      emit(sample_near_surface(mesh, cfg_.sample.near_surface, cfg_.sample.near_bias, derived_seed("near_surface"),
                               module_workers_),
           "near_surface", nullptr);
    }
  }

  void run_tokenize(StageRecord& rec) {
    const QuantizedMesh qm = quantize(normalized_.get(), cfg_.codec);
    const TokenSequence ts = encode(qm, cfg_.codec);
    std::ostringstream out;
    write_tokens(out, ts);
    write_artifact(rec, "tokens.p3tk", out.str());
    const TokenStats s = token_stats(ts);
    rec.stats = {{"token_count", s.token_count},
                 {"patch_count", s.patch_count},
                 {"triangle_count", s.triangle_count},
                 {"compression_ratio", s.compression_ratio},
                 {"merged_vertices", qm.merged_vertices},
                 {"dropped_triangles", qm.dropped_triangles}};
  }

  const PipelineConfig& cfg_;
  std::size_t module_workers_;
  ManifestEntry entry_;
  const ManifestEntry* previous_;
  std::string rel_dir_;
  MeshSource current_;
  MeshSource normalized_;  // input of tokenize
};

}  // namespace

RunResult run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  const fs::path manifest_path = cfg.output_dir / "manifest.json";
  try {
    fs::create_directories(cfg.output_dir);
    const fs::path probe = cfg.output_dir / ".write_probe";
    detail::write_file_atomic(probe, "");
    fs::remove(probe);
  } catch (const std::exception& e) {
    throw ConfigError("output directory is not writable: " + cfg.output_dir.string() + " (" + e.what() + ")");
  }

  Manifest previous;
  std::string last_written;
  if (fs::exists(manifest_path)) {
    try {
      last_written = detail::read_file(manifest_path);
      previous = Manifest::parse(last_written);
    } catch (const std::exception& e) {
      std::cerr << "meshforge: ignoring unreadable manifest: " << e.what() << "\n";
      previous = Manifest{};
    }
  }

  // One entry per distinct content, in order of first appearance.
  RunResult result;
  for (const auto& p : cfg.inputs) {
    std::string bytes;
    try {
      bytes = detail::read_file(p);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
    const std::string id = sha256_hex(bytes);
    auto it = std::find_if(result.manifest.assets.begin(), result.manifest.assets.end(),
                           [&](const ManifestEntry& e) { return e.id == id; });
    if (it != result.manifest.assets.end()) {
      it->sources.push_back(p.string());
      continue;
    }
    ManifestEntry e;
    if (const ManifestEntry* old = previous.find(id)) e = *old;
    e.id = id;
    e.sources = {p.string()};
    result.manifest.assets.push_back(std::move(e));
  }

  std::mutex mutex;
  std::exception_ptr error;
  auto flush = [&] {
    const std::string text = result.manifest.to_json();
    if (text == last_written) return;
    detail::write_file_atomic(manifest_path, text);
    last_written = text;
  };

  const std::size_t count = result.manifest.assets.size();
  const std::size_t threads = std::min(cfg.workers, std::max<std::size_t>(count, 1));
  const std::size_t module_workers = threads > 1 ? 1 : 0;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      ManifestEntry entry;
      const ManifestEntry* old = nullptr;
      {
        std::lock_guard lock(mutex);
        entry = result.manifest.assets[i];
        old = previous.find(entry.id);
      }
      std::size_t executed = 0;
      ManifestEntry done = AssetRunner(cfg, module_workers, std::move(entry), old).run(executed);
      std::lock_guard lock(mutex);
      result.manifest.assets[i] = std::move(done);
      result.stages_executed += executed;
      try {
        flush();
      } catch (...) {
        if (!error) error = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  flush();

  result.exit_code = 0;
  for (const auto& e : result.manifest.assets) {
    if (e.failed() || !e.finished()) result.exit_code = 1;
  }
  return result;
}

}  // namespace meshforge
