#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "meshforge/codec.hpp"
#include "meshforge/meshkit.hpp"
#include "meshforge/watertight.hpp"

namespace meshforge {

/// Invalid configuration, unreadable inputs or an unwritable output
/// directory. The CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Stage { kFilter, kNormalize, kWatertight, kExtractCheck, kSample, kTokenize };
inline constexpr std::size_t kStageCount = 6;
inline constexpr std::array<Stage, kStageCount> kStages{Stage::kFilter,       Stage::kNormalize,
                                                         Stage::kWatertight,   Stage::kExtractCheck,
                                                         Stage::kSample,       Stage::kTokenize};

/// "filter", "normalize", "watertight", "extract_check", "sample", "tokenize".
const char* stage_name(Stage stage);

struct SampleSettings {
  std::size_t space = 500000;
  std::size_t surface = 500000;
  std::size_t near_surface = 500000;
  double near_bias = 0.01;
};

struct PipelineConfig {
  /// OBJ files. Directories in the config are expanded to their *.obj
  /// entries (sorted, not recursive).
  std::vector<std::filesystem::path> inputs;
  std::filesystem::path output_dir;
  std::array<bool, kStageCount> enabled{true, true, true, true, true, true};
  FilterRules filter;
  WatertightConfig watertight;
  SampleSettings sample;
  CodecConfig codec;
  std::uint64_t seed = 0;
  /// Assets processed concurrently.
  std::size_t workers = 1;

  /// Parses the config document. Relative paths resolve against
  /// `base_dir`. MESHFORGE_WORKERS, when set, overrides "workers".
  /// Throws ConfigError on unknown keys, wrong types or invalid values.
  static PipelineConfig from_json(std::string_view text, const std::filesystem::path& base_dir);
  static PipelineConfig load(const std::filesystem::path& path);

  /// Throws ConfigError unless every input exists and workers >= 1.
  void validate() const;
};

enum class StageStatus { kPending, kDone, kFailed, kSkipped };
const char* status_name(StageStatus status);

struct Artifact {
  std::string path;  // relative to the output directory
  std::string sha256;
  friend bool operator==(const Artifact&, const Artifact&) = default;
};

struct StageRecord {
  StageStatus status = StageStatus::kPending;
  std::string reason;
  /// Hash of the asset, the seed and the settings of this stage and all
  /// earlier ones. A stored record is reused only when it matches.
  std::string fingerprint;
  std::vector<Artifact> outputs;
  nlohmann::json stats = nlohmann::json::object();
  friend bool operator==(const StageRecord&, const StageRecord&) = default;
};

struct ManifestEntry {
  std::string id;  // SHA-256 of the input bytes
  std::vector<std::string> sources;
  std::array<StageRecord, kStageCount> stages;

  bool failed() const;
  bool finished() const;  // no stage pending
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// Corpus manifest, {"schema": 1, "assets": [...]}. Contains no timestamps,
/// so equal runs serialize to equal bytes.
struct Manifest {
  static constexpr int kSchema = 1;
  std::vector<ManifestEntry> assets;

  std::string to_json() const;
  /// Throws std::runtime_error on malformed documents or another schema.
  static Manifest parse(std::string_view text);
  const ManifestEntry* find(std::string_view id) const;
};

struct RunResult {
  Manifest manifest;
  /// 0 when every asset finished without a failed stage, 1 otherwise.
  int exit_code = 0;
  /// Stages executed in this run, as opposed to reused from the manifest.
  std::size_t stages_executed = 0;
};

/// Runs every asset through the enabled stages in order. A failing stage
/// marks the asset failed and skips its later stages; other assets are not
/// affected. The manifest (output_dir/manifest.json) is rewritten atomically
/// after each asset, and only when its bytes change. Stages already done
/// with the same fingerprint and intact outputs are not executed again.
/// Throws ConfigError for startup problems.
RunResult run_pipeline(const PipelineConfig& cfg);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);

}  // namespace meshforge
