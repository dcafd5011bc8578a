// meshforge command line: thin wrappers over the library modules plus the
// batch pipeline. Exit codes: 0 success, 1 rejected or failed, 2 usage,
// configuration or input errors.

#include <CLI11.hpp>
#include <charconv>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "meshforge/codec.hpp"
#include "meshforge/field.hpp"
#include "meshforge/isosurface.hpp"
#include "meshforge/meshkit.hpp"
#include "meshforge/pipeline.hpp"
#include "meshforge/sampling.hpp"
#include "meshforge/volume.hpp"
#include "meshforge/watertight.hpp"

namespace fs = std::filesystem;
using namespace meshforge;
using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<double> parse_numbers(const std::string& text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find(',', pos), text.size());
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + end, v);
    if (ec != std::errc{} || ptr != text.data() + end) throw UsageError("bad number list \"" + text + "\"");
    out.push_back(v);
    pos = end + 1;
  }
  return out;
}

// sphere:R[,cx,cy,cz] | torus:R,r | volume:path.p3vl
FieldPtr make_field(const std::string& desc) {
  const auto colon = desc.find(':');
  if (colon == std::string::npos) throw UsageError("field must look like kind:parameters, got \"" + desc + "\"");
  const std::string kind = desc.substr(0, colon);
  const std::string rest = desc.substr(colon + 1);
  if (kind == "volume") return grid_field_from_volume(load_volume(rest));
  const std::vector<double> p = parse_numbers(rest);
  if (kind == "sphere" && p.size() == 1) return sphere_field({0, 0, 0}, p[0]);
  if (kind == "sphere" && p.size() == 4) return sphere_field({p[1], p[2], p[3]}, p[0]);
  if (kind == "torus" && p.size() == 2) return torus_field(p[0], p[1]);
  throw UsageError("unknown field \"" + desc + "\"");
}

json vec_json(const Vec3& v) { return {v.x, v.y, v.z}; }

json report_json(const WatertightReport& w) {
  return {{"is_closed", w.is_closed},
          {"is_manifold", w.is_manifold},
          {"boundary_edges", w.boundary_edge_count},
          {"non_manifold_edges", w.non_manifold_edge_count},
          {"euler_characteristic", w.euler_characteristic}};
}

TriangleMesh load_mesh(const fs::path& path, bool normalize) {
  TriangleMesh mesh = load_obj(path).mesh;
  if (normalize) mesh = normalize_to_unit_sphere(mesh).first;
  return mesh;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"meshforge: mesh extraction, tokenization and dataset preprocessing"};
  app.require_subcommand(1);

  // extract
  auto* extract_cmd = app.add_subcommand("extract", "Extract a mesh from an implicit field");
  std::string field_desc, extract_out;
  ExtractionConfig ec;
  std::string refinement = "tracking";
  bool dense = false;
  extract_cmd->add_option("--field", field_desc, "sphere:R[,cx,cy,cz] | torus:R,r | volume:file.p3vl")->required();
  extract_cmd->add_option("--res", ec.final_resolution, "Final resolution D (power of two)")->capture_default_str();
  auto* coarse_opt =
      extract_cmd->add_option("--coarse", ec.coarse_resolution, "Coarse resolution d0 (default min(32, D/4))");
  extract_cmd->add_option("--margin", ec.activity_margin, "Activity margin / Lipschitz bound")->capture_default_str();
  extract_cmd->add_option("--expansion", ec.expansion_radius, "Dilation radius (band refinement)")
      ->capture_default_str();
  extract_cmd->add_option("--refinement", refinement, "tracking | band")
      ->check(CLI::IsMember({"tracking", "band"}))
      ->capture_default_str();
  extract_cmd->add_flag("--dense", dense, "Evaluate every grid vertex");
  extract_cmd->add_option("--workers", ec.workers, "Threads (0 = default)");
  extract_cmd->add_option("output", extract_out, "Output OBJ")->required();

  // tokenize / detokenize
  auto* tokenize_cmd = app.add_subcommand("tokenize", "Encode a normalized OBJ as tokens");
  std::string tok_in, tok_out;
  CodecConfig codec;
  bool tok_normalize = false;
  tokenize_cmd->add_option("input", tok_in, "Input OBJ")->required()->check(CLI::ExistingFile);
  tokenize_cmd->add_option("output", tok_out, "Output token file")->required();
  tokenize_cmd->add_option("--blocks", codec.blocks, "Blocks per axis B")->capture_default_str();
  tokenize_cmd->add_option("--block-size", codec.block_size, "Offsets per block axis O")->capture_default_str();
  tokenize_cmd->add_flag("--normalize", tok_normalize, "Normalize to the unit sphere first");

  auto* detokenize_cmd = app.add_subcommand("detokenize", "Decode a token file to OBJ");
  std::string detok_in, detok_out;
  detokenize_cmd->add_option("input", detok_in, "Token file")->required()->check(CLI::ExistingFile);
  detokenize_cmd->add_option("output", detok_out, "Output OBJ")->required();

  // watertight
  auto* watertight_cmd = app.add_subcommand("watertight", "Rebuild a closed mesh by depth fusion");
  std::string wt_in, wt_out, wt_volume;
  WatertightConfig wc;
  bool wt_normalize = false;
  watertight_cmd->add_option("input", wt_in, "Input OBJ inside the unit sphere")->required()->check(CLI::ExistingFile);
  watertight_cmd->add_option("output", wt_out, "Output OBJ")->required();
  watertight_cmd->add_option("--views", wc.views, "Number of views")->capture_default_str();
  watertight_cmd->add_option("--depth-res", wc.depth_resolution, "Depth map resolution")->capture_default_str();
  watertight_cmd->add_option("--res", wc.volume_resolution, "Volume resolution")->capture_default_str();
  watertight_cmd->add_option("--window", wc.window, "Closing window (odd)")->capture_default_str();
  watertight_cmd->add_option("--truncation", wc.truncation_voxels, "Truncation in voxels")->capture_default_str();
  watertight_cmd->add_option("--workers", wc.workers, "Threads (0 = default)");
  watertight_cmd->add_option("--volume", wt_volume, "Also write the TSDF volume (P3VL)");
  watertight_cmd->add_flag("--normalize", wt_normalize, "Normalize to the unit sphere first");

  // sample
  auto* sample_cmd = app.add_subcommand("sample", "Sample SPACE, SURFACE and NEAR_SURFACE points");
  std::string sample_in, sample_dir;
  std::size_t sample_n = 500000;
  double bias = 0.01;
  std::uint64_t seed = 0;
  std::size_t sample_workers = 0;
  std::vector<std::string> groups{"space", "surface", "near_surface"};
  sample_cmd->add_option("input", sample_in, "Input OBJ")->required()->check(CLI::ExistingFile);
  sample_cmd->add_option("outdir", sample_dir, "Output directory")->required();
  sample_cmd->add_option("--n", sample_n, "Points per group")->capture_default_str()->check(CLI::PositiveNumber);
  sample_cmd->add_option("--bias", bias, "NEAR_SURFACE sigma")->capture_default_str()->check(CLI::PositiveNumber);
  sample_cmd->add_option("--seed", seed, "Random seed")->capture_default_str();
  sample_cmd->add_option("--workers", sample_workers, "Threads (0 = default)");
  sample_cmd->add_option("--groups", groups, "Groups to write")
      ->check(CLI::IsMember({"space", "surface", "near_surface"}))
      ->delimiter(',');

  // normalize / filter / stats
  auto* normalize_cmd = app.add_subcommand("normalize", "Center and scale into the unit sphere");
  std::string norm_in, norm_out;
  normalize_cmd->add_option("input", norm_in, "Input OBJ")->required()->check(CLI::ExistingFile);
  normalize_cmd->add_option("output", norm_out, "Output OBJ")->required();

  auto* filter_cmd = app.add_subcommand("filter", "Check the dataset filter rules");
  std::string filter_in;
  FilterRules rules;
  filter_cmd->add_option("input", filter_in, "Input OBJ")->required()->check(CLI::ExistingFile);
  filter_cmd->add_option("--min-faces", rules.min_faces)->capture_default_str();
  filter_cmd->add_option("--max-faces", rules.max_faces)->capture_default_str();
  filter_cmd->add_option("--max-materials", rules.max_materials)->capture_default_str();

  auto* stats_cmd = app.add_subcommand("stats", "Print mesh statistics");
  std::string stats_in;
  stats_cmd->add_option("input", stats_in, "Input OBJ")->required()->check(CLI::ExistingFile);

  // pipeline
  auto* pipeline_cmd = app.add_subcommand("pipeline", "Run the batch pipeline");
  std::string config_path;
  pipeline_cmd->add_option("--config", config_path, "Pipeline config JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*extract_cmd) {
      if (coarse_opt->count() == 0) ec.coarse_resolution = std::max(1, std::min(32, ec.final_resolution / 4));
      ec.refinement = refinement == "band" ? Refinement::kBand : Refinement::kSurfaceTracking;
      const FieldPtr field = make_field(field_desc);
      ExtractionResult r;
      if (dense) {
        r = extract_dense(*field, ec.final_resolution, ec.bounds, ec.workers);
      } else {
        r = extract(*field, ec);
      }
      save_obj(extract_out, r.mesh);
      json j = json::parse(stats_to_json(r.stats));
      j["vertices"] = r.mesh.vertices.size();
      j["triangles"] = r.mesh.triangles.size();
      if (!r.mesh.triangles.empty()) j["watertight"] = report_json(verify_watertight(r.mesh));
      std::cout << j.dump(2) << "\n";
      return 0;
    }
    if (*tokenize_cmd) {
      codec.validate();
      const TriangleMesh mesh = load_mesh(tok_in, tok_normalize);
      const QuantizedMesh qm = quantize(mesh, codec);
      const TokenSequence ts = encode(qm, codec);
      save_tokens(tok_out, ts);
      const TokenStats s = token_stats(ts);
      std::cout << json{{"token_count", s.token_count},
                        {"patch_count", s.patch_count},
                        {"triangle_count", s.triangle_count},
                        {"mean_patch_size", s.mean_patch_size},
                        {"compression_ratio", s.compression_ratio},
                        {"merged_vertices", qm.merged_vertices},
                        {"dropped_triangles", qm.dropped_triangles}}
                       .dump(2)
                << "\n";
      return 0;
    }
    if (*detokenize_cmd) {
      const TokenSequence ts = load_tokens(detok_in);
      const QuantizedMesh qm = decode(ts);
      save_obj(detok_out, dequantize(qm, ts.config));
      std::cout << json{{"vertices", qm.vertices.size()}, {"triangles", qm.triangles.size()}}.dump(2) << "\n";
      return 0;
    }
    if (*watertight_cmd) {
      wc.validate();
      const TriangleMesh mesh = load_mesh(wt_in, wt_normalize);
      TsdfVolume volume;
      const TriangleMesh out = make_watertight(mesh, wc, wt_volume.empty() ? nullptr : &volume);
      save_obj(wt_out, out);
      if (!wt_volume.empty()) save_volume(wt_volume, volume);
      json j = {{"vertices", out.vertices.size()}, {"triangles", out.triangles.size()}};
      if (!out.triangles.empty()) {
        j["watertight"] = report_json(verify_watertight(out));
        j["components"] = connected_components(out);
      }
      std::cout << j.dump(2) << "\n";
      return 0;
    }
    if (*sample_cmd) {
      const TriangleMesh mesh = load_obj(sample_in).mesh;
      fs::create_directories(sample_dir);
      const CurvatureWeights weights = compute_curvature(mesh);
      json summary = json::object();
      auto emit = [&](const PointSampleSet& set, const std::string& stem, const CurvatureWeights* w) {
        save_ply(fs::path(sample_dir) / (stem + ".ply"), set.data);
        const std::string sidecar = sample_sidecar_json(set, w);
        std::ofstream out(fs::path(sample_dir) / (stem + ".json"), std::ios::binary);
        out << sidecar;
        if (!out) throw std::runtime_error("cannot write sidecar in " + sample_dir);
        summary[stem] = json::parse(sidecar);
      };
      for (const auto& g : groups) {
        if (g == "space") emit(sample_space(mesh, sample_n, seed, sample_workers), g, nullptr);
        if (g == "surface") emit(sample_surface(mesh, weights, sample_n, seed, sample_workers), g, &weights);
        if (g == "near_surface") emit(sample_near_surface(mesh, sample_n, bias, seed, sample_workers), g, nullptr);
      }
      std::cout << summary.dump(2) << "\n";
      return 0;
    }
    if (*normalize_cmd) {
      const auto [mesh, t] = normalize_to_unit_sphere(load_obj(norm_in).mesh);
      save_obj(norm_out, mesh);
      std::cout << json{{"center", vec_json(t.center)}, {"scale", t.scale}}.dump(2) << "\n";
      return 0;
    }
    if (*filter_cmd) {
      const FilterVerdict v = filter_mesh(compute_stats(load_obj(filter_in)), rules);
      std::cout << verdict_to_json(v) << "\n";
      return v.accepted ? 0 : 1;
    }
    if (*stats_cmd) {
      std::cout << stats_to_json(compute_stats(load_obj(stats_in))) << "\n";
      return 0;
    }
    if (*pipeline_cmd) {
      const RunResult r = run_pipeline(PipelineConfig::load(config_path));
      std::size_t done = 0, failed = 0;
      for (const auto& e : r.manifest.assets) {
        if (e.failed()) {
          ++failed;
          for (std::size_t k = 0; k < kStageCount; ++k) {
            if (e.stages[k].status == StageStatus::kFailed) {
              std::cerr << e.sources.front() << ": " << stage_name(kStages[k]) << " failed: " << e.stages[k].reason
                        << "\n";
            }
          }
        } else if (e.finished()) {
          ++done;
        }
      }
      std::cout << json{{"assets", r.manifest.assets.size()},
                        {"done", done},
                        {"failed", failed},
                        {"stages_executed", r.stages_executed}}
                       .dump(2)
                << "\n";
      return r.exit_code;
    }
  } catch (const ConfigError& e) {
    std::cerr << "meshforge: config error: " << e.what() << "\n";
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "meshforge: " << e.what() << "\n" << app.help();
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "meshforge: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
