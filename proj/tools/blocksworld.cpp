#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <iostream>

#include "blocks/correspond.hpp"
#include "blocks/errors.hpp"
#include "blocks/io.hpp"
#include "blocks/metrics.hpp"
#include "blocks/pipeline.hpp"
#include "blocks/service.hpp"

namespace fs = std::filesystem;
using namespace bw;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

void emit(const Json& report, const std::string& out) {
  if (out.empty()) {
    std::cout << dump_json(report);
  } else {
    write_json(out, report);
  }
}

// Scene B from the command line, or scene A with the edits applied.
Scene edited_scene(const Scene& a, const EditScript& script, const std::string& scene_b) {
  if (!scene_b.empty()) return read_scene(scene_b);
  return apply_edits(a, script);
}

CorrespondenceResult read_corr_dir(const fs::path& dir) {
  return read_correspondence(fs::exists(dir / "reverse" / "coords.pfm") ? dir / "reverse" : dir);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"blocksworld: convex-primitive scene fitting, editing and hint generation"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "Fit convex primitives to a depth map");
  std::string depth_path, camera_path, out_path, report_path;
  FitConfig fit_cfg;
  fit_cmd->add_option("--depth", depth_path, "Depth PFM")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--camera", camera_path, "Camera JSON")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--k", fit_cfg.k, "Primitive count")->capture_default_str();
  fit_cmd->add_option("--steps", fit_cfg.steps, "Optimizer steps")->capture_default_str();
  fit_cmd->add_option("--seed", fit_cfg.seed, "Sampling seed")->capture_default_str();
  fit_cmd->add_option("--lr", fit_cfg.lr, "Adam learning rate")->capture_default_str();
  fit_cmd->add_option("--samples", fit_cfg.samples_per_class, "Samples per class")
      ->capture_default_str();
  fit_cmd->add_option("--out", out_path, "Scene JSON output")->required();
  fit_cmd->add_option("--report", report_path, "FitReport JSON output (default stdout)");

  // render
  auto* render_cmd = app.add_subcommand("render", "Render depth, convex map and points");
  std::string scene_path, out_dir;
  bool previews = false;
  render_cmd->add_option("--scene", scene_path, "Scene JSON")->required()->check(CLI::ExistingFile);
  render_cmd->add_option("--out-dir", out_dir, "Output directory")->required();
  render_cmd->add_flag("--png", previews, "Also write PNG previews");

  // edit
  auto* edit_cmd = app.add_subcommand("edit", "Apply an edit script to a scene");
  std::string edits_path;
  edit_cmd->add_option("--scene", scene_path, "Scene JSON")->required()->check(CLI::ExistingFile);
  edit_cmd->add_option("--edits", edits_path, "Edit JSON")->required()->check(CLI::ExistingFile);
  edit_cmd->add_option("--out", out_path, "Edited scene JSON")->required();

  // correspond
  auto* corr_cmd = app.add_subcommand("correspond", "Point-cloud correspondence of an edit");
  std::string scene_a, scene_b;
  double max_distance = kDefaultMaxDistance;
  bool reverse = false;
  corr_cmd->add_option("--scene-a", scene_a, "Source scene JSON")->required()->check(CLI::ExistingFile);
  corr_cmd->add_option("--scene-b", scene_b, "Edited scene JSON (default: A with edits)")
      ->check(CLI::ExistingFile);
  corr_cmd->add_option("--edits", edits_path, "Edit JSON")->required()->check(CLI::ExistingFile);
  corr_cmd->add_option("--out-dir", out_dir, "Output directory")->required();
  corr_cmd->add_option("--max-distance", max_distance, "Match radius")->capture_default_str();
  corr_cmd->add_flag("--reverse", reverse, "Map source-view pixels to the edited view");

  // hint
  auto* hint_cmd = app.add_subcommand("hint", "Warp a source image into the edited view");
  std::string src_image;
  HintOptions hint_opts;
  hint_cmd->add_option("--src", src_image, "Source PNG")->required()->check(CLI::ExistingFile);
  hint_cmd->add_option("--scene-a", scene_a, "Source scene JSON")->required()->check(CLI::ExistingFile);
  hint_cmd->add_option("--scene-b", scene_b, "Edited scene JSON (default: A with edits)")
      ->check(CLI::ExistingFile);
  hint_cmd->add_option("--edits", edits_path, "Edit JSON")->required()->check(CLI::ExistingFile);
  hint_cmd->add_option("--out-dir", out_dir, "Package directory")->required();
  hint_cmd->add_option("--max-distance", max_distance, "Match radius")->capture_default_str();
  hint_cmd->add_option("--tau", hint_opts.tau, "Mask threshold")->capture_default_str();
  hint_cmd->add_option("--dilate-px", hint_opts.dilate_px, "Mask dilation")->capture_default_str();
  hint_cmd->add_option("--skip-below", hint_opts.skip_below, "Hint confidence floor")
      ->capture_default_str();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluation metrics");
  eval_cmd->require_subcommand(1);
  auto* geo_cmd = eval_cmd->add_subcommand("geometry", "Scale-shift aligned AbsRel");
  std::string pred_path, gt_path;
  geo_cmd->add_option("--pred", pred_path, "Predicted depth PFM")->required()->check(CLI::ExistingFile);
  geo_cmd->add_option("--gt", gt_path, "Reference depth PFM")->required()->check(CLI::ExistingFile);
  geo_cmd->add_option("--out", out_path, "Report JSON (default stdout)");
  auto* tex_cmd = eval_cmd->add_subcommand("texture", "Masked reprojection PSNR and SSIM");
  std::string dst_image, corr_dir;
  tex_cmd->add_option("--src", src_image, "Source-view PNG")->required()->check(CLI::ExistingFile);
  tex_cmd->add_option("--dst", dst_image, "Edited-view PNG")->required()->check(CLI::ExistingFile);
  tex_cmd->add_option("--corr", corr_dir, "Directory holding the source-view correspondence")
      ->required()->check(CLI::ExistingDirectory);
  tex_cmd->add_option("--tau", hint_opts.tau, "Mask threshold")->capture_default_str();
  tex_cmd->add_option("--dilate-px", hint_opts.dilate_px, "Mask dilation")->capture_default_str();
  tex_cmd->add_option("--out", out_path, "Report JSON (default stdout)");

  // pipeline
  auto* pipe_cmd = app.add_subcommand("pipeline", "Run every stage end to end");
  std::string manifest_path;
  PipelineManifest manifest;
  std::string m_scene, m_depth, m_camera, m_gen_image, m_gen_depth;
  std::string m_source, m_edits, m_out;
  pipe_cmd->add_option("--manifest", manifest_path, "Manifest JSON")->check(CLI::ExistingFile);
  pipe_cmd->add_option("--source-image", m_source, "Source PNG");
  pipe_cmd->add_option("--scene", m_scene, "Scene JSON");
  pipe_cmd->add_option("--depth", m_depth, "Depth PFM to fit");
  pipe_cmd->add_option("--camera", m_camera, "Camera JSON for fitting");
  pipe_cmd->add_option("--edits", m_edits, "Edit JSON");
  pipe_cmd->add_option("--out-dir", m_out, "Output directory");
  pipe_cmd->add_option("--generated-image", m_gen_image, "Edited-view PNG to score");
  pipe_cmd->add_option("--generated-depth", m_gen_depth, "Depth estimated for the edited view");
  pipe_cmd->add_option("--k", manifest.k)->capture_default_str();
  pipe_cmd->add_option("--steps", manifest.steps)->capture_default_str();
  pipe_cmd->add_option("--seed", manifest.seed)->capture_default_str();
  pipe_cmd->add_option("--max-distance", manifest.max_distance)->capture_default_str();
  pipe_cmd->add_option("--tau", manifest.tau)->capture_default_str();
  pipe_cmd->add_option("--dilate-px", manifest.dilate_px)->capture_default_str();
  pipe_cmd->add_option("--skip-below", manifest.skip_below)->capture_default_str();

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "HTTP edit service");
  std::string host = "127.0.0.1";
  int port = 8080;
  ServiceOptions service_opts;
  serve_cmd->add_option("--host", host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--port", port, "Port")->capture_default_str();
  serve_cmd->add_option("--preview-max", service_opts.preview_max_side, "Preview longest side")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);

  try {
    if (*fit_cmd) {
      const FitResult r =
          fit_depth(read_pfm(depth_path), camera_from_json(read_json(camera_path)), fit_cfg);
      write_scene(out_path, r.scene);
      emit(fit_report_to_json(r.report), report_path);
      if (r.report.diverged) throw NumericalError("fit diverged");
    } else if (*render_cmd) {
      const RenderProduct r = render_scene(read_scene(scene_path));
      write_render(out_dir, r);
      if (previews) {
        write_png(fs::path(out_dir) / "depth.png", depth_preview(r.depth));
        write_png(fs::path(out_dir) / "convex.png", convex_preview(r.convex_map));
      }
    } else if (*edit_cmd) {
      write_scene(out_path, apply_edits(read_scene(scene_path),
                                        edits_from_json(read_json(edits_path))));
    } else if (*corr_cmd) {
      const Scene a = read_scene(scene_a);
      const EditScript script = edits_from_json(read_json(edits_path));
      validate_edits(a, script);
      const Scene b = edited_scene(a, script, scene_b);
      const TransformMap transforms = collect_transforms(script);
      const RenderProduct ra = render_scene(a);
      const RenderProduct rb = render_scene(b);
      write_correspondence(out_dir, reverse
                                        ? correspond_reverse(a, transforms, ra, rb, max_distance)
                                        : correspond_edit(a, transforms, ra, rb, max_distance));
    } else if (*hint_cmd) {
      const Scene a = read_scene(scene_a);
      const EditScript script = edits_from_json(read_json(edits_path));
      validate_edits(a, script);
      EditProducts p;
      p.source = a;
      p.edited = edited_scene(a, script, scene_b);
      p.transforms = collect_transforms(script);
      p.src_render = render_scene(p.source);
      p.dst_render = render_scene(p.edited);
      p.corr = correspond_edit(a, p.transforms, p.src_render, p.dst_render, max_distance);
      const HintPackage pkg = hint_from_products(read_png(src_image), p, hint_opts);
      write_hint_package(out_dir, pkg);
      write_correspondence(fs::path(out_dir) / "forward", p.corr);
      write_correspondence(fs::path(out_dir) / "reverse",
                           correspond_reverse(a, p.transforms, p.src_render, p.dst_render,
                                              max_distance));
    } else if (*geo_cmd) {
      const DepthMap pred = read_pfm(pred_path);
      const DepthMap gt = read_pfm(gt_path);
      const BinaryMask valid = depth_valid_mask(pred, gt);
      emit(alignment_to_json(align_depth(pred, gt, valid), absrel(pred, gt, valid)), out_path);
    } else if (*tex_cmd) {
      const CorrespondenceResult corr = read_corr_dir(corr_dir);
      const ConfidenceMask mask = process_mask(corr.confidence, hint_opts.tau, hint_opts.dilate_px);
      emit(texture_report_to_json(
               reprojection_report(read_png(src_image), read_png(dst_image), corr, mask)),
           out_path);
    } else if (*pipe_cmd) {
      PipelineManifest m = manifest;
      if (!manifest_path.empty()) {
        m = manifest_from_json(read_json(manifest_path), fs::path(manifest_path).parent_path());
      } else {
        if (m_source.empty() || m_edits.empty() || m_out.empty()) {
          throw ValidationError("pipeline needs --manifest or --source-image, --edits and --out-dir");
        }
        m.source_image = m_source;
        m.edits = m_edits;
        m.output_dir = m_out;
        if (!m_scene.empty()) m.scene = m_scene;
        if (!m_depth.empty()) m.depth = m_depth;
        if (!m_camera.empty()) m.camera = m_camera;
        if (!m_gen_image.empty()) m.generated_image = m_gen_image;
        if (!m_gen_depth.empty()) m.generated_depth = m_gen_depth;
      }
      const PipelineResult r = run_pipeline(m);
      Json summary = {{"schema_version", kSchemaVersion},
                      {"run_dir", r.run_dir.string()},
                      {"input_hash", r.input_hash},
                      {"geometry", r.geometry_report}};
      if (r.texture_report) summary["texture"] = *r.texture_report;
      emit(summary, "");
    } else if (*serve_cmd) {
      serve(host, port, service_opts);
    }
  } catch (const ValidationError& e) {
    spdlog::error("{}", e.what());
    return kExitValidation;
  } catch (const fs::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return kExitValidation;
  } catch (const NumericalError& e) {
    spdlog::error("{}", e.what());
    return kExitNumerical;
  }
  return 0;
}
