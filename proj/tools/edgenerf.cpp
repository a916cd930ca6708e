// Command-line driver: gen -> edges -> train -> render -> eval, plus the
// gradient check and the ablation table.

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <iostream>
#include <string>

#include "edgenerf/ablation.hpp"
#include "edgenerf/config.hpp"
#include "edgenerf/edgemap.hpp"
#include "edgenerf/errors.hpp"
#include "edgenerf/eval.hpp"
#include "edgenerf/image_io.hpp"
#include "edgenerf/synthgen.hpp"
#include "edgenerf/trainer.hpp"

namespace fs = std::filesystem;
using namespace edgenerf;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

std::string view_file(int view, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%03d.%s", view, ext);
  return buf;
}

Config config_or_default(const std::string& path) { return path.empty() ? Config{} : load_config(path); }

Camera resolve_pose(const Dataset& dataset, const std::string& pose) {
  if (!pose.empty() && pose.find_first_not_of("0123456789") == std::string::npos) {
    const std::size_t index = std::stoul(pose);
    if (index >= dataset.cameras.size()) throw ConfigError("pose index " + pose + " is out of range");
    return dataset.cameras[index];
  }
  const auto cameras = read_cameras(pose);
  if (cameras.empty()) throw ConfigError("pose file " + pose + " holds no camera");
  return cameras.front();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Edge-guided sparse-view radiance field reconstruction"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Render a synthetic dataset with the analytic tracer");
  std::string gen_out, scene_name = "box";
  RigSpec rig;
  bool gen_edges = false;
  gen->add_option("--out", gen_out, "Output dataset directory")->required();
  gen->add_option("--scene", scene_name, "box | two-object")->capture_default_str();
  gen->add_option("--size", rig.size, "Image width and height")->capture_default_str();
  gen->add_option("--views-train", rig.views_train)->capture_default_str();
  gen->add_option("--views-test", rig.views_test)->capture_default_str();
  gen->add_flag("--edges", gen_edges, "Also write Canny edge maps to edges/");

  // edges
  auto* edges = app.add_subcommand("edges", "Edge maps and indicators for every PNG of a directory");
  std::string edges_input, edges_out, edges_method = "canny";
  EdgeConfig edge_config;
  edges->add_option("--input", edges_input, "Directory of PNGs, or a dataset directory (uses rgb/)")->required();
  edges->add_option("--out", edges_out)->required();
  edges->add_option("--method", edges_method, "canny | external")
      ->check(CLI::IsMember({"canny", "external"}))
      ->capture_default_str();
  edges->add_option("--tau-e", edge_config.tau_e)->capture_default_str();
  edges->add_option("--sigma", edge_config.canny.sigma)->capture_default_str();
  edges->add_option("--low", edge_config.canny.low)->capture_default_str();
  edges->add_option("--high", edge_config.canny.high)->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "Optimize a field on a dataset");
  std::string train_config, train_data, train_out, resume, resume_state;
  std::uint64_t seed = 0;
  long iterations = -1;
  bool deterministic = false;
  train->add_option("--config", train_config)->required();
  train->add_option("--data", train_data)->required();
  train->add_option("--out", train_out)->required();
  auto* seed_opt = train->add_option("--seed", seed);
  train->add_option("--iterations", iterations, "Override trainer.iterations");
  train->add_flag("--deterministic", deterministic, "Single worker, wall_ms logged as 0");
  train->add_option("--resume", resume, "Checkpoint to resume from");
  train->add_option("--resume-state", resume_state, "Optimizer state matching --resume");

  // render
  auto* render_cmd = app.add_subcommand("render", "Render a checkpoint from a dataset or file pose");
  std::string render_ckpt, render_data, render_pose, render_out, render_depth;
  int render_samples = 128;
  render_cmd->add_option("--checkpoint", render_ckpt)->required();
  render_cmd->add_option("--data", render_data, "Dataset providing indexed poses");
  render_cmd->add_option("--pose", render_pose, "Camera index or a cameras.txt-style file")->required();
  render_cmd->add_option("--out", render_out, "Output PNG")->required();
  render_cmd->add_option("--depth", render_depth, "Optional depth PFM");
  render_cmd->add_option("--samples", render_samples)->capture_default_str();

  // eval
  auto* eval = app.add_subcommand("eval", "Render held-out views and compute metrics");
  std::string eval_ckpt, eval_data, eval_out, eval_config, split = "test";
  eval->add_option("--checkpoint", eval_ckpt)->required();
  eval->add_option("--data", eval_data)->required();
  eval->add_option("--out", eval_out)->required();
  eval->add_option("--config", eval_config);
  eval->add_option("--split", split, "test | train | all")->capture_default_str();

  // gradcheck
  auto* grad = app.add_subcommand("gradcheck", "Compare analytic gradients with central differences");
  GradcheckConfig gc;
  bool gc_network = false;
  double tolerance = 1e-5;
  grad->add_option("--trials", gc.trials)->capture_default_str();
  grad->add_option("--seed", gc.seed)->capture_default_str();
  grad->add_option("--step", gc.step, "Central-difference step")->capture_default_str();
  grad->add_option("--tolerance", tolerance)->capture_default_str();
  grad->add_flag("--network", gc_network, "Use the coordinate network instead of the grid");
  grad->add_flag("--empty", gc.empty_field, "Near-zero density everywhere");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Train and evaluate the regularizer ablation rows");
  std::string ablate_config, ablate_data, ablate_out;
  ablate->add_option("--config", ablate_config)->required();
  ablate->add_option("--data", ablate_data)->required();
  ablate->add_option("--out", ablate_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (gen->parsed()) {
      const SyntheticScene scene = scene_by_name(scene_name);
      const Dataset dataset = generate_dataset(scene, rig, gen_out);
      if (gen_edges) {
        fs::create_directories(fs::path(gen_out) / "edges");
        for (std::size_t v = 0; v < dataset.images.size(); ++v) {
          write_png_gray(fs::path(gen_out) / "edges" / view_file(static_cast<int>(v), "png"),
                         canny(to_grayscale(dataset.images[v]), EdgeConfig{}.canny));
        }
      }
      std::cout << "wrote " << dataset.cameras.size() << " views to " << gen_out << '\n';
    } else if (edges->parsed()) {
      fs::path input = edges_input;
      if (fs::is_directory(input / "rgb")) input /= "rgb";
      if (!fs::is_directory(input)) throw ConfigError("edges: " + input.string() + " is not a directory");
      std::vector<fs::path> files;
      for (const auto& entry : fs::directory_iterator(input)) {
        if (entry.path().extension() == ".png") files.push_back(entry.path());
      }
      std::sort(files.begin(), files.end());
      if (files.empty()) throw ConfigError("edges: no PNG files in " + input.string());
      fs::create_directories(fs::path(edges_out) / "edges");
      fs::create_directories(fs::path(edges_out) / "indicator");
      for (const fs::path& file : files) {
        const GrayImage strength = edges_method == "external" ? read_png_gray(file)
                                                                : canny(to_grayscale(read_png_rgb(file)), edge_config.canny);
        const EdgeIndicatorMap e = indicator_from_edge_strength(strength, edge_config.tau_e);
        write_png_gray(fs::path(edges_out) / "edges" / file.filename(), strength);
        write_png_binary(fs::path(edges_out) / "indicator" / file.filename(), e.map());
        std::cout << file.filename().string() << ": " << e.count_non_edge() << " of " << e.map().size()
                  << " pixels non-edge\n";
      }
    } else if (train->parsed()) {
      Config config = load_config(train_config);
      if (*seed_opt) config.train.seed = seed;
      if (iterations >= 0) config.train.iterations = iterations;
      if (deterministic) config.train.deterministic = true;
      TrainOptions options;
      options.resume_checkpoint = resume;
      options.resume_state = resume_state;
      const TrainSummary summary = run_training(config.train, config.edges, train_data, train_out, options);
      std::cout << "final checkpoint: " << summary.final_checkpoint.string() << '\n'
                << "train_ms: " << summary.train_ms << '\n';
      if (!summary.losses.empty()) std::cout << "final loss: " << summary.losses.back().total << '\n';
    } else if (render_cmd->parsed()) {
      const FieldParams params = load_checkpoint(render_ckpt);
      Camera camera;
      if (render_data.empty()) {
        if (render_pose.find_first_not_of("0123456789") == std::string::npos) {
          throw ConfigError("an indexed --pose needs --data");
        }
        camera = read_cameras(render_pose).at(0);
      } else {
        camera = resolve_pose(load_dataset(render_data), render_pose);
      }
      check_field_matches_cameras(params, {camera});
      const FieldView view = render_view(params, camera, render_samples);
      write_png_rgb(render_out, view.color);
      if (!render_depth.empty()) write_pfm(render_depth, view.depth);
    } else if (eval->parsed()) {
      const Config config = config_or_default(eval_config);
      const FieldParams params = load_checkpoint(eval_ckpt);
      const Dataset dataset = load_dataset(eval_data);
      const MetricsReport report = evaluate(params, dataset, split, config.eval, eval_out);
      std::cout << report.to_text();
    } else if (grad->parsed()) {
      if (gc_network) gc.representation = Representation::CoordinateNetwork;
      const GradcheckReport report = gradcheck(gc);
      std::cout << report.to_text();
      if (!report.finite || (!gc.empty_field && report.max_rel_error() >= tolerance)) {
        std::cout << "gradcheck FAILED (tolerance " << tolerance << ")\n";
        return 1;
      }
      std::cout << "gradcheck passed\n";
    } else if (ablate->parsed()) {
      const Config config = load_config(ablate_config);
      const AblationReport report =
          run_ablation(config, ablate_data, ablate_out, default_ablation_rows(config));
      std::cout << report.table();
      if (!report.draws_consistent) return 1;
    }
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure at iteration " << e.iteration() << " (" << e.term() << "): " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InputDomainError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitConfig;
  }
  return 0;
}
