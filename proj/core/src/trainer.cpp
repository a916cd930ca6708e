#include "edgenerf/trainer.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "edgenerf/config.hpp"
#include "edgenerf/errors.hpp"

namespace edgenerf {
namespace {

namespace fs = std::filesystem;

constexpr char kStateMagic[4] = {'E', 'S', 'T', 'A'};
constexpr std::uint32_t kStateVersion = 1;

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw IoError("train state: unexpected end of file");
  return value;
}

void write_doubles(std::ostream& out, const std::vector<double>& v) {
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> read_doubles(std::istream& in, std::size_t n) {
  std::vector<double> v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw IoError("train state: unexpected end of file");
  return v;
}

std::string format_record(long iteration, const LossBreakdown& l, double lr, double wall_ms) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%ld %.17g %.17g %.17g %.17g %.17g %.3f", iteration, l.color, l.depth, l.normal,
                l.total, lr, wall_ms);
  return buf;
}

// Keeps the header and records up to `iteration` of an existing log.
std::vector<std::string> truncated_log(const fs::path& path, long iteration) {
  std::vector<std::string> lines;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      lines.push_back(line);
      continue;
    }
    if (std::stol(line) <= iteration) lines.push_back(line);
  }
  if (lines.empty() || lines.front() != kMetricsHeader) lines.insert(lines.begin(), kMetricsHeader);
  return lines;
}

void check_finite(const StepReport& r, const std::vector<double>& grad) {
  const std::pair<double, const char*> terms[] = {
      {r.loss.color, "L_c"}, {r.loss.depth, "L_z"}, {r.loss.normal, "L_n"}, {r.loss.total, "L"}};
  for (const auto& [value, name] : terms) {
    if (!std::isfinite(value)) {
      throw NumericalError("non-finite loss term " + std::string(name) + " at iteration " +
                               std::to_string(r.iteration),
                           r.iteration, name);
    }
  }
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) {
      throw NumericalError("non-finite gradient (parameter " + std::to_string(i) + ") at iteration " +
                               std::to_string(r.iteration),
                           r.iteration, "gradient");
    }
  }
}

}  // namespace

FieldParams FieldConfig::initialize(const Aabb& bounds) const {
  if (representation == Representation::VoxelGrid) {
    return FieldParams::voxel_grid({resolution, bounds}, raw_density, raw_color);
  }
  return FieldParams::network({hidden_layers, width, position_frequencies, direction_frequencies, bounds}, init_seed,
                              raw_density);
}

void TrainConfig::validate() const {
  if (iterations < 0) throw ConfigError("trainer.iterations must be >= 0");
  if (!(lr_init >= 0.0) || !(lr_final >= 0.0)) throw ConfigError("learning rates must be non-negative");
  if (lr_init > 0.0 && !(lr_final > 0.0)) throw ConfigError("trainer.lr_final must be positive when lr_init is");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("trainer.epsilon must be positive");
  if (!(density_lr_scale > 0.0)) throw ConfigError("trainer.density_lr_scale must be positive");
  if (patches < 1) throw ConfigError("trainer.patches must be >= 1");
  if (samples_per_ray < 2) throw ConfigError("trainer.samples_per_ray must be >= 2");
  if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0)) throw ConfigError("trainer.warmup_fraction must be in [0, 1]");
  if (log_every < 1) throw ConfigError("trainer.log_every must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("trainer.checkpoint_every must be >= 0");
  if (workers < 1) throw ConfigError("trainer.workers must be >= 1");
  try {
    loss.weights.validate();
  } catch (const InputDomainError& e) {
    throw ConfigError(e.what());
  }
  for (int r : field.resolution) {
    if (r < 2) throw ConfigError("field.resolution must be >= 2 along every axis");
  }
  if (field.hidden_layers < 1 || field.width < 1 || field.position_frequencies < 0 || field.direction_frequencies < 0) {
    throw ConfigError("invalid network layout");
  }
}

double TrainConfig::learning_rate(long iteration) const {
  if (lr_init == 0.0) return 0.0;
  const double progress = iterations > 0 ? static_cast<double>(iteration) / static_cast<double>(iterations) : 0.0;
  return lr_init * std::pow(lr_final / lr_init, std::clamp(progress, 0.0, 1.0));
}

LossWeights TrainConfig::weights_at(long iteration) const {
  LossWeights w = loss.weights;
  const double ramp_length = warmup_fraction * static_cast<double>(iterations);
  if (ramp_length > 0.0) {
    const double ramp = std::min(1.0, static_cast<double>(iteration + 1) / ramp_length);
    w.lambda2 *= ramp;
    w.lambda3 *= ramp;
  }
  return w;
}

TrainState TrainState::fresh(FieldParams params, std::uint64_t seed) {
  const std::size_t p = params.size();
  return TrainState{std::move(params), std::vector<double>(p, 0.0), std::vector<double>(p, 0.0), 0, seed};
}

void TrainState::validate() const {
  if (m.size() != params.size() || v.size() != params.size()) throw ConfigError("train state: moment size mismatch");
  if (iteration < 0) throw ConfigError("train state: negative iteration");
}

TrainingData prepare_training_data(Dataset dataset, const EdgeConfig& config) {
  if (dataset.train.empty()) throw ConfigError("dataset has no training views");
  TrainingData data;
  data.views = dataset.train;
  for (int view : data.views) {
    const RgbImage& img = dataset.images.at(view);
    if (config.method == EdgeMethod::External) {
      if (!dataset.has_edge_maps) throw ConfigError("edges.method = external but the dataset has no edges/ directory");
      data.edges.push_back(load_external_edge_map(dataset.edge_map_path(view), config.tau_e,
                                                  std::pair{img.width(), img.height()}));
    } else {
      data.edges.push_back(compute_edge_indicator(img, config));
    }
  }
  data.dataset = std::move(dataset);
  return data;
}

PatchBatch assemble_batch(const TrainingData& data, const TrainConfig& config, const Aabb& bounds, Rng& rng) {
  PatchBatch batch;
  batch.patches = sample_patches(data.edges, config.patches, rng);
  const std::size_t rays = 4 * batch.patches.size();
  batch.rays.reserve(rays);
  batch.samples.reserve(rays);
  batch.target.reserve(rays);
  for (const PixelPatch& patch : batch.patches) {
    const int view = data.views[patch.image_index];
    const Camera& camera = data.dataset.cameras[view];
    const RgbImage& image = data.dataset.images[view];
    for (const PixelCoord& px : patch.pixels) {
      const Ray ray = pixel_to_ray(camera, px.x, px.y);
      const auto clipped = clip_to_box(ray, bounds);
      if (clipped) {
        batch.rays.push_back(*clipped);
        batch.samples.push_back(sample_ray(*clipped, config.samples_per_ray, rng, config.stratified));
      } else {
        // Same draw budget as a hit so the stream does not depend on geometry.
        if (config.stratified)
          for (int k = 0; k < config.samples_per_ray; ++k) rng();
        batch.rays.push_back(ray);
        batch.samples.emplace_back();
      }
      batch.target.push_back(image(px.x, px.y));
    }
  }
  return batch;
}

void adam_update(TrainState& state, std::span<const double> grad, const TrainConfig& config, double lr) {
  if (grad.size() != state.params.size()) throw InputDomainError("adam_update: gradient size mismatch");
  const double t = static_cast<double>(state.iteration + 1);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  auto theta = state.params.values();
  const bool grid = state.params.representation() == Representation::VoxelGrid;
  const double density_lr = lr * config.density_lr_scale;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double g = grad[i];
    if (g == 0.0) continue;
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
    const double step = grid && i % 4 == 0 ? density_lr : lr;
    theta[i] -= step * (state.m[i] / c1) / (std::sqrt(state.v[i] / c2) + config.epsilon);
  }
}

StepReport train_step(TrainState& state, const TrainingData& data, const TrainConfig& config) {
  if (data.edges.empty() || data.edges.size() != data.views.size()) {
    throw InputDomainError("train_step: every training image needs an indicator map");
  }
  StepReport report;
  report.iteration = state.iteration;
  Rng rng(iteration_seed(config.seed, static_cast<std::uint64_t>(state.iteration)));
  const PatchBatch batch = assemble_batch(data, config, state.params.bounds(), rng);
  report.draws = rng.draws();

  LossOptions options = config.loss;
  options.weights = config.weights_at(state.iteration);
  std::vector<double> grad(state.params.size(), 0.0);
  const int workers = config.deterministic ? 1 : config.workers;
  report.loss = loss_backward(state.params, batch, options, grad, workers).loss;
  check_finite(report, grad);

  report.lr = config.learning_rate(state.iteration);
  adam_update(state, grad, config, report.lr);
  ++state.iteration;
  return report;
}

void save_train_state(const fs::path& path, const TrainState& state) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(kStateMagic, 4);
  write_le<std::uint32_t>(out, kStateVersion);
  write_le<std::int64_t>(out, state.iteration);
  write_le<std::uint64_t>(out, state.seed);
  write_le<std::uint64_t>(out, state.m.size());
  write_doubles(out, state.m);
  write_doubles(out, state.v);
  if (!out) throw IoError("failed writing " + path.string());
}

TrainState load_train_state(const fs::path& path, FieldParams params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open train state " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kStateMagic, 4) != 0) throw IoError(path.string() + " is not a train state file");
  if (read_le<std::uint32_t>(in) != kStateVersion) throw IoError("unsupported train state version");
  const auto iteration = static_cast<long>(read_le<std::int64_t>(in));
  const auto seed = read_le<std::uint64_t>(in);
  const auto p = read_le<std::uint64_t>(in);
  if (p != params.size()) throw ConfigError("train state does not match the checkpoint's parameter count");
  auto m = read_doubles(in, p);
  auto v = read_doubles(in, p);
  TrainState state{std::move(params), std::move(m), std::move(v), iteration, seed};
  state.validate();
  return state;
}

std::string checkpoint_name(long iteration) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "checkpoint_%06ld.efld", iteration);
  return buf;
}

std::string state_name(long iteration) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "state_%06ld.bin", iteration);
  return buf;
}

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

TrainingRun::TrainingRun(const TrainConfig& config, const EdgeConfig& edges, const fs::path& data_dir,
                         const fs::path& out_dir, const TrainOptions& options)
    : config_(config), options_(options), out_dir_(out_dir) {
  config_.validate();
  Dataset dataset;
  try {
    dataset = load_dataset(data_dir);
  } catch (const IoError& e) {
    throw ConfigError(std::string("cannot read dataset: ") + e.what());
  } catch (const InputDomainError& e) {
    throw ConfigError(std::string("invalid dataset: ") + e.what());
  }
  data_ = prepare_training_data(std::move(dataset), edges);
  const Aabb bounds = data_.dataset.bounds;

  const bool resume = !options.resume_checkpoint.empty();
  state_ = [&] {
    if (!resume) return TrainState::fresh(config_.field.initialize(bounds), config_.seed);
    FieldParams params = load_checkpoint(options.resume_checkpoint);
    if (!params.bounds().lo.isApprox(bounds.lo) || !params.bounds().hi.isApprox(bounds.hi)) {
      throw ConfigError("resume checkpoint bounds differ from the dataset bounds");
    }
    if (options.resume_state.empty()) throw ConfigError("resuming needs the matching state file");
    TrainState s = load_train_state(options.resume_state, std::move(params));
    if (s.seed != config_.seed) throw ConfigError("resume state was written with a different seed");
    return s;
  }();
  if (state_.iteration > config_.iterations) throw ConfigError("resume point lies beyond trainer.iterations");

  fs::create_directories(out_dir_);
  {
    std::ofstream cfg(out_dir_ / "config.ini");
    cfg << format_config(Config{config_, edges, EvalConfig{}});
  }
  const fs::path log_path = out_dir_ / "metrics.log";
  std::vector<std::string> initial_lines = resume && fs::exists(log_path) ? truncated_log(log_path, state_.iteration)
                                                                          : std::vector<std::string>{kMetricsHeader};
  log_.open(log_path, std::ios::trunc);
  if (!log_) throw IoError("cannot write " + log_path.string());
  for (const std::string& line : initial_lines) log_ << line << '\n';
  log_.flush();
  summary_.metrics_log = log_path;
}

bool TrainingRun::done() const { return state_.iteration >= config_.iterations; }

void TrainingRun::step() {
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t gradient_calls_before = density_gradient_evaluations();
  StepReport report;
  try {
    report = train_step(state_, data_, config_);
  } catch (const NumericalError& e) {
    save_checkpoint(out_dir_ / ("failure_" + checkpoint_name(state_.iteration)), state_.params);
    log_ << "# aborted: " << e.what() << '\n';
    log_.flush();
    throw;
  }
  summary_.density_gradient_calls += density_gradient_evaluations() - gradient_calls_before;
  summary_.losses.push_back(report.loss);
  summary_.draws.push_back(report.draws);
  if (options_.on_step) options_.on_step(report);
  const long done = state_.iteration;
  if (done % config_.log_every == 0) {
    const double wall_ms = config_.deterministic ? 0.0 : summary_.train_ms + elapsed_ms(start);
    log_ << format_record(done, report.loss, report.lr, wall_ms) << '\n';
  }
  if (config_.checkpoint_every > 0 && done % config_.checkpoint_every == 0) {
    save_checkpoint(out_dir_ / checkpoint_name(done), state_.params);
    save_train_state(out_dir_ / state_name(done), state_);
  }
  summary_.train_ms += elapsed_ms(start);
}

TrainSummary TrainingRun::finish() {
  log_.close();
  summary_.final_checkpoint = out_dir_ / "final.efld";
  save_checkpoint(summary_.final_checkpoint, state_.params);
  save_train_state(out_dir_ / "final_state.bin", state_);
  summary_.params = std::move(state_.params);
  return std::move(summary_);
}

TrainSummary run_training(const TrainConfig& config, const EdgeConfig& edges, const fs::path& data_dir,
                          const fs::path& out_dir, const TrainOptions& options) {
  TrainingRun run(config, edges, data_dir, out_dir, options);
  while (!run.done()) run.step();
  return run.finish();
}

// ---------------------------------------------------------------------------
// Finite-difference verification

namespace {

struct Instance {
  FieldParams params = FieldParams::voxel_grid({{2, 2, 2}, {}});
  PatchBatch batch;
  LossOptions options;
};

Camera random_camera(Rng& rng, int size) {
  const double azimuth = 2.0 * std::numbers::pi * rng.uniform();
  const double elevation = (-0.6 + 1.2 * rng.uniform());
  const double distance = 2.6 + 0.8 * rng.uniform();
  const Vec3 eye(distance * std::cos(elevation) * std::sin(azimuth), distance * std::sin(elevation),
                 distance * std::cos(elevation) * std::cos(azimuth));
  const Vec3 target(0.3 * (rng.uniform() - 0.5), 0.3 * (rng.uniform() - 0.5), 0.3 * (rng.uniform() - 0.5));
  Camera c;
  c.width = c.height = size;
  c.fx = c.fy = 0.5 * size / std::tan(0.5 * 50.0 * std::numbers::pi / 180.0);
  c.cx = c.cy = 0.5 * size;
  c.pose = look_at(eye, target, Vec3::UnitY());
  c.near = 0.5;
  c.far = 8.0;
  return c;
}

Instance make_instance(const GradcheckConfig& config, int trial) {
  Rng rng(iteration_seed(config.seed, static_cast<std::uint64_t>(trial)));
  Instance inst;
  const Aabb bounds;
  if (config.representation == Representation::VoxelGrid) {
    GridLayout layout{{8 + rng.uniform_index(9), 8 + rng.uniform_index(9), 8 + rng.uniform_index(9)}, bounds};
    inst.params = FieldParams::voxel_grid(layout);
    auto theta = inst.params.values();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const bool density = i % 4 == 0;
      theta[i] = density ? (config.empty_field ? -40.0 : -2.0 + 6.0 * rng.uniform()) : -3.0 + 6.0 * rng.uniform();
    }
  } else {
    NetworkLayout layout{2, 12, 3, 2, bounds};
    inst.params = FieldParams::network(layout, rng(), config.empty_field ? -40.0 : 0.5);
  }

  const int size = 12;
  std::vector<Camera> cameras{random_camera(rng, size), random_camera(rng, size)};
  std::vector<EdgeIndicatorMap> edges;
  for (std::size_t v = 0; v < cameras.size(); ++v) {
    BinaryMap map(size, size);
    for (auto& px : map.pixels()) px = rng.uniform() < 0.75 ? 1 : 0;
    edges.emplace_back(std::move(map));
  }

  const int patches = 1 + rng.uniform_index(8);
  const int samples = 8 + rng.uniform_index(25);
  inst.batch.patches = sample_patches(edges, patches, rng);
  for (const PixelPatch& patch : inst.batch.patches) {
    for (const PixelCoord& px : patch.pixels) {
      const Ray ray = pixel_to_ray(cameras[patch.image_index], px.x, px.y);
      const auto clipped = clip_to_box(ray, bounds);
      inst.batch.rays.push_back(clipped ? *clipped : ray);
      inst.batch.samples.push_back(clipped ? sample_ray(*clipped, samples, rng, true) : RaySamples{});
      inst.batch.target.emplace_back(rng.uniform(), rng.uniform(), rng.uniform());
    }
  }

  LossWeights& w = inst.options.weights;
  w.lambda1 = 1.0;
  w.lambda2 = 0.1 + 0.9 * rng.uniform();
  w.lambda3 = 0.1 + 0.9 * rng.uniform();
  w.tau1 = 0.02 * rng.uniform();
  w.tau2 = 0.02 * rng.uniform();
  inst.options.reduction = rng.uniform() < 0.5 ? PatchReduction::Sum : PatchReduction::Mean;
  inst.options.gating = rng.uniform() < 0.2 ? EdgeGating::Global : EdgeGating::EdgeGuided;
  return inst;
}

std::vector<double> term_gradient(const Instance& inst, double l1, double l2, double l3) {
  LossOptions options = inst.options;
  options.weights.lambda1 = l1;
  options.weights.lambda2 = l2;
  options.weights.lambda3 = l3;
  std::vector<double> grad(inst.params.size(), 0.0);
  loss_backward(inst.params, inst.batch, options, grad);
  return grad;
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// True when some kink argument in `selected` positions (index % 3) moves
// across or near its kink between the three evaluations.
bool near_kink(const std::vector<double>& a0, const std::vector<double>& ap, const std::vector<double>& am,
               double margin, bool depth_terms, bool normal_terms) {
  if (ap.size() != a0.size() || am.size() != a0.size()) return true;
  for (std::size_t j = 0; j < a0.size(); ++j) {
    const bool is_normal = j % 3 == 2;
    if ((is_normal && !normal_terms) || (!is_normal && !depth_terms)) continue;
    if (a0[j] == 0.0 && ap[j] == 0.0 && am[j] == 0.0) continue;
    if (ap[j] == a0[j] && am[j] == a0[j]) continue;
    const double lo = std::min({a0[j], ap[j], am[j]});
    const double hi = std::max({a0[j], ap[j], am[j]});
    if ((lo <= 0.0 && hi >= 0.0) || std::min(std::abs(lo), std::abs(hi)) < margin) return true;
  }
  return false;
}

// ReLU arguments of every network evaluation the batch performs.
std::vector<double> network_kink_arguments(const Instance& inst) {
  std::vector<double> out;
  if (inst.params.representation() != Representation::CoordinateNetwork) return out;
  for (std::size_t r = 0; r < inst.batch.rays.size(); ++r) {
    const Ray& ray = inst.batch.rays[r];
    for (double t : inst.batch.samples[r].t) {
      const auto args = relu_arguments(inst.params, {ray.at(t), ray.direction}, true);
      out.insert(out.end(), args.begin(), args.end());
    }
  }
  return out;
}

void record(TermCheck& check, double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  const double err = denom > 0.0 ? std::abs(analytic - numeric) / denom : 0.0;
  check.max_rel_error = std::max(check.max_rel_error, err);
  ++check.checked;
}

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

GradcheckReport gradcheck(const GradcheckConfig& config) {
  if (config.trials < 1) throw InputDomainError("gradcheck: need at least one trial");
  if (!(config.step > 0.0)) throw InputDomainError("gradcheck: step must be positive");
  const auto start = std::chrono::steady_clock::now();
  GradcheckReport report;
  report.trials = config.trials;
  for (int trial = 0; trial < config.trials; ++trial) {
    Instance inst = make_instance(config, trial);
    const LossWeights& w = inst.options.weights;
    const auto g_color = term_gradient(inst, 1.0, 0.0, 0.0);
    const auto g_depth = term_gradient(inst, 0.0, 1.0, 0.0);
    const auto g_normal = term_gradient(inst, 0.0, 0.0, 1.0);
    const auto g_total = term_gradient(inst, w.lambda1, w.lambda2, w.lambda3);
    report.finite = report.finite && all_finite(g_color) && all_finite(g_depth) && all_finite(g_normal) &&
                    all_finite(g_total);
    report.max_abs_gradient = std::max(report.max_abs_gradient, max_abs(g_total));
    if (config.empty_field) continue;

    const double floor_c = config.denominator_floor * max_abs(g_color);
    const double floor_z = config.denominator_floor * max_abs(g_depth);
    const double floor_n = config.denominator_floor * max_abs(g_normal);
    const double floor_t = config.denominator_floor * max_abs(g_total);

    std::vector<std::size_t> coords;
    std::vector<std::size_t> unused;
    for (std::size_t i = 0; i < g_total.size(); ++i) {
      if (g_color[i] != 0.0 || g_depth[i] != 0.0 || g_normal[i] != 0.0 || g_total[i] != 0.0) {
        coords.push_back(i);
      } else {
        unused.push_back(i);
      }
    }
    Rng pick(iteration_seed(config.seed ^ 0x5eedull, static_cast<std::uint64_t>(trial)));
    for (int n = 0; n < config.unused_coordinates && !unused.empty(); ++n) {
      coords.push_back(unused[pick.uniform_index(static_cast<int>(unused.size()))]);
    }

    const BatchEvaluation base = evaluate_batch(inst.params, inst.batch, inst.options);
    const auto args0 = kink_arguments(base.renders, inst.options);
    const auto relu0 = network_kink_arguments(inst);
    const double h = config.step;
    auto theta = inst.params.values();
    for (std::size_t i : coords) {
      const double saved = theta[i];
      theta[i] = saved + h;
      const BatchEvaluation plus = evaluate_batch(inst.params, inst.batch, inst.options);
      const auto relu_p = network_kink_arguments(inst);
      theta[i] = saved - h;
      const BatchEvaluation minus = evaluate_batch(inst.params, inst.batch, inst.options);
      const auto relu_m = network_kink_arguments(inst);
      theta[i] = saved;
      if (!std::isfinite(plus.loss.total) || !std::isfinite(minus.loss.total)) report.finite = false;
      // A hidden unit crossing its ReLU kink makes every term non-smooth.
      if (near_kink(relu0, relu_p, relu_m, config.kink_margin, true, true)) {
        for (TermCheck* t : {&report.color, &report.depth, &report.normal, &report.total}) ++t->excluded;
        continue;
      }
      const auto args_p = kink_arguments(plus.renders, inst.options);
      const auto args_m = kink_arguments(minus.renders, inst.options);

      const LossBreakdown& p = plus.loss;
      const LossBreakdown& m = minus.loss;
      record(report.color, g_color[i], (p.color - m.color) / (2.0 * h), floor_c);
      if (near_kink(args0, args_p, args_m, config.kink_margin, true, false)) {
        ++report.depth.excluded;
      } else {
        record(report.depth, g_depth[i], (p.depth - m.depth) / (2.0 * h), floor_z);
      }
      if (near_kink(args0, args_p, args_m, config.kink_margin, false, true)) {
        ++report.normal.excluded;
      } else {
        record(report.normal, g_normal[i], (p.normal - m.normal) / (2.0 * h), floor_n);
      }
      if (near_kink(args0, args_p, args_m, config.kink_margin, true, true)) {
        ++report.total.excluded;
      } else {
        record(report.total, g_total[i], (p.total - m.total) / (2.0 * h), floor_t);
      }
    }
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

double GradcheckReport::max_rel_error() const {
  return std::max({color.max_rel_error, depth.max_rel_error, normal.max_rel_error, total.max_rel_error});
}

std::string GradcheckReport::to_text() const {
  std::ostringstream out;
  out.precision(3);
  out << std::scientific;
  out << "trials: " << trials << '\n';
  const std::pair<const char*, const TermCheck*> rows[] = {
      {"L_c", &color}, {"L_z", &depth}, {"L_n", &normal}, {"L", &total}};
  for (const auto& [name, t] : rows) {
    out << name << ": max_rel_error=" << t->max_rel_error << " checked=" << t->checked << " excluded=" << t->excluded
        << '\n';
  }
  out << "max_abs_gradient: " << max_abs_gradient << '\n';
  out << "finite: " << (finite ? "yes" : "no") << '\n';
  out << std::fixed << "seconds: " << seconds << '\n';
  return out.str();
}

}  // namespace edgenerf
