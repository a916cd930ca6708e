#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "edgenerf/edgemap.hpp"
#include "edgenerf/field.hpp"
#include "edgenerf/reg.hpp"
#include "edgenerf/synthgen.hpp"

namespace edgenerf {

struct FieldConfig {
  Representation representation = Representation::VoxelGrid;
  std::array<int, 3> resolution{65, 65, 65};
  double raw_density = kDefaultRawDensity;
  double raw_color = kDefaultRawColor;
  int hidden_layers = 4;
  int width = 64;
  int position_frequencies = 6;
  int direction_frequencies = 0;
  std::uint64_t init_seed = 1;

  FieldParams initialize(const Aabb& bounds) const;
};

struct TrainConfig {
  long iterations = 5000;
  double lr_init = 2e-3;
  double lr_final = 2e-5;
  // Multiplies the step of grid density channels. An opaque voxel needs a raw
  // density in the hundreds while colours saturate within a few units.
  double density_lr_scale = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int patches = 128;          // M; 4M rays per iteration
  int samples_per_ray = 64;   // K
  bool stratified = true;
  std::uint64_t seed = 0;
  double warmup_fraction = 0.1;  // lambda2/lambda3 ramp from 0 over this share of iterations
  long log_every = 10;
  long checkpoint_every = 0;     // 0 writes only the final checkpoint
  int workers = 1;
  bool deterministic = false;    // pins workers to 1 and zeroes wall_ms in the log
  LossOptions loss;
  FieldConfig field;

  // Throws ConfigError.
  void validate() const;
  // Exponential decay from lr_init at iteration 0 towards lr_final at `iterations`.
  double learning_rate(long iteration) const;
  // Loss weights in effect at `iteration`, with the regularizer warm-up applied.
  LossWeights weights_at(long iteration) const;
};

struct TrainState {
  FieldParams params;
  std::vector<double> m;
  std::vector<double> v;
  long iteration = 0;
  std::uint64_t seed = 0;

  static TrainState fresh(FieldParams params, std::uint64_t seed);
  void validate() const;
};

// Training views with their edge indicators, in dataset.train order.
struct TrainingData {
  Dataset dataset;
  std::vector<EdgeIndicatorMap> edges;
  std::vector<int> views;
};

// Canny indicators from the images, or the dataset's edges/ maps for
// EdgeMethod::External.
TrainingData prepare_training_data(Dataset dataset, const EdgeConfig& config);

struct StepReport {
  long iteration = 0;  // index of the step just taken
  LossBreakdown loss;
  double lr = 0.0;
  std::uint64_t draws = 0;
};

// Builds the ray batch for `iteration` (consumes the iteration's RNG stream).
PatchBatch assemble_batch(const TrainingData& data, const TrainConfig& config, const Aabb& bounds, Rng& rng);

// One optimization step. Throws NumericalError on a non-finite loss or gradient.
StepReport train_step(TrainState& state, const TrainingData& data, const TrainConfig& config);

// Adam with bias correction; coordinates with an exactly zero gradient keep
// their parameter and moments.
void adam_update(TrainState& state, std::span<const double> grad, const TrainConfig& config, double lr);

void save_train_state(const std::filesystem::path& path, const TrainState& state);
// Loads moments and counters; the parameters come from `params`.
TrainState load_train_state(const std::filesystem::path& path, FieldParams params);

struct TrainOptions {
  std::filesystem::path resume_checkpoint;  // empty: start fresh
  std::filesystem::path resume_state;
  std::function<void(const StepReport&)> on_step;
};

struct TrainSummary {
  std::filesystem::path final_checkpoint;
  std::filesystem::path metrics_log;
  std::vector<LossBreakdown> losses;
  std::vector<std::uint64_t> draws;
  double train_ms = 0.0;
  std::uint64_t density_gradient_calls = 0;
  FieldParams params = FieldParams::voxel_grid({{2, 2, 2}, {}});
};

inline constexpr const char* kMetricsHeader = "# iteration L_c L_z L_n L lr wall_ms";

// A training run that can be advanced one iteration at a time. train_ms and
// the logged wall_ms count only the time spent inside step().
class TrainingRun {
 public:
  // Loads the dataset, restores a resume point and opens the metrics log.
  TrainingRun(const TrainConfig& config, const EdgeConfig& edges, const std::filesystem::path& data_dir,
              const std::filesystem::path& out_dir, const TrainOptions& options = {});

  bool done() const;
  // One iteration plus its log record and periodic checkpoint.
  void step();
  // Writes final.efld and final_state.bin. Call once.
  TrainSummary finish();

 private:
  TrainConfig config_;
  TrainOptions options_;
  std::filesystem::path out_dir_;
  TrainingData data_;
  TrainState state_{FieldParams::voxel_grid({{2, 2, 2}, {}}), {}, {}, 0, 0};
  std::ofstream log_;
  TrainSummary summary_;
};

TrainSummary run_training(const TrainConfig& config, const EdgeConfig& edges, const std::filesystem::path& data_dir,
                          const std::filesystem::path& out_dir, const TrainOptions& options = {});

std::string checkpoint_name(long iteration);
std::string state_name(long iteration);

struct GradcheckConfig {
  int trials = 20;
  std::uint64_t seed = 7;
  double step = 1e-6;
  double kink_margin = 1e-6;
  // Relative errors use max(|analytic|, |numeric|, floor * max|gradient|).
  double denominator_floor = 1e-2;
  int unused_coordinates = 64;  // zero-gradient coordinates probed per trial
  Representation representation = Representation::VoxelGrid;
  // All densities ~0. Only finiteness is checked: perturbing a density of
  // ~1e-18 moves the loss below double resolution, so differences are noise.
  bool empty_field = false;
};

struct TermCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t excluded = 0;
};

struct GradcheckReport {
  int trials = 0;
  TermCheck color;
  TermCheck depth;
  TermCheck normal;
  TermCheck total;
  bool finite = true;
  double max_abs_gradient = 0.0;
  double seconds = 0.0;

  double max_rel_error() const;
  std::string to_text() const;
};

GradcheckReport gradcheck(const GradcheckConfig& config);

}  // namespace edgenerf
