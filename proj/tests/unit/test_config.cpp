#include <doctest.h>

#include <fstream>

#include "edgenerf/config.hpp"
#include "edgenerf/errors.hpp"
#include "helpers.hpp"

using namespace edgenerf;

TEST_CASE("empty text gives the defaults") {
  const Config c = parse_config("");
  CHECK(c.train.iterations == TrainConfig{}.iterations);
  CHECK(c.train.loss.weights.lambda2 == 0.1);
  CHECK(c.train.loss.weights.tau1 == 1e-4);
  CHECK(c.edges.tau_e == 125.0);
  CHECK(c.edges.canny.sigma == 1.4);
  CHECK(c.eval.ssim.window == 11);
}

TEST_CASE("keys in every section") {
  const Config c = parse_config(R"(
[trainer]
iterations = 7
lr_init = 0.5
seed = 11
stratified = false
deterministic = true
[reg]
lambda2 = 0.25
tau2 = 0.01
reduction = mean
gating = global
[field]
representation = network
resolution = 9 10 11
width = 16
[edges]
method = external
tau_e = 100
sigma = 2.0
[eval]
samples_per_ray = 32
boundary_radius = 3
)");
  CHECK(c.train.iterations == 7);
  CHECK(c.train.lr_init == 0.5);
  CHECK(c.train.seed == 11);
  CHECK(!c.train.stratified);
  CHECK(c.train.deterministic);
  CHECK(c.train.loss.weights.lambda2 == 0.25);
  CHECK(c.train.loss.weights.tau2 == 0.01);
  CHECK(c.train.loss.reduction == PatchReduction::Mean);
  CHECK(c.train.loss.gating == EdgeGating::Global);
  CHECK(c.train.field.representation == Representation::CoordinateNetwork);
  CHECK(c.train.field.resolution == std::array<int, 3>{9, 10, 11});
  CHECK(c.train.field.width == 16);
  CHECK(c.edges.method == EdgeMethod::External);
  CHECK(c.edges.tau_e == 100.0);
  CHECK(c.edges.canny.sigma == 2.0);
  CHECK(c.eval.samples_per_ray == 32);
  CHECK(c.eval.boundary_radius == 3);
  CHECK(parse_config("[field]\nresolution = 33\n").train.field.resolution == std::array<int, 3>{33, 33, 33});
}

TEST_CASE("format_config round trips") {
  Config c;
  c.train.iterations = 123;
  c.train.lr_final = 3.25e-7;
  c.train.loss.weights.lambda3 = 0.3;
  c.train.loss.gating = EdgeGating::Global;
  c.train.field.resolution = {5, 6, 7};
  c.edges.canny.high = 120;
  c.eval.ssim.sigma = 1.25;
  const Config d = parse_config(format_config(c));
  CHECK(format_config(d) == format_config(c));
  CHECK(d.train.lr_final == c.train.lr_final);
  CHECK(d.train.field.resolution == c.train.field.resolution);
}

TEST_CASE("bad configurations are rejected") {
  CHECK_THROWS_AS(parse_config("[trainer]\nlearning_rate = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[optimizer]\nlr = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[trainer]\niterations = many\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[reg]\nreduction = median\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[reg]\nlambda2 = -1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[field]\nresolution = 4 4\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[trainer\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.ini"), ConfigError);
}

TEST_CASE("load_config reads a file") {
  const auto dir = testutil::temp_dir("config");
  std::ofstream(dir / "c.ini") << "[trainer]\niterations = 3\n";
  CHECK(load_config(dir / "c.ini").train.iterations == 3);
}
