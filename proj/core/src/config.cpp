#include "edgenerf/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "edgenerf/errors.hpp"

namespace edgenerf {
namespace {

namespace pt = boost::property_tree;

using Setter = std::function<void(const std::string&)>;
using SectionTable = std::map<std::string, Setter>;

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  T value{};
  in >> value;
  std::string rest;
  if (in.fail() || (in >> rest)) throw ConfigError("invalid value '" + text + "' for " + key);
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("invalid boolean '" + text + "' for " + key);
}

template <typename T>
Setter number(const std::string& key, T& target) {
  return [key, &target](const std::string& v) { target = parse_number<T>(key, v); };
}

std::map<std::string, SectionTable> make_tables(Config& c) {
  TrainConfig& t = c.train;
  LossOptions& l = t.loss;
  FieldConfig& f = t.field;
  std::map<std::string, SectionTable> tables;
  tables["trainer"] = {
      {"iterations", number("trainer.iterations", t.iterations)},
      {"lr_init", number("trainer.lr_init", t.lr_init)},
      {"lr_final", number("trainer.lr_final", t.lr_final)},
      {"density_lr_scale", number("trainer.density_lr_scale", t.density_lr_scale)},
      {"beta1", number("trainer.beta1", t.beta1)},
      {"beta2", number("trainer.beta2", t.beta2)},
      {"epsilon", number("trainer.epsilon", t.epsilon)},
      {"patches", number("trainer.patches", t.patches)},
      {"samples_per_ray", number("trainer.samples_per_ray", t.samples_per_ray)},
      {"stratified", [&t](const std::string& v) { t.stratified = parse_bool("trainer.stratified", v); }},
      {"seed", number("trainer.seed", t.seed)},
      {"warmup_fraction", number("trainer.warmup_fraction", t.warmup_fraction)},
      {"log_every", number("trainer.log_every", t.log_every)},
      {"checkpoint_every", number("trainer.checkpoint_every", t.checkpoint_every)},
      {"workers", number("trainer.workers", t.workers)},
      {"deterministic", [&t](const std::string& v) { t.deterministic = parse_bool("trainer.deterministic", v); }},
  };
  tables["reg"] = {
      {"lambda1", number("reg.lambda1", l.weights.lambda1)},
      {"lambda2", number("reg.lambda2", l.weights.lambda2)},
      {"lambda3", number("reg.lambda3", l.weights.lambda3)},
      {"tau1", number("reg.tau1", l.weights.tau1)},
      {"tau2", number("reg.tau2", l.weights.tau2)},
      {"reduction",
       [&l](const std::string& v) {
         if (v == "sum") l.reduction = PatchReduction::Sum;
         else if (v == "mean") l.reduction = PatchReduction::Mean;
         else throw ConfigError("reg.reduction must be sum or mean");
       }},
      {"gating",
       [&l](const std::string& v) {
         if (v == "edge") l.gating = EdgeGating::EdgeGuided;
         else if (v == "global") l.gating = EdgeGating::Global;
         else throw ConfigError("reg.gating must be edge or global");
       }},
  };
  tables["field"] = {
      {"representation",
       [&f](const std::string& v) {
         if (v == "grid") f.representation = Representation::VoxelGrid;
         else if (v == "network") f.representation = Representation::CoordinateNetwork;
         else throw ConfigError("field.representation must be grid or network");
       }},
      {"resolution",
       [&f](const std::string& v) {
         std::istringstream in(v);
         std::vector<int> r;
         int x;
         while (in >> x) r.push_back(x);
         if (!in.eof() || (r.size() != 1 && r.size() != 3)) throw ConfigError("field.resolution needs 1 or 3 integers");
         f.resolution = r.size() == 1 ? std::array<int, 3>{r[0], r[0], r[0]} : std::array<int, 3>{r[0], r[1], r[2]};
       }},
      {"raw_density", number("field.raw_density", f.raw_density)},
      {"raw_color", number("field.raw_color", f.raw_color)},
      {"hidden_layers", number("field.hidden_layers", f.hidden_layers)},
      {"width", number("field.width", f.width)},
      {"position_frequencies", number("field.position_frequencies", f.position_frequencies)},
      {"direction_frequencies", number("field.direction_frequencies", f.direction_frequencies)},
      {"init_seed", number("field.init_seed", f.init_seed)},
  };
  tables["edges"] = {
      {"method",
       [&c](const std::string& v) {
         if (v == "canny") c.edges.method = EdgeMethod::Canny;
         else if (v == "external") c.edges.method = EdgeMethod::External;
         else throw ConfigError("edges.method must be canny or external");
       }},
      {"tau_e", number("edges.tau_e", c.edges.tau_e)},
      {"sigma", number("edges.sigma", c.edges.canny.sigma)},
      {"low", number("edges.low", c.edges.canny.low)},
      {"high", number("edges.high", c.edges.canny.high)},
  };
  tables["eval"] = {
      {"samples_per_ray", number("eval.samples_per_ray", c.eval.samples_per_ray)},
      {"discontinuity_fraction", number("eval.discontinuity_fraction", c.eval.discontinuity_fraction)},
      {"boundary_radius", number("eval.boundary_radius", c.eval.boundary_radius)},
      {"ssim_window", number("eval.ssim_window", c.eval.ssim.window)},
      {"ssim_sigma", number("eval.ssim_sigma", c.eval.ssim.sigma)},
      {"ssim_k1", number("eval.ssim_k1", c.eval.ssim.k1)},
      {"ssim_k2", number("eval.ssim_k2", c.eval.ssim.k2)},
  };
  return tables;
}

void validate_eval(const EvalConfig& e) {
  if (e.samples_per_ray < 2) throw ConfigError("eval.samples_per_ray must be >= 2");
  if (!(e.discontinuity_fraction > 0.0)) throw ConfigError("eval.discontinuity_fraction must be positive");
  if (e.boundary_radius < 0) throw ConfigError("eval.boundary_radius must be >= 0");
  if (e.ssim.window < 1 || e.ssim.window % 2 == 0) throw ConfigError("eval.ssim_window must be a positive odd number");
  if (!(e.ssim.sigma > 0.0)) throw ConfigError("eval.ssim_sigma must be positive");
}

const char* name(Representation r) { return r == Representation::VoxelGrid ? "grid" : "network"; }

}  // namespace

Config parse_config(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  Config config;
  auto tables = make_tables(config);
  for (const auto& [section, entries] : tree) {
    const auto table = tables.find(section);
    if (table == tables.end()) throw ConfigError("config: unknown section [" + section + "]");
    if (entries.empty() && !entries.data().empty()) throw ConfigError("config: key '" + section + "' outside a section");
    for (const auto& [key, value] : entries) {
      const auto setter = table->second.find(key);
      if (setter == table->second.end()) throw ConfigError("config: unknown key " + section + "." + key);
      setter->second(value.data());
    }
  }
  config.train.validate();
  validate_eval(config.eval);
  if (config.edges.canny.low > config.edges.canny.high || !(config.edges.canny.low > 0.0)) {
    throw ConfigError("edges: require 0 < low <= high");
  }
  return config;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string format_config(const Config& c) {
  const TrainConfig& t = c.train;
  const LossWeights& w = t.loss.weights;
  const FieldConfig& f = t.field;
  std::ostringstream out;
  out.precision(17);
  out << "[trainer]\n"
      << "iterations = " << t.iterations << '\n'
      << "lr_init = " << t.lr_init << '\n'
      << "lr_final = " << t.lr_final << '\n'
      << "density_lr_scale = " << t.density_lr_scale << '\n'
      << "beta1 = " << t.beta1 << '\n'
      << "beta2 = " << t.beta2 << '\n'
      << "epsilon = " << t.epsilon << '\n'
      << "patches = " << t.patches << '\n'
      << "samples_per_ray = " << t.samples_per_ray << '\n'
      << "stratified = " << (t.stratified ? "true" : "false") << '\n'
      << "seed = " << t.seed << '\n'
      << "warmup_fraction = " << t.warmup_fraction << '\n'
      << "log_every = " << t.log_every << '\n'
      << "checkpoint_every = " << t.checkpoint_every << '\n'
      << "workers = " << t.workers << '\n'
      << "deterministic = " << (t.deterministic ? "true" : "false") << "\n\n";
  out << "[reg]\n"
      << "lambda1 = " << w.lambda1 << '\n'
      << "lambda2 = " << w.lambda2 << '\n'
      << "lambda3 = " << w.lambda3 << '\n'
      << "tau1 = " << w.tau1 << '\n'
      << "tau2 = " << w.tau2 << '\n'
      << "reduction = " << (t.loss.reduction == PatchReduction::Sum ? "sum" : "mean") << '\n'
      << "gating = " << (t.loss.gating == EdgeGating::EdgeGuided ? "edge" : "global") << "\n\n";
  out << "[field]\n"
      << "representation = " << name(f.representation) << '\n'
      << "resolution = " << f.resolution[0] << ' ' << f.resolution[1] << ' ' << f.resolution[2] << '\n'
      << "raw_density = " << f.raw_density << '\n'
      << "raw_color = " << f.raw_color << '\n'
      << "hidden_layers = " << f.hidden_layers << '\n'
      << "width = " << f.width << '\n'
      << "position_frequencies = " << f.position_frequencies << '\n'
      << "direction_frequencies = " << f.direction_frequencies << '\n'
      << "init_seed = " << f.init_seed << "\n\n";
  out << "[edges]\n"
      << "method = " << (c.edges.method == EdgeMethod::Canny ? "canny" : "external") << '\n'
      << "tau_e = " << c.edges.tau_e << '\n'
      << "sigma = " << c.edges.canny.sigma << '\n'
      << "low = " << c.edges.canny.low << '\n'
      << "high = " << c.edges.canny.high << "\n\n";
  out << "[eval]\n"
      << "samples_per_ray = " << c.eval.samples_per_ray << '\n'
      << "discontinuity_fraction = " << c.eval.discontinuity_fraction << '\n'
      << "boundary_radius = " << c.eval.boundary_radius << '\n'
      << "ssim_window = " << c.eval.ssim.window << '\n'
      << "ssim_sigma = " << c.eval.ssim.sigma << '\n'
      << "ssim_k1 = " << c.eval.ssim.k1 << '\n'
      << "ssim_k2 = " << c.eval.ssim.k2 << '\n';
  return out.str();
}

}  // namespace edgenerf
