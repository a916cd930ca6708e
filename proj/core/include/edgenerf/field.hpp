#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "edgenerf/types.hpp"

namespace edgenerf {

enum class Representation : std::uint8_t { VoxelGrid = 0, CoordinateNetwork = 1 };

// Dense grid of vertices spanning `bounds`; each vertex stores
// (raw density, raw r, raw g, raw b).
struct GridLayout {
  std::array<int, 3> resolution{32, 32, 32};
  Aabb bounds;
};

// Fully connected ReLU network on a frequency encoding of the normalized
// position (and optionally the view direction).
struct NetworkLayout {
  int hidden_layers = 4;
  int width = 64;
  int position_frequencies = 6;
  int direction_frequencies = 0;  // 0 disables direction conditioning
  Aabb bounds;
};

inline constexpr double kDefaultRawDensity = -2.0;
inline constexpr double kDefaultRawColor = 0.0;

// Flat parameter vector plus the metadata needed to interpret it.
class FieldParams {
 public:
  static FieldParams voxel_grid(const GridLayout& layout, double raw_density = kDefaultRawDensity,
                                double raw_color = kDefaultRawColor);
  static FieldParams network(const NetworkLayout& layout, std::uint64_t seed,
                             double raw_density_bias = kDefaultRawDensity);

  static std::size_t parameter_count(const GridLayout& layout);
  static std::size_t parameter_count(const NetworkLayout& layout);

  Representation representation() const;
  const Aabb& bounds() const;
  const GridLayout& grid() const { return std::get<GridLayout>(layout_); }
  const NetworkLayout& network() const { return std::get<NetworkLayout>(layout_); }

  std::size_t size() const { return theta_.size(); }
  std::span<double> values() { return theta_; }
  std::span<const double> values() const { return theta_; }

  // Grid only: raw channel `channel` of vertex (i, j, k).
  double& vertex(int i, int j, int k, int channel);
  double vertex(int i, int j, int k, int channel) const;
  std::size_t vertex_offset(int i, int j, int k) const;

  bool operator==(const FieldParams& other) const;

 private:
  FieldParams(std::variant<GridLayout, NetworkLayout> layout, std::vector<double> theta);

  std::variant<GridLayout, NetworkLayout> layout_;
  std::vector<double> theta_;
};

struct FieldQuery {
  Vec3 position = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();
};

struct FieldOutput {
  Vec3 color = Vec3::Zero();
  double density = 0.0;
};

// Co-vector on the field outputs, including the spatial density gradient.
struct FieldUpstream {
  Vec3 color = Vec3::Zero();
  double density = 0.0;
  Vec3 density_gradient = Vec3::Zero();
};

FieldOutput query(const FieldParams& params, const FieldQuery& q);

// Gradient of density with respect to position. Analytic for the grid,
// central differences (step 1e-3 x scene diagonal) for the network.
Vec3 density_spatial_gradient(const FieldParams& params, const Vec3& x);

// Accumulates d(upstream . (c, sigma)) / d(theta) into `grad`.
// upstream = (dc_r, dc_g, dc_b, dsigma).
void query_with_param_gradient(const FieldParams& params, const FieldQuery& q,
                               const std::array<double, 4>& upstream, std::span<double> grad);

// Accumulates d(upstream . grad_x sigma) / d(theta) into `grad`.
void density_gradient_backward(const FieldParams& params, const Vec3& x, const Vec3& upstream,
                               std::span<double> grad);

// Joint forward evaluation; keeps what the matching backward call needs.
struct PointEval {
  FieldOutput output;
  Vec3 density_gradient = Vec3::Zero();
  bool inside = false;
  // grid cache
  std::size_t base = 0;
  Vec3 frac = Vec3::Zero();
  std::array<double, 4> raw{};
  Vec3 raw_density_gradient = Vec3::Zero();
};

PointEval evaluate(const FieldParams& params, const FieldQuery& q, bool with_density_gradient);
void backward(const FieldParams& params, const FieldQuery& q, const PointEval& eval,
              const FieldUpstream& upstream, std::span<double> grad);

// Number of density_spatial_gradient evaluations performed so far (all threads).
std::uint64_t density_gradient_evaluations();

// Hidden-layer ReLU pre-activations at every point a query evaluates,
// including the density-gradient stencil. Empty for the voxel grid.
std::vector<double> relu_arguments(const FieldParams& params, const FieldQuery& q, bool with_density_gradient);

void save_checkpoint(const std::filesystem::path& path, const FieldParams& params);
FieldParams load_checkpoint(const std::filesystem::path& path);

double softplus(double x);
double sigmoid(double x);

}  // namespace edgenerf
