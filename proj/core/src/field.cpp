#include "edgenerf/field.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <string>

#include "edgenerf/errors.hpp"

namespace edgenerf {
namespace {

constexpr std::uint32_t kCheckpointVersion = 1;
constexpr char kCheckpointMagic[4] = {'E', 'F', 'L', 'D'};

std::atomic<std::uint64_t> g_gradient_evaluations{0};

void validate_bounds(const Aabb& b) {
  if (!((b.hi - b.lo).array() > 0.0).all()) throw InputDomainError("field: bounding box must have positive extent");
}

// ---------------------------------------------------------------------------
// Voxel grid

struct GridCell {
  std::size_t base = 0;  // offset of corner (0,0,0)
  Vec3 frac = Vec3::Zero();
};

struct GridStrides {
  std::size_t x = 4;
  std::size_t y = 0;
  std::size_t z = 0;
};

GridStrides strides(const GridLayout& g) {
  GridStrides s;
  s.y = 4 * static_cast<std::size_t>(g.resolution[0]);
  s.z = s.y * static_cast<std::size_t>(g.resolution[1]);
  return s;
}

Vec3 spacing(const GridLayout& g) {
  const Vec3 e = g.bounds.extent();
  return {e.x() / (g.resolution[0] - 1), e.y() / (g.resolution[1] - 1), e.z() / (g.resolution[2] - 1)};
}

bool locate(const GridLayout& g, const Vec3& x, GridCell& cell) {
  if (!g.bounds.contains(x)) return false;
  const Vec3 h = spacing(g);
  const GridStrides s = strides(g);
  std::array<int, 3> idx{};
  for (int a = 0; a < 3; ++a) {
    const double u = (x[a] - g.bounds.lo[a]) / h[a];
    const int i = std::clamp(static_cast<int>(std::floor(u)), 0, g.resolution[a] - 2);
    idx[a] = i;
    cell.frac[a] = std::clamp(u - i, 0.0, 1.0);
  }
  cell.base = idx[0] * s.x + idx[1] * s.y + idx[2] * s.z;
  return true;
}

// Corner c has offsets (c & 1, (c >> 1) & 1, (c >> 2) & 1).
std::array<std::size_t, 8> corner_offsets(const GridStrides& s) {
  std::array<std::size_t, 8> off{};
  for (int c = 0; c < 8; ++c) off[c] = (c & 1) * s.x + ((c >> 1) & 1) * s.y + ((c >> 2) & 1) * s.z;
  return off;
}

struct CornerWeights {
  std::array<double, 8> w{};
  std::array<Vec3, 8> dw{};  // derivative of w with respect to world position
};

CornerWeights corner_weights(const Vec3& f, const Vec3& h, bool with_derivative) {
  CornerWeights cw;
  for (int c = 0; c < 8; ++c) {
    const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
    const double wx = dx ? f.x() : 1.0 - f.x();
    const double wy = dy ? f.y() : 1.0 - f.y();
    const double wz = dz ? f.z() : 1.0 - f.z();
    cw.w[c] = wx * wy * wz;
    if (with_derivative) {
      cw.dw[c] = Vec3((dx ? 1.0 : -1.0) * wy * wz / h.x(), (dy ? 1.0 : -1.0) * wx * wz / h.y(),
                      (dz ? 1.0 : -1.0) * wx * wy / h.z());
    }
  }
  return cw;
}

PointEval grid_evaluate(const FieldParams& params, const Vec3& x, bool with_gradient) {
  PointEval e;
  const GridLayout& g = params.grid();
  GridCell cell;
  if (!locate(g, x, cell)) return e;
  e.inside = true;
  e.base = cell.base;
  e.frac = cell.frac;
  const auto off = corner_offsets(strides(g));
  const CornerWeights cw = corner_weights(cell.frac, spacing(g), with_gradient);
  const double* theta = params.values().data() + cell.base;
  for (int c = 0; c < 8; ++c) {
    const double* v = theta + off[c];
    for (int ch = 0; ch < 4; ++ch) e.raw[ch] += cw.w[c] * v[ch];
    if (with_gradient) e.raw_density_gradient += cw.dw[c] * v[0];
  }
  e.output.density = softplus(e.raw[0]);
  e.output.color = Vec3(sigmoid(e.raw[1]), sigmoid(e.raw[2]), sigmoid(e.raw[3]));
  if (with_gradient) e.density_gradient = sigmoid(e.raw[0]) * e.raw_density_gradient;
  return e;
}

void grid_backward(const FieldParams& params, const PointEval& e, const FieldUpstream& up, std::span<double> grad) {
  if (!e.inside) return;
  const GridLayout& g = params.grid();
  const bool needs_gradient_path = !up.density_gradient.isZero(0.0);
  const auto off = corner_offsets(strides(g));
  const CornerWeights cw = corner_weights(e.frac, spacing(g), needs_gradient_path);

  // sigma = softplus(r), grad_x sigma = sigmoid(r) * grad_x r
  const double s1 = sigmoid(e.raw[0]);
  double d_raw_density = up.density * s1;
  Vec3 d_raw_gradient = Vec3::Zero();
  if (needs_gradient_path) {
    d_raw_density += up.density_gradient.dot(e.raw_density_gradient) * s1 * (1.0 - s1);
    d_raw_gradient = s1 * up.density_gradient;
  }
  std::array<double, 3> d_raw_color{};
  for (int ch = 0; ch < 3; ++ch) {
    const double s = sigmoid(e.raw[ch + 1]);
    d_raw_color[ch] = up.color[ch] * s * (1.0 - s);
  }
  double* out = grad.data() + e.base;
  for (int c = 0; c < 8; ++c) {
    double* v = out + off[c];
    double dv0 = cw.w[c] * d_raw_density;
    if (needs_gradient_path) dv0 += cw.dw[c].dot(d_raw_gradient);
    v[0] += dv0;
    for (int ch = 0; ch < 3; ++ch) v[ch + 1] += cw.w[c] * d_raw_color[ch];
  }
}

// ---------------------------------------------------------------------------
// Coordinate network

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VecX = Eigen::VectorXd;

int encoded_size(int frequencies) { return 3 + 6 * frequencies; }

int input_size(const NetworkLayout& n) {
  int size = encoded_size(n.position_frequencies);
  if (n.direction_frequencies > 0) size += encoded_size(n.direction_frequencies);
  return size;
}

// (fan_in, fan_out) for every affine layer, output layer last.
std::vector<std::pair<int, int>> layer_shapes(const NetworkLayout& n) {
  std::vector<std::pair<int, int>> shapes;
  int fan_in = input_size(n);
  for (int l = 0; l < n.hidden_layers; ++l) {
    shapes.emplace_back(fan_in, n.width);
    fan_in = n.width;
  }
  shapes.emplace_back(fan_in, 4);
  return shapes;
}

void encode(const Vec3& v, int frequencies, VecX& out, int offset) {
  for (int a = 0; a < 3; ++a) out[offset + a] = v[a];
  int k = offset + 3;
  for (int f = 0; f < frequencies; ++f) {
    const double scale = std::ldexp(std::numbers::pi, f);
    for (int a = 0; a < 3; ++a) {
      out[k++] = std::sin(scale * v[a]);
      out[k++] = std::cos(scale * v[a]);
    }
  }
}

VecX network_input(const NetworkLayout& n, const FieldQuery& q) {
  VecX in(input_size(n));
  const Vec3 p = 2.0 * (q.position - n.bounds.lo).cwiseQuotient(n.bounds.extent()) - Vec3::Ones();
  encode(p, n.position_frequencies, in, 0);
  if (n.direction_frequencies > 0) encode(q.direction, n.direction_frequencies, in, encoded_size(n.position_frequencies));
  return in;
}

struct NetworkTrace {
  std::vector<VecX> activations;  // input, then post-ReLU hidden outputs
  Eigen::Vector4d raw = Eigen::Vector4d::Zero();
};

NetworkTrace network_forward(const FieldParams& params, const FieldQuery& q,
                             std::vector<double>* preactivations = nullptr) {
  const NetworkLayout& n = params.network();
  const auto shapes = layer_shapes(n);
  const double* theta = params.values().data();
  NetworkTrace trace;
  trace.activations.push_back(network_input(n, q));
  std::size_t offset = 0;
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    const auto [fan_in, fan_out] = shapes[l];
    Eigen::Map<const RowMatrix> w(theta + offset, fan_out, fan_in);
    Eigen::Map<const VecX> b(theta + offset + static_cast<std::size_t>(fan_in) * fan_out, fan_out);
    offset += static_cast<std::size_t>(fan_in + 1) * fan_out;
    VecX z = w * trace.activations.back() + b;
    if (l + 1 == shapes.size()) {
      trace.raw = z;
    } else {
      if (preactivations) preactivations->insert(preactivations->end(), z.begin(), z.end());
      trace.activations.push_back(z.cwiseMax(0.0));
    }
  }
  return trace;
}

FieldOutput squash(const Eigen::Vector4d& raw) {
  return {Vec3(sigmoid(raw[1]), sigmoid(raw[2]), sigmoid(raw[3])), softplus(raw[0])};
}

void network_backward_raw(const FieldParams& params, const NetworkTrace& trace, const Eigen::Vector4d& d_raw,
                          std::span<double> grad) {
  const NetworkLayout& n = params.network();
  const auto shapes = layer_shapes(n);
  const double* theta = params.values().data();
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& [fan_in, fan_out] : shapes) {
    offsets.push_back(offset);
    offset += static_cast<std::size_t>(fan_in + 1) * fan_out;
  }
  VecX delta = d_raw;
  for (int l = static_cast<int>(shapes.size()) - 1; l >= 0; --l) {
    const auto [fan_in, fan_out] = shapes[l];
    const VecX& input = trace.activations[l];
    Eigen::Map<RowMatrix> gw(grad.data() + offsets[l], fan_out, fan_in);
    Eigen::Map<VecX> gb(grad.data() + offsets[l] + static_cast<std::size_t>(fan_in) * fan_out, fan_out);
    gw.noalias() += delta * input.transpose();
    gb += delta;
    if (l == 0) break;
    Eigen::Map<const RowMatrix> w(theta + offsets[l], fan_out, fan_in);
    VecX back = w.transpose() * delta;
    // ReLU mask from the stored post-activation values
    delta = back.cwiseProduct((input.array() > 0.0).cast<double>().matrix());
  }
}

double network_density(const FieldParams& params, const Vec3& x) {
  if (!params.bounds().contains(x)) return 0.0;
  return softplus(network_forward(params, {x, Vec3::UnitZ()}).raw[0]);
}

double network_stencil_step(const FieldParams& params) { return 1e-3 * params.bounds().diagonal(); }

Vec3 network_density_gradient(const FieldParams& params, const Vec3& x) {
  const double h = network_stencil_step(params);
  Vec3 g;
  for (int a = 0; a < 3; ++a) {
    Vec3 xp = x, xm = x;
    xp[a] += h;
    xm[a] -= h;
    g[a] = (network_density(params, xp) - network_density(params, xm)) / (2.0 * h);
  }
  return g;
}

void network_density_gradient_backward(const FieldParams& params, const Vec3& x, const Vec3& up,
                                       std::span<double> grad) {
  const double h = network_stencil_step(params);
  for (int a = 0; a < 3; ++a) {
    if (up[a] == 0.0) continue;
    for (int sign : {1, -1}) {
      Vec3 xs = x;
      xs[a] += sign * h;
      if (!params.bounds().contains(xs)) continue;
      const NetworkTrace trace = network_forward(params, {xs, Vec3::UnitZ()});
      Eigen::Vector4d d_raw = Eigen::Vector4d::Zero();
      d_raw[0] = sign * up[a] / (2.0 * h) * sigmoid(trace.raw[0]);
      network_backward_raw(params, trace, d_raw, grad);
    }
  }
}

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw IoError("checkpoint: unexpected end of file");
  return value;
}

void write_box(std::ostream& out, const Aabb& b) {
  for (int a = 0; a < 3; ++a) write_le<double>(out, b.lo[a]);
  for (int a = 0; a < 3; ++a) write_le<double>(out, b.hi[a]);
}

Aabb read_box(std::istream& in) {
  Aabb b;
  for (int a = 0; a < 3; ++a) b.lo[a] = read_le<double>(in);
  for (int a = 0; a < 3; ++a) b.hi[a] = read_le<double>(in);
  return b;
}

}  // namespace

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// ---------------------------------------------------------------------------
// FieldParams

FieldParams::FieldParams(std::variant<GridLayout, NetworkLayout> layout, std::vector<double> theta)
    : layout_(std::move(layout)), theta_(std::move(theta)) {}

std::size_t FieldParams::parameter_count(const GridLayout& g) {
  return 4ull * g.resolution[0] * g.resolution[1] * g.resolution[2];
}

std::size_t FieldParams::parameter_count(const NetworkLayout& n) {
  std::size_t count = 0;
  for (const auto& [fan_in, fan_out] : layer_shapes(n)) count += static_cast<std::size_t>(fan_in + 1) * fan_out;
  return count;
}

FieldParams FieldParams::voxel_grid(const GridLayout& layout, double raw_density, double raw_color) {
  for (int r : layout.resolution) {
    if (r < 2) throw InputDomainError("voxel grid: resolution must be at least 2 per axis");
  }
  validate_bounds(layout.bounds);
  std::vector<double> theta(parameter_count(layout));
  for (std::size_t i = 0; i < theta.size(); i += 4) {
    theta[i] = raw_density;
    theta[i + 1] = theta[i + 2] = theta[i + 3] = raw_color;
  }
  return FieldParams(layout, std::move(theta));
}

FieldParams FieldParams::network(const NetworkLayout& layout, std::uint64_t seed, double raw_density_bias) {
  if (layout.hidden_layers < 1 || layout.width < 1 || layout.position_frequencies < 0 ||
      layout.direction_frequencies < 0) {
    throw InputDomainError("network: invalid layer sizes");
  }
  validate_bounds(layout.bounds);
  std::vector<double> theta(parameter_count(layout), 0.0);
  std::mt19937_64 rng(seed);
  std::size_t offset = 0;
  const auto shapes = layer_shapes(layout);
  for (const auto& [fan_in, fan_out] : shapes) {
    const double s = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-s, s);
    const std::size_t weights = static_cast<std::size_t>(fan_in) * fan_out;
    for (std::size_t i = 0; i < weights; ++i) theta[offset + i] = dist(rng);
    offset += weights + fan_out;
  }
  // bias of the raw density output
  theta[offset - 4] = raw_density_bias;
  return FieldParams(layout, std::move(theta));
}

Representation FieldParams::representation() const {
  return std::holds_alternative<GridLayout>(layout_) ? Representation::VoxelGrid : Representation::CoordinateNetwork;
}

const Aabb& FieldParams::bounds() const {
  return std::visit([](const auto& l) -> const Aabb& { return l.bounds; }, layout_);
}

std::size_t FieldParams::vertex_offset(int i, int j, int k) const {
  const GridStrides s = strides(grid());
  return i * s.x + j * s.y + k * s.z;
}

double& FieldParams::vertex(int i, int j, int k, int channel) { return theta_[vertex_offset(i, j, k) + channel]; }
double FieldParams::vertex(int i, int j, int k, int channel) const { return theta_[vertex_offset(i, j, k) + channel]; }

bool FieldParams::operator==(const FieldParams& other) const {
  if (representation() != other.representation() || theta_ != other.theta_) return false;
  auto same_box = [](const Aabb& a, const Aabb& b) { return a.lo == b.lo && a.hi == b.hi; };
  if (representation() == Representation::VoxelGrid) {
    return grid().resolution == other.grid().resolution && same_box(grid().bounds, other.grid().bounds);
  }
  const auto& a = network();
  const auto& b = other.network();
  return a.hidden_layers == b.hidden_layers && a.width == b.width &&
         a.position_frequencies == b.position_frequencies && a.direction_frequencies == b.direction_frequencies &&
         same_box(a.bounds, b.bounds);
}

// ---------------------------------------------------------------------------
// Queries

PointEval evaluate(const FieldParams& params, const FieldQuery& q, bool with_density_gradient) {
  if (with_density_gradient) g_gradient_evaluations.fetch_add(1, std::memory_order_relaxed);
  if (params.representation() == Representation::VoxelGrid) {
    return grid_evaluate(params, q.position, with_density_gradient);
  }
  PointEval e;
  if (!params.bounds().contains(q.position)) return e;
  e.inside = true;
  const NetworkTrace trace = network_forward(params, q);
  for (int i = 0; i < 4; ++i) e.raw[i] = trace.raw[i];
  e.output = squash(trace.raw);
  if (with_density_gradient) e.density_gradient = network_density_gradient(params, q.position);
  return e;
}

void backward(const FieldParams& params, const FieldQuery& q, const PointEval& e, const FieldUpstream& up,
              std::span<double> grad) {
  if (!e.inside) return;
  if (params.representation() == Representation::VoxelGrid) {
    grid_backward(params, e, up, grad);
    return;
  }
  const NetworkTrace trace = network_forward(params, q);
  Eigen::Vector4d d_raw;
  d_raw[0] = up.density * sigmoid(trace.raw[0]);
  for (int ch = 0; ch < 3; ++ch) {
    const double s = sigmoid(trace.raw[ch + 1]);
    d_raw[ch + 1] = up.color[ch] * s * (1.0 - s);
  }
  if (!d_raw.isZero(0.0)) network_backward_raw(params, trace, d_raw, grad);
  if (!up.density_gradient.isZero(0.0)) network_density_gradient_backward(params, q.position, up.density_gradient, grad);
}

FieldOutput query(const FieldParams& params, const FieldQuery& q) { return evaluate(params, q, false).output; }

Vec3 density_spatial_gradient(const FieldParams& params, const Vec3& x) {
  return evaluate(params, {x, Vec3::UnitZ()}, true).density_gradient;
}

void query_with_param_gradient(const FieldParams& params, const FieldQuery& q, const std::array<double, 4>& upstream,
                               std::span<double> grad) {
  const PointEval e = evaluate(params, q, false);
  FieldUpstream up;
  up.color = Vec3(upstream[0], upstream[1], upstream[2]);
  up.density = upstream[3];
  backward(params, q, e, up, grad);
}

void density_gradient_backward(const FieldParams& params, const Vec3& x, const Vec3& upstream,
                               std::span<double> grad) {
  const FieldQuery q{x, Vec3::UnitZ()};
  const PointEval e = evaluate(params, q, true);
  FieldUpstream up;
  up.density_gradient = upstream;
  backward(params, q, e, up, grad);
}

std::uint64_t density_gradient_evaluations() { return g_gradient_evaluations.load(std::memory_order_relaxed); }

std::vector<double> relu_arguments(const FieldParams& params, const FieldQuery& q, bool with_density_gradient) {
  std::vector<double> out;
  if (params.representation() != Representation::CoordinateNetwork) return out;
  if (params.bounds().contains(q.position)) network_forward(params, q, &out);
  if (!with_density_gradient) return out;
  const double h = network_stencil_step(params);
  for (int a = 0; a < 3; ++a) {
    for (int sign : {1, -1}) {
      Vec3 xs = q.position;
      xs[a] += sign * h;
      if (params.bounds().contains(xs)) network_forward(params, {xs, Vec3::UnitZ()}, &out);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const std::filesystem::path& path, const FieldParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(kCheckpointMagic, 4);
  write_le<std::uint32_t>(out, kCheckpointVersion);
  write_le<std::uint8_t>(out, static_cast<std::uint8_t>(params.representation()));
  if (params.representation() == Representation::VoxelGrid) {
    for (int r : params.grid().resolution) write_le<std::uint32_t>(out, static_cast<std::uint32_t>(r));
  } else {
    const auto& n = params.network();
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(n.hidden_layers));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(n.width));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(n.position_frequencies));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(n.direction_frequencies));
  }
  write_box(out, params.bounds());
  write_le<std::uint64_t>(out, params.size());
  out.write(reinterpret_cast<const char*>(params.values().data()),
            static_cast<std::streamsize>(params.size() * sizeof(double)));
  if (!out) throw IoError("failed writing " + path.string());
}

FieldParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0) throw IoError(path.string() + " is not a field checkpoint");
  const auto version = read_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
  const auto tag = read_le<std::uint8_t>(in);
  std::optional<FieldParams> params;
  if (tag == static_cast<std::uint8_t>(Representation::VoxelGrid)) {
    GridLayout g;
    for (int& r : g.resolution) r = static_cast<int>(read_le<std::uint32_t>(in));
    g.bounds = read_box(in);
    params = FieldParams::voxel_grid(g);
  } else if (tag == static_cast<std::uint8_t>(Representation::CoordinateNetwork)) {
    NetworkLayout n;
    n.hidden_layers = static_cast<int>(read_le<std::uint32_t>(in));
    n.width = static_cast<int>(read_le<std::uint32_t>(in));
    n.position_frequencies = static_cast<int>(read_le<std::uint32_t>(in));
    n.direction_frequencies = static_cast<int>(read_le<std::uint32_t>(in));
    n.bounds = read_box(in);
    params = FieldParams::network(n, 0);
  } else {
    throw IoError("unknown representation tag " + std::to_string(tag));
  }
  const auto count = read_le<std::uint64_t>(in);
  if (count != params->size()) throw IoError("checkpoint parameter count does not match its metadata");
  in.read(reinterpret_cast<char*>(params->values().data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw IoError("checkpoint: truncated parameter block");
  return *std::move(params);
}

}  // namespace edgenerf
