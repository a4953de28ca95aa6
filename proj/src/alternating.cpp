#include "nearps/alternating.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "nearps/errors.hpp"
#include "nearps/parallel.hpp"

namespace nearps {
namespace {

void require_gray(const ImageStack& stack, const char* who) {
  if (stack.channels() != 1) {
    std::ostringstream msg;
    msg << who << ": expects a single-channel stack";
    throw DomainError(msg.str());
  }
}

// Lighting rows of the valid observations at pixel j and point x.
void frozen_system(const ImageStack& stack, const LedRig& rig, int j, const Vec3& x,
                   Eigen::MatrixX3d& t, Eigen::VectorXd& intensity) {
  const int m = stack.images();
  const int valid = stack.valid_count(j);
  t.resize(valid, 3);
  intensity.resize(valid);
  int r = 0;
  for (int i = 0; i < m; ++i) {
    if (!stack.valid(i, j)) continue;
    t.row(r) = lighting_vector(rig.sources[i], x).vector.transpose();
    intensity[r] = stack(i, j);
    ++r;
  }
}

double sum_in_order(const std::vector<double>& values) {
  double total = 0.0;
  for (double v : values) total += v;
  return total;
}

}  // namespace

int FrozenInversion::flagged_count() const {
  int count = 0;
  for (auto f : flagged) count += f ? 1 : 0;
  return count;
}

ClassicalResult classical_ps(const ImageStack& stack, const Eigen::MatrixX3d& lighting) {
  require_gray(stack, "classical_ps");
  if (lighting.rows() != stack.images()) {
    throw DomainError("classical_ps: lighting matrix needs one row per image");
  }
  if (lighting.rows() < 3) throw DomainError("classical_ps: at least 3 images are required");
  Eigen::JacobiSVD<Eigen::MatrixX3d> svd(lighting, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec3 sv = svd.singularValues();
  if (!(sv[2] > 1e-12 * sv[0])) throw NumericError("classical_ps: lighting matrix has rank < 3");

  const PixelMask& mask = stack.mask();
  const int n = mask.size();
  ClassicalResult out{Eigen::VectorXd::Zero(n), NormalField{mask, std::vector<Vec3>(n, Vec3::Zero()),
                                                            std::vector<std::uint8_t>(n, 0)}};
  for (int j = 0; j < n; ++j) {
    const Vec3 mj = svd.solve(stack.channel(0).col(j));
    const double rho = mj.norm();
    out.albedo[j] = rho;
    if (rho > 0.0) {
      out.normals.normals[j] = mj / rho;
    } else {
      out.normals.degenerate[j] = 1;
    }
  }
  return out;
}

FrozenInversion invert_frozen_lighting(const ImageStack& stack, const LedRig& rig,
                                       const CameraIntrinsics& cam, const LogDepthMap& zmap,
                                       const std::vector<Vec3>& previous) {
  require_gray(stack, "invert_frozen_lighting");
  if (rig.size() != stack.images()) throw DomainError("invert_frozen_lighting: rig/stack size mismatch");
  const PixelMask& mask = stack.mask();
  const int n = mask.size();
  FrozenInversion out{std::vector<Vec3>(n, Vec3::Zero()), std::vector<std::uint8_t>(n, 0)};
  parallel_for(n, [&](int begin, int end) {
    Eigen::MatrixX3d t;
    Eigen::VectorXd intensity;
    for (int j = begin; j < end; ++j) {
      const Vec3 x = backproject(cam, pixel_of(cam, mask, j), zmap.depth(j));
      frozen_system(stack, rig, j, x, t, intensity);
      bool ok = t.rows() >= 3;
      if (ok) {
        Eigen::JacobiSVD<Eigen::MatrixX3d> svd(t, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Vec3 sv = svd.singularValues();
        ok = sv[2] > 1e-10 * sv[0];
        if (ok) out.m[j] = svd.solve(intensity);
      }
      if (!ok) {
        out.flagged[j] = 1;
        out.m[j] = previous.empty() ? Vec3::Zero() : previous[j];
      }
    }
  });
  return out;
}

double energy_alternating(const ImageStack& stack, const LedRig& rig, const CameraIntrinsics& cam,
                          const Eigen::VectorXd& relative, const std::vector<Vec3>& m, double w) {
  const PixelMask& mask = stack.mask();
  const int n = mask.size();
  std::vector<double> per_pixel(n, 0.0);
  parallel_for(n, [&](int begin, int end) {
    for (int j = begin; j < end; ++j) {
      const Vec3 x = backproject(cam, pixel_of(cam, mask, j), w * std::exp(relative[j]));
      double e = 0.0;
      for (int i = 0; i < stack.images(); ++i) {
        if (!stack.valid(i, j)) continue;
        const double r = stack(i, j) - lighting_vector(rig.sources[i], x).vector.dot(m[j]);
        e += r * r;
      }
      per_pixel[j] = e;
    }
  });
  return sum_in_order(per_pixel);
}

ScaleEstimate estimate_scale(const ImageStack& stack, const LedRig& rig,
                             const CameraIntrinsics& cam, const Eigen::VectorXd& relative,
                             const std::vector<Vec3>& m, const ScaleBracket& bracket) {
  if (!(bracket.w_min > 0.0 && bracket.w_max > bracket.w_min)) {
    throw DomainError("estimate_scale: bracket must satisfy 0 < w_min < w_max");
  }
  const int samples = std::max(bracket.coarse_samples, 3);
  const double lo = std::log(bracket.w_min);
  const double hi = std::log(bracket.w_max);
  auto energy = [&](double log_w) {
    return energy_alternating(stack, rig, cam, relative, m, std::exp(log_w));
  };

  std::vector<double> grid(samples);
  std::vector<double> values(samples);
  int best = 0;
  for (int k = 0; k < samples; ++k) {
    grid[k] = lo + (hi - lo) * k / (samples - 1);
    values[k] = energy(grid[k]);
    if (values[k] < values[best]) best = k;
  }
  const double vmax = *std::max_element(values.begin(), values.end());
  if (!(vmax - values[best] > 1e-12 * std::max(vmax, std::numeric_limits<double>::min()))) {
    throw NumericError("estimate_scale: reprojection energy is flat over the bracket");
  }
  if (best == 0 || best == samples - 1) {
    std::ostringstream msg;
    msg << "estimate_scale: no interior minimum in [" << bracket.w_min << ", " << bracket.w_max
        << "]; widen the bracket";
    throw NumericError(msg.str());
  }

  constexpr double kInvPhi = 0.6180339887498949;
  double a = grid[best - 1];
  double b = grid[best + 1];
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = energy(c);
  double fd = energy(d);
  const double tol = std::log1p(bracket.relative_tolerance);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = energy(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = energy(d);
    }
  }
  ScaleEstimate out;
  const double mid = 0.5 * (a + b);
  out.depth = std::exp(mid);
  out.energy = energy(mid);
  return out;
}

SurfaceEstimate solve_alternating(const ImageStack& stack, const LedRig& rig,
                                  const CameraIntrinsics& cam, const AlternatingConfig& cfg) {
  require_gray(stack, "solve_alternating");
  if (!(cfg.z0 > 0.0)) throw DomainError("solve_alternating: z0 must be positive");
  if (cfg.k_max < 0) throw DomainError("solve_alternating: k_max must be nonnegative");
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  ScaleBracket bracket = cfg.bracket;
  if (bracket.w_max == 0.0) {
    bracket.w_min = cfg.z0 / 4.0;
    bracket.w_max = cfg.z0 * 4.0;
  }
  const PixelMask& mask = stack.mask();
  const int n = mask.size();
  const int anchor = centroid_pixel(mask);

  SurfaceEstimate out{LogDepthMap::constant(mask, cfg.z0), {}, normal_from_depth(cam, LogDepthMap::constant(mask, cfg.z0)),
                      {}, {}, 0, false, 0, {}};
  FrozenInversion inv = invert_frozen_lighting(stack, rig, cam, out.zmap);
  out.flagged_pixels += inv.flagged_count();
  {
    const Eigen::VectorXd relative = out.zmap.values.array() - out.zmap.values[anchor];
    out.energy_trace.push_back(energy_alternating(stack, rig, cam, relative, inv.m, cfg.z0));
    out.wall_time.push_back(elapsed());
  }

  for (int k = 1; k <= cfg.k_max; ++k) {
    if (k > 1) {
      inv = invert_frozen_lighting(stack, rig, cam, out.zmap, inv.m);
      out.flagged_pixels += inv.flagged_count();
    }
    NormalField normals{mask, std::vector<Vec3>(n), std::vector<std::uint8_t>(n, 0)};
    for (int j = 0; j < n; ++j) {
      const double len = inv.m[j].norm();
      if (len > 0.0) {
        normals.normals[j] = inv.m[j] / len;
      } else {
        normals.normals[j] = out.normals.normals[j];
        ++out.flagged_pixels;
      }
    }
    const GradientField g{mask, gradient_from_normal(cam, normals)};
    const IntegrationResult integ = integrate_least_squares(g, Anchor{anchor, 0.0});
    const ScaleEstimate scale = estimate_scale(stack, rig, cam, integ.zmap.values, inv.m, bracket);
    out.zmap = LogDepthMap(mask, integ.zmap.values.array() + std::log(scale.depth));
    out.normals = std::move(normals);
    out.iterations = k;
    out.energy_trace.push_back(scale.energy);
    out.wall_time.push_back(elapsed());
    const double prev = out.energy_trace[out.energy_trace.size() - 2];
    if (cfg.stop_rel > 0.0 && prev > 0.0 && std::abs(prev - scale.energy) / prev < cfg.stop_rel) {
      out.converged = true;
      break;
    }
  }

  Eigen::VectorXd albedo(n);
  for (int j = 0; j < n; ++j) albedo[j] = inv.m[j].norm();
  out.albedo = {albedo};
  return out;
}

}  // namespace nearps
