#include "nearps/ratio.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "nearps/errors.hpp"
#include "nearps/integrator.hpp"
#include "nearps/parallel.hpp"
#include "nearps/pcg.hpp"

namespace nearps {
namespace {

void require_ratio_input(const ImageStack& stack, const LedRig& rig, const LogDepthMap& zmap) {
  if (stack.channels() != 1) throw DomainError("ratio: expects a single-channel stack");
  if (stack.images() < 2) throw DomainError("ratio: at least 2 images are required");
  if (rig.size() != stack.images()) throw DomainError("ratio: rig/stack size mismatch");
  if (!(zmap.mask == stack.mask())) throw DomainError("ratio: depth and image masks differ");
}

// Shading c^i = a^i . g - b^i = (Q t^i) . [g; -1] and its derivative in z~.
struct PixelShading {
  std::vector<Vec2> a;
  std::vector<double> b;
  std::vector<Vec2> da;
  std::vector<double> db;
};

PixelShading pixel_shading(const LedRig& rig, const CameraIntrinsics& cam, const Vec2& p,
                           double z_tilde, bool with_derivative) {
  const int m = rig.size();
  PixelShading s{std::vector<Vec2>(m), std::vector<double>(m), {}, {}};
  if (with_derivative) {
    s.da.resize(m);
    s.db.resize(m);
  }
  const double f = cam.f();
  for (int i = 0; i < m; ++i) {
    if (with_derivative) {
      const TFieldJet jet = t_field_jet(rig.sources[i], cam, p, z_tilde);
      s.a[i] = f * jet.value.head<2>() - jet.value.z() * p;
      s.b[i] = jet.value.z();
      s.da[i] = f * jet.derivative.head<2>() - jet.derivative.z() * p;
      s.db[i] = jet.derivative.z();
    } else {
      const Vec3 t = t_field(rig.sources[i], cam, p, z_tilde).vector;
      s.a[i] = f * t.head<2>() - t.z() * p;
      s.b[i] = t.z();
    }
  }
  return s;
}

struct Assembled {
  RatioSystem system;
  SparseMatrix AG;
};

Assembled assemble(const ImageStack& stack, const LedRig& rig, const CameraIntrinsics& cam,
                   const LogDepthMap& zmap, const GradientOperator& grad) {
  Assembled out{ratio_coefficients(stack, rig, cam, zmap), {}};
  out.AG = out.system.A * grad.matrix();
  return out;
}

Vec2 gradient_at(const Eigen::Matrix2Xd& g, int j) { return g.col(j); }

}  // namespace

RatioSystem ratio_coefficients(const ImageStack& stack, const LedRig& rig,
                               const CameraIntrinsics& cam, const LogDepthMap& zmap) {
  require_ratio_input(stack, rig, zmap);
  const PixelMask& mask = stack.mask();
  const int n = mask.size();
  const int m = stack.images();

  std::vector<std::vector<RatioRow>> per_pixel(n);
  parallel_for(n, [&](int begin, int end) {
    for (int j = begin; j < end; ++j) {
      const PixelShading s = pixel_shading(rig, cam, pixel_of(cam, mask, j), zmap.values[j], false);
      for (int i = 0; i < m; ++i) {
        if (!stack.valid(i, j)) continue;
        for (int k = i + 1; k < m; ++k) {
          if (!stack.valid(k, j)) continue;
          const double ii = stack(i, j);
          const double ik = stack(k, j);
          per_pixel[j].push_back({j, i, k, ii * s.a[k] - ik * s.a[i], ii * s.b[k] - ik * s.b[i]});
        }
      }
    }
  });

  RatioSystem sys;
  for (auto& rows : per_pixel) {
    for (auto& r : rows) sys.rows.push_back(r);
  }
  const int rows = static_cast<int>(sys.rows.size());
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(2 * rows);
  sys.b.resize(rows);
  for (int r = 0; r < rows; ++r) {
    const RatioRow& row = sys.rows[r];
    triplets.emplace_back(r, row.pixel, row.a.x());
    triplets.emplace_back(r, n + row.pixel, row.a.y());
    sys.b[r] = row.b;
  }
  sys.A.resize(rows, 2 * n);
  sys.A.setFromTriplets(triplets.begin(), triplets.end());
  return sys;
}

double energy_ratio(const ImageStack& stack, const LedRig& rig, const CameraIntrinsics& cam,
                    const LogDepthMap& zmap) {
  const RatioSystem sys = ratio_coefficients(stack, rig, cam, zmap);
  const GradientOperator grad(stack.mask());
  const Eigen::VectorXd g = grad.matrix() * zmap.values;
  return (sys.A * g - sys.b).squaredNorm();
}

Eigen::VectorXd fit_albedo(const ImageStack& stack, const LedRig& rig, const CameraIntrinsics& cam,
                           const LogDepthMap& zmap, int channel) {
  const PixelMask& mask = stack.mask();
  const NormalField normals = normal_from_depth(cam, zmap);
  Eigen::VectorXd albedo = Eigen::VectorXd::Zero(mask.size());
  for (int j = 0; j < mask.size(); ++j) {
    if (normals.degenerate[j]) continue;
    const Vec3 x = backproject(cam, pixel_of(cam, mask, j), zmap.depth(j));
    double num = 0.0;
    double den = 0.0;
    for (int i = 0; i < stack.images(); ++i) {
      if (!stack.valid(i, j)) continue;
      const double s =
          std::max(lighting_vector(rig.sources[i], x, channel).vector.dot(normals.normals[j]), 0.0);
      num += s * stack(i, j, channel);
      den += s * s;
    }
    if (den > 0.0) albedo[j] = num / den;
  }
  return albedo;
}

SurfaceEstimate solve_fixed_point(const ImageStack& stack, const LedRig& rig,
                                  const CameraIntrinsics& cam, const LogDepthMap& init,
                                  const FixedPointConfig& cfg) {
  require_ratio_input(stack, rig, init);
  if (cfg.iterations < 0) throw DomainError("solve_fixed_point: iterations must be nonnegative");
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  const PixelMask& mask = stack.mask();
  const int n = mask.size();
  const int anchor = centroid_pixel(mask);
  const GradientOperator grad(mask);

  SurfaceEstimate out{init, {}, normal_from_depth(cam, init), {}, {}, 0, false, 0, {}};
  out.energy_trace.push_back(energy_ratio(stack, rig, cam, init));
  out.wall_time.push_back(elapsed());

  for (int k = 1; k <= cfg.iterations; ++k) {
    const Assembled as = assemble(stack, rig, cam, out.zmap, grad);
    const SparseMatrix M = SparseMatrix(as.AG.transpose()) * as.AG;
    const Eigen::VectorXd c = as.AG.transpose() * as.system.b;
    // Unknowns y with y[anchor] = 0; z = y + anchor value there.
    const double anchor_value = out.zmap.values[anchor];
    Eigen::VectorXd za = Eigen::VectorXd::Zero(n);
    za[anchor] = anchor_value;
    Eigen::VectorXd rhs = c - M * za;
    rhs[anchor] = 0.0;
    Eigen::VectorXd diag = M.diagonal();
    diag[anchor] = 1.0;
    Eigen::VectorXd y0 = out.zmap.values;
    y0[anchor] = 0.0;
    const auto apply = [&](const Eigen::VectorXd& y) -> Eigen::VectorXd {
      Eigen::VectorXd yp = y;
      yp[anchor] = 0.0;
      Eigen::VectorXd r = M * yp;
      r[anchor] = y[anchor];
      return r;
    };
    PcgOptions options;
    options.relative_tolerance = cfg.cg_tolerance;
    PcgResult sol;
    try {
      sol = pcg(apply, diag, rhs, y0, options);
    } catch (const NumericError& e) {
      std::ostringstream msg;
      msg << "solve_fixed_point: outer iteration " << k << ": " << e.what();
      throw NumericError(msg.str());
    }
    Eigen::VectorXd z = sol.x;
    z[anchor] = anchor_value;
    out.zmap = LogDepthMap(mask, z);
    out.iterations = k;
    out.energy_trace.push_back(energy_ratio(stack, rig, cam, out.zmap));
    out.wall_time.push_back(elapsed());
  }
  out.normals = normal_from_depth(cam, out.zmap);
  out.albedo = {fit_albedo(stack, rig, cam, out.zmap)};
  return out;
}

namespace {

// Residuals of the local problem and their derivatives in z-bar.
double local_terms(const ImageStack& stack, const LedRig& rig, const CameraIntrinsics& cam, int j,
                   const Vec2& g, double zb, double zt, double h, double nu, double* grad,
                   double* gauss_newton) {
  const int m = stack.images();
  const bool deriv = grad != nullptr;
  const PixelShading s = pixel_shading(rig, cam, pixel_of(cam, stack.mask(), j), zb, deriv);
  std::vector<double> c(m);
  std::vector<double> dc(m, 0.0);
  for (int i = 0; i < m; ++i) {
    c[i] = s.a[i].dot(g) - s.b[i];
    if (deriv) dc[i] = s.da[i].dot(g) - s.db[i];
  }
  double obj = 0.0;
  double jr = 0.0;
  double jj = 0.0;
  for (int i = 0; i < m; ++i) {
    if (!stack.valid(i, j)) continue;
    for (int k = i + 1; k < m; ++k) {
      if (!stack.valid(k, j)) continue;
      const double ii = stack(i, j);
      const double ik = stack(k, j);
      const double r = ii * c[k] - ik * c[i];
      obj += r * r;
      if (deriv) {
        const double dr = ii * dc[k] - ik * dc[i];
        jr += dr * r;
        jj += dr * dr;
      }
    }
  }
  const double w = 1.0 / (2.0 * nu);
  const double pen = zt - zb + h;
  obj += w * pen * pen;
  if (deriv) {
    jr += -w * pen;
    jj += w;
    *grad = jr;
    *gauss_newton = jj;
  }
  return obj;
}

}  // namespace

double local_ratio_objective(const ImageStack& stack, const LedRig& rig,
                             const CameraIntrinsics& cam, int j, const Vec2& g, double zb,
                             double zt, double h, double nu) {
  return local_terms(stack, rig, cam, j, g, zb, zt, h, nu, nullptr, nullptr);
}

ScalarLmResult minimize_local_ratio(const ImageStack& stack, const LedRig& rig,
                                    const CameraIntrinsics& cam, int j, const Vec2& g,
                                    double zb0, double zt, double h, double nu,
                                    const AdmmConfig& cfg) {
  ScalarLmResult out;
  out.z = zb0;
  double grad = 0.0;
  double gn = 0.0;
  out.objective = local_terms(stack, rig, cam, j, g, out.z, zt, h, nu, &grad, &gn);
  double lambda = cfg.lm_damping;
  for (int it = 1; it <= cfg.lm_max_iterations; ++it) {
    out.iterations = it;
    if (grad == 0.0 || !(gn > 0.0)) {
      out.converged = grad == 0.0;
      return out;
    }
    const double step = -grad / (gn * (1.0 + lambda));
    const double candidate = out.z + step;
    const double obj = local_terms(stack, rig, cam, j, g, candidate, zt, h, nu, nullptr, nullptr);
    if (std::isfinite(obj) && obj <= out.objective) {
      const double decrease = out.objective - obj;
      out.z = candidate;
      out.objective = obj;
      lambda /= 10.0;
      if (std::abs(step) <= 1e-10 * (1.0 + std::abs(out.z)) ||
          decrease <= 1e-14 * out.objective) {
        out.converged = true;
        return out;
      }
      local_terms(stack, rig, cam, j, g, out.z, zt, h, nu, &grad, &gn);
    } else {
      lambda *= 10.0;
      if (lambda > 1e16) {
        // No decrease even for vanishing steps: stationary to working precision.
        out.converged = true;
        return out;
      }
    }
  }
  return out;
}

SurfaceEstimate solve_admm(const ImageStack& stack, const LedRig& rig, const CameraIntrinsics& cam,
                           const LogDepthMap& init, const AdmmConfig& cfg) {
  require_ratio_input(stack, rig, init);
  if (!(cfg.nu0 > 0.0) || !(cfg.mu_adapt > 0.0) || !(cfg.tau_incr > 0.0) ||
      !(cfg.tau_decr > 0.0) || !(cfg.stop_rel > 0.0) || !(cfg.cg_tolerance > 0.0)) {
    throw DomainError("solve_admm: configuration values must be positive");
  }
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  const PixelMask& mask = stack.mask();
  const int n = mask.size();
  const GradientOperator grad(mask);

  Eigen::VectorXd zt = init.values;
  Eigen::VectorXd zb = init.values;
  Eigen::VectorXd h = Eigen::VectorXd::Zero(n);
  double nu = cfg.nu0;

  SurfaceEstimate out{init, {}, normal_from_depth(cam, init), {}, {}, 0, false, 0, {}};
  out.energy_trace.push_back(energy_ratio(stack, rig, cam, init));
  out.wall_time.push_back(elapsed());

  for (int k = 1; k <= cfg.max_outer; ++k) {
    // z~-step with coefficients frozen at z-bar.
    const Assembled as = assemble(stack, rig, cam, LogDepthMap(mask, zb), grad);
    const SparseMatrix M = 2.0 * (SparseMatrix(as.AG.transpose()) * as.AG);
    const Eigen::VectorXd rhs = 2.0 * (as.AG.transpose() * as.system.b) + (zb - h) / nu;
    const auto apply = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
      return M * x + x / nu;
    };
    const Eigen::VectorXd diag = M.diagonal().array() + 1.0 / nu;
    PcgOptions options;
    options.relative_tolerance = cfg.cg_tolerance;
    try {
      zt = pcg(apply, diag, rhs, zt, options).x;
    } catch (const NumericError& e) {
      std::ostringstream msg;
      msg << "solve_admm: outer iteration " << k << ": " << e.what();
      throw NumericError(msg.str());
    }

    // z-bar-step, pixelwise.
    const Eigen::Matrix2Xd g = grad.apply(zt);
    const Eigen::VectorXd zb_prev = zb;
    std::vector<std::uint8_t> failed(n, 0);
    parallel_for(n, [&](int begin, int end) {
      for (int j = begin; j < end; ++j) {
        const ScalarLmResult lm =
            minimize_local_ratio(stack, rig, cam, j, gradient_at(g, j), zb_prev[j], zt[j], h[j], nu, cfg);
        if (lm.converged && std::isfinite(lm.z)) {
          zb[j] = lm.z;
        } else {
          failed[j] = 1;
        }
      }
    });
    for (auto f : failed) out.flagged_pixels += f;

    h += zt - zb;

    const double primal = (zt - zb).norm();
    const double dual = (zb - zb_prev).norm() / nu;
    if (primal > cfg.mu_adapt * dual) {
      nu /= cfg.tau_incr;
      h /= cfg.tau_incr;
    } else if (dual > cfg.mu_adapt * primal) {
      nu *= cfg.tau_decr;
      h *= cfg.tau_decr;
    }

    out.zmap = LogDepthMap(mask, zt);
    out.iterations = k;
    const double energy = energy_ratio(stack, rig, cam, out.zmap);
    const double prev = out.energy_trace.back();
    out.energy_trace.push_back(energy);
    out.wall_time.push_back(elapsed());
    if (prev > 0.0 && std::abs(prev - energy) / prev < cfg.stop_rel) {
      out.converged = true;
      break;
    }
    if (prev == 0.0 && energy == 0.0) {
      out.converged = true;
      break;
    }
  }
  out.normals = normal_from_depth(cam, out.zmap);
  out.albedo = {fit_albedo(stack, rig, cam, out.zmap)};
  return out;
}

}  // namespace nearps
