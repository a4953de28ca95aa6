#include "nearps/arls.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "nearps/errors.hpp"
#include "nearps/parallel.hpp"
#include "nearps/pcg.hpp"

namespace nearps {
namespace {

void require_input(const ImageStack& stack, const LedRig& rig) {
  if (rig.size() != stack.images()) throw DomainError("arls: rig/stack size mismatch");
  if (stack.channels() == 3 && rig.channels() != 3) {
    throw DomainError("arls: a color stack needs per-channel source intensities");
  }
}

// zeta and, optionally, its partial derivatives for one channel:
// a = first two entries of Q t (coefficients of the gradient) and the
// derivative of zeta through t at fixed gradient.
struct ChannelFields {
  Eigen::MatrixXd zeta;
  Eigen::MatrixXd a1;
  Eigen::MatrixXd a2;
  Eigen::MatrixXd dzeta_dt;
};

ChannelFields channel_fields(const LedRig& rig, const CameraIntrinsics& cam,
                             const LogDepthMap& zmap, const Eigen::Matrix2Xd& g, int channel,
                             bool with_derivatives) {
  const PixelMask& mask = zmap.mask;
  const int n = mask.size();
  const int m = rig.size();
  ChannelFields out;
  out.zeta.resize(m, n);
  if (with_derivatives) {
    out.a1.resize(m, n);
    out.a2.resize(m, n);
    out.dzeta_dt.resize(m, n);
  }
  const double f = cam.f();
  parallel_for(n, [&](int begin, int end) {
    for (int j = begin; j < end; ++j) {
      const Vec2 p = pixel_of(cam, mask, j);
      const Vec2 gj = g.col(j);
      for (int i = 0; i < m; ++i) {
        const TFieldJet jet = t_field_jet(rig.sources[i], cam, p, zmap.values[j], channel);
        const Vec3& t = jet.value;
        const double a1 = f * t.x() - p.x() * t.z();
        const double a2 = f * t.y() - p.y() * t.z();
        out.zeta(i, j) = a1 * gj.x() + a2 * gj.y() - t.z();
        if (with_derivatives) {
          const Vec3& dt = jet.derivative;
          out.a1(i, j) = a1;
          out.a2(i, j) = a2;
          out.dzeta_dt(i, j) = (f * dt.x() - p.x() * dt.z()) * gj.x() +
                               (f * dt.y() - p.y() * dt.z()) * gj.y() - dt.z();
        }
      }
    }
  });
  return out;
}

std::vector<ChannelFields> all_fields(const ImageStack& stack, const LedRig& rig,
                                      const CameraIntrinsics& cam, const LogDepthMap& zmap,
                                      bool with_derivatives) {
  const GradientOperator grad(zmap.mask);
  const Eigen::Matrix2Xd g = grad.apply(zmap.values);
  std::vector<ChannelFields> out;
  for (int c = 0; c < stack.channels(); ++c) {
    out.push_back(channel_fields(rig, cam, zmap, g, c, with_derivatives));
  }
  return out;
}

// Energy of one pixel in one channel; shared by the energy and the albedo
// acceptance test so both see identical floating-point values.
double pixel_channel_energy(const ImageStack& stack, const ArlsConfig& cfg,
                            const Eigen::MatrixXd& zeta, int j, int c, double rho) {
  double e = 0.0;
  for (int i = 0; i < stack.images(); ++i) {
    if (!stack.valid(i, j)) continue;
    e += cfg.estimator.phi(rho * cfg.shadow.apply(zeta(i, j)) - stack(i, j, c));
  }
  return e;
}

double total_energy(const ImageStack& stack, const ArlsConfig& cfg,
                    const std::vector<ChannelFields>& fields,
                    const std::vector<Eigen::VectorXd>& rho) {
  const int n = stack.pixels();
  std::vector<double> per_pixel(n, 0.0);
  parallel_for(n, [&](int begin, int end) {
    for (int j = begin; j < end; ++j) {
      double e = 0.0;
      for (int c = 0; c < stack.channels(); ++c) {
        e += pixel_channel_energy(stack, cfg, fields[c].zeta, j, c, rho[c][j]);
      }
      per_pixel[j] = e;
    }
  });
  double total = 0.0;
  for (double e : per_pixel) total += e;
  return total;
}

std::vector<Eigen::MatrixXd> weights_from(const ImageStack& stack, const ArlsConfig& cfg,
                                          const std::vector<ChannelFields>& fields,
                                          const std::vector<Eigen::VectorXd>& rho) {
  std::vector<Eigen::MatrixXd> w;
  for (int c = 0; c < stack.channels(); ++c) {
    Eigen::MatrixXd wc = Eigen::MatrixXd::Zero(stack.images(), stack.pixels());
    for (int j = 0; j < stack.pixels(); ++j) {
      for (int i = 0; i < stack.images(); ++i) {
        if (!stack.valid(i, j)) continue;
        const double r = rho[c][j] * cfg.shadow.apply(fields[c].zeta(i, j)) - stack(i, j, c);
        // Exact fits keep the curvature limit so their rows stay in J.
        wc(i, j) = r == 0.0 ? cfg.estimator.d2phi(0.0) : cfg.estimator.weight(r);
      }
    }
    w.push_back(std::move(wc));
  }
  return w;
}

std::vector<Eigen::VectorXd> albedo_step(const ImageStack& stack, const ArlsConfig& cfg,
                                         const std::vector<ChannelFields>& fields,
                                         const std::vector<Eigen::VectorXd>& rho) {
  const std::vector<Eigen::MatrixXd> w = weights_from(stack, cfg, fields, rho);
  std::vector<Eigen::VectorXd> out = rho;
  for (int c = 0; c < stack.channels(); ++c) {
    const Eigen::MatrixXd& zeta = fields[c].zeta;
    for (int j = 0; j < stack.pixels(); ++j) {
      double num = 0.0;
      double den = 0.0;
      for (int i = 0; i < stack.images(); ++i) {
        if (!stack.valid(i, j)) continue;
        const double s = cfg.shadow.apply(zeta(i, j));
        num += w[c](i, j) * s * stack(i, j, c);
        den += w[c](i, j) * s * s;
      }
      if (!(den > 0.0)) continue;
      const double candidate = num / den;
      if (!std::isfinite(candidate)) continue;
      const double before = pixel_channel_energy(stack, cfg, zeta, j, c, rho[c][j]);
      const double after = pixel_channel_energy(stack, cfg, zeta, j, c, candidate);
      if (after <= before) out[c][j] = candidate;
    }
  }
  return out;
}

DepthLinearization linearize(const ImageStack& stack, const ArlsConfig& cfg,
                             const std::vector<ChannelFields>& fields,
                             const std::vector<Eigen::VectorXd>& rho,
                             const std::vector<Eigen::MatrixXd>& weights) {
  const PixelMask& mask = stack.mask();
  const int n = mask.size();
  const int m = stack.images();
  std::vector<Eigen::Triplet<double>> triplets;
  std::vector<double> residual;
  int row = 0;
  for (int c = 0; c < stack.channels(); ++c) {
    const ChannelFields& fc = fields[c];
    for (int j = 0; j < n; ++j) {
      const int right = mask.right(j);
      const int down = mask.down(j);
      for (int i = 0; i < m; ++i) {
        if (!stack.valid(i, j)) continue;
        const double z = fc.zeta(i, j);
        const double sw = std::sqrt(weights[c](i, j));
        const double r = rho[c][j] * cfg.shadow.apply(z) - stack(i, j, c);
        residual.push_back(sw * r);
        const double scale = sw * rho[c][j] * cfg.shadow.chi(z);
        if (scale != 0.0) {
          double self = fc.dzeta_dt(i, j);
          if (right >= 0) {
            self -= fc.a1(i, j);
            triplets.emplace_back(row, right, scale * fc.a1(i, j));
          }
          if (down >= 0) {
            self -= fc.a2(i, j);
            triplets.emplace_back(row, down, scale * fc.a2(i, j));
          }
          triplets.emplace_back(row, j, scale * self);
        }
        ++row;
      }
    }
  }
  DepthLinearization out;
  out.J.resize(row, n);
  out.J.setFromTriplets(triplets.begin(), triplets.end());
  out.residual = Eigen::Map<Eigen::VectorXd>(residual.data(), row);
  return out;
}

DepthStep solve_step(const DepthLinearization& lin, double cg_rel) {
  const SparseMatrix H = SparseMatrix(lin.J.transpose()) * lin.J;
  const Eigen::VectorXd rhs = -(lin.J.transpose() * lin.residual);
  if (!rhs.allFinite()) throw NumericError("arls depth step: non-finite gradient");
  PcgOptions options;
  options.relative_tolerance = cg_rel;
  const PcgResult sol = pcg([&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return H * x; },
                            H.diagonal(), rhs, Eigen::VectorXd::Zero(rhs.size()), options);
  if (!sol.x.allFinite()) {
    std::ostringstream msg;
    msg << "arls depth step: non-finite update after " << sol.iterations << " CG iterations";
    throw NumericError(msg.str());
  }
  return {sol.x, sol.iterations, sol.relative_residual};
}

}  // namespace

double zeta(const LedRig& rig, const CameraIntrinsics& cam, const LogDepthMap& zmap, int j, int i,
            int channel) {
  const GradientOperator grad(zmap.mask);
  const Eigen::Matrix2Xd g = grad.apply(zmap.values);
  const Vec2 p = pixel_of(cam, zmap.mask, j);
  const Vec3 t = t_field(rig.sources[i], cam, p, zmap.values[j], channel).vector;
  return (q_matrix(cam, p) * t).dot(Vec3(g(0, j), g(1, j), -1.0));
}

Eigen::MatrixXd zeta_field(const LedRig& rig, const CameraIntrinsics& cam, const LogDepthMap& zmap,
                           int channel) {
  const GradientOperator grad(zmap.mask);
  return channel_fields(rig, cam, zmap, grad.apply(zmap.values), channel, false).zeta;
}

Eigen::VectorXd normalization(const CameraIntrinsics& cam, const LogDepthMap& zmap) {
  const GradientOperator grad(zmap.mask);
  const Eigen::Matrix2Xd g = grad.apply(zmap.values);
  Eigen::VectorXd d(zmap.mask.size());
  for (int j = 0; j < zmap.mask.size(); ++j) {
    const Vec2 p = pixel_of(cam, zmap.mask, j);
    const Vec2 gj = g.col(j);
    d[j] = Vec3(cam.f() * gj.x(), cam.f() * gj.y(), -1.0 - p.dot(gj)).norm();
  }
  return d;
}

double energy_arls(const ArlsState& state, const ImageStack& stack, const LedRig& rig,
                   const CameraIntrinsics& cam, const ArlsConfig& cfg) {
  require_input(stack, rig);
  return total_energy(stack, cfg, all_fields(stack, rig, cam, state.zmap, false), state.rho);
}

std::vector<Eigen::MatrixXd> arls_weights(const ArlsState& state, const ImageStack& stack,
                                          const LedRig& rig, const CameraIntrinsics& cam,
                                          const ArlsConfig& cfg) {
  require_input(stack, rig);
  return weights_from(stack, cfg, all_fields(stack, rig, cam, state.zmap, false), state.rho);
}

std::vector<Eigen::VectorXd> update_albedo(const ArlsState& state, const ImageStack& stack,
                                           const LedRig& rig, const CameraIntrinsics& cam,
                                           const ArlsConfig& cfg) {
  require_input(stack, rig);
  return albedo_step(stack, cfg, all_fields(stack, rig, cam, state.zmap, false), state.rho);
}

DepthLinearization linearize_depth(const ArlsState& state, const ImageStack& stack,
                                   const LedRig& rig, const CameraIntrinsics& cam,
                                   const ArlsConfig& cfg,
                                   const std::vector<Eigen::MatrixXd>& weights) {
  require_input(stack, rig);
  return linearize(stack, cfg, all_fields(stack, rig, cam, state.zmap, true), state.rho, weights);
}

double frozen_weight_objective(const ArlsState& state, const ImageStack& stack, const LedRig& rig,
                               const CameraIntrinsics& cam, const ArlsConfig& cfg,
                               const std::vector<Eigen::MatrixXd>& weights) {
  require_input(stack, rig);
  const auto fields = all_fields(stack, rig, cam, state.zmap, false);
  double total = 0.0;
  for (int c = 0; c < stack.channels(); ++c) {
    for (int j = 0; j < stack.pixels(); ++j) {
      for (int i = 0; i < stack.images(); ++i) {
        if (!stack.valid(i, j)) continue;
        const double r =
            state.rho[c][j] * cfg.shadow.apply(fields[c].zeta(i, j)) - stack(i, j, c);
        total += weights[c](i, j) * r * r;
      }
    }
  }
  return total;
}

DepthStep depth_step(const ArlsState& state, const ImageStack& stack, const LedRig& rig,
                     const CameraIntrinsics& cam, const ArlsConfig& cfg) {
  require_input(stack, rig);
  const auto fields = all_fields(stack, rig, cam, state.zmap, true);
  const auto w = weights_from(stack, cfg, fields, state.rho);
  return solve_step(linearize(stack, cfg, fields, state.rho, w), cfg.cg_rel);
}

LogDepthMap update_depth(const ArlsState& state, const ImageStack& stack, const LedRig& rig,
                         const CameraIntrinsics& cam, const ArlsConfig& cfg) {
  const DepthStep step = depth_step(state, stack, rig, cam, cfg);
  return LogDepthMap(state.zmap.mask, state.zmap.values + step.delta);
}

ArlsState arls_initial_state(const ImageStack& stack, const LedRig& rig,
                             const CameraIntrinsics& cam, const ArlsConfig& cfg) {
  require_input(stack, rig);
  if (!(cfg.z0 > 0.0)) throw DomainError("arls: z0 must be positive");
  ArlsState state{LogDepthMap::constant(stack.mask(), cfg.z0), {}};
  const auto fields = all_fields(stack, rig, cam, state.zmap, false);
  for (int c = 0; c < stack.channels(); ++c) {
    double rho0 = 1.0;
    if (cfg.rho0) {
      rho0 = *cfg.rho0;
    } else {
      double sum_i = 0.0;
      double sum_z = 0.0;
      for (int j = 0; j < stack.pixels(); ++j) {
        for (int i = 0; i < stack.images(); ++i) {
          if (!stack.valid(i, j)) continue;
          sum_i += stack(i, j, c);
          sum_z += std::max(fields[c].zeta(i, j), 0.0);
        }
      }
      if (sum_z > 0.0) rho0 = sum_i / sum_z;
    }
    state.rho.push_back(Eigen::VectorXd::Constant(stack.pixels(), rho0));
  }
  return state;
}

SurfaceEstimate solve_arls(const ImageStack& stack, const LedRig& rig, const CameraIntrinsics& cam,
                           const ArlsConfig& cfg) {
  require_input(stack, rig);
  if (!(cfg.stop_rel > 0.0) || !(cfg.cg_rel > 0.0) || cfg.max_outer < 0) {
    throw DomainError("arls: tolerances must be positive and max_outer nonnegative");
  }
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  ArlsState state = arls_initial_state(stack, rig, cam, cfg);
  SurfaceEstimate out{state.zmap, {}, normal_from_depth(cam, state.zmap), {}, {}, 0, false, 0, {}};
  auto fields = all_fields(stack, rig, cam, state.zmap, true);
  double energy = total_energy(stack, cfg, fields, state.rho);
  out.energy_trace.push_back(energy);
  out.wall_time.push_back(elapsed());

  for (int k = 1; k <= cfg.max_outer; ++k) {
    state.rho = albedo_step(stack, cfg, fields, state.rho);
    const double after_albedo = total_energy(stack, cfg, fields, state.rho);
    out.albedo_steps.emplace_back(energy, after_albedo);

    const auto w = weights_from(stack, cfg, fields, state.rho);
    const DepthStep step = solve_step(linearize(stack, cfg, fields, state.rho, w), cfg.cg_rel);
    state.zmap = LogDepthMap(state.zmap.mask, state.zmap.values + step.delta);

    fields = all_fields(stack, rig, cam, state.zmap, true);
    const double next = total_energy(stack, cfg, fields, state.rho);
    out.energy_trace.push_back(next);
    out.wall_time.push_back(elapsed());
    out.iterations = k;
    const bool stop = energy > 0.0 ? std::abs(energy - next) / energy < cfg.stop_rel : next == 0.0;
    energy = next;
    if (stop) {
      out.converged = true;
      break;
    }
  }

  out.zmap = state.zmap;
  out.normals = normal_from_depth(cam, state.zmap);
  const Eigen::VectorXd d = normalization(cam, state.zmap);
  for (const auto& rho : state.rho) out.albedo.push_back(rho.cwiseProduct(d));
  return out;
}

SurfaceEstimate solve_arls_rgb(const ImageStack& stack, const LedRig& rig,
                               const CameraIntrinsics& cam, const ArlsConfig& cfg) {
  if (stack.channels() != 3) throw DomainError("solve_arls_rgb: expects a 3-channel stack");
  return solve_arls(stack, rig, cam, cfg);
}

}  // namespace nearps
