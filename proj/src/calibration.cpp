#include "nearps/calibration.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>

#include "nearps/errors.hpp"

namespace nearps {
namespace {

// Rows (x - x_s) and right-hand sides [I r^(3+mu) / {(x_s - x).n}_+]^(1/mu)
// of the anisotropic problem. Samples with non-positive shading or zero
// intensity carry no information on m_s and are skipped.
struct LinearSystem {
  Eigen::MatrixX3d rows;
  Eigen::VectorXd rhs;
};

LinearSystem anisotropic_system(const std::vector<PlanePoseObservation>& obs, const Vec3& source,
                                double mu, int channel) {
  std::vector<Vec3> rows;
  std::vector<double> rhs;
  for (const auto& pose : obs) {
    for (const auto& s : pose.samples) {
      const Vec3 v = source - s.x;
      const double shading = v.dot(pose.normal);
      const double intensity = s.intensity[channel];
      if (!(shading > 0.0) || !(intensity > 0.0)) continue;
      const double r = v.norm();
      rows.push_back(-v);
      rhs.push_back(std::pow(intensity * std::pow(r, 3.0 + mu) / shading, 1.0 / mu));
    }
  }
  LinearSystem sys{Eigen::MatrixX3d(rows.size(), 3), Eigen::VectorXd(rhs.size())};
  for (std::size_t k = 0; k < rows.size(); ++k) {
    sys.rows.row(k) = rows[k].transpose();
    sys.rhs[k] = rhs[k];
  }
  return sys;
}

void check_observations(const std::vector<PlanePoseObservation>& obs, int channel) {
  for (const auto& pose : obs) {
    if (std::abs(pose.normal.norm() - 1.0) > 1e-9) {
      throw DomainError("calibration: pose normal must be unit-length");
    }
    for (const auto& s : pose.samples) {
      if (!(s.intensity[channel] >= 0.0) || !s.x.allFinite()) {
        throw DomainError("calibration: samples need finite points and nonnegative intensities");
      }
    }
  }
}

}  // namespace

Triangulation triangulate_source(const std::vector<Ray>& rays) {
  if (rays.size() < 2) throw DomainError("triangulate: at least two rays are required");
  Mat3 a = Mat3::Zero();
  Vec3 b = Vec3::Zero();
  std::vector<Mat3> projectors;
  for (const auto& ray : rays) {
    const double len = ray.direction.norm();
    if (!ray.origin.allFinite() || std::abs(len - 1.0) > 1e-9) {
      throw DomainError("triangulate: ray directions must be unit-length");
    }
    const Vec3 d = ray.direction / len;
    const Mat3 proj = Mat3::Identity() - d * d.transpose();
    a += proj;
    b += proj * ray.origin;
    projectors.push_back(proj);
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(a);
  const Vec3 ev = eig.eigenvalues();
  if (!(ev.minCoeff() > 1e-12 * ev.maxCoeff())) {
    throw NumericError("triangulate: rays are parallel; the source position is undetermined");
  }
  Triangulation out;
  out.point = a.ldlt().solve(b);
  double sum = 0.0;
  for (std::size_t k = 0; k < rays.size(); ++k) {
    sum += (projectors[k] * (out.point - rays[k].origin)).squaredNorm();
  }
  out.rms_distance = std::sqrt(sum / rays.size());
  return out;
}

double calibrate_isotropic(const std::vector<PlanePoseObservation>& obs, const Vec3& source,
                           int channel) {
  check_observations(obs, channel);
  double num = 0.0;
  double den = 0.0;
  for (const auto& pose : obs) {
    for (const auto& s : pose.samples) {
      const Vec3 v = source - s.x;
      const double shading = v.dot(pose.normal);
      if (!(shading > 0.0)) continue;
      const double r = v.norm();
      const double factor = shading / (r * r * r);
      num += s.intensity[channel] * factor;
      den += factor * factor;
    }
  }
  if (!(den > 0.0)) {
    throw NumericError("calibrate_isotropic: every sample is self-shadowed");
  }
  return num / den;
}

AnisotropicCalibration calibrate_anisotropic(const std::vector<PlanePoseObservation>& obs,
                                             const Vec3& source, double mu, int channel) {
  if (!(mu > 0.0)) throw DomainError("calibrate_anisotropic: mu must be positive");
  check_observations(obs, channel);
  const LinearSystem sys = anisotropic_system(obs, source, mu, channel);
  if (sys.rows.rows() < 3) {
    throw NumericError("calibrate_anisotropic: fewer than 3 usable samples");
  }
  Eigen::JacobiSVD<Eigen::MatrixX3d> svd(sys.rows, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec3 sv = svd.singularValues();
  if (!(sv[2] > 1e-10 * sv[0])) {
    throw NumericError("calibrate_anisotropic: design matrix has rank < 3 (degenerate poses)");
  }
  const Vec3 ms = svd.solve(sys.rhs);
  const double norm = ms.norm();
  if (!(norm > 0.0)) throw NumericError("calibrate_anisotropic: m_s vanishes");
  AnisotropicCalibration out;
  out.direction = ms / norm;
  out.psi = std::pow(norm, mu);
  out.samples_used = static_cast<int>(sys.rows.rows());
  out.residual = std::sqrt((sys.rows * ms - sys.rhs).squaredNorm() / sys.rows.rows());
  return out;
}

double anisotropic_residual(const std::vector<PlanePoseObservation>& obs, const Vec3& source,
                            double mu, const Vec3& direction, double psi, int channel) {
  const LinearSystem sys = anisotropic_system(obs, source, mu, channel);
  if (sys.rows.rows() == 0) return 0.0;
  const Vec3 ms = std::pow(psi, 1.0 / mu) * direction;
  return std::sqrt((sys.rows * ms - sys.rhs).squaredNorm() / sys.rows.rows());
}

Vec3 spherical_mean(const std::vector<Vec3>& directions, const std::vector<double>& weights) {
  if (directions.empty() || directions.size() != weights.size()) {
    throw DomainError("spherical_mean: need one weight per direction");
  }
  double wsum = 0.0;
  double polar = 0.0;
  double azimuth = 0.0;
  double ref = 0.0;
  for (std::size_t k = 0; k < directions.size(); ++k) {
    const Vec3 d = directions[k].normalized();
    double az = std::atan2(d.y(), d.x());
    if (k == 0) {
      ref = az;
    } else {
      while (az - ref > std::numbers::pi) az -= 2.0 * std::numbers::pi;
      while (az - ref < -std::numbers::pi) az += 2.0 * std::numbers::pi;
    }
    polar += weights[k] * std::acos(std::clamp(d.z(), -1.0, 1.0));
    azimuth += weights[k] * az;
    wsum += weights[k];
  }
  if (!(wsum > 0.0)) throw DomainError("spherical_mean: weights must sum to a positive value");
  polar /= wsum;
  azimuth /= wsum;
  const Vec3 out(std::sin(polar) * std::cos(azimuth), std::sin(polar) * std::sin(azimuth),
                 std::cos(polar));
  return out.normalized();
}

RgbCalibration calibrate_rgb(const std::vector<PlanePoseObservation>& obs, const Vec3& source,
                             double mu) {
  static constexpr const char* kNames[3] = {"red", "green", "blue"};
  RgbCalibration out;
  std::vector<Vec3> dirs;
  std::vector<double> weights;
  for (int c = 0; c < 3; ++c) {
    try {
      out.channels[c] = calibrate_anisotropic(obs, source, mu, c);
    } catch (const std::exception& e) {
      std::ostringstream msg;
      msg << "calibrate_rgb: " << kNames[c] << " channel failed: " << e.what();
      throw NumericError(msg.str());
    }
    out.psi[c] = out.channels[c].psi;
    dirs.push_back(out.channels[c].direction);
    weights.push_back(out.channels[c].psi);
  }
  out.fused_direction = spherical_mean(dirs, weights);
  return out;
}

}  // namespace nearps
