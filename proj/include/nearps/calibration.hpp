#pragma once

#include <array>
#include <vector>

#include "nearps/camera.hpp"

namespace nearps {

/// A line through `origin` along the unit vector `direction`, camera frame.
struct Ray {
  Vec3 origin;
  Vec3 direction;
};

struct Triangulation {
  Vec3 point;
  double rms_distance = 0.0;
};

/// Point minimizing the summed squared distances to the lines.
Triangulation triangulate_source(const std::vector<Ray>& rays);

/// One surface point of a calibration plane and the corrected intensity it
/// received from the source being calibrated (entries [0] for gray data).
struct PlaneSample {
  Vec3 x;
  std::array<double, 3> intensity{};
};

/// Samples of one Lambertian plane pose lit by a single source.
struct PlanePoseObservation {
  int pose = 0;
  Vec3 normal;
  std::vector<PlaneSample> samples;
};

/// Closed-form intensity of an isotropic source.
double calibrate_isotropic(const std::vector<PlanePoseObservation>& obs, const Vec3& source,
                           int channel = 0);

struct AnisotropicCalibration {
  Vec3 direction;
  double psi = 0.0;
  /// RMS residual of the linear problem in m_s.
  double residual = 0.0;
  int samples_used = 0;
};

/// Principal direction and intensity from the linear least-squares problem in
/// m_s = psi^(1/mu) n_s.
AnisotropicCalibration calibrate_anisotropic(const std::vector<PlanePoseObservation>& obs,
                                             const Vec3& source, double mu, int channel = 0);

/// Linear residual of the anisotropic problem at given parameters.
double anisotropic_residual(const std::vector<PlanePoseObservation>& obs, const Vec3& source,
                            double mu, const Vec3& direction, double psi, int channel = 0);

struct RgbCalibration {
  std::array<AnisotropicCalibration, 3> channels;
  std::array<double, 3> psi{};
  /// psi-weighted mean of the channel directions in spherical coordinates.
  Vec3 fused_direction;
};

RgbCalibration calibrate_rgb(const std::vector<PlanePoseObservation>& obs, const Vec3& source,
                             double mu);

/// Weighted spherical-coordinate mean of unit vectors, renormalized.
Vec3 spherical_mean(const std::vector<Vec3>& directions, const std::vector<double>& weights);

}  // namespace nearps
