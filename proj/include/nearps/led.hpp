#pragma once

#include <array>
#include <vector>

#include "nearps/camera.hpp"

namespace nearps {

/// Anisotropic ("imperfect Lambertian") point light source. The stored
/// intensity psi lumps the source intensity together with the camera gain and
/// the calibration-pattern albedo; only this product is identifiable, so the
/// model is always evaluated in terms of psi.
class LedSource {
 public:
  LedSource(Vec3 position, Vec3 direction, double mu, double psi);
  LedSource(Vec3 position, Vec3 direction, double mu, const std::array<double, 3>& psi_rgb);

  const Vec3& position() const { return position_; }
  const Vec3& direction() const { return direction_; }
  double mu() const { return mu_; }

  /// 1 for a gray source, 3 for a colored (R, G, B) one.
  int channels() const { return channels_; }
  double psi(int channel = 0) const { return psi_[channel]; }
  const std::array<double, 3>& psi_rgb() const { return psi_; }

  /// Same geometry, different intensities.
  LedSource with_psi(double psi) const;
  LedSource with_psi_rgb(const std::array<double, 3>& psi_rgb) const;

 private:
  Vec3 position_;
  Vec3 direction_;
  double mu_;
  int channels_;
  std::array<double, 3> psi_;
};

struct LedRig {
  explicit LedRig(std::vector<LedSource> sources);

  int size() const { return static_cast<int>(sources.size()); }
  /// Common channel count of all sources.
  int channels() const;

  std::vector<LedSource> sources;
};

/// mu = -log 2 / log cos(theta_half).
double mu_from_half_angle(double theta_half);

/// Lighting vector (or t-field value) at a point. `behind` marks points outside
/// the emission half-space of an anisotropic source; their vector is zero.
struct LightSample {
  Vec3 vector = Vec3::Zero();
  bool behind = false;
};

/// Value and derivative with respect to the log-depth of a t-field.
struct TFieldJet {
  Vec3 value = Vec3::Zero();
  Vec3 derivative = Vec3::Zero();
  bool behind = false;
};

/// psi cos^mu(theta) (x_s - x) / |x_s - x|^3. Throws NumericError when x
/// coincides with the source.
LightSample lighting_vector(const LedSource& src, const Vec3& x, int channel = 0);

/// t-field at pixel p (relative to the principal point) for log-depth z~.
LightSample t_field(const LedSource& src, const CameraIntrinsics& cam, const Vec2& p,
                    double z_tilde, int channel = 0);

std::array<LightSample, 3> t_field_rgb(const LedSource& src, const CameraIntrinsics& cam,
                                       const Vec2& p, double z_tilde);

/// t-field together with its analytic derivative in z~.
TFieldJet t_field_jet(const LedSource& src, const CameraIntrinsics& cam, const Vec2& p,
                      double z_tilde, int channel = 0);

}  // namespace nearps
