#include "nearps/led.hpp"

#include <cmath>
#include <numbers>

#include "nearps/errors.hpp"

namespace nearps {
namespace {

Vec3 checked_direction(const Vec3& direction) {
  const double len = direction.norm();
  if (!std::isfinite(len) || std::abs(len - 1.0) > 1e-6) {
    throw DomainError("led: principal direction must be unit-length");
  }
  return direction / len;
}

void check_common(const Vec3& position, double mu) {
  if (!position.allFinite()) throw DomainError("led: non-finite position");
  if (!(mu >= 0.0) || !std::isfinite(mu)) throw DomainError("led: anisotropy must be >= 0");
}

void check_psi(double psi) {
  if (!(psi > 0.0) || !std::isfinite(psi)) throw DomainError("led: intensity must be positive");
}

// Unit-intensity t-field of a source seen from point x, with the derivative
// along dx (zero dx gives a plain evaluation).
TFieldJet unit_jet(const LedSource& src, const Vec3& x, const Vec3& dx) {
  const Vec3 v = src.position() - x;
  const double r = v.norm();
  if (!(r > 0.0)) throw NumericError("led: point coincides with the source");
  const Vec3 dv = -dx;
  const double mu = src.mu();
  const double inv_r3 = 1.0 / (r * r * r);
  const double v_dv = v.dot(dv);

  TFieldJet jet;
  if (mu == 0.0) {
    jet.value = v * inv_r3;
    jet.derivative = dv * inv_r3 - 3.0 * v * inv_r3 * v_dv / (r * r);
    return jet;
  }
  const double c = -src.direction().dot(v) / r;
  if (c <= 0.0) {
    jet.behind = c < 0.0;
    return jet;
  }
  const double cmu = std::pow(c, mu);
  const double dc = -src.direction().dot(dv) / r - c * v_dv / (r * r);
  jet.value = cmu * v * inv_r3;
  jet.derivative = (mu * cmu / c) * dc * v * inv_r3 + cmu * dv * inv_r3 -
                   3.0 * cmu * v * inv_r3 * v_dv / (r * r);
  return jet;
}

}  // namespace

LedSource::LedSource(Vec3 position, Vec3 direction, double mu, double psi)
    : position_(position), direction_(checked_direction(direction)), mu_(mu), channels_(1),
      psi_{psi, psi, psi} {
  check_common(position_, mu_);
  check_psi(psi);
}

LedSource::LedSource(Vec3 position, Vec3 direction, double mu, const std::array<double, 3>& psi_rgb)
    : position_(position), direction_(checked_direction(direction)), mu_(mu), channels_(3),
      psi_(psi_rgb) {
  check_common(position_, mu_);
  for (double p : psi_) check_psi(p);
}

LedSource LedSource::with_psi(double psi) const {
  return LedSource(position_, direction_, mu_, psi);
}

LedSource LedSource::with_psi_rgb(const std::array<double, 3>& psi_rgb) const {
  return LedSource(position_, direction_, mu_, psi_rgb);
}

LedRig::LedRig(std::vector<LedSource> sources_in) : sources(std::move(sources_in)) {
  if (sources.empty()) throw DomainError("rig: at least one source is required");
  for (const auto& s : sources) {
    if (s.channels() != sources.front().channels()) {
      throw DomainError("rig: sources mix gray and colored intensities");
    }
  }
}

int LedRig::channels() const { return sources.front().channels(); }

double mu_from_half_angle(double theta_half) {
  if (!(theta_half > 0.0 && theta_half < std::numbers::pi / 2)) {
    throw DomainError("mu_from_half_angle: half angle must lie in (0, pi/2)");
  }
  return -std::log(2.0) / std::log(std::cos(theta_half));
}

LightSample lighting_vector(const LedSource& src, const Vec3& x, int channel) {
  const TFieldJet jet = unit_jet(src, x, Vec3::Zero());
  return {src.psi(channel) * jet.value, jet.behind};
}

LightSample t_field(const LedSource& src, const CameraIntrinsics& cam, const Vec2& p,
                    double z_tilde, int channel) {
  return lighting_vector(src, backproject(cam, p, std::exp(z_tilde)), channel);
}

std::array<LightSample, 3> t_field_rgb(const LedSource& src, const CameraIntrinsics& cam,
                                       const Vec2& p, double z_tilde) {
  if (src.channels() != 3) throw DomainError("t_field_rgb: source has no colored intensities");
  const TFieldJet jet = unit_jet(src, backproject(cam, p, std::exp(z_tilde)), Vec3::Zero());
  std::array<LightSample, 3> out;
  for (int c = 0; c < 3; ++c) out[c] = {src.psi(c) * jet.value, jet.behind};
  return out;
}

TFieldJet t_field_jet(const LedSource& src, const CameraIntrinsics& cam, const Vec2& p,
                      double z_tilde, int channel) {
  // d x / d z~ = x since x = exp(z~) p_bar / f.
  const Vec3 x = backproject(cam, p, std::exp(z_tilde));
  TFieldJet jet = unit_jet(src, x, x);
  jet.value *= src.psi(channel);
  jet.derivative *= src.psi(channel);
  return jet;
}

}  // namespace nearps
