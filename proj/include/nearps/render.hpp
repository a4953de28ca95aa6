#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "nearps/camera.hpp"
#include "nearps/led.hpp"

namespace nearps {

/// m corrected-intensity images with 1 or 3 channels over a mask. Each
/// observation (image i, pixel j) also carries a validity flag shared by all
/// channels; solvers ignore invalid observations.
class ImageStack {
 public:
  ImageStack(PixelMask mask, int images, int channels);
  /// One m x n matrix per channel; values must be finite and nonnegative.
  ImageStack(PixelMask mask, std::vector<Eigen::MatrixXd> data);

  const PixelMask& mask() const { return mask_; }
  int images() const { return images_; }
  int channels() const { return static_cast<int>(data_.size()); }
  int pixels() const { return mask_.size(); }

  double operator()(int i, int j, int c = 0) const { return data_[c](i, j); }
  void set(int i, int j, int c, double value);

  const Eigen::MatrixXd& channel(int c) const { return data_[c]; }

  bool valid(int i, int j) const { return valid_(i, j) != 0; }
  void set_valid(int i, int j, bool valid) { valid_(i, j) = valid ? 1 : 0; }
  int valid_count(int j) const;

  /// Single-channel stack holding channel c (validity is kept).
  ImageStack channel_stack(int c) const;

 private:
  PixelMask mask_;
  int images_;
  std::vector<Eigen::MatrixXd> data_;
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> valid_;
};

/// Ground truth used to synthesize images: log-depth, relative albedo per
/// channel and an optional normal field replacing the one derived from depth.
struct SceneTruth {
  LogDepthMap zmap;
  std::vector<Eigen::VectorXd> albedo;
  std::optional<NormalField> normals;

  int channels() const { return static_cast<int>(albedo.size()); }
};

/// I^i(p) = rho(p) {t^i(x) . n(p)}_+ with n from the discrete depth operator
/// unless the scene overrides it. Channel c uses psi_c of each source.
ImageStack render(const SceneTruth& scene, const LedRig& rig, const CameraIntrinsics& cam);

/// render() plus i.i.d. N(0, sigma^2) noise, clamped at zero. Deterministic in
/// the seed; sigma = 0 returns render() unchanged.
ImageStack render_noisy(const SceneTruth& scene, const LedRig& rig, const CameraIntrinsics& cam,
                        double noise_sigma, std::uint64_t seed);

/// cos alpha(p) = f / sqrt(|p|^2 + f^2) for mask pixel j.
double cos_alpha(const CameraIntrinsics& cam, const PixelMask& mask, int j);

/// I = J / cos^4 alpha.
ImageStack correct_gray_levels(const ImageStack& raw, const CameraIntrinsics& cam);

/// J = I cos^4 alpha.
ImageStack uncorrect_gray_levels(const ImageStack& corrected, const CameraIntrinsics& cam);

/// Indices (max, lowest, second lowest) excluded at each pixel.
struct PrefilterRecord {
  std::vector<std::array<int, 3>> discarded;
};

/// Excludes, per pixel, the brightest observation and the two darkest ones
/// (ties go to the lowest image index; the max is chosen first). Requires
/// m >= 4. For color stacks the ranking uses the channel sum.
std::pair<ImageStack, PrefilterRecord> prefilter_robust(const ImageStack& stack);

}  // namespace nearps
