#include "nearps/render.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "nearps/errors.hpp"
#include "nearps/parallel.hpp"

namespace nearps {

ImageStack::ImageStack(PixelMask mask, int images, int channels)
    : mask_(std::move(mask)), images_(images) {
  if (images < 1) throw DomainError("image stack: at least one image is required");
  if (channels != 1 && channels != 3) throw DomainError("image stack: channels must be 1 or 3");
  data_.assign(channels, Eigen::MatrixXd::Zero(images, mask_.size()));
  valid_.setOnes(images, mask_.size());
}

ImageStack::ImageStack(PixelMask mask, std::vector<Eigen::MatrixXd> data)
    : mask_(std::move(mask)), images_(data.empty() ? 0 : static_cast<int>(data.front().rows())),
      data_(std::move(data)) {
  if (data_.size() != 1 && data_.size() != 3) {
    throw DomainError("image stack: channels must be 1 or 3");
  }
  if (images_ < 1) throw DomainError("image stack: at least one image is required");
  for (const auto& d : data_) {
    if (d.rows() != images_ || d.cols() != mask_.size()) {
      throw DomainError("image stack: channel dimensions do not match");
    }
    if (!d.allFinite() || (d.array() < 0.0).any()) {
      throw DomainError("image stack: values must be finite and nonnegative");
    }
  }
  valid_.setOnes(images_, mask_.size());
}

void ImageStack::set(int i, int j, int c, double value) {
  if (!(value >= 0.0) || !std::isfinite(value)) {
    throw DomainError("image stack: values must be finite and nonnegative");
  }
  data_[c](i, j) = value;
}

int ImageStack::valid_count(int j) const {
  int count = 0;
  for (int i = 0; i < images_; ++i) count += valid_(i, j) ? 1 : 0;
  return count;
}

ImageStack ImageStack::channel_stack(int c) const {
  ImageStack out(mask_, {data_.at(c)});
  out.valid_ = valid_;
  return out;
}

ImageStack render(const SceneTruth& scene, const LedRig& rig, const CameraIntrinsics& cam) {
  const PixelMask& mask = scene.zmap.mask;
  const int channels = scene.channels();
  if (channels != 1 && channels != 3) throw DomainError("render: albedo must have 1 or 3 channels");
  if (channels != rig.channels()) {
    throw DomainError("render: albedo and source intensities have different channel counts");
  }
  for (const auto& a : scene.albedo) {
    if (a.size() != mask.size()) throw DomainError("render: albedo size does not match mask");
    if ((a.array() < 0.0).any()) throw DomainError("render: albedo must be nonnegative");
  }
  const NormalField normals = scene.normals ? *scene.normals : normal_from_depth(cam, scene.zmap);
  if (!(normals.mask == mask)) throw DomainError("render: normal field mask mismatch");

  const int m = rig.size();
  const int n = mask.size();
  std::vector<Eigen::MatrixXd> data(channels, Eigen::MatrixXd::Zero(m, n));
  parallel_for(n, [&](int begin, int end) {
    for (int j = begin; j < end; ++j) {
      if (normals.degenerate[j]) continue;
      const Vec3 x = backproject(cam, pixel_of(cam, mask, j), scene.zmap.depth(j));
      for (int i = 0; i < m; ++i) {
        for (int c = 0; c < channels; ++c) {
          LightSample s;
          try {
            s = lighting_vector(rig.sources[i], x, c);
          } catch (const NumericError&) {
            std::ostringstream msg;
            msg << "render: pixel (" << mask.col(j) << ", " << mask.row(j)
                << ") coincides with source " << i;
            throw NumericError(msg.str());
          }
          data[c](i, j) = scene.albedo[c][j] * std::max(s.vector.dot(normals.normals[j]), 0.0);
        }
      }
    }
  });
  return ImageStack(mask, std::move(data));
}

ImageStack render_noisy(const SceneTruth& scene, const LedRig& rig, const CameraIntrinsics& cam,
                        double noise_sigma, std::uint64_t seed) {
  if (!(noise_sigma >= 0.0)) throw DomainError("render_noisy: sigma must be nonnegative");
  ImageStack clean = render(scene, rig, cam);
  if (noise_sigma == 0.0) return clean;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, noise_sigma);
  std::vector<Eigen::MatrixXd> data;
  for (int c = 0; c < clean.channels(); ++c) {
    Eigen::MatrixXd d = clean.channel(c);
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
      for (Eigen::Index i = 0; i < d.rows(); ++i) d(i, j) = std::max(d(i, j) + noise(rng), 0.0);
    }
    data.push_back(std::move(d));
  }
  return ImageStack(clean.mask(), std::move(data));
}

double cos_alpha(const CameraIntrinsics& cam, const PixelMask& mask, int j) {
  const Vec2 p = pixel_of(cam, mask, j);
  return cam.f() / std::sqrt(p.squaredNorm() + cam.f() * cam.f());
}

namespace {

ImageStack scale_by_cos4(const ImageStack& in, const CameraIntrinsics& cam, bool divide) {
  std::vector<Eigen::MatrixXd> data;
  for (int c = 0; c < in.channels(); ++c) data.push_back(in.channel(c));
  for (int j = 0; j < in.pixels(); ++j) {
    const double ca = cos_alpha(cam, in.mask(), j);
    const double cos4 = ca * ca * ca * ca;
    for (auto& d : data) d.col(j) = divide ? (d.col(j) / cos4).eval() : (d.col(j) * cos4).eval();
  }
  ImageStack out(in.mask(), std::move(data));
  for (int j = 0; j < in.pixels(); ++j) {
    for (int i = 0; i < in.images(); ++i) out.set_valid(i, j, in.valid(i, j));
  }
  return out;
}

}  // namespace

ImageStack correct_gray_levels(const ImageStack& raw, const CameraIntrinsics& cam) {
  return scale_by_cos4(raw, cam, true);
}

ImageStack uncorrect_gray_levels(const ImageStack& corrected, const CameraIntrinsics& cam) {
  return scale_by_cos4(corrected, cam, false);
}

std::pair<ImageStack, PrefilterRecord> prefilter_robust(const ImageStack& stack) {
  const int m = stack.images();
  if (m < 4) throw DomainError("prefilter_robust: at least 4 images are required");
  ImageStack out = stack;
  PrefilterRecord record;
  record.discarded.resize(stack.pixels());
  std::vector<double> level(m);
  for (int j = 0; j < stack.pixels(); ++j) {
    for (int i = 0; i < m; ++i) {
      level[i] = 0.0;
      for (int c = 0; c < stack.channels(); ++c) level[i] += stack(i, j, c);
    }
    std::vector<bool> taken(m, false);
    int imax = 0;
    for (int i = 1; i < m; ++i) {
      if (level[i] > level[imax]) imax = i;
    }
    taken[imax] = true;
    std::array<int, 3> chosen{imax, -1, -1};
    for (int slot = 1; slot < 3; ++slot) {
      int imin = -1;
      for (int i = 0; i < m; ++i) {
        if (!taken[i] && (imin < 0 || level[i] < level[imin])) imin = i;
      }
      taken[imin] = true;
      chosen[slot] = imin;
    }
    for (int k : chosen) out.set_valid(k, j, false);
    record.discarded[j] = chosen;
  }
  return {std::move(out), std::move(record)};
}

}  // namespace nearps
