#include "nearps/camera.hpp"

#include <cmath>
#include <queue>
#include <sstream>

#include "nearps/errors.hpp"

namespace nearps {

CameraIntrinsics::CameraIntrinsics(double f, Vec2 principal_point, int width, int height)
    : f_(f), principal_point_(principal_point), width_(width), height_(height) {
  if (!(f > 0.0) || !std::isfinite(f)) throw DomainError("camera: focal length must be positive");
  if (width <= 0 || height <= 0) throw DomainError("camera: image dimensions must be positive");
  if (!(principal_point.x() >= 0.0 && principal_point.x() < width &&
        principal_point.y() >= 0.0 && principal_point.y() < height)) {
    throw DomainError("camera: principal point outside the image");
  }
}

PixelMask::PixelMask(int width, int height, const std::vector<std::uint8_t>& inside)
    : width_(width), height_(height) {
  if (width <= 0 || height <= 0) throw DomainError("mask: dimensions must be positive");
  if (inside.size() != static_cast<std::size_t>(width) * height) {
    throw DomainError("mask: raster size does not match dimensions");
  }
  index_.assign(inside.size(), -1);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const std::size_t k = static_cast<std::size_t>(r) * width + c;
      if (inside[k]) {
        index_[k] = static_cast<int>(cols_.size());
        cols_.push_back(c);
        rows_.push_back(r);
      }
    }
  }
  if (cols_.empty()) throw DomainError("mask: no pixel inside the domain");
}

PixelMask PixelMask::full(int width, int height) {
  return PixelMask(width, height,
                   std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(width, 0)) *
                                                 std::max(height, 0),
                                             1));
}

std::vector<std::vector<int>> PixelMask::connected_components() const {
  std::vector<int> label(cols_.size(), -1);
  std::vector<std::vector<int>> components;
  for (int seed = 0; seed < size(); ++seed) {
    if (label[seed] >= 0) continue;
    const int id = static_cast<int>(components.size());
    components.emplace_back();
    std::queue<int> queue;
    queue.push(seed);
    label[seed] = id;
    while (!queue.empty()) {
      const int j = queue.front();
      queue.pop();
      components[id].push_back(j);
      const int c = cols_[j], r = rows_[j];
      for (const int k : {index(c + 1, r), index(c - 1, r), index(c, r + 1), index(c, r - 1)}) {
        if (k >= 0 && label[k] < 0) {
          label[k] = id;
          queue.push(k);
        }
      }
    }
  }
  return components;
}

std::vector<std::uint8_t> PixelMask::raster() const {
  std::vector<std::uint8_t> out(index_.size());
  for (std::size_t k = 0; k < index_.size(); ++k) out[k] = index_[k] >= 0 ? 1 : 0;
  return out;
}

LogDepthMap::LogDepthMap(PixelMask mask_in, Eigen::VectorXd values_in)
    : mask(std::move(mask_in)), values(std::move(values_in)) {
  if (values.size() != mask.size()) throw DomainError("log-depth map: size does not match mask");
  if (!values.allFinite()) throw DomainError("log-depth map: non-finite value");
}

LogDepthMap LogDepthMap::constant(PixelMask mask, double depth) {
  if (!(depth > 0.0)) throw DomainError("log-depth map: depth must be positive");
  const int n = mask.size();
  return LogDepthMap(std::move(mask), Eigen::VectorXd::Constant(n, std::log(depth)));
}

double LogDepthMap::depth(int j) const { return std::exp(values[j]); }

int NormalField::degenerate_count() const {
  int count = 0;
  for (auto d : degenerate) count += d ? 1 : 0;
  return count;
}

Vec2 pixel_of(const CameraIntrinsics& cam, const PixelMask& mask, int j) {
  return cam.pixel_coords(mask.col(j), mask.row(j));
}

Vec3 backproject(const CameraIntrinsics& cam, const Vec2& p, double z) {
  if (!(z > 0.0)) throw DomainError("backproject: depth must be positive");
  return (z / cam.f()) * Vec3(p.x(), p.y(), cam.f());
}

Vec2 project(const CameraIntrinsics& cam, const Vec3& x) {
  return {cam.f() * x.x() / x.z(), cam.f() * x.y() / x.z()};
}

Vec3 homogeneous_pixel(const CameraIntrinsics& cam, const Vec2& p) {
  return {p.x(), p.y(), cam.f()};
}

Mat3 q_matrix(const CameraIntrinsics& cam, const Vec2& p) {
  Mat3 q;
  q << cam.f(), 0.0, -p.x(),
       0.0, cam.f(), -p.y(),
       0.0, 0.0, 1.0;
  return q;
}

GradientOperator::GradientOperator(const PixelMask& mask) : n_(mask.size()), matrix_(2 * n_, n_) {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(4 * static_cast<std::size_t>(n_));
  for (int j = 0; j < n_; ++j) {
    if (const int r = mask.right(j); r >= 0) {
      triplets.emplace_back(j, r, 1.0);
      triplets.emplace_back(j, j, -1.0);
    }
    if (const int d = mask.down(j); d >= 0) {
      triplets.emplace_back(n_ + j, d, 1.0);
      triplets.emplace_back(n_ + j, j, -1.0);
    }
  }
  matrix_.setFromTriplets(triplets.begin(), triplets.end());
  matrix_.makeCompressed();
}

Eigen::Matrix2Xd GradientOperator::apply(const Eigen::VectorXd& values) const {
  return unstack(matrix_ * values);
}

Eigen::VectorXd GradientOperator::apply_transpose(const Eigen::Matrix2Xd& field) const {
  return matrix_.transpose() * stack(field);
}

Eigen::VectorXd GradientOperator::stack(const Eigen::Matrix2Xd& field) {
  const Eigen::Index n = field.cols();
  Eigen::VectorXd out(2 * n);
  out.head(n) = field.row(0).transpose();
  out.tail(n) = field.row(1).transpose();
  return out;
}

Eigen::Matrix2Xd GradientOperator::unstack(const Eigen::VectorXd& stacked) {
  const Eigen::Index n = stacked.size() / 2;
  Eigen::Matrix2Xd out(2, n);
  out.row(0) = stacked.head(n).transpose();
  out.row(1) = stacked.tail(n).transpose();
  return out;
}

NormalField normal_from_log_gradient(const CameraIntrinsics& cam, const PixelMask& mask,
                                     const Eigen::Matrix2Xd& log_gradient) {
  const int n = mask.size();
  NormalField out{mask, std::vector<Vec3>(n, Vec3::Zero()), std::vector<std::uint8_t>(n, 0)};
  for (int j = 0; j < n; ++j) {
    const Vec2 p = pixel_of(cam, mask, j);
    const Vec2 g = log_gradient.col(j);
    // z cancels after normalization, so the log-gradient form is used directly.
    const Vec3 nbar(cam.f() * g.x(), cam.f() * g.y(), -1.0 - p.dot(g));
    const double len = nbar.norm();
    if (!(len > 0.0) || !std::isfinite(len)) {
      out.degenerate[j] = 1;
      continue;
    }
    out.normals[j] = nbar / len;
  }
  return out;
}

NormalField normal_from_depth(const CameraIntrinsics& cam, const LogDepthMap& zmap) {
  const GradientOperator grad(zmap.mask);
  return normal_from_log_gradient(cam, zmap.mask, grad.apply(zmap.values));
}

Eigen::Matrix2Xd gradient_from_normal(const CameraIntrinsics& cam, const NormalField& normals) {
  const int n = normals.mask.size();
  Eigen::Matrix2Xd out(2, n);
  for (int j = 0; j < n; ++j) {
    const Vec3& nj = normals.normals[j];
    const double denom = homogeneous_pixel(cam, pixel_of(cam, normals.mask, j)).dot(nj);
    if (normals.degenerate[j] || !(std::abs(denom) >= kDegenerateThreshold)) {
      std::ostringstream msg;
      msg << "gradient_from_normal: grazing normal at pixel (" << normals.mask.col(j) << ", "
          << normals.mask.row(j) << ")";
      throw DomainError(msg.str());
    }
    out(0, j) = -nj.x() / denom;
    out(1, j) = -nj.y() / denom;
  }
  return out;
}

}  // namespace nearps
