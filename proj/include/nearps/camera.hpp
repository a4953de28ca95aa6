#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace nearps {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// Pinhole camera. The focal length and principal point are in pixel units;
/// pixel coordinates handed to the geometry functions are relative to the
/// principal point, so grid index (col, row) maps to (col - cx, row - cy).
class CameraIntrinsics {
 public:
  CameraIntrinsics(double f, Vec2 principal_point, int width, int height);

  double f() const { return f_; }
  const Vec2& principal_point() const { return principal_point_; }
  int width() const { return width_; }
  int height() const { return height_; }

  Vec2 pixel_coords(int col, int row) const {
    return {col - principal_point_.x(), row - principal_point_.y()};
  }

  /// Focal length in pixels from a focal length in mm and a sensor width in mm.
  static double focal_from_mm(double focal_mm, double sensor_width_mm, int width_px) {
    return focal_mm * width_px / sensor_width_mm;
  }

  bool operator==(const CameraIntrinsics&) const = default;

 private:
  double f_;
  Vec2 principal_point_;
  int width_;
  int height_;
};

/// Membership of each grid pixel in the reconstruction domain, together with
/// a dense 0-based index over the member pixels.
class PixelMask {
 public:
  /// `inside` is row-major, width * height entries, nonzero = member.
  PixelMask(int width, int height, const std::vector<std::uint8_t>& inside);

  static PixelMask full(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }
  int size() const { return static_cast<int>(cols_.size()); }

  bool contains(int col, int row) const {
    return col >= 0 && row >= 0 && col < width_ && row < height_ &&
           index_[static_cast<std::size_t>(row) * width_ + col] >= 0;
  }
  /// Dense index of (col, row), or -1 outside the mask.
  int index(int col, int row) const {
    if (col < 0 || row < 0 || col >= width_ || row >= height_) return -1;
    return index_[static_cast<std::size_t>(row) * width_ + col];
  }
  int col(int j) const { return cols_[j]; }
  int row(int j) const { return rows_[j]; }

  /// Forward neighbours; -1 when the neighbour leaves the mask.
  int right(int j) const { return index(cols_[j] + 1, rows_[j]); }
  int down(int j) const { return index(cols_[j], rows_[j] + 1); }

  /// 4-connected components, each listed by dense index.
  std::vector<std::vector<int>> connected_components() const;

  /// Row-major 0/1 raster.
  std::vector<std::uint8_t> raster() const;

  bool operator==(const PixelMask& other) const {
    return width_ == other.width_ && height_ == other.height_ && index_ == other.index_;
  }

 private:
  int width_;
  int height_;
  std::vector<int> index_;
  std::vector<int> cols_;
  std::vector<int> rows_;
};

/// Log-depth z~ = log z over the mask.
struct LogDepthMap {
  LogDepthMap(PixelMask mask, Eigen::VectorXd values);

  static LogDepthMap constant(PixelMask mask, double depth);

  double depth(int j) const;
  Eigen::VectorXd depths() const { return values.array().exp(); }

  PixelMask mask;
  Eigen::VectorXd values;
};

/// Unit normals over the mask. Pixels whose normal could not be formed are
/// flagged and carry a zero vector.
struct NormalField {
  PixelMask mask;
  std::vector<Vec3> normals;
  std::vector<std::uint8_t> degenerate;

  int degenerate_count() const;
};

inline constexpr double kDegenerateThreshold = 1e-9;

/// Pixel coordinates (relative to the principal point) of mask pixel j.
Vec2 pixel_of(const CameraIntrinsics& cam, const PixelMask& mask, int j);

/// x = (z / f) [u, v, f]^T.
Vec3 backproject(const CameraIntrinsics& cam, const Vec2& p, double z);

/// u = f x / z, v = f y / z.
Vec2 project(const CameraIntrinsics& cam, const Vec3& x);

/// [u, v, f]^T.
Vec3 homogeneous_pixel(const CameraIntrinsics& cam, const Vec2& p);

/// [[f, 0, -u], [0, f, -v], [0, 0, 1]].
Mat3 q_matrix(const CameraIntrinsics& cam, const Vec2& p);

/// Forward first-order differences on the mask with a Neumann boundary: a
/// component whose forward neighbour leaves the mask is zero.
///
/// The matrix is 2n x n; rows [0, n) hold the u-derivatives and rows [n, 2n)
/// the v-derivatives. Gradient fields are stored as 2 x n matrices.
class GradientOperator {
 public:
  explicit GradientOperator(const PixelMask& mask);

  const SparseMatrix& matrix() const { return matrix_; }
  int size() const { return n_; }

  Eigen::Matrix2Xd apply(const Eigen::VectorXd& values) const;
  Eigen::VectorXd apply_transpose(const Eigen::Matrix2Xd& field) const;

  /// Flattens a 2 x n field into the 2n row layout of matrix().
  static Eigen::VectorXd stack(const Eigen::Matrix2Xd& field);
  static Eigen::Matrix2Xd unstack(const Eigen::VectorXd& stacked);

 private:
  int n_;
  SparseMatrix matrix_;
};

/// Normals of the surface z = exp(z~) from the discrete log-depth gradient:
/// n ~ [f dz/du, f dz/dv, -z - p . grad z].
NormalField normal_from_depth(const CameraIntrinsics& cam, const LogDepthMap& zmap);

/// Same, with a precomputed gradient of the log-depth.
NormalField normal_from_log_gradient(const CameraIntrinsics& cam, const PixelMask& mask,
                                     const Eigen::Matrix2Xd& log_gradient);

/// grad z~ = -[n1, n2] / (p_bar . n). Throws DomainError naming the first
/// grazing pixel, where |p_bar . n| < kDegenerateThreshold.
Eigen::Matrix2Xd gradient_from_normal(const CameraIntrinsics& cam, const NormalField& normals);

}  // namespace nearps
