#include "nearps/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "nearps/errors.hpp"

namespace nearps {

DistanceReport point_distances(const CameraIntrinsics& cam, const LogDepthMap& estimate,
                               const LogDepthMap& truth) {
  if (!(estimate.mask == truth.mask)) throw DomainError("eval: estimate and truth masks differ");
  const PixelMask& mask = truth.mask;
  const int n = mask.size();
  if (n == 0) throw DomainError("eval: empty mask");
  DistanceReport r;
  r.distances.resize(n);
  double sum = 0.0;
  double sq = 0.0;
  for (int j = 0; j < n; ++j) {
    const Vec2 p = pixel_of(cam, mask, j);
    const double d = (backproject(cam, p, estimate.depth(j)) - backproject(cam, p, truth.depth(j))).norm();
    r.distances[j] = d;
    sum += d;
    sq += d * d;
  }
  r.mean = sum / n;
  r.rmse = std::sqrt(sq / n);
  std::vector<double> sorted = r.distances;
  std::sort(sorted.begin(), sorted.end());
  r.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  return r;
}

std::vector<HistogramBin> histogram(const std::vector<double>& values, double bin_width) {
  if (!(bin_width > 0.0)) throw DomainError("histogram: bin width must be positive");
  std::vector<HistogramBin> bins;
  for (double v : values) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("histogram: values must be finite and >= 0");
    const auto k = static_cast<std::size_t>(std::floor(v / bin_width));
    if (k >= bins.size()) {
      const std::size_t old = bins.size();
      bins.resize(k + 1);
      for (std::size_t b = old; b <= k; ++b) bins[b].lower = b * bin_width;
    }
    ++bins[k].count;
  }
  if (bins.empty()) bins.push_back({0.0, 0});
  return bins;
}

}  // namespace nearps
