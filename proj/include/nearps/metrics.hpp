#pragma once

#include <vector>

#include "nearps/camera.hpp"

namespace nearps {

/// Point-to-point distances between the backprojections of two depth maps.
struct DistanceReport {
  std::vector<double> distances;
  double median = 0.0;
  double mean = 0.0;
  double rmse = 0.0;
};

DistanceReport point_distances(const CameraIntrinsics& cam, const LogDepthMap& estimate,
                               const LogDepthMap& truth);

struct HistogramBin {
  double lower = 0.0;
  int count = 0;
};

/// Bins [k w, (k + 1) w) from 0 up to the largest value.
std::vector<HistogramBin> histogram(const std::vector<double>& values, double bin_width);

}  // namespace nearps
