#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "nearps/calibration.hpp"
#include "nearps/camera.hpp"
#include "nearps/led.hpp"
#include "nearps/render.hpp"
#include "nearps/surface.hpp"

namespace nearps::io {

using Json = nlohmann::ordered_json;

/// Float raster with 1 or 3 interleaved channels, top row first in memory.
struct FloatImage {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<float> data;

  FloatImage() = default;
  FloatImage(int w, int h, int c);
  float& at(int col, int row, int c = 0) {
    return data[(static_cast<std::size_t>(row) * width + col) * channels + c];
  }
  float at(int col, int row, int c = 0) const {
    return data[(static_cast<std::size_t>(row) * width + col) * channels + c];
  }
  bool operator==(const FloatImage&) const = default;
};

/// PFM bytes: "Pf" (gray) or "PF" (RGB), little-endian (negative scale),
/// rows stored bottom to top as in the reference format.
std::string encode_pfm(const FloatImage& image);
FloatImage decode_pfm(const std::string& bytes);

/// P5, maxval 255; nonzero pixels belong to the mask.
std::string encode_pgm(const PixelMask& mask);
PixelMask decode_pgm(const std::string& bytes);

std::string read_file(const std::string& path);
/// Writes to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::string& path, const std::string& bytes);

void write_pfm(const std::string& path, const FloatImage& image);
FloatImage read_pfm(const std::string& path);
void write_mask(const std::string& path, const PixelMask& mask);
PixelMask read_mask(const std::string& path);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& bytes);
std::string hex64(std::uint64_t value);

/// Scatters per-pixel values of the mask into a raster; pixels outside are 0.
FloatImage to_image(const PixelMask& mask, const std::vector<Eigen::VectorXd>& channels);
FloatImage normals_to_image(const NormalField& normals);
/// Gathers channel c of the raster at the mask pixels.
Eigen::VectorXd from_image(const FloatImage& image, const PixelMask& mask, int channel = 0);

struct RigConfig {
  CameraIntrinsics camera;
  LedRig rig;
};

CameraIntrinsics parse_camera(const Json& j);
Json camera_to_json(const CameraIntrinsics& cam);
/// Validates field names (unknown keys are rejected), shapes and the camera
/// and source invariants.
RigConfig parse_rig(const Json& j);
Json rig_to_json(const RigConfig& config);
RigConfig read_rig(const std::string& path);
void write_rig(const std::string& path, const RigConfig& config);

/// JSON array of {origin: [3], direction: [3]}.
std::vector<Ray> parse_rays(const Json& j);
Json rays_to_json(const std::vector<Ray>& rays);

/// {pose, normal: [3], samples: [{x: [3], I} or {x: [3], I_rgb: [3]}]}.
PlanePoseObservation parse_pose(const Json& j, bool rgb);
Json pose_to_json(const PlanePoseObservation& obs, bool rgb);

Json parse_json(const std::string& text, const std::string& what);
Json read_json(const std::string& path);
void write_json(const std::string& path, const Json& j);

/// One PFM per image, in order; sizes must match the mask and each other.
ImageStack load_stack(const std::vector<std::string>& paths, const PixelMask& mask);

/// iteration,energy,wall_time
std::string energy_csv(const SurfaceEstimate& estimate);

}  // namespace nearps::io
