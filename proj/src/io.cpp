#include "nearps/io.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "nearps/errors.hpp"

namespace nearps::io {
namespace {

std::uint32_t byteswap32(std::uint32_t v) {
  return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
}

// Reads the next whitespace-delimited header token starting at pos.
std::string next_token(const std::string& bytes, std::size_t& pos, const char* what) {
  while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
  const std::size_t start = pos;
  while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
  if (start == pos) throw IoError(std::string(what) + ": truncated header");
  return bytes.substr(start, pos - start);
}

int parse_positive(const std::string& token, const char* what) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(token, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != token.size() || v <= 0) {
    throw IoError(std::string(what) + ": bad dimension '" + token + "'");
  }
  return v;
}

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& ctx) {
  if (!j.is_object()) throw DomainError(ctx + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& item : j.items()) {
    if (!ok.count(item.key())) throw DomainError(ctx + ": unknown key '" + item.key() + "'");
  }
}

const Json& need(const Json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key)) throw DomainError(ctx + ": missing '" + key + "'");
  return j.at(key);
}

double number(const Json& j, const std::string& ctx) {
  if (!j.is_number()) throw DomainError(ctx + ": expected a number");
  return j.get<double>();
}

int integer(const Json& j, const std::string& ctx) {
  if (!j.is_number_integer()) throw DomainError(ctx + ": expected an integer");
  return j.get<int>();
}

template <int N>
Eigen::Matrix<double, N, 1> vec(const Json& j, const std::string& ctx) {
  if (!j.is_array() || j.size() != N) {
    throw DomainError(ctx + ": expected an array of " + std::to_string(N) + " numbers");
  }
  Eigen::Matrix<double, N, 1> v;
  for (int k = 0; k < N; ++k) v[k] = number(j[k], ctx);
  return v;
}

Json to_json(const Eigen::Ref<const Eigen::VectorXd>& v) {
  Json a = Json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v[k]);
  return a;
}

}  // namespace

FloatImage::FloatImage(int w, int h, int c)
    : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, 0.0f) {
  if (w <= 0 || h <= 0) throw DomainError("image: dimensions must be positive");
  if (c != 1 && c != 3) throw DomainError("image: 1 or 3 channels");
}

std::string encode_pfm(const FloatImage& image) {
  if (image.channels != 1 && image.channels != 3) throw DomainError("pfm: 1 or 3 channels");
  std::ostringstream head;
  head << (image.channels == 3 ? "PF" : "Pf") << '\n'
       << image.width << ' ' << image.height << '\n'
       << "-1.0\n";
  std::string out = head.str();
  const std::size_t row_values = static_cast<std::size_t>(image.width) * image.channels;
  const std::size_t offset = out.size();
  out.resize(offset + row_values * image.height * 4);
  char* dst = out.data() + offset;
  for (int r = image.height - 1; r >= 0; --r) {
    for (std::size_t k = 0; k < row_values; ++k) {
      std::uint32_t bits = std::bit_cast<std::uint32_t>(image.data[r * row_values + k]);
      if constexpr (std::endian::native == std::endian::big) bits = byteswap32(bits);
      std::memcpy(dst, &bits, 4);
      dst += 4;
    }
  }
  return out;
}

FloatImage decode_pfm(const std::string& bytes) {
  std::size_t pos = 0;
  const std::string magic = next_token(bytes, pos, "pfm");
  int channels = 0;
  if (magic == "Pf") {
    channels = 1;
  } else if (magic == "PF") {
    channels = 3;
  } else {
    throw IoError("pfm: bad magic '" + magic + "'");
  }
  const int width = parse_positive(next_token(bytes, pos, "pfm"), "pfm");
  const int height = parse_positive(next_token(bytes, pos, "pfm"), "pfm");
  const std::string scale_token = next_token(bytes, pos, "pfm");
  double scale = 0.0;
  try {
    scale = std::stod(scale_token);
  } catch (const std::exception&) {
    throw IoError("pfm: bad scale '" + scale_token + "'");
  }
  if (scale == 0.0 || !std::isfinite(scale)) throw IoError("pfm: bad scale '" + scale_token + "'");
  ++pos;
  const bool little = scale < 0.0;
  const bool swap = little != (std::endian::native == std::endian::little);

  FloatImage image(width, height, channels);
  const std::size_t row_values = static_cast<std::size_t>(width) * channels;
  if (bytes.size() < pos + row_values * height * 4) throw IoError("pfm: truncated pixel data");
  const char* src = bytes.data() + pos;
  for (int r = height - 1; r >= 0; --r) {
    for (std::size_t k = 0; k < row_values; ++k) {
      std::uint32_t bits;
      std::memcpy(&bits, src, 4);
      src += 4;
      if (swap) bits = byteswap32(bits);
      image.data[r * row_values + k] = std::bit_cast<float>(bits);
    }
  }
  return image;
}

std::string encode_pgm(const PixelMask& mask) {
  std::ostringstream head;
  head << "P5\n" << mask.width() << ' ' << mask.height() << "\n255\n";
  std::string out = head.str();
  for (std::uint8_t v : mask.raster()) out.push_back(static_cast<char>(v ? 255 : 0));
  return out;
}

PixelMask decode_pgm(const std::string& bytes) {
  std::size_t pos = 0;
  if (next_token(bytes, pos, "pgm") != "P5") throw IoError("pgm: expected P5");
  const int width = parse_positive(next_token(bytes, pos, "pgm"), "pgm");
  const int height = parse_positive(next_token(bytes, pos, "pgm"), "pgm");
  if (next_token(bytes, pos, "pgm") != "255") throw IoError("pgm: maxval must be 255");
  ++pos;
  const std::size_t count = static_cast<std::size_t>(width) * height;
  if (bytes.size() < pos + count) throw IoError("pgm: truncated pixel data");
  std::vector<std::uint8_t> inside(count);
  for (std::size_t k = 0; k < count; ++k) inside[k] = bytes[pos + k] != 0 ? 1 : 0;
  return PixelMask(width, height, inside);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("short write to '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot rename into '" + path + "'");
  }
}

void write_pfm(const std::string& path, const FloatImage& image) {
  write_file_atomic(path, encode_pfm(image));
}

FloatImage read_pfm(const std::string& path) {
  try {
    return decode_pfm(read_file(path));
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

void write_mask(const std::string& path, const PixelMask& mask) {
  write_file_atomic(path, encode_pgm(mask));
}

PixelMask read_mask(const std::string& path) {
  try {
    return decode_pgm(read_file(path));
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << value;
  return ss.str();
}

FloatImage to_image(const PixelMask& mask, const std::vector<Eigen::VectorXd>& channels) {
  const int c = static_cast<int>(channels.size());
  FloatImage image(mask.width(), mask.height(), c);
  for (int k = 0; k < c; ++k) {
    if (channels[k].size() != mask.size()) throw DomainError("to_image: size mismatch");
    for (int j = 0; j < mask.size(); ++j) {
      image.at(mask.col(j), mask.row(j), k) = static_cast<float>(channels[k][j]);
    }
  }
  return image;
}

FloatImage normals_to_image(const NormalField& normals) {
  const PixelMask& mask = normals.mask;
  FloatImage image(mask.width(), mask.height(), 3);
  for (int j = 0; j < mask.size(); ++j) {
    for (int k = 0; k < 3; ++k) {
      image.at(mask.col(j), mask.row(j), k) = static_cast<float>(normals.normals[j][k]);
    }
  }
  return image;
}

Eigen::VectorXd from_image(const FloatImage& image, const PixelMask& mask, int channel) {
  if (image.width != mask.width() || image.height != mask.height()) {
    throw DomainError("image size " + std::to_string(image.width) + "x" +
                      std::to_string(image.height) + " does not match the mask " +
                      std::to_string(mask.width()) + "x" + std::to_string(mask.height()));
  }
  if (channel < 0 || channel >= image.channels) throw DomainError("from_image: no such channel");
  Eigen::VectorXd v(mask.size());
  for (int j = 0; j < mask.size(); ++j) v[j] = image.at(mask.col(j), mask.row(j), channel);
  return v;
}

CameraIntrinsics parse_camera(const Json& j) {
  check_keys(j, {"f", "principal_point", "width", "height"}, "camera");
  return CameraIntrinsics(number(need(j, "f", "camera"), "camera.f"),
                          vec<2>(need(j, "principal_point", "camera"), "camera.principal_point"),
                          integer(need(j, "width", "camera"), "camera.width"),
                          integer(need(j, "height", "camera"), "camera.height"));
}

Json camera_to_json(const CameraIntrinsics& cam) {
  return Json{{"f", cam.f()},
              {"principal_point", to_json(cam.principal_point())},
              {"width", cam.width()},
              {"height", cam.height()}};
}

RigConfig parse_rig(const Json& j) {
  check_keys(j, {"camera", "sources"}, "rig");
  CameraIntrinsics cam = parse_camera(need(j, "camera", "rig"));
  const Json& list = need(j, "sources", "rig");
  if (!list.is_array() || list.empty()) throw DomainError("rig: 'sources' must be a non-empty array");
  std::vector<LedSource> sources;
  for (std::size_t k = 0; k < list.size(); ++k) {
    const std::string ctx = "sources[" + std::to_string(k) + "]";
    const Json& s = list[k];
    check_keys(s, {"x_s", "n_s", "mu", "psi", "psi_rgb"}, ctx);
    const Vec3 x = vec<3>(need(s, "x_s", ctx), ctx + ".x_s");
    const Vec3 n = vec<3>(need(s, "n_s", ctx), ctx + ".n_s");
    const double mu = number(need(s, "mu", ctx), ctx + ".mu");
    const bool gray = s.contains("psi");
    const bool rgb = s.contains("psi_rgb");
    if (gray == rgb) throw DomainError(ctx + ": exactly one of 'psi' and 'psi_rgb'");
    try {
      if (gray) {
        sources.emplace_back(x, n, mu, number(s.at("psi"), ctx + ".psi"));
      } else {
        const Vec3 p = vec<3>(s.at("psi_rgb"), ctx + ".psi_rgb");
        sources.emplace_back(x, n, mu, std::array<double, 3>{p[0], p[1], p[2]});
      }
    } catch (const DomainError& e) {
      throw DomainError(ctx + ": " + e.what());
    }
  }
  return {cam, LedRig(std::move(sources))};
}

Json rig_to_json(const RigConfig& config) {
  Json sources = Json::array();
  for (const LedSource& s : config.rig.sources) {
    Json o{{"x_s", to_json(s.position())}, {"n_s", to_json(s.direction())}, {"mu", s.mu()}};
    if (s.channels() == 3) {
      o["psi_rgb"] = Json{s.psi(0), s.psi(1), s.psi(2)};
    } else {
      o["psi"] = s.psi();
    }
    sources.push_back(std::move(o));
  }
  return Json{{"camera", camera_to_json(config.camera)}, {"sources", std::move(sources)}};
}

RigConfig read_rig(const std::string& path) {
  try {
    return parse_rig(read_json(path));
  } catch (const DomainError& e) {
    throw DomainError(path + ": " + e.what());
  }
}

void write_rig(const std::string& path, const RigConfig& config) {
  write_json(path, rig_to_json(config));
}

std::vector<Ray> parse_rays(const Json& j) {
  if (!j.is_array()) throw DomainError("rays: expected an array");
  std::vector<Ray> rays;
  for (std::size_t k = 0; k < j.size(); ++k) {
    const std::string ctx = "rays[" + std::to_string(k) + "]";
    check_keys(j[k], {"origin", "direction"}, ctx);
    rays.push_back({vec<3>(need(j[k], "origin", ctx), ctx + ".origin"),
                    vec<3>(need(j[k], "direction", ctx), ctx + ".direction")});
  }
  return rays;
}

Json rays_to_json(const std::vector<Ray>& rays) {
  Json a = Json::array();
  for (const Ray& r : rays) a.push_back({{"origin", to_json(r.origin)}, {"direction", to_json(r.direction)}});
  return a;
}

PlanePoseObservation parse_pose(const Json& j, bool rgb) {
  check_keys(j, {"pose", "normal", "samples"}, "pose");
  PlanePoseObservation obs;
  obs.pose = j.contains("pose") ? integer(j.at("pose"), "pose.pose") : 0;
  obs.normal = vec<3>(need(j, "normal", "pose"), "pose.normal");
  const Json& list = need(j, "samples", "pose");
  if (!list.is_array()) throw DomainError("pose: 'samples' must be an array");
  for (std::size_t k = 0; k < list.size(); ++k) {
    const std::string ctx = "samples[" + std::to_string(k) + "]";
    check_keys(list[k], {"x", "I", "I_rgb"}, ctx);
    PlaneSample s{vec<3>(need(list[k], "x", ctx), ctx + ".x"), {}};
    if (rgb) {
      const Vec3 v = vec<3>(need(list[k], "I_rgb", ctx), ctx + ".I_rgb");
      s.intensity = {v[0], v[1], v[2]};
    } else {
      s.intensity[0] = number(need(list[k], "I", ctx), ctx + ".I");
    }
    obs.samples.push_back(s);
  }
  return obs;
}

Json pose_to_json(const PlanePoseObservation& obs, bool rgb) {
  Json samples = Json::array();
  for (const PlaneSample& s : obs.samples) {
    Json o{{"x", to_json(s.x)}};
    if (rgb) {
      o["I_rgb"] = Json{s.intensity[0], s.intensity[1], s.intensity[2]};
    } else {
      o["I"] = s.intensity[0];
    }
    samples.push_back(std::move(o));
  }
  return Json{{"pose", obs.pose}, {"normal", to_json(obs.normal)}, {"samples", std::move(samples)}};
}

Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw IoError(what + ": " + e.what());
  }
}

Json read_json(const std::string& path) { return parse_json(read_file(path), path); }

void write_json(const std::string& path, const Json& j) {
  write_file_atomic(path, j.dump(2) + "\n");
}

ImageStack load_stack(const std::vector<std::string>& paths, const PixelMask& mask) {
  if (paths.empty()) throw DomainError("no images given");
  std::vector<FloatImage> images;
  for (const auto& p : paths) images.push_back(read_pfm(p));
  const int channels = images.front().channels;
  std::vector<Eigen::MatrixXd> data(channels,
                                    Eigen::MatrixXd(static_cast<int>(paths.size()), mask.size()));
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].channels != channels) {
      throw DomainError(paths[i] + ": channel count differs from " + paths.front());
    }
    for (int c = 0; c < channels; ++c) {
      try {
        data[c].row(static_cast<int>(i)) = from_image(images[i], mask, c).transpose();
      } catch (const DomainError& e) {
        throw DomainError(paths[i] + ": " + e.what());
      }
    }
  }
  return ImageStack(mask, std::move(data));
}

std::string energy_csv(const SurfaceEstimate& estimate) {
  std::ostringstream out;
  out << "iteration,energy,wall_time\n" << std::setprecision(17);
  for (std::size_t k = 0; k < estimate.energy_trace.size(); ++k) {
    const double t = k < estimate.wall_time.size() ? estimate.wall_time[k] : 0.0;
    out << k << ',' << estimate.energy_trace[k] << ',' << t << '\n';
  }
  return out.str();
}

}  // namespace nearps::io
