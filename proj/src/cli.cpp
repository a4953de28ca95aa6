#include "nearps/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "nearps/alternating.hpp"
#include "nearps/arls.hpp"
#include "nearps/calibration.hpp"
#include "nearps/errors.hpp"
#include "nearps/io.hpp"
#include "nearps/metrics.hpp"
#include "nearps/ratio.hpp"
#include "nearps/scene.hpp"

namespace nearps::cli {
namespace {

namespace fs = std::filesystem;
using io::Json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string indexed(const char* stem, int i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%02d%s", stem, i, ext);
  return buf;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir + "'");
}

Json hashes(const std::vector<std::string>& paths) {
  Json out = Json::object();
  for (const auto& p : paths) out[p] = io::hex64(io::fnv1a(io::read_file(p)));
  return out;
}

void write_manifest(const std::string& path, const std::string& command,
                    const std::vector<std::string>& args, Json params,
                    const std::vector<std::string>& inputs, const std::vector<std::string>& outputs) {
  Json m{{"command", command},
         {"version", kVersion},
         {"args", args},
         {"parameters", std::move(params)},
         {"inputs", hashes(inputs)},
         {"outputs", hashes(outputs)}};
  io::write_json(path, m);
}

ImageStack to_gray_checked(const ImageStack& stack, bool rgb) {
  if (rgb && stack.channels() != 3) throw UsageError("--rgb needs 3-channel (PF) images");
  if (!rgb && stack.channels() != 1) throw UsageError("3-channel images need --rgb");
  return stack;
}

// ---- render ---------------------------------------------------------------

struct RenderArgs {
  std::string rig;
  std::string scene = "hemisphere";
  std::string mask;
  std::string depth;
  std::string albedo;
  double z0 = 700.0;
  double radius = 80.0;
  int m = 8;
  double noise = 0.0;
  std::uint64_t seed = 1;
  int calibration = 0;
  bool rgb = false;
  std::string out;
};

void cmd_render(const RenderArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  std::vector<std::string> inputs;
  std::optional<io::RigConfig> config;
  if (!a.rig.empty()) {
    config = io::read_rig(a.rig);
    inputs.push_back(a.rig);
    if (a.rgb && config->rig.channels() != 3) throw UsageError("--rgb needs a rig with psi_rgb");
  } else {
    const CameraIntrinsics cam = benchmark_camera();
    config = io::RigConfig{cam, a.rgb ? ring_rig_rgb({0.8e6, 1.0e6, 1.2e6}, a.m) : ring_rig(a.m)};
  }
  const CameraIntrinsics& cam = config->camera;
  const LedRig& rig = config->rig;
  const bool rgb = rig.channels() == 3;

  PixelMask mask = PixelMask::full(cam.width(), cam.height());
  if (!a.mask.empty()) {
    mask = io::read_mask(a.mask);
    inputs.push_back(a.mask);
    if (mask.width() != cam.width() || mask.height() != cam.height()) {
      throw DomainError("mask size does not match the camera");
    }
  }
  if (mask.size() == 0) throw DomainError("mask has no pixels");

  std::optional<LogDepthMap> zmap;
  if (a.scene == "plane") {
    zmap = plane_depth(cam, mask, a.z0);
  } else if (a.scene == "hemisphere") {
    zmap = hemisphere_depth(cam, mask, a.z0, a.radius);
  } else {
    if (a.depth.empty()) throw UsageError("--scene file needs --depth");
    const Eigen::VectorXd z = io::from_image(io::read_pfm(a.depth), mask);
    inputs.push_back(a.depth);
    if (!(z.array() > 0.0).all()) throw DomainError(a.depth + ": depths must be positive");
    zmap = LogDepthMap(mask, z.array().log().matrix());
  }
  std::vector<Eigen::VectorXd> albedo;
  if (!a.albedo.empty()) {
    const io::FloatImage img = io::read_pfm(a.albedo);
    inputs.push_back(a.albedo);
    if (img.channels != (rgb ? 3 : 1)) throw DomainError(a.albedo + ": channel count does not match the rig");
    for (int c = 0; c < img.channels; ++c) albedo.push_back(io::from_image(img, mask, c));
  } else if (rgb) {
    albedo = colored_albedo(mask);
  } else {
    albedo = {checker_albedo(mask)};
  }
  const SceneTruth truth{*zmap, albedo, std::nullopt};
  const ImageStack clean = render(truth, rig, cam);
  const double sigma = a.noise * max_intensity(clean);
  const ImageStack stack = a.noise > 0.0 ? render_noisy(truth, rig, cam, sigma, a.seed) : clean;

  ensure_dir(a.out);
  std::vector<std::string> outputs;
  auto put = [&](const std::string& name) {
    const std::string p = (fs::path(a.out) / name).string();
    outputs.push_back(p);
    return p;
  };
  for (int i = 0; i < stack.images(); ++i) {
    std::vector<Eigen::VectorXd> ch;
    for (int c = 0; c < stack.channels(); ++c) ch.push_back(stack.channel(c).row(i).transpose());
    io::write_pfm(put(indexed("image", i, ".pfm")), io::to_image(mask, ch));
  }
  io::write_mask(put("mask.pgm"), mask);
  io::write_pfm(put("truth_depth.pfm"), io::to_image(mask, {zmap->depths()}));
  io::write_pfm(put("truth_albedo.pfm"), io::to_image(mask, albedo));
  io::write_pfm(put("truth_normals.pfm"), io::normals_to_image(normal_from_depth(cam, *zmap)));
  io::write_rig(put("rig.json"), *config);

  if (a.calibration > 0) {
    const fs::path dir = fs::path(a.out) / "calibration";
    ensure_dir(dir.string());
    const CalibrationData data = synthetic_calibration(rig, a.calibration, 10, a.z0, a.seed);
    for (int s = 0; s < rig.size(); ++s) {
      const std::string rays = (dir / indexed("rays", s, ".json")).string();
      io::write_json(rays, io::rays_to_json(data.rays[s]));
      outputs.push_back(rays);
      Json poses = Json::array();
      for (const auto& obs : data.poses[s]) poses.push_back(io::pose_to_json(obs, rgb));
      const std::string pf = (dir / indexed("poses", s, ".json")).string();
      io::write_json(pf, poses);
      outputs.push_back(pf);
    }
  }

  Json params{{"scene", a.scene}, {"z0", a.z0},         {"radius", a.radius},
              {"m", rig.size()},  {"noise", a.noise},   {"noise_sigma", sigma},
              {"seed", a.seed},   {"rgb", rgb},         {"calibration_poses", a.calibration}};
  write_manifest((fs::path(a.out) / "manifest.json").string(), "render", args, params, inputs,
                 outputs);
  out << "rendered " << stack.images() << " images of " << mask.size() << " pixels into " << a.out
      << " (max intensity " << max_intensity(clean) << ")\n";
}

// ---- calibrate ------------------------------------------------------------

struct CalibrateArgs {
  std::vector<std::string> rays;
  std::vector<std::string> poses;
  std::string camera;
  double mu = 1.0;
  bool rgb = false;
  std::string out;
};

void cmd_calibrate(const CalibrateArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  if (a.rays.size() != a.poses.size()) {
    const std::size_t k = std::min(a.rays.size(), a.poses.size());
    throw DomainError("source " + std::to_string(k) + ": missing " +
                      (a.rays.size() < a.poses.size() ? "ray" : "pose") + " file");
  }
  const Json cam_json = io::read_json(a.camera);
  const CameraIntrinsics cam =
      io::parse_camera(cam_json.contains("camera") ? cam_json.at("camera") : cam_json);

  std::vector<LedSource> sources;
  Json report = Json::array();
  for (std::size_t s = 0; s < a.rays.size(); ++s) {
    const std::string who = "source " + std::to_string(s);
    try {
      const std::vector<Ray> rays = io::parse_rays(io::read_json(a.rays[s]));
      const Json pj = io::read_json(a.poses[s]);
      if (!pj.is_array()) throw DomainError(a.poses[s] + ": expected an array of poses");
      std::vector<PlanePoseObservation> obs;
      for (const auto& p : pj) obs.push_back(io::parse_pose(p, a.rgb));
      const Triangulation tri = triangulate_source(rays);
      Json r{{"source", s}, {"triangulation_rms", tri.rms_distance}};
      if (a.rgb) {
        const RgbCalibration cal = calibrate_rgb(obs, tri.point, a.mu);
        sources.emplace_back(tri.point, cal.fused_direction, a.mu, cal.psi);
        r["residual_rgb"] = {cal.channels[0].residual, cal.channels[1].residual,
                             cal.channels[2].residual};
      } else if (a.mu == 0.0) {
        const double psi = calibrate_isotropic(obs, tri.point);
        sources.emplace_back(tri.point, Vec3::UnitZ(), 0.0, psi);
        r["residual"] = anisotropic_residual(obs, tri.point, 0.0, Vec3::UnitZ(), psi);
      } else {
        const AnisotropicCalibration cal = calibrate_anisotropic(obs, tri.point, a.mu);
        sources.emplace_back(tri.point, cal.direction, a.mu, cal.psi);
        r["residual"] = cal.residual;
      }
      out << who << ": triangulation rms " << tri.rms_distance << ", shading residual "
          << (a.rgb ? r["residual_rgb"].dump() : r["residual"].dump()) << "\n";
      report.push_back(std::move(r));
    } catch (const DomainError& e) {
      throw DomainError(who + ": " + e.what());
    } catch (const NumericError& e) {
      throw NumericError(who + ": " + e.what());
    }
  }
  io::write_rig(a.out, {cam, LedRig(std::move(sources))});
  std::vector<std::string> inputs = a.rays;
  inputs.insert(inputs.end(), a.poses.begin(), a.poses.end());
  inputs.push_back(a.camera);
  write_manifest(a.out + ".manifest.json", "calibrate", args,
                 Json{{"mu", a.mu}, {"rgb", a.rgb}, {"sources", report}}, inputs, {a.out});
}

// ---- solve ----------------------------------------------------------------

struct SolveArgs {
  std::vector<std::string> images;
  std::string mask;
  std::string rig;
  std::string method;
  std::string estimator = "ls";
  double lambda = 0.1;
  std::string shadows = "identity";
  bool rgb = false;
  double init_z0 = 700.0;
  std::string init_depth;
  bool prefilter = false;
  int max_iter = 0;
  std::string out;
};

void cmd_solve(const SolveArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  std::vector<std::string> inputs = a.images;
  const io::RigConfig config = io::read_rig(a.rig);
  inputs.push_back(a.rig);
  const CameraIntrinsics& cam = config.camera;
  if (config.rig.size() != static_cast<int>(a.images.size())) {
    throw DomainError("rig has " + std::to_string(config.rig.size()) + " sources but " +
                      std::to_string(a.images.size()) + " images were given");
  }
  PixelMask mask = PixelMask::full(cam.width(), cam.height());
  if (!a.mask.empty()) {
    mask = io::read_mask(a.mask);
    inputs.push_back(a.mask);
  }
  if (mask.size() == 0) throw DomainError("mask has no pixels");
  if (a.rgb && a.method != "arls") throw UsageError("--rgb is only supported by --method arls");
  if (a.rgb && config.rig.channels() != 3) throw UsageError("--rgb needs a rig with psi_rgb");

  ImageStack stack = to_gray_checked(io::load_stack(a.images, mask), a.rgb);
  if (a.prefilter) stack = prefilter_robust(stack).first;

  std::optional<LogDepthMap> init;
  if (!a.init_depth.empty()) {
    if (a.method != "ratio-fixed-point" && a.method != "ratio-admm") {
      throw UsageError("--init-depth is only used by the ratio methods");
    }
    const Eigen::VectorXd z = io::from_image(io::read_pfm(a.init_depth), mask);
    inputs.push_back(a.init_depth);
    if (!(z.array() > 0.0).all()) throw DomainError(a.init_depth + ": depths must be positive");
    init = LogDepthMap(mask, z.array().log().matrix());
  } else {
    init = LogDepthMap::constant(mask, a.init_z0);
  }

  Json params{{"method", a.method},       {"init_z0", a.init_z0}, {"init_depth", a.init_depth},
              {"prefilter", a.prefilter}, {"rgb", a.rgb},         {"max_iter", a.max_iter}};
  SurfaceEstimate est{*init, {}, normal_from_depth(cam, *init), {}, {}, 0, false, 0, {}};
  if (a.method == "alternating") {
    AlternatingConfig cfg;
    cfg.z0 = a.init_z0;
    if (a.max_iter > 0) cfg.k_max = a.max_iter;
    est = solve_alternating(stack, config.rig, cam, cfg);
  } else if (a.method == "ratio-fixed-point") {
    FixedPointConfig cfg;
    if (a.max_iter > 0) cfg.iterations = a.max_iter;
    est = solve_fixed_point(stack, config.rig, cam, *init, cfg);
  } else if (a.method == "ratio-admm") {
    AdmmConfig cfg;
    if (a.max_iter > 0) cfg.max_outer = a.max_iter;
    est = solve_admm(stack, config.rig, cam, *init, cfg);
  } else {
    ArlsConfig cfg;
    cfg.z0 = a.init_z0;
    cfg.estimator = a.estimator == "cauchy" ? Estimator::cauchy(a.lambda) : Estimator::least_squares();
    cfg.shadow = a.shadows == "clamp" ? ShadowOperator::positive_part() : ShadowOperator::identity();
    if (a.max_iter > 0) cfg.max_outer = a.max_iter;
    est = a.rgb ? solve_arls_rgb(stack, config.rig, cam, cfg) : solve_arls(stack, config.rig, cam, cfg);
    params["estimator"] = a.estimator;
    params["lambda"] = a.lambda;
    params["shadows"] = a.shadows;
  }

  ensure_dir(a.out);
  std::vector<std::string> outputs;
  auto put = [&](const std::string& name) {
    const std::string p = (fs::path(a.out) / name).string();
    outputs.push_back(p);
    return p;
  };
  io::write_pfm(put("depth.pfm"), io::to_image(mask, {est.zmap.depths()}));
  if (!est.albedo.empty()) io::write_pfm(put("albedo.pfm"), io::to_image(mask, est.albedo));
  io::write_pfm(put("normals.pfm"), io::normals_to_image(est.normals));
  io::write_file_atomic(put("energy.csv"), io::energy_csv(est));
  params["iterations"] = est.iterations;
  params["converged"] = est.converged;
  params["flagged_pixels"] = est.flagged_pixels;
  write_manifest((fs::path(a.out) / "manifest.json").string(), "solve", args, params, inputs,
                 outputs);
  out << a.method << ": " << est.iterations << " iterations, final energy "
      << (est.energy_trace.empty() ? 0.0 : est.energy_trace.back())
      << (est.converged ? " (converged)" : "") << "\n";
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
  std::string depth;
  std::string truth;
  std::string mask;
  std::string truth_mask;
  std::string rig;
  double bin_width = 0.1;
  std::string out;
};

void cmd_eval(const EvalArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  std::vector<std::string> inputs{a.depth, a.truth, a.rig};
  const io::RigConfig config = io::read_rig(a.rig);
  const CameraIntrinsics& cam = config.camera;
  PixelMask mask = PixelMask::full(cam.width(), cam.height());
  if (!a.mask.empty()) {
    mask = io::read_mask(a.mask);
    inputs.push_back(a.mask);
  }
  PixelMask truth_mask = mask;
  if (!a.truth_mask.empty()) {
    truth_mask = io::read_mask(a.truth_mask);
    inputs.push_back(a.truth_mask);
  }
  if (!(mask == truth_mask)) throw DomainError("estimate and truth masks differ");
  auto load = [&](const std::string& p) {
    const Eigen::VectorXd z = io::from_image(io::read_pfm(p), mask);
    if (!(z.array() > 0.0).all()) throw DomainError(p + ": depths must be positive inside the mask");
    return LogDepthMap(mask, z.array().log().matrix());
  };
  const DistanceReport r = point_distances(cam, load(a.depth), load(a.truth));
  const auto bins = histogram(r.distances, a.bin_width);

  ensure_dir(a.out);
  const std::string metrics = (fs::path(a.out) / "metrics.json").string();
  const std::string hist = (fs::path(a.out) / "histogram.csv").string();
  io::write_json(metrics, Json{{"pixels", mask.size()},
                               {"median", r.median},
                               {"mean", r.mean},
                               {"rmse", r.rmse}});
  std::ostringstream csv;
  csv << "bin_lower,bin_upper,count\n" << std::setprecision(17);
  for (const auto& b : bins) csv << b.lower << ',' << b.lower + a.bin_width << ',' << b.count << '\n';
  io::write_file_atomic(hist, csv.str());
  write_manifest((fs::path(a.out) / "manifest.json").string(), "eval", args,
                 Json{{"bin_width", a.bin_width}}, inputs, {metrics, hist});
  out << "median " << r.median << " mean " << r.mean << " rmse " << r.rmse << "\n";
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Near-light photometric stereo: render, calibrate, solve, eval"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  RenderArgs ra;
  auto* render_cmd = app.add_subcommand("render", "Synthesize an image stack and its ground truth");
  render_cmd->add_option("--rig", ra.rig, "Rig JSON (default: built-in ring of LEDs)");
  render_cmd->add_option("--scene", ra.scene, "plane, hemisphere or file")
      ->check(CLI::IsMember({"plane", "hemisphere", "file"}));
  render_cmd->add_option("--mask", ra.mask, "PGM mask");
  render_cmd->add_option("--depth", ra.depth, "Depth PFM for --scene file");
  render_cmd->add_option("--albedo", ra.albedo, "Albedo PFM");
  render_cmd->add_option("--z0", ra.z0, "Plane depth");
  render_cmd->add_option("--radius", ra.radius, "Hemisphere radius");
  render_cmd->add_option("--m", ra.m, "Number of sources of the built-in rig")->check(CLI::PositiveNumber);
  render_cmd->add_option("--noise", ra.noise, "Noise sigma as a fraction of the max intensity")
      ->check(CLI::NonNegativeNumber);
  render_cmd->add_option("--seed", ra.seed, "Noise seed");
  render_cmd->add_option("--calibration", ra.calibration, "Also write q calibration plane poses")
      ->check(CLI::NonNegativeNumber);
  render_cmd->add_flag("--rgb", ra.rgb, "Colored rig and albedo");
  render_cmd->add_option("--out", ra.out, "Output directory")->required();

  CalibrateArgs ca;
  auto* cal_cmd = app.add_subcommand("calibrate", "Estimate the rig from rays and plane poses");
  cal_cmd->add_option("--rays", ca.rays, "Ray file per source, in source order")->required();
  cal_cmd->add_option("--poses", ca.poses, "Pose file per source, in source order")->required();
  cal_cmd->add_option("--camera", ca.camera, "Camera JSON (or a rig JSON)")->required();
  cal_cmd->add_option("--mu", ca.mu, "Anisotropy of the sources")->check(CLI::NonNegativeNumber);
  cal_cmd->add_flag("--rgb", ca.rgb, "Per-channel intensities");
  cal_cmd->add_option("--out", ca.out, "Output rig JSON")->required();

  SolveArgs sa;
  auto* solve_cmd = app.add_subcommand("solve", "Reconstruct depth and albedo");
  solve_cmd->add_option("--images", sa.images, "Image PFMs, one per source")->required();
  solve_cmd->add_option("--mask", sa.mask, "PGM mask");
  solve_cmd->add_option("--rig", sa.rig, "Rig JSON")->required();
  solve_cmd->add_option("--method", sa.method, "alternating, ratio-fixed-point, ratio-admm or arls")
      ->required()
      ->check(CLI::IsMember({"alternating", "ratio-fixed-point", "ratio-admm", "arls"}));
  solve_cmd->add_option("--estimator", sa.estimator, "ls or cauchy")
      ->check(CLI::IsMember({"ls", "cauchy"}));
  solve_cmd->add_option("--lambda", sa.lambda, "Cauchy scale")->check(CLI::PositiveNumber);
  solve_cmd->add_option("--shadows", sa.shadows, "identity or clamp")
      ->check(CLI::IsMember({"identity", "clamp"}));
  solve_cmd->add_flag("--rgb", sa.rgb, "Color images (arls)");
  solve_cmd->add_option("--init-z0", sa.init_z0, "Initial plane depth")->check(CLI::PositiveNumber);
  solve_cmd->add_option("--init-depth", sa.init_depth, "Initial depth PFM (ratio methods)");
  solve_cmd->add_flag("--prefilter", sa.prefilter, "Drop the brightest and two darkest values");
  solve_cmd->add_option("--max-iter", sa.max_iter, "Outer iteration cap")->check(CLI::PositiveNumber);
  solve_cmd->add_option("--out", sa.out, "Output directory")->required();

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "Point-to-point distances against a reference");
  eval_cmd->add_option("--depth", ea.depth, "Estimated depth PFM")->required();
  eval_cmd->add_option("--truth", ea.truth, "Reference depth PFM")->required();
  eval_cmd->add_option("--mask", ea.mask, "PGM mask of the estimate");
  eval_cmd->add_option("--truth-mask", ea.truth_mask, "PGM mask of the reference");
  eval_cmd->add_option("--rig", ea.rig, "Rig JSON (camera)")->required();
  eval_cmd->add_option("--bin-width", ea.bin_width, "Histogram bin width")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--out", ea.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  const std::vector<std::string> args(argv + 1, argv + argc);
  try {
    if (render_cmd->parsed()) cmd_render(ra, args, out);
    if (cal_cmd->parsed()) cmd_calibrate(ca, args, out);
    if (solve_cmd->parsed()) cmd_solve(sa, args, out);
    if (eval_cmd->parsed()) cmd_eval(ea, args, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace nearps::cli
