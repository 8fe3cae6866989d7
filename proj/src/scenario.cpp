#include "otfwi/scenario.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "otfwi/grid_io.hpp"
#include "otfwi/wave_sim.hpp"

namespace otfwi {

namespace {

std::string fmt(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

std::string fmt_list(const std::vector<double>& vs) {
  std::string out;
  for (size_t i = 0; i < vs.size(); ++i) out += (i ? ", " : "") + fmt(vs[i]);
  return out;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw config_error("scenario: cannot parse number '" + item + "'");
    }
  }
  return out;
}

double parse_num(const std::string& key, const std::string& s) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw config_error("scenario: key '" + key + "' needs a number, got '" + s + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw config_error("scenario: key '" + key + "' needs true/false, got '" + s + "'");
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  size_t b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

NormMethod norm_from_name(const std::string& name) {
  if (name == "linear") return NormMethod::linear;
  if (name == "signsensitive") return NormMethod::sign_sensitive;
  if (name == "exponential") return NormMethod::exponential;
  throw config_error("unknown normalization '" + name + "'");
}

}  // namespace

VelocityModel build_layered(const std::vector<double>& interface_depths_m,
                            const std::vector<double>& velocities_kms,
                            const Grid2D& grid) {
  grid.validate();
  if (velocities_kms.size() != interface_depths_m.size() + 1)
    throw config_error("build_layered: need one more velocity than interfaces");
  std::vector<int> snapped;
  int prev = 0;
  for (double d : interface_depths_m) {
    const int iz = static_cast<int>(std::lround(d / grid.dz));
    if (iz <= 0 || iz >= grid.nz)
      throw config_error("build_layered: interface at " + std::to_string(d) +
                         " m lies outside the grid");
    if (iz < prev) throw config_error("build_layered: interfaces must increase");
    snapped.push_back(iz);
    prev = iz;
  }
  VelocityModel model;
  model.grid = grid;
  model.c.resize(grid.nz, grid.nx);
  for (int iz = 0; iz < grid.nz; ++iz) {
    size_t layer = 0;
    while (layer < snapped.size() && iz >= snapped[layer]) ++layer;
    model.c.row(iz).setConstant(velocities_kms[layer]);
  }
  model.validate();
  return model;
}

VelocityModel smooth_model(const VelocityModel& model, double sigma_m) {
  if (sigma_m < 0) throw config_error("smooth_model: sigma must be >= 0");
  if (sigma_m == 0.0) return model;
  model.validate();

  auto blur_1d = [](const MatrixXd& in, double sigma_cells, bool along_rows) {
    if (sigma_cells <= 0) return in;
    const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma_cells)));
    ArrayXd kernel(2 * radius + 1);
    for (int k = -radius; k <= radius; ++k)
      kernel(k + radius) = std::exp(-0.5 * k * k / (sigma_cells * sigma_cells));
    kernel /= kernel.sum();

    MatrixXd out = MatrixXd::Zero(in.rows(), in.cols());
    const int n = static_cast<int>(along_rows ? in.rows() : in.cols());
    auto mirror = [n](int i) {
      while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - 1 - i;
      return i;
    };
    for (int i = 0; i < n; ++i)
      for (int k = -radius; k <= radius; ++k) {
        const int j = mirror(i + k);
        if (along_rows)
          out.row(i) += kernel(k + radius) * in.row(j);
        else
          out.col(i) += kernel(k + radius) * in.col(j);
      }
    return out;
  };

  VelocityModel out = model;
  out.c = blur_1d(out.c, sigma_m / model.grid.dz, true);
  out.c = blur_1d(out.c, sigma_m / model.grid.dx, false);
  return out;
}

Scenario scenario_three_layer(bool full_scale) {
  Scenario sc;
  sc.name = full_scale ? "three-layer-full" : "three-layer";
  sc.output_prefix = "three-layer";

  sc.model.kind = ModelKind::layered;
  sc.model.dz = 50.0;
  sc.model.dx = 50.0;
  sc.model.nz = 61;  // 3 km depth
  sc.model.layers = {{1000.0, 2000.0}, {2.0, 4.0, 2.0}};
  sc.model.init_kind = InitKind::layered;
  sc.model.init_layers = {{1000.0}, {2.0, 4.0}};

  auto& acq = sc.acquisition;
  acq.peak_freq_hz = 5.0;
  acq.wavelet_delay_s = 0.3;
  acq.dt_s = 0.004;
  if (full_scale) {
    sc.model.nx = 301;  // 15 km width
    acq.n_sources = 52;
    acq.source_depth_m = 150.0;
    acq.source_x0_m = 200.0;
    acq.source_spacing_m = 280.0;
    acq.n_receivers = 301;
    acq.receiver_depth_m = 100.0;
    acq.receiver_x0_m = 150.0;
    acq.receiver_spacing_m = 49.0;
    acq.record_time_s = 3.8;
  } else {
    sc.model.nx = 121;  // 6 km width
    acq.n_sources = 4;
    acq.source_depth_m = 100.0;
    acq.source_x0_m = 750.0;
    acq.source_spacing_m = 1500.0;
    acq.n_receivers = 56;
    acq.receiver_depth_m = 100.0;
    acq.receiver_x0_m = 150.0;
    acq.receiver_spacing_m = 100.0;
    acq.record_time_s = 2.4;
  }

  sc.inversion.misfit = "w1d";
  sc.inversion.normalization = "signsensitive";
  sc.inversion.max_iters = 150;
  sc.inversion.c_min_kms = 1.0;
  sc.inversion.c_max_kms = 5.0;
  sc.inversion.mask_top_m = 1000.0;
  return sc;
}

Scenario scenario_bp_like(bool full_scale) {
  Scenario sc;
  sc.name = full_scale ? "bp-like-full" : "bp-like";
  sc.output_prefix = "bp-like";

  sc.model.kind = ModelKind::salt;
  auto& acq = sc.acquisition;
  acq.peak_freq_hz = 5.0;
  acq.wavelet_delay_s = 0.5;
  acq.bandpass_lo_hz = 3.0;
  acq.bandpass_hi_hz = 9.0;
  acq.record_time_s = 10.0;
  acq.dt_s = 0.005;
  if (full_scale) {
    sc.model.nz = 121;  // 6 km
    sc.model.nx = 321;  // 16 km
    sc.model.dz = 50.0;
    sc.model.dx = 50.0;
    acq.n_sources = 11;
    acq.source_depth_m = 250.0;
    acq.source_x0_m = 500.0;
    acq.source_spacing_m = 1500.0;
    acq.n_receivers = 321;
    acq.receiver_depth_m = 250.0;
    acq.receiver_x0_m = 50.0;
    acq.receiver_spacing_m = 49.5;
  } else {
    sc.model.nz = 31;
    sc.model.nx = 81;
    sc.model.dz = 200.0;
    sc.model.dx = 200.0;
    acq.n_sources = 5;
    acq.source_depth_m = 250.0;
    acq.source_x0_m = 500.0;
    acq.source_spacing_m = 3750.0;
    acq.n_receivers = 77;
    acq.receiver_depth_m = 250.0;
    acq.receiver_x0_m = 200.0;
    acq.receiver_spacing_m = 200.0;
    acq.record_time_s = 8.0;
  }

  sc.inversion.misfit = "w1d";
  sc.inversion.max_iters = 150;
  sc.inversion.c_min_kms = 1.3;
  sc.inversion.c_max_kms = 5.0;
  sc.inversion.mask_top_m = 300.0;
  return sc;
}

Scenario scenario_marmousi_like(const std::string& model_file, bool full_scale) {
  Scenario sc;
  sc.name = full_scale ? "marmousi-like-full" : "marmousi-like";
  sc.output_prefix = "marmousi-like";
  sc.model.kind = ModelKind::file;
  sc.model.file = model_file;
  sc.model.init_kind = InitKind::smooth_of_truth;
  sc.model.init_smooth_sigma_m = 150.0;

  auto& acq = sc.acquisition;
  acq.peak_freq_hz = 15.0;
  acq.wavelet_delay_s = 0.12;
  acq.bandpass_lo_hz = 2.0;  // remove 0-2 Hz
  acq.bandpass_hi_hz = 45.0;
  acq.record_time_s = 2.0;
  if (full_scale) {
    acq.dt_s = 0.001;
    acq.n_sources = 11;
    acq.source_depth_m = 50.0;
    acq.source_x0_m = 100.0;
    acq.source_spacing_m = 280.0;
    acq.n_receivers = 307;
    acq.receiver_depth_m = 50.0;
    acq.receiver_x0_m = 20.0;
    acq.receiver_spacing_m = 9.7;
  } else {
    acq.dt_s = 0.002;
    acq.n_sources = 6;
    acq.source_depth_m = 60.0;
    acq.source_x0_m = 200.0;
    acq.source_spacing_m = 520.0;
    acq.n_receivers = 144;
    acq.receiver_depth_m = 60.0;
    acq.receiver_x0_m = 40.0;
    acq.receiver_spacing_m = 20.0;
  }

  sc.inversion.misfit = "w1d";
  sc.inversion.max_iters = 200;
  sc.inversion.c_min_kms = 1.0;
  sc.inversion.c_max_kms = 6.0;
  return sc;
}

Grid2D scenario_grid(const Scenario& sc) {
  Grid2D g;
  if (sc.model.kind == ModelKind::file) return scenario_truth_model(sc).grid;
  g.nz = sc.model.nz;
  g.nx = sc.model.nx;
  g.dz = sc.model.dz;
  g.dx = sc.model.dx;
  g.validate();
  return g;
}

VelocityModel scenario_truth_model(const Scenario& sc) {
  if (sc.model.kind == ModelKind::file) {
    if (sc.model.file.empty() || !std::filesystem::exists(sc.model.file))
      throw io_error("scenario '" + sc.name + "': model file '" + sc.model.file +
                     "' not found (expected OTF1 grid binary with a .meta sidecar "
                     "holding dz/dx in meters)");
    return read_model(sc.model.file);
  }
  Grid2D g;
  g.nz = sc.model.nz;
  g.nx = sc.model.nx;
  g.dz = sc.model.dz;
  g.dx = sc.model.dx;
  if (sc.model.kind == ModelKind::salt) {
    // Linear background with a fast elliptic inclusion two fifths down.
    VelocityModel m;
    m.grid = g;
    m.c.resize(g.nz, g.nx);
    const double depth = g.depth(), width = g.width();
    for (int i = 0; i < g.nz; ++i)
      for (int j = 0; j < g.nx; ++j) {
        const double z = g.z(i), x = g.x(j);
        double c = sc.model.bg_c0_kms + (sc.model.bg_c1_kms - sc.model.bg_c0_kms) * z / depth;
        const double ez = (z - 0.4 * depth) / (0.18 * depth);
        const double ex = (x - 0.5 * width) / (0.2 * width);
        if (ez * ez + ex * ex <= 1.0) c = sc.model.salt_c_kms;
        m.c(i, j) = c;
      }
    m.validate();
    return m;
  }
  return build_layered(sc.model.layers.interfaces_m, sc.model.layers.velocities_kms, g);
}

VelocityModel scenario_initial_model(const Scenario& sc) {
  switch (sc.model.init_kind) {
    case InitKind::layered: {
      if (sc.model.kind == ModelKind::salt) {  // background without the inclusion
        VelocityModel bg = scenario_truth_model(sc);
        const Grid2D& g = bg.grid;
        for (int i = 0; i < g.nz; ++i)
          bg.c.row(i).setConstant(sc.model.bg_c0_kms +
                                  (sc.model.bg_c1_kms - sc.model.bg_c0_kms) * g.z(i) /
                                      g.depth());
        return bg;
      }
      return build_layered(sc.model.init_layers.interfaces_m,
                           sc.model.init_layers.velocities_kms, scenario_grid(sc));
    }
    case InitKind::smooth_of_truth:
      return smooth_model(scenario_truth_model(sc), sc.model.init_smooth_sigma_m);
    case InitKind::file:
      if (sc.model.init_file.empty() || !std::filesystem::exists(sc.model.init_file))
        throw io_error("scenario '" + sc.name + "': initial model file '" +
                       sc.model.init_file + "' not found");
      return read_model(sc.model.init_file);
  }
  throw config_error("scenario_initial_model: bad init kind");
}

Acquisition scenario_acquisition(const Scenario& sc) {
  const auto& a = sc.acquisition;
  Acquisition acq;
  for (int s = 0; s < a.n_sources; ++s)
    acq.sources.emplace_back(a.source_depth_m, a.source_x0_m + s * a.source_spacing_m);
  for (int r = 0; r < a.n_receivers; ++r)
    acq.receivers.emplace_back(a.receiver_depth_m,
                               a.receiver_x0_m + r * a.receiver_spacing_m);
  TimeAxis axis{static_cast<int>(std::lround(a.record_time_s / a.dt_s)) + 1, a.dt_s};
  Trace w = wave::ricker(a.peak_freq_hz, a.wavelet_delay_s, axis);
  if (a.bandpass_hi_hz > 0.0) w = wave::bandpass(w, a.bandpass_lo_hz, a.bandpass_hi_hz);
  acq.wavelet = std::move(w);
  return acq;
}

InversionConfig scenario_inversion_config(const Scenario& sc) {
  const auto& inv = sc.inversion;
  InversionConfig cfg;
  cfg.misfit = misfit_from_tag(inv.misfit);
  cfg.norm.method = norm_from_name(inv.normalization);
  cfg.norm.c = inv.c;
  cfg.norm.c_scale = inv.c_scale;
  cfg.norm.differentiate = inv.differentiate_normalization;
  cfg.max_iters = inv.max_iters;
  cfg.lbfgs_memory = inv.lbfgs_memory;
  cfg.grad_tol_rel = inv.grad_tol_rel;
  cfg.c_min_kms = inv.c_min_kms;
  cfg.c_max_kms = inv.c_max_kms;
  cfg.snapshot_every = inv.snapshot_every;
  cfg.ma_fallback_to_trace = inv.ma_fallback;
  if (inv.mask_top_m > 0.0) {
    const Grid2D g = scenario_grid(sc);
    cfg.update_mask = MatrixXd::Ones(g.nz, g.nx);
    for (int iz = 0; iz < g.nz; ++iz)
      if (g.z(iz) < inv.mask_top_m) cfg.update_mask.row(iz).setZero();
  }
  return cfg;
}

void validate_scenario(const Scenario& sc) {
  const VelocityModel truth = scenario_truth_model(sc);
  const Acquisition acq = scenario_acquisition(sc);
  acq.validate(truth.grid);
  wave::check_cfl(truth, acq.wavelet.axis);

  if (sc.model.kind == ModelKind::layered && !sc.model.layers.interfaces_m.empty()) {
    // Record length must cover the two-way time to the deepest interface.
    double twoway = 0.0, prev = 0.0;
    for (size_t k = 0; k < sc.model.layers.interfaces_m.size(); ++k) {
      const double thick = sc.model.layers.interfaces_m[k] - prev;
      twoway += 2.0 * thick / (1e3 * sc.model.layers.velocities_kms[k]);
      prev = sc.model.layers.interfaces_m[k];
    }
    if (sc.acquisition.record_time_s < twoway)
      throw config_error("scenario '" + sc.name + "': record time " +
                         std::to_string(sc.acquisition.record_time_s) +
                         " s is shorter than the two-way time " + std::to_string(twoway) +
                         " s to the deepest interface");
  }
  if (sc.inversion.mask_top_m >= truth.grid.depth())
    throw config_error("scenario '" + sc.name + "': mask_top freezes the whole model");
  scenario_inversion_config(sc);  // validates misfit/normalization tags
}

std::string serialize_scenario(const Scenario& sc) {
  std::ostringstream os;
  os << "name = " << sc.name << "\n";
  os << "[model]\n";
  os << "kind = "
     << (sc.model.kind == ModelKind::layered
             ? "layered"
             : (sc.model.kind == ModelKind::salt ? "salt" : "file"))
     << "\n";
  if (sc.model.kind == ModelKind::file) {
    os << "file = " << sc.model.file << "\n";
  } else {
    os << "nz = " << sc.model.nz << "\n";
    os << "nx = " << sc.model.nx << "\n";
    os << "dz = " << fmt(sc.model.dz) << "\n";
    os << "dx = " << fmt(sc.model.dx) << "\n";
  }
  if (sc.model.kind == ModelKind::layered) {
    os << "interfaces = " << fmt_list(sc.model.layers.interfaces_m) << "\n";
    os << "velocities = " << fmt_list(sc.model.layers.velocities_kms) << "\n";
  }
  if (sc.model.kind == ModelKind::salt) {
    os << "salt_c = " << fmt(sc.model.salt_c_kms) << "\n";
    os << "background_c0 = " << fmt(sc.model.bg_c0_kms) << "\n";
    os << "background_c1 = " << fmt(sc.model.bg_c1_kms) << "\n";
  }
  switch (sc.model.init_kind) {
    case InitKind::layered:
      os << "initial = layered\n";
      os << "initial_interfaces = " << fmt_list(sc.model.init_layers.interfaces_m) << "\n";
      os << "initial_velocities = " << fmt_list(sc.model.init_layers.velocities_kms) << "\n";
      break;
    case InitKind::smooth_of_truth:
      os << "initial = smooth\n";
      os << "initial_smooth_sigma = " << fmt(sc.model.init_smooth_sigma_m) << "\n";
      break;
    case InitKind::file:
      os << "initial = file\n";
      os << "initial_file = " << sc.model.init_file << "\n";
      break;
  }
  const auto& a = sc.acquisition;
  os << "[acquisition]\n";
  os << "n_sources = " << a.n_sources << "\n";
  os << "source_depth = " << fmt(a.source_depth_m) << "\n";
  os << "source_x0 = " << fmt(a.source_x0_m) << "\n";
  os << "source_spacing = " << fmt(a.source_spacing_m) << "\n";
  os << "n_receivers = " << a.n_receivers << "\n";
  os << "receiver_depth = " << fmt(a.receiver_depth_m) << "\n";
  os << "receiver_x0 = " << fmt(a.receiver_x0_m) << "\n";
  os << "receiver_spacing = " << fmt(a.receiver_spacing_m) << "\n";
  os << "peak_freq = " << fmt(a.peak_freq_hz) << "\n";
  os << "wavelet_delay = " << fmt(a.wavelet_delay_s) << "\n";
  os << "bandpass_lo = " << fmt(a.bandpass_lo_hz) << "\n";
  os << "bandpass_hi = " << fmt(a.bandpass_hi_hz) << "\n";
  os << "record_time = " << fmt(a.record_time_s) << "\n";
  os << "dt = " << fmt(a.dt_s) << "\n";
  const auto& inv = sc.inversion;
  os << "[inversion]\n";
  os << "misfit = " << inv.misfit << "\n";
  os << "normalization = " << inv.normalization << "\n";
  os << "c = " << fmt(inv.c) << "\n";
  os << "c_scale = " << fmt(inv.c_scale) << "\n";
  os << "differentiate_normalization = " << (inv.differentiate_normalization ? "true" : "false")
     << "\n";
  os << "max_iters = " << inv.max_iters << "\n";
  os << "lbfgs_memory = " << inv.lbfgs_memory << "\n";
  os << "c_min = " << fmt(inv.c_min_kms) << "\n";
  os << "c_max = " << fmt(inv.c_max_kms) << "\n";
  os << "grad_tol = " << fmt(inv.grad_tol_rel) << "\n";
  os << "mask_top = " << fmt(inv.mask_top_m) << "\n";
  os << "snapshot_every = " << inv.snapshot_every << "\n";
  os << "ma_fallback = " << (inv.ma_fallback ? "true" : "false") << "\n";
  os << "[output]\n";
  os << "prefix = " << sc.output_prefix << "\n";
  return os.str();
}

Scenario parse_scenario(const std::string& text) {
  Scenario sc;
  sc.output_prefix.clear();
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = line.substr(1, line.size() - 2);
      if (section != "model" && section != "acquisition" && section != "inversion" &&
          section != "output")
        throw config_error("scenario: unknown section [" + section + "]");
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error("scenario line " + std::to_string(lineno) +
                         ": expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));

    auto& m = sc.model;
    auto& a = sc.acquisition;
    auto& inv = sc.inversion;
    if (section.empty()) {
      if (key == "name") sc.name = val;
      else throw config_error("scenario: unknown key '" + key + "' before any section");
    } else if (section == "model") {
      if (key == "kind") {
        if (val == "layered") m.kind = ModelKind::layered;
        else if (val == "salt") m.kind = ModelKind::salt;
        else if (val == "file") m.kind = ModelKind::file;
        else throw config_error("scenario: model kind must be layered|salt|file");
      } else if (key == "nz") m.nz = static_cast<int>(parse_num(key, val));
      else if (key == "nx") m.nx = static_cast<int>(parse_num(key, val));
      else if (key == "dz") m.dz = parse_num(key, val);
      else if (key == "dx") m.dx = parse_num(key, val);
      else if (key == "interfaces") m.layers.interfaces_m = parse_list(val);
      else if (key == "velocities") m.layers.velocities_kms = parse_list(val);
      else if (key == "file") m.file = val;
      else if (key == "salt_c") m.salt_c_kms = parse_num(key, val);
      else if (key == "background_c0") m.bg_c0_kms = parse_num(key, val);
      else if (key == "background_c1") m.bg_c1_kms = parse_num(key, val);
      else if (key == "initial") {
        if (val == "layered") m.init_kind = InitKind::layered;
        else if (val == "smooth") m.init_kind = InitKind::smooth_of_truth;
        else if (val == "file") m.init_kind = InitKind::file;
        else throw config_error("scenario: initial must be layered|smooth|file");
      } else if (key == "initial_interfaces") m.init_layers.interfaces_m = parse_list(val);
      else if (key == "initial_velocities") m.init_layers.velocities_kms = parse_list(val);
      else if (key == "initial_smooth_sigma") m.init_smooth_sigma_m = parse_num(key, val);
      else if (key == "initial_file") m.init_file = val;
      else throw config_error("scenario: unknown key '" + key + "' in [model]");
    } else if (section == "acquisition") {
      if (key == "n_sources") a.n_sources = static_cast<int>(parse_num(key, val));
      else if (key == "source_depth") a.source_depth_m = parse_num(key, val);
      else if (key == "source_x0") a.source_x0_m = parse_num(key, val);
      else if (key == "source_spacing") a.source_spacing_m = parse_num(key, val);
      else if (key == "n_receivers") a.n_receivers = static_cast<int>(parse_num(key, val));
      else if (key == "receiver_depth") a.receiver_depth_m = parse_num(key, val);
      else if (key == "receiver_x0") a.receiver_x0_m = parse_num(key, val);
      else if (key == "receiver_spacing") a.receiver_spacing_m = parse_num(key, val);
      else if (key == "peak_freq") a.peak_freq_hz = parse_num(key, val);
      else if (key == "wavelet_delay") a.wavelet_delay_s = parse_num(key, val);
      else if (key == "bandpass_lo") a.bandpass_lo_hz = parse_num(key, val);
      else if (key == "bandpass_hi") a.bandpass_hi_hz = parse_num(key, val);
      else if (key == "record_time") a.record_time_s = parse_num(key, val);
      else if (key == "dt") a.dt_s = parse_num(key, val);
      else throw config_error("scenario: unknown key '" + key + "' in [acquisition]");
    } else if (section == "inversion") {
      if (key == "misfit") inv.misfit = val;
      else if (key == "normalization") inv.normalization = val;
      else if (key == "c") inv.c = parse_num(key, val);
      else if (key == "c_scale") inv.c_scale = parse_num(key, val);
      else if (key == "differentiate_normalization")
        inv.differentiate_normalization = parse_bool(key, val);
      else if (key == "max_iters") inv.max_iters = static_cast<int>(parse_num(key, val));
      else if (key == "lbfgs_memory") inv.lbfgs_memory = static_cast<int>(parse_num(key, val));
      else if (key == "c_min") inv.c_min_kms = parse_num(key, val);
      else if (key == "c_max") inv.c_max_kms = parse_num(key, val);
      else if (key == "grad_tol") inv.grad_tol_rel = parse_num(key, val);
      else if (key == "mask_top") inv.mask_top_m = parse_num(key, val);
      else if (key == "snapshot_every") inv.snapshot_every = static_cast<int>(parse_num(key, val));
      else if (key == "ma_fallback") inv.ma_fallback = parse_bool(key, val);
      else throw config_error("scenario: unknown key '" + key + "' in [inversion]");
    } else if (section == "output") {
      if (key == "prefix") sc.output_prefix = val;
      else throw config_error("scenario: unknown key '" + key + "' in [output]");
    }
  }
  if (sc.output_prefix.empty()) sc.output_prefix = "run";
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw io_error("cannot open scenario file: " + path.string());
  std::stringstream buf;
  buf << is.rdbuf();
  return parse_scenario(buf.str());
}

}  // namespace otfwi
