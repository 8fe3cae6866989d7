#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "otfwi/optimizer.hpp"
#include "otfwi/types.hpp"

namespace otfwi {

struct LayeredSpec {
  std::vector<double> interfaces_m;    // increasing interface depths
  std::vector<double> velocities_kms;  // one more entry than interfaces
};

enum class ModelKind { layered, salt, file };
enum class InitKind { layered, smooth_of_truth, file };

struct ModelSpec {
  ModelKind kind = ModelKind::layered;
  int nz = 0, nx = 0;
  double dz = 0.0, dx = 0.0;
  LayeredSpec layers;      // truth (layered kind)
  std::string file;        // truth (file kind), grid read from the sidecar
  // salt kind: linear background plus an elliptic fast inclusion
  double salt_c_kms = 4.5;
  double bg_c0_kms = 1.5, bg_c1_kms = 4.5;  // background speed at top/bottom
  InitKind init_kind = InitKind::layered;
  LayeredSpec init_layers;
  double init_smooth_sigma_m = 0.0;
  std::string init_file;
};

struct AcquisitionSpec {
  int n_sources = 1;
  double source_depth_m = 0.0, source_x0_m = 0.0, source_spacing_m = 0.0;
  int n_receivers = 1;
  double receiver_depth_m = 0.0, receiver_x0_m = 0.0, receiver_spacing_m = 0.0;
  double peak_freq_hz = 5.0;
  double wavelet_delay_s = 0.3;
  double bandpass_lo_hz = 0.0, bandpass_hi_hz = 0.0;  // both zero = no filter
  double record_time_s = 1.0;
  double dt_s = 0.004;
};

/// Serializable subset of the inversion configuration.
struct InversionSpec {
  std::string misfit = "w1d";
  std::string normalization = "signsensitive";  // linear | signsensitive | exponential
  double c = 0.0;
  double c_scale = 10.0;
  bool differentiate_normalization = true;
  int max_iters = 150;
  int lbfgs_memory = 10;
  double c_min_kms = 0.3, c_max_kms = 8.0;
  double grad_tol_rel = 0.0;
  double mask_top_m = 0.0;  // freeze cells shallower than this depth
  int snapshot_every = 0;
  bool ma_fallback = false;
};

struct Scenario {
  std::string name;
  ModelSpec model;
  AcquisitionSpec acquisition;
  InversionSpec inversion;
  std::string output_prefix = "run";
};

/// Piecewise-constant-in-depth model; interfaces snap to the nearest cell
/// boundary (within dz/2 of the request).
VelocityModel build_layered(const std::vector<double>& interface_depths_m,
                            const std::vector<double>& velocities_kms,
                            const Grid2D& grid);

/// Separable Gaussian blur with reflective boundaries; sigma in meters.
VelocityModel smooth_model(const VelocityModel& model, double sigma_m);

/// Three-layer sub-reflection study (the reflection-only benchmark). The
/// desk-scale default runs end to end in minutes; full_scale restores the
/// 52-source / 301-receiver / 3.8 s acquisition.
Scenario scenario_three_layer(bool full_scale = false);

/// Salt-body synthetic: smooth background truth plus a high-velocity
/// inclusion, initial model is the background alone.
Scenario scenario_bp_like(bool full_scale = false);

/// External-model scenario; the model file (grid binary + sidecar) supplies
/// the truth, the initial model is a Gaussian-smoothed copy.
Scenario scenario_marmousi_like(const std::string& model_file, bool full_scale = false);

Grid2D scenario_grid(const Scenario& sc);
VelocityModel scenario_truth_model(const Scenario& sc);
VelocityModel scenario_initial_model(const Scenario& sc);
Acquisition scenario_acquisition(const Scenario& sc);
InversionConfig scenario_inversion_config(const Scenario& sc);

/// CFL, geometry-in-bounds, record-length and mask consistency checks.
void validate_scenario(const Scenario& sc);

Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::filesystem::path& path);
std::string serialize_scenario(const Scenario& sc);

}  // namespace otfwi
