#pragma once

#include <filesystem>
#include <functional>
#include <optional>

#include "otfwi/misfit_1d.hpp"
#include "otfwi/monge_ampere.hpp"
#include "otfwi/wave_sim.hpp"

namespace otfwi {

enum class MisfitKind { l2, w1d, w2d, j3 };

std::string misfit_tag(MisfitKind kind);
MisfitKind misfit_from_tag(const std::string& tag);

struct InversionConfig {
  MisfitKind misfit = MisfitKind::w1d;
  NormConfig norm{};
  ma::MaConfig ma{};
  bool ma_fallback_to_trace = false;  // fall back to J1 when the MA solve fails

  int max_iters = 100;
  int lbfgs_memory = 10;
  double grad_tol_rel = 0.0;  // stop when ||g|| <= rel * ||g_0||; 0 disables
  double c_min_kms = 0.3;
  double c_max_kms = 8.0;
  MatrixXd update_mask;  // 1 = free cell; empty = all free
  int source_mask_radius = 2;
  double first_step_max_dc_kms = 0.05;  // cap on the first model update (50 m/s)
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  int ls_max_evals = 12;
  int threads = 1;
  wave::SimConfig sim{};

  int snapshot_every = 0;                // model binaries every k iterations
  std::filesystem::path snapshot_dir;    // empty = no snapshots
  std::filesystem::path log_csv;         // empty = no per-iteration CSV
};

struct InversionState {
  VelocityModel model;
  int iterations = 0;
  std::vector<double> misfit_history;
  std::vector<double> grad_norm_history;
  std::vector<double> step_history;
  std::vector<double> model_error_history;  // filled when a truth model is given
  std::vector<double> seconds_history;
  std::string status;  // "converged", "max_iters", "line_search_failure"
};

struct GradientResult {
  double misfit = 0.0;
  MatrixXd grad_m;  // w.r.t. squared slowness (SI), masked
  std::vector<ShotRecord> synthetic;  // kept when keep_synthetic is set
  std::vector<std::string> warnings;
};

MisfitEval evaluate_misfit(const ShotRecord& synth, const ShotRecord& observed,
                           const InversionConfig& cfg);

/// Per-shot forward + misfit + adjoint + imaging, summed over shots in shot
/// order (deterministic under any thread count), then masked.
GradientResult model_gradient(const VelocityModel& model, const Acquisition& acq,
                              const std::vector<ShotRecord>& observed,
                              const InversionConfig& cfg, bool keep_synthetic = false);

/// Mask actually applied by the optimizer: user mask AND a one-cell boundary
/// ring AND disks of cfg.source_mask_radius cells around each source.
MatrixXd effective_mask(const Grid2D& grid, const Acquisition& acq,
                        const InversionConfig& cfg);

struct IterationInfo {
  int iteration = 0;  // 1-based, reported after the iterate is accepted
  double misfit = 0.0;
  double grad_norm = 0.0;
  const VelocityModel* model = nullptr;
  const std::vector<ShotRecord>* synthetic = nullptr;
};
using IterationCallback = std::function<void(const IterationInfo&)>;

/// L-BFGS (two-loop recursion, strong Wolfe line search) on the squared
/// slowness, with bound clipping to [c_min, c_max] after every update.
InversionState lbfgs_minimize(const VelocityModel& initial, const Acquisition& acq,
                              const std::vector<ShotRecord>& observed,
                              const InversionConfig& cfg,
                              const VelocityModel* truth = nullptr,
                              const IterationCallback& callback = {});

/// Frobenius norm of the velocity difference, optionally relative to truth.
double model_error(const VelocityModel& current, const VelocityModel& truth,
                   bool normalized = false);

}  // namespace otfwi
