#pragma once

#include "otfwi/types.hpp"

namespace otfwi::wave {

enum class Edge { dirichlet, absorbing };

struct Boundaries {
  Edge top = Edge::dirichlet;  // free surface
  Edge bottom = Edge::absorbing;
  Edge left = Edge::absorbing;
  Edge right = Edge::absorbing;

  /// Free surface on top, first-order Clayton-Engquist elsewhere.
  static Boundaries seismic() { return Boundaries{}; }
  /// u = 0 on all four edges; conserves discrete energy.
  static Boundaries reflecting() {
    return Boundaries{Edge::dirichlet, Edge::dirichlet, Edge::dirichlet, Edge::dirichlet};
  }
};

struct SimConfig {
  Boundaries boundaries{};
  double cfl_safety = 0.9;
  int snapshot_stride = 1;  // wavefield storage decimation
};

/// Ricker wavelet (1 - 2 pi^2 f^2 (t-d)^2) exp(-pi^2 f^2 (t-d)^2), peak 1 at t = d.
Trace ricker(double peak_freq_hz, double delay_s, const TimeAxis& axis);

/// Zero-phase band-pass: cosine-tapered frequency mask (taper width 1 Hz)
/// passing [f_lo, f_hi]. f_lo == 0 keeps DC through f_hi.
Trace bandpass(const Trace& trace, double f_lo_hz, double f_hi_hz);

/// Largest stable time step for the 2nd-order leapfrog / 5-point scheme,
/// safety * min(dz, dx) / (c_max * sqrt(2)).
double max_stable_dt(const VelocityModel& model, double safety = 0.9);
void check_cfl(const VelocityModel& model, const TimeAxis& axis, double safety = 0.9);

struct ForwardResult {
  ShotRecord record;
  Wavefield field;  // populated only when requested
};

/// Leapfrog solve of m u_tt - lap(u) = s for one shot. The source time
/// function is injected at the shot's (snapped) source node as an additive
/// dt^2/m * s(t)/(dz*dx) term; receivers sample u at every step.
ForwardResult forward(const VelocityModel& model, const Acquisition& acq, int shot,
                      bool record_wavefield, const SimConfig& cfg = {});

/// Exact algorithmic transpose of forward(): propagates the misfit
/// derivative (one row per receiver) backwards in time and returns the
/// adjoint field v scaled so that the model gradient is
/// -sum_n u_tt(x, t_n) v(x, t_n) dt. v vanishes on boundary nodes.
Wavefield adjoint_solve(const VelocityModel& model, const Acquisition& acq,
                        const ShotRecord& adjoint_source, const SimConfig& cfg = {});

/// Zero-lag correlation of -u_tt with the adjoint field: the gradient of the
/// data misfit with respect to squared slowness m (SI), per grid cell.
/// Boundary ring entries are zero by construction.
MatrixXd imaging_condition(const Wavefield& u, const Wavefield& v, const TimeAxis& axis);

}  // namespace otfwi::wave
