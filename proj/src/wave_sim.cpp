#include "otfwi/wave_sim.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace otfwi::wave {

namespace {

constexpr double kPi = std::numbers::pi;

struct Stepper {
  int nz, nx;
  double dz, dx, dt;
  Boundaries bc;
  MatrixXd dt2_over_m;           // dt^2 / m, SI
  ArrayXd kap_left, kap_right;   // per-row absorbing coefficients
  ArrayXd kap_top, kap_bottom;   // per-column

  Stepper(const VelocityModel& model, const TimeAxis& axis, const SimConfig& cfg)
      : nz(model.grid.nz),
        nx(model.grid.nx),
        dz(model.grid.dz),
        dx(model.grid.dx),
        dt(axis.dt),
        bc(cfg.boundaries) {
    model.validate();
    axis.validate();
    check_cfl(model, axis, cfg.cfl_safety);
    dt2_over_m = (dt * dt) * model.slowness_sq_si().array().inverse().matrix();

    // Clayton-Engquist coefficient (c dt - h)/(c dt + h) from the local speed.
    auto kappa = [&](double c_kms, double h) {
      const double cdt = 1e3 * c_kms * dt;
      return (cdt - h) / (cdt + h);
    };
    kap_left = ArrayXd::Zero(nz);
    kap_right = ArrayXd::Zero(nz);
    for (int i = 0; i < nz; ++i) {
      kap_left(i) = kappa(model.c(i, 0), dx);
      kap_right(i) = kappa(model.c(i, nx - 1), dx);
    }
    kap_top = ArrayXd::Zero(nx);
    kap_bottom = ArrayXd::Zero(nx);
    for (int j = 0; j < nx; ++j) {
      kap_top(j) = kappa(model.c(0, j), dz);
      kap_bottom(j) = kappa(model.c(nz - 1, j), dz);
    }
  }

  // One leapfrog step: next = step(cur, prev) + source. Boundary rows are
  // written after the interior update in a fixed order (left, right, top,
  // bottom) so the transpose below can reverse it exactly.
  void step(const MatrixXd& cur, const MatrixXd& prev, MatrixXd& next,
            int src_iz, int src_ix, double src_val) const {
    const int mi = nz - 2, mj = nx - 2;
    next.setZero();
    const auto ci = cur.array().block(1, 1, mi, mj);
    const auto lap = (cur.array().block(0, 1, mi, mj) - 2.0 * ci +
                      cur.array().block(2, 1, mi, mj)) /
                         (dz * dz) +
                     (cur.array().block(1, 0, mi, mj) - 2.0 * ci +
                      cur.array().block(1, 2, mi, mj)) /
                         (dx * dx);
    next.array().block(1, 1, mi, mj) =
        2.0 * ci - prev.array().block(1, 1, mi, mj) +
        dt2_over_m.array().block(1, 1, mi, mj) * lap;

    if (src_val != 0.0)
      next(src_iz, src_ix) += dt2_over_m(src_iz, src_ix) * src_val / (dz * dx);

    if (bc.left == Edge::absorbing)
      for (int i = 1; i < nz - 1; ++i)
        next(i, 0) = cur(i, 1) + kap_left(i) * (next(i, 1) - cur(i, 0));
    if (bc.right == Edge::absorbing)
      for (int i = 1; i < nz - 1; ++i)
        next(i, nx - 1) = cur(i, nx - 2) + kap_right(i) * (next(i, nx - 2) - cur(i, nx - 1));
    if (bc.top == Edge::absorbing)
      for (int j = 0; j < nx; ++j)
        next(0, j) = cur(1, j) + kap_top(j) * (next(1, j) - cur(0, j));
    if (bc.bottom == Edge::absorbing)
      for (int j = 0; j < nx; ++j)
        next(nz - 1, j) = cur(nz - 2, j) + kap_bottom(j) * (next(nz - 2, j) - cur(nz - 1, j));
  }

  // Exact transpose of step(): consumes lam_next (the dual of the produced
  // field) and accumulates into the duals of cur and prev. After the edge
  // reversal lam_next is supported on interior nodes only; callers may
  // snapshot it at that point via on_interior_dual.
  template <typename Hook>
  void step_transpose(MatrixXd& lam_next, MatrixXd& lam_cur, MatrixXd& lam_prev,
                      Hook&& on_interior_dual) const {
    const int mi = nz - 2, mj = nx - 2;

    // Edge assignments, reversed in reverse order of the forward writes.
    if (bc.bottom == Edge::absorbing) {
      for (int j = 0; j < nx; ++j) {
        const double t = lam_next(nz - 1, j);
        lam_next(nz - 1, j) = 0.0;
        lam_cur(nz - 2, j) += t;
        lam_next(nz - 2, j) += kap_bottom(j) * t;
        lam_cur(nz - 1, j) -= kap_bottom(j) * t;
      }
    } else {
      lam_next.row(nz - 1).setZero();
    }
    if (bc.top == Edge::absorbing) {
      for (int j = 0; j < nx; ++j) {
        const double t = lam_next(0, j);
        lam_next(0, j) = 0.0;
        lam_cur(1, j) += t;
        lam_next(1, j) += kap_top(j) * t;
        lam_cur(0, j) -= kap_top(j) * t;
      }
    } else {
      lam_next.row(0).setZero();
    }
    if (bc.right == Edge::absorbing) {
      for (int i = 1; i < nz - 1; ++i) {
        const double t = lam_next(i, nx - 1);
        lam_next(i, nx - 1) = 0.0;
        lam_cur(i, nx - 2) += t;
        lam_next(i, nx - 2) += kap_right(i) * t;
        lam_cur(i, nx - 1) -= kap_right(i) * t;
      }
    } else {
      lam_next.col(nx - 1).segment(1, nz - 2).setZero();
    }
    if (bc.left == Edge::absorbing) {
      for (int i = 1; i < nz - 1; ++i) {
        const double t = lam_next(i, 0);
        lam_next(i, 0) = 0.0;
        lam_cur(i, 1) += t;
        lam_next(i, 1) += kap_left(i) * t;
        lam_cur(i, 0) -= kap_left(i) * t;
      }
    } else {
      lam_next.col(0).segment(1, nz - 2).setZero();
    }

    on_interior_dual(static_cast<const MatrixXd&>(lam_next));

    // Interior leapfrog update, transposed.
    lam_prev.array().block(1, 1, mi, mj) -= lam_next.array().block(1, 1, mi, mj);
    lam_cur.array().block(1, 1, mi, mj) += 2.0 * lam_next.array().block(1, 1, mi, mj);

    // Transpose of the interior Laplacian: scatter the weighted interior
    // dual through the 5-point stencil onto the full grid.
    MatrixXd pad = MatrixXd::Zero(nz + 2, nx + 2);
    pad.array().block(2, 2, mi, mj) = dt2_over_m.array().block(1, 1, mi, mj) *
                                      lam_next.array().block(1, 1, mi, mj);
    lam_cur.array() += (pad.array().block(0, 1, nz, nx) -
                        2.0 * pad.array().block(1, 1, nz, nx) +
                        pad.array().block(2, 1, nz, nx)) /
                           (dz * dz) +
                       (pad.array().block(1, 0, nz, nx) -
                        2.0 * pad.array().block(1, 1, nz, nx) +
                        pad.array().block(1, 2, nz, nx)) /
                           (dx * dx);
  }

  std::pair<int, int> interior_node(const Grid2D& grid, double z, double x,
                                    const char* what) const {
    auto [iz, ix] = grid.nearest_node(z, x);
    if (iz <= 0 || iz >= nz - 1 || ix <= 0 || ix >= nx - 1)
      throw config_error(std::string(what) +
                         " snaps onto the boundary ring; place it at least one "
                         "cell inside the grid");
    return {iz, ix};
  }
};

}  // namespace

Trace ricker(double peak_freq_hz, double delay_s, const TimeAxis& axis) {
  if (peak_freq_hz <= 0.0) throw config_error("ricker: peak frequency must be positive");
  axis.validate();
  ArrayXd v(axis.nt);
  const double a = kPi * kPi * peak_freq_hz * peak_freq_hz;
  for (int n = 0; n < axis.nt; ++n) {
    const double tau = axis.t(n) - delay_s;
    v(n) = (1.0 - 2.0 * a * tau * tau) * std::exp(-a * tau * tau);
  }
  return Trace(std::move(v), axis);
}

Trace bandpass(const Trace& trace, double f_lo_hz, double f_hi_hz) {
  const double nyquist = 0.5 / trace.axis.dt;
  if (f_lo_hz < 0.0 || f_lo_hz >= f_hi_hz)
    throw config_error("bandpass: need 0 <= f_lo < f_hi");
  if (f_hi_hz >= nyquist)
    throw config_error("bandpass: f_hi = " + std::to_string(f_hi_hz) +
                       " Hz >= Nyquist " + std::to_string(nyquist) + " Hz");
  const int nt = trace.axis.nt;
  const double taper = 1.0;  // Hz

  std::vector<double> x(trace.values.data(), trace.values.data() + nt);
  std::vector<std::complex<double>> spec;
  Eigen::FFT<double> fft;
  fft.fwd(spec, x);

  auto mask = [&](double f) {
    if (f_lo_hz > 0.0) {
      const double lo0 = std::max(f_lo_hz - taper, 0.0);
      if (f < lo0) return 0.0;
      if (f < f_lo_hz) return 0.5 * (1.0 - std::cos(kPi * (f - lo0) / (f_lo_hz - lo0)));
    }
    if (f <= f_hi_hz) return 1.0;
    if (f < f_hi_hz + taper) return 0.5 * (1.0 + std::cos(kPi * (f - f_hi_hz) / taper));
    return 0.0;
  };
  for (int k = 0; k < nt; ++k) {
    const double f = std::abs(k <= nt / 2 ? k : k - nt) / (nt * trace.axis.dt);
    spec[static_cast<size_t>(k)] *= mask(f);
  }
  std::vector<double> y;
  fft.inv(y, spec);
  return Trace(Eigen::Map<ArrayXd>(y.data(), nt), trace.axis);
}

double max_stable_dt(const VelocityModel& model, double safety) {
  const double c_max_mps = 1e3 * model.c_max();
  return safety * std::min(model.grid.dz, model.grid.dx) /
         (c_max_mps * std::sqrt(2.0));
}

void check_cfl(const VelocityModel& model, const TimeAxis& axis, double safety) {
  const double dt_max = max_stable_dt(model, safety);
  if (axis.dt > dt_max)
    throw config_error("CFL violation: dt = " + std::to_string(axis.dt) +
                       " s exceeds the maximal stable dt = " + std::to_string(dt_max) +
                       " s for this model");
}

ForwardResult forward(const VelocityModel& model, const Acquisition& acq, int shot,
                      bool record_wavefield, const SimConfig& cfg) {
  acq.validate(model.grid);
  if (shot < 0 || shot >= acq.n_shots())
    throw config_error("forward: shot index " + std::to_string(shot) + " out of range");
  const TimeAxis axis = acq.wavelet.axis;
  Stepper st(model, axis, cfg);

  const auto [sz, sx] = st.interior_node(model.grid, acq.sources[shot].first,
                                         acq.sources[shot].second, "source");
  std::vector<std::pair<int, int>> rec_nodes;
  rec_nodes.reserve(acq.receivers.size());
  for (const auto& [z, x] : acq.receivers)
    rec_nodes.push_back(st.interior_node(model.grid, z, x, "receiver"));

  ForwardResult out;
  out.record.axis = axis;
  out.record.shot_id = shot;
  out.record.data = MatrixXd::Zero(acq.n_receivers(), axis.nt);
  if (record_wavefield) {
    out.field.grid = model.grid;
    out.field.axis = axis;
    out.field.stride = cfg.snapshot_stride;
    out.field.snapshots.reserve(static_cast<size_t>(axis.nt / cfg.snapshot_stride + 1));
  }

  MatrixXd prev = MatrixXd::Zero(st.nz, st.nx);
  MatrixXd cur = MatrixXd::Zero(st.nz, st.nx);
  MatrixXd next(st.nz, st.nx);

  if (record_wavefield) out.field.snapshots.push_back(cur);
  for (int n = 0; n < axis.nt; ++n) {
    for (int r = 0; r < acq.n_receivers(); ++r)
      out.record.data(r, n) = cur(rec_nodes[static_cast<size_t>(r)].first,
                                  rec_nodes[static_cast<size_t>(r)].second);
    if (n == axis.nt - 1) break;
    st.step(cur, prev, next, sz, sx, acq.wavelet.values(n));
    prev.swap(cur);
    cur.swap(next);
    if (record_wavefield && (n + 1) % cfg.snapshot_stride == 0)
      out.field.snapshots.push_back(cur);
  }
  return out;
}

Wavefield adjoint_solve(const VelocityModel& model, const Acquisition& acq,
                        const ShotRecord& adjoint_source, const SimConfig& cfg) {
  acq.validate(model.grid);
  const TimeAxis axis = adjoint_source.axis;
  if (!(axis == acq.wavelet.axis))
    throw config_error("adjoint_solve: adjoint source axis differs from simulation axis");
  if (adjoint_source.n_receivers() != acq.n_receivers())
    throw config_error("adjoint_solve: receiver count mismatch");
  Stepper st(model, axis, cfg);

  std::vector<std::pair<int, int>> rec_nodes;
  for (const auto& [z, x] : acq.receivers)
    rec_nodes.push_back(st.interior_node(model.grid, z, x, "receiver"));

  Wavefield v;
  v.grid = model.grid;
  v.axis = axis;
  v.stride = cfg.snapshot_stride;

  const MatrixXd dt_over_m =
      axis.dt * model.slowness_sq_si().array().inverse().matrix();

  std::vector<MatrixXd> rev_snaps;  // collected at n = nt-2 .. 0
  MatrixXd lam_a = MatrixXd::Zero(st.nz, st.nx);
  MatrixXd lam_b = MatrixXd::Zero(st.nz, st.nx);
  MatrixXd lam_x(st.nz, st.nx);

  for (int n = axis.nt - 2; n >= 0; --n) {
    lam_x.swap(lam_a);  // dual of the field produced at step n
    lam_a.swap(lam_b);
    lam_b.setZero();
    for (int r = 0; r < acq.n_receivers(); ++r)
      lam_x(rec_nodes[static_cast<size_t>(r)].first,
            rec_nodes[static_cast<size_t>(r)].second) += adjoint_source.data(r, n + 1);

    const bool keep = (n % cfg.snapshot_stride == 0);
    st.step_transpose(lam_x, lam_a, lam_b, [&](const MatrixXd& dual) {
      if (keep) rev_snaps.push_back(dual.cwiseProduct(dt_over_m));
    });
  }

  v.snapshots.assign(rev_snaps.rbegin(), rev_snaps.rend());
  // Pad the final time level (no step produces it) so u and v align.
  if ((axis.nt - 1) % cfg.snapshot_stride == 0)
    v.snapshots.push_back(MatrixXd::Zero(st.nz, st.nx));
  return v;
}

MatrixXd imaging_condition(const Wavefield& u, const Wavefield& v, const TimeAxis& axis) {
  if (!u.grid.same_shape(v.grid))
    throw config_error("imaging_condition: wavefield grids differ");
  if (!(u.axis == axis) || !(v.axis == axis) || u.stride != v.stride)
    throw config_error("imaging_condition: wavefield axes/strides differ");
  const int nz = u.grid.nz, nx = u.grid.nx;
  const double dt_eff = u.stride * axis.dt;

  MatrixXd grad = MatrixXd::Zero(nz, nx);
  const MatrixXd zero = MatrixXd::Zero(nz, nx);
  const int n_pairs = std::min(u.n_stored(), v.n_stored());
  MatrixXd udd(nz, nx);
  for (int s = 0; s + 1 < n_pairs; ++s) {
    const MatrixXd& um = (s == 0) ? zero : u.snapshots[static_cast<size_t>(s - 1)];
    udd = (u.snapshots[static_cast<size_t>(s + 1)] -
           2.0 * u.snapshots[static_cast<size_t>(s)] + um) /
          (dt_eff * dt_eff);
    grad.noalias() -= dt_eff * udd.cwiseProduct(v.snapshots[static_cast<size_t>(s)]);
  }
  return grad;
}

}  // namespace otfwi::wave
