#include "otfwi/analysis.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

#include "otfwi/grid_io.hpp"
#include "otfwi/misfit_1d.hpp"
#include "otfwi/rng.hpp"
#include "otfwi/wave_sim.hpp"

namespace otfwi {

namespace {

double fit_loglog_slope(const std::vector<int>& xs, const ArrayXd& ys) {
  const int n = static_cast<int>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    const double lx = std::log(double(xs[static_cast<size_t>(i)]));
    const double ly = std::log(std::max(ys(i), 1e-300));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

ShotRecord single_trace_record(const Trace& t) {
  ShotRecord r;
  r.data = t.values.matrix().transpose();
  r.axis = t.axis;
  return r;
}

}  // namespace

void write_sweep_csv(const LandscapeSweep& sweep, const std::filesystem::path& path) {
  if (sweep.axis2.size() == 0) {
    CsvWriter csv(path, {sweep.axis1_name, sweep.misfit_tag});
    for (Eigen::Index i = 0; i < sweep.axis1.size(); ++i)
      csv.row({sweep.axis1(i), sweep.values(i, 0)});
  } else {
    CsvWriter csv(path, {sweep.axis1_name, sweep.axis2_name, sweep.misfit_tag});
    for (Eigen::Index i = 0; i < sweep.axis1.size(); ++i)
      for (Eigen::Index j = 0; j < sweep.axis2.size(); ++j)
        csv.row({sweep.axis1(i), sweep.axis2(j), sweep.values(i, j)});
  }
}

Trace two_ricker_signal() {
  const TimeAxis axis{641, 0.005};  // 3.2 s
  Trace a = wave::ricker(5.0, 1.3, axis);
  const Trace b = wave::ricker(5.0, 1.95, axis);
  a.values += 0.8 * b.values;
  return a;
}

Trace shift_trace(const Trace& signal, double shift_s) {
  const int nt = signal.axis.nt;
  const double dt = signal.axis.dt;
  const double k_real = shift_s / dt;
  const double peak = signal.values.abs().maxCoeff();

  ArrayXd out = ArrayXd::Zero(nt);
  const int k0 = static_cast<int>(std::floor(k_real));
  const double frac = k_real - k0;
  auto sample = [&](int n, int k) -> double {
    const int m = n - k;
    return (m >= 0 && m < nt) ? signal.values(m) : 0.0;
  };
  for (int n = 0; n < nt; ++n)
    out(n) = std::abs(frac) < 1e-9
                 ? sample(n, k0)
                 : (1.0 - frac) * sample(n, k0) + frac * sample(n, k0 + 1);

  // Reject shifts that push signal content off the record.
  double lost = 0.0;
  const int ka = static_cast<int>(std::ceil(std::abs(k_real)));
  for (int n = 0; n < ka && n < nt; ++n) {
    const int m = k_real > 0 ? nt - 1 - n : n;
    lost = std::max(lost, std::abs(signal.values(m)));
  }
  if (lost > 1e-9 * peak)
    throw config_error("shift_trace: shift " + std::to_string(shift_s) +
                       " s pushes signal content off the record");
  return Trace(std::move(out), signal.axis);
}

LandscapeSweep landscape_shift(const Trace& signal, const ArrayXd& shifts_s,
                               MisfitKind kind, const NormConfig& norm) {
  for (Eigen::Index i = 1; i < shifts_s.size(); ++i)
    if (shifts_s(i) <= shifts_s(i - 1))
      throw config_error("landscape_shift: shift axis must be strictly increasing");

  LandscapeSweep sweep;
  sweep.axis1 = shifts_s;
  sweep.values.resize(shifts_s.size(), 1);
  sweep.misfit_tag = misfit_tag(kind);

  const ShotRecord observed = single_trace_record(signal);
  for (Eigen::Index i = 0; i < shifts_s.size(); ++i) {
    const ShotRecord synth = single_trace_record(shift_trace(signal, shifts_s(i)));
    double value = 0.0;
    switch (kind) {
      case MisfitKind::l2: value = misfit_l2(synth, observed).value; break;
      case MisfitKind::w1d: value = misfit_j1(synth, observed, norm).value; break;
      case MisfitKind::j3: value = misfit_j3(synth, observed, norm).value; break;
      case MisfitKind::w2d:
        throw config_error("landscape_shift: w2d needs a 2D gather, not a single trace");
    }
    sweep.values(i, 0) = value;
  }
  return sweep;
}

LandscapeSweep landscape_gaussian(const ArrayXd& mu, const ArrayXd& sigma, int samples) {
  if ((sigma <= 0.0).any()) throw config_error("landscape_gaussian: sigma must be positive");
  LandscapeSweep sweep;
  sweep.axis1 = mu;
  sweep.axis2 = sigma;
  sweep.axis1_name = "mu";
  sweep.axis2_name = "sigma";
  sweep.misfit_tag = "w2_sq";
  sweep.values.resize(mu.size(), sigma.size());

  const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  for (Eigen::Index i = 0; i < mu.size(); ++i)
    for (Eigen::Index j = 0; j < sigma.size(); ++j) {
      const double m = mu(i), s = sigma(j);
      // Common axis covering both supports to 8 standard deviations.
      const double lo = std::min(m - 8.0 * s, -8.0);
      const double hi = std::max(m + 8.0 * s, 8.0);
      const ArrayXd x = ArrayXd::LinSpaced(samples, lo, hi);
      ArrayXd f = (-0.5 * ((x - m) / s).square()).exp() * inv_sqrt2pi / s;
      ArrayXd g = (-0.5 * x.square()).exp() * inv_sqrt2pi;
      sweep.values(i, j) = ot1d::w2_squared(x, f, x, g);
    }
  return sweep;
}

NoiseStudy noise_scaling(const Trace& f, const std::vector<int>& piece_counts,
                         int trials, std::uint64_t seed, double amplitude) {
  if (piece_counts.empty() || trials < 1)
    throw config_error("noise_scaling: need piece counts and at least one trial");
  for (size_t i = 1; i < piece_counts.size(); ++i)
    if (piece_counts[i] <= piece_counts[i - 1])
      throw config_error("noise_scaling: piece counts must increase");

  const int nt = f.axis.nt;
  NoiseStudy study;
  study.piece_counts = piece_counts;
  study.w2_mean = ArrayXd::Zero(static_cast<Eigen::Index>(piece_counts.size()));
  study.l2_mean = ArrayXd::Zero(static_cast<Eigen::Index>(piece_counts.size()));

  for (size_t ni = 0; ni < piece_counts.size(); ++ni) {
    const int n_pieces = piece_counts[ni];
    const int len = std::max(1, nt / n_pieces);
    int used = 0;
    for (int trial = 0; trial < trials; ++trial) {
      Rng rng(seed * 1000003ull + static_cast<std::uint64_t>(n_pieces) * 8191ull +
              static_cast<std::uint64_t>(trial));
      ArrayXd noise(nt);
      for (int p = 0; p * len < nt; ++p) {
        const double v = rng.symmetric(amplitude);
        for (int n = p * len; n < std::min(nt, (p + 1) * len); ++n) noise(n) = v;
      }
      const Trace noisy(f.values + noise, f.axis);
      try {
        auto [nf, nns] = normalize_linear(f, noisy);
        study.w2_mean(static_cast<Eigen::Index>(ni)) += w2_squared_1d(nf, nns);
        study.l2_mean(static_cast<Eigen::Index>(ni)) +=
            0.5 * f.axis.dt * noise.square().sum();
        ++used;
      } catch (const numeric_error& e) {
        study.warnings.push_back("N=" + std::to_string(n_pieces) + " trial " +
                                 std::to_string(trial) + " degenerate: " + e.what());
      }
    }
    if (used == 0)
      throw numeric_error("noise_scaling: every trial degenerate at N = " +
                          std::to_string(n_pieces));
    study.w2_mean(static_cast<Eigen::Index>(ni)) /= used;
    study.l2_mean(static_cast<Eigen::Index>(ni)) /= used;
  }
  study.w2_slope = fit_loglog_slope(piece_counts, study.w2_mean);
  study.l2_slope = fit_loglog_slope(piece_counts, study.l2_mean);
  return study;
}

ShotRecord correlated_noise(const ShotRecord& g, double amplitude, std::uint64_t seed,
                            double* snr_db) {
  if (amplitude < 0) throw config_error("correlated_noise: amplitude must be >= 0");
  ShotRecord out = g;
  if (amplitude == 0.0) {
    if (snr_db) *snr_db = std::numeric_limits<double>::infinity();
    return out;
  }
  const double g_inf = std::max(g.data.cwiseAbs().maxCoeff(), 1e-30);
  const int nt = g.axis.nt;
  Rng rng(seed);
  double noise_energy = 0.0;
  for (int r = 0; r < g.n_receivers(); ++r) {
    ArrayXd raw(nt);
    for (int j = 0; j < nt; ++j) raw(j) = rng.symmetric(amplitude);
    for (int j = 0; j < nt; ++j) {
      const double rm = j > 0 ? raw(j - 1) : 0.0;
      const double rp = j + 1 < nt ? raw(j + 1) : 0.0;
      const double smooth = (rm + 2.0 * raw(j) + rp) / 4.0;
      const double n = smooth * (1.0 + g.data(r, j) / g_inf);
      out.data(r, j) += n;
      noise_energy += n * n;
    }
  }
  if (snr_db) {
    const double signal_energy = g.data.squaredNorm();
    *snr_db = 10.0 * std::log10(signal_energy / std::max(noise_energy, 1e-300));
  }
  return out;
}

SpectrumTable residual_spectrum(const ShotRecord& f, const ShotRecord& g) {
  if (f.data.rows() != g.data.rows() || f.data.cols() != g.data.cols() ||
      !(f.axis == g.axis))
    throw config_error("residual_spectrum: geometry mismatch");
  const int nt = f.axis.nt;
  const int n_half = nt / 2 + 1;
  SpectrumTable table;
  table.nt = nt;
  table.dt = f.axis.dt;
  table.freq_hz = ArrayXd::LinSpaced(n_half, 0.0, double(n_half - 1) / (nt * f.axis.dt));
  table.amplitude = ArrayXd::Zero(n_half);
  table.power = ArrayXd::Zero(n_half);

  Eigen::FFT<double> fft;
  std::vector<double> row(static_cast<size_t>(nt));
  std::vector<std::complex<double>> spec;
  for (int r = 0; r < f.n_receivers(); ++r) {
    for (int j = 0; j < nt; ++j)
      row[static_cast<size_t>(j)] = f.data(r, j) - g.data(r, j);
    fft.fwd(spec, row);
    for (int k = 0; k < n_half; ++k) {
      const double mag = std::abs(spec[static_cast<size_t>(k)]);
      table.amplitude(k) += mag;
      table.power(k) += mag * mag;
    }
  }
  table.amplitude /= f.n_receivers();
  table.power /= f.n_receivers();
  return table;
}

namespace {

// Conjugate-symmetry fold weight of a one-sided bin.
double fold_weight(int k, int nt) {
  if (k == 0) return 1.0;
  if (nt % 2 == 0 && k == nt / 2) return 1.0;
  return 2.0;
}

}  // namespace

double spectral_energy(const SpectrumTable& table) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < table.power.size(); ++k)
    acc += fold_weight(static_cast<int>(k), table.nt) * table.power(k);
  return acc / table.nt;
}

double band_energy_fraction(const SpectrumTable& table, double f_lo, double f_hi) {
  double band = 0.0, total = 0.0;
  for (Eigen::Index k = 0; k < table.power.size(); ++k) {
    const double e = fold_weight(static_cast<int>(k), table.nt) * table.power(k);
    total += e;
    if (table.freq_hz(k) >= f_lo && table.freq_hz(k) <= f_hi) band += e;
  }
  return total > 0.0 ? band / total : 0.0;
}

ThicknessStudy thickness_study(const std::vector<double>& thicknesses_km,
                               const Scenario& base, int shot_index) {
  if (base.model.kind != ModelKind::layered || base.model.layers.interfaces_m.size() < 2)
    throw config_error("thickness_study: base scenario must be layered with >= 2 interfaces");
  if (thicknesses_km.size() < 2)
    throw config_error("thickness_study: need at least two thickness values");
  for (size_t i = 1; i < thicknesses_km.size(); ++i)
    if (thicknesses_km[i] <= thicknesses_km[i - 1])
      throw config_error("thickness_study: thicknesses must increase");

  const Grid2D grid = scenario_grid(base);
  const Acquisition acq = scenario_acquisition(base);
  const double z2 = base.model.layers.interfaces_m[1];
  const double v_mid = base.model.layers.velocities_kms[1];
  const double depth = grid.depth();

  ThicknessStudy study;
  study.thickness_km = thicknesses_km;
  study.shot_index = shot_index >= 0 ? shot_index : acq.n_shots() / 2;

  for (double t_km : thicknesses_km) {
    const double bottom = z2 + 1e3 * t_km;
    if (bottom - depth > -grid.dz && bottom < depth + grid.dz) {
      // Layer reaches the domain floor: keep the plain three-layer truth.
    } else if (bottom >= depth) {
      throw config_error("thickness_study: thickness " + std::to_string(t_km) +
                         " km exceeds the domain depth");
    }
    std::vector<double> interfaces = base.model.layers.interfaces_m;
    std::vector<double> velocities = base.model.layers.velocities_kms;
    if (bottom < depth - grid.dz / 2) {
      interfaces.push_back(bottom);
      velocities.push_back(v_mid);  // basement returns to the middle speed
    }
    const VelocityModel model = build_layered(interfaces, velocities, grid);
    auto fwd = wave::forward(model, acq, study.shot_index, false);
    study.records.push_back(std::move(fwd.record));
  }

  const ShotRecord& ref = study.records.back();
  for (auto& rec : study.records)
    study.residual_linf.push_back((rec.data - ref.data).cwiseAbs().maxCoeff());
  return study;
}

}  // namespace otfwi
