#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "otfwi/optimizer.hpp"
#include "otfwi/scenario.hpp"
#include "otfwi/types.hpp"

namespace otfwi {

struct LandscapeSweep {
  ArrayXd axis1;       // shift s, or mu for the Gaussian sweep
  ArrayXd axis2;       // empty for 1D sweeps; sigma for the Gaussian sweep
  MatrixXd values;     // axis1.size() x max(axis2.size(), 1)
  std::string misfit_tag;
  std::string axis1_name = "shift_s";
  std::string axis2_name;
};

void write_sweep_csv(const LandscapeSweep& sweep, const std::filesystem::path& path);

/// Canonical cycle-skipping subject: two Ricker wavelets on one trace.
Trace two_ricker_signal();

/// Misfit between f(t - s) and f(t) over a grid of shifts (zero padding;
/// rejects shifts that would push signal content off the record).
LandscapeSweep landscape_shift(const Trace& signal, const ArrayXd& shifts_s,
                               MisfitKind kind, const NormConfig& norm);

/// W2^2 between truncated discretized N(mu, sigma^2) and N(0, 1).
LandscapeSweep landscape_gaussian(const ArrayXd& mu, const ArrayXd& sigma,
                                  int samples = 4000);

/// Shifts a trace by an integer number of samples (interpolating otherwise).
Trace shift_trace(const Trace& signal, double shift_s);

struct NoiseStudy {
  std::vector<int> piece_counts;
  ArrayXd w2_mean;  // mean W2^2(f, f + noise) per N, normalized pair
  ArrayXd l2_mean;  // mean raw L2 misfit per N
  double w2_slope = 0.0;  // log-log slope vs N
  double l2_slope = 0.0;
  std::vector<std::string> warnings;
};

/// Piecewise-constant mean-zero uniform noise study; amplitude is the
/// half-width of the uniform distribution.
NoiseStudy noise_scaling(const Trace& f, const std::vector<int>& piece_counts,
                         int trials, std::uint64_t seed, double amplitude);

/// Smoothed, data-modulated additive noise; reports the realized SNR in dB
/// (+inf for zero amplitude).
ShotRecord correlated_noise(const ShotRecord& g, double amplitude, std::uint64_t seed,
                            double* snr_db = nullptr);

struct SpectrumTable {
  ArrayXd freq_hz;    // one-sided bins, k / (nt dt)
  ArrayXd amplitude;  // mean |X_k| over receivers
  ArrayXd power;      // mean |X_k|^2 over receivers
  int nt = 0;
  double dt = 0.0;
};

/// DFT of f - g per trace, amplitude averaged over receivers.
SpectrumTable residual_spectrum(const ShotRecord& f, const ShotRecord& g);

/// Mean over receivers of sum_t r^2, reconstructed from the one-sided bins
/// (equals the time-domain energy by Parseval).
double spectral_energy(const SpectrumTable& table);

/// Share of spectral energy with |freq| in [f_lo, f_hi].
double band_energy_fraction(const SpectrumTable& table, double f_lo, double f_hi);

struct ThicknessStudy {
  std::vector<double> thickness_km;
  std::vector<double> residual_linf;  // against the thickest entry
  std::vector<ShotRecord> records;    // one gather per thickness
  int shot_index = 0;
};

/// Varies the thickness of the layer below the deepest interface of a
/// layered scenario (the basement takes the middle-layer speed again) and
/// differences each gather against the thickest reference.
ThicknessStudy thickness_study(const std::vector<double>& thicknesses_km,
                               const Scenario& base, int shot_index = -1);

}  // namespace otfwi
