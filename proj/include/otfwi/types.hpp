#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace otfwi {

using Eigen::ArrayXd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Error taxonomy mirrored by the CLI exit codes (2 / 3 / 4).
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Uniform rectangular grid. Depth (z) is the slow/row index, lateral
/// position (x) the fast/column index; spacings are in meters.
struct Grid2D {
  int nz = 0;
  int nx = 0;
  double dz = 0.0;
  double dx = 0.0;
  double z0 = 0.0;
  double x0 = 0.0;

  void validate() const {
    if (nz < 3 || nx < 3)
      throw config_error("Grid2D: need nz >= 3 and nx >= 3, got " +
                         std::to_string(nz) + "x" + std::to_string(nx));
    if (dz <= 0.0 || dx <= 0.0)
      throw config_error("Grid2D: spacings must be positive");
  }

  double z(int iz) const { return z0 + iz * dz; }
  double x(int ix) const { return x0 + ix * dx; }
  double depth() const { return (nz - 1) * dz; }
  double width() const { return (nx - 1) * dx; }
  long cells() const { return static_cast<long>(nz) * nx; }

  bool same_shape(const Grid2D& o) const { return nz == o.nz && nx == o.nx; }

  /// Snap a physical (z, x) position in meters to the nearest grid node.
  std::pair<int, int> nearest_node(double z_m, double x_m) const {
    const int iz = static_cast<int>(std::lround((z_m - z0) / dz));
    const int ix = static_cast<int>(std::lround((x_m - x0) / dx));
    if (iz < 0 || iz >= nz || ix < 0 || ix >= nx)
      throw config_error("position (" + std::to_string(z_m) + ", " +
                         std::to_string(x_m) + ") m outside grid");
    return {iz, ix};
  }
};

struct TimeAxis {
  int nt = 0;
  double dt = 0.0;  // seconds, t0 = 0

  void validate() const {
    if (nt < 2 || dt <= 0.0) throw config_error("TimeAxis: need nt >= 2 and dt > 0");
  }
  double t(int n) const { return n * dt; }
  double duration() const { return (nt - 1) * dt; }
  bool operator==(const TimeAxis& o) const { return nt == o.nt && dt == o.dt; }
};

/// Time series recorded (or injected) at a single point.
struct Trace {
  ArrayXd values;
  TimeAxis axis;

  Trace() = default;
  Trace(ArrayXd v, TimeAxis ax) : values(std::move(v)), axis(ax) {
    if (values.size() != axis.nt) throw config_error("Trace: length != axis.nt");
  }
};

/// One shot gather: rows are receivers, columns are time samples.
struct ShotRecord {
  MatrixXd data;  // n_receivers x nt
  TimeAxis axis;
  int shot_id = 0;

  int n_receivers() const { return static_cast<int>(data.rows()); }
  Trace trace(int r) const { return Trace(data.row(r).transpose().array(), axis); }
};

/// Wave speed on a grid, in km/s. The PDE coefficient is the squared
/// slowness m = 1/c^2 in SI units (s^2/m^2).
struct VelocityModel {
  Grid2D grid;
  MatrixXd c;  // nz x nx, km/s

  void validate() const {
    grid.validate();
    if (c.rows() != grid.nz || c.cols() != grid.nx)
      throw config_error("VelocityModel: c shape does not match grid");
    if (!(c.array() > 0.0).all() || !c.allFinite())
      throw config_error("VelocityModel: wave speed must be positive and finite");
  }

  double c_max() const { return c.maxCoeff(); }

  /// Squared slowness in s^2/m^2 (c stored in km/s).
  MatrixXd slowness_sq_si() const {
    return (1e3 * c.array()).square().inverse().matrix();
  }
  static MatrixXd velocity_from_slowness_sq(const MatrixXd& m_si) {
    return (m_si.array().sqrt().inverse() / 1e3).matrix();
  }
};

/// Source/receiver geometry plus the source time function. Positions are
/// (z, x) in meters; each shot fires one source into all receivers.
struct Acquisition {
  std::vector<std::pair<double, double>> sources;
  std::vector<std::pair<double, double>> receivers;
  Trace wavelet;

  int n_shots() const { return static_cast<int>(sources.size()); }
  int n_receivers() const { return static_cast<int>(receivers.size()); }

  void validate(const Grid2D& grid) const {
    if (sources.empty() || receivers.empty())
      throw config_error("Acquisition: need at least one source and one receiver");
    for (const auto& [z, x] : sources) grid.nearest_node(z, x);
    for (const auto& [z, x] : receivers) grid.nearest_node(z, x);
    wavelet.axis.validate();
  }
};

/// Snapshots of u(x, t), stored every `stride` steps (snapshot k holds
/// time level k*stride). stride == 1 keeps the full field history.
struct Wavefield {
  Grid2D grid;
  TimeAxis axis;
  int stride = 1;
  std::vector<MatrixXd> snapshots;

  int n_stored() const { return static_cast<int>(snapshots.size()); }
};

}  // namespace otfwi
