#pragma once

#include <filesystem>
#include <string>

#include "otfwi/types.hpp"

namespace otfwi {

/// Binary grid container used for velocity models, wavefield snapshots,
/// gradients and shot records.
///
/// Layout: 16-byte header = magic "OTF1", nz (u32 LE), nx (u32 LE),
/// 4 reserved zero bytes; then nz*nx IEEE-754 float64 LE, row-major with
/// the slow index first (depth for grids, receiver for shot records).
void write_grid_bin(const std::filesystem::path& path, const MatrixXd& values);
MatrixXd read_grid_bin(const std::filesystem::path& path);

/// Shot records reuse the grid container with nz := n_receivers, nx := nt.
void write_shot_record(const std::filesystem::path& path, const ShotRecord& rec);
ShotRecord read_shot_record(const std::filesystem::path& path, const TimeAxis& axis,
                            int shot_id);

/// Model file + text sidecar ("<path>.meta" with dz/dx/units lines).
void write_model(const std::filesystem::path& path, const VelocityModel& model);
VelocityModel read_model(const std::filesystem::path& path);

/// Minimal CSV emitter: one header row, full double precision, LF endings.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void row(const std::vector<double>& values);
  void close();

 private:
  struct Impl;
  Impl* impl_;
};

}  // namespace otfwi
