#include "otfwi/grid_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

static_assert(std::endian::native == std::endian::little,
              "grid container is little-endian; big-endian hosts need byte swaps");

namespace otfwi {

namespace {

constexpr char kMagic[4] = {'O', 'T', 'F', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  os.write(b, 4);
}

std::uint32_t get_u32(std::istream& is) {
  char b[4];
  is.read(b, 4);
  std::uint32_t v = 0;
  std::memcpy(&v, b, 4);
  return v;
}

}  // namespace

void write_grid_bin(const std::filesystem::path& path, const MatrixXd& values) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw io_error("cannot open for writing: " + path.string());
  os.write(kMagic, 4);
  put_u32(os, static_cast<std::uint32_t>(values.rows()));
  put_u32(os, static_cast<std::uint32_t>(values.cols()));
  put_u32(os, 0u);
  // Row-major on disk, slow index first.
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    std::vector<double> row(static_cast<size_t>(values.cols()));
    for (Eigen::Index j = 0; j < values.cols(); ++j) row[static_cast<size_t>(j)] = values(i, j);
    os.write(reinterpret_cast<const char*>(row.data()),
             static_cast<std::streamsize>(row.size() * sizeof(double)));
  }
  if (!os) throw io_error("short write: " + path.string());
}

MatrixXd read_grid_bin(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("cannot open: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw io_error("bad magic (expected OTF1): " + path.string());
  const std::uint32_t nrows = get_u32(is);
  const std::uint32_t ncols = get_u32(is);
  (void)get_u32(is);  // reserved
  if (nrows == 0 || ncols == 0 || nrows > (1u << 24) || ncols > (1u << 24))
    throw io_error("implausible grid shape in " + path.string());
  MatrixXd values(nrows, ncols);
  std::vector<double> row(ncols);
  for (std::uint32_t i = 0; i < nrows; ++i) {
    is.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(ncols * sizeof(double)));
    if (!is) throw io_error("truncated grid data: " + path.string());
    for (std::uint32_t j = 0; j < ncols; ++j) values(i, j) = row[j];
  }
  return values;
}

void write_shot_record(const std::filesystem::path& path, const ShotRecord& rec) {
  write_grid_bin(path, rec.data);
}

ShotRecord read_shot_record(const std::filesystem::path& path, const TimeAxis& axis,
                            int shot_id) {
  ShotRecord rec;
  rec.data = read_grid_bin(path);
  if (rec.data.cols() != axis.nt)
    throw io_error("shot record " + path.string() + " has " +
                   std::to_string(rec.data.cols()) + " samples, expected " +
                   std::to_string(axis.nt));
  rec.axis = axis;
  rec.shot_id = shot_id;
  return rec;
}

void write_model(const std::filesystem::path& path, const VelocityModel& model) {
  write_grid_bin(path, model.c);
  std::ofstream meta(path.string() + ".meta");
  if (!meta) throw io_error("cannot write sidecar for " + path.string());
  meta << "dz = " << model.grid.dz << "\n";
  meta << "dx = " << model.grid.dx << "\n";
  meta << "units = km/s\n";
}

VelocityModel read_model(const std::filesystem::path& path) {
  VelocityModel model;
  model.c = read_grid_bin(path);
  model.grid.nz = static_cast<int>(model.c.rows());
  model.grid.nx = static_cast<int>(model.c.cols());

  const std::filesystem::path meta_path = path.string() + ".meta";
  std::ifstream meta(meta_path);
  if (!meta)
    throw io_error("missing sidecar " + meta_path.string() +
                   " (expected lines: dz = <m>, dx = <m>, units = km/s)");
  std::string line;
  while (std::getline(meta, line)) {
    std::istringstream ss(line);
    std::string key, eq;
    ss >> key >> eq;
    if (key == "dz")
      ss >> model.grid.dz;
    else if (key == "dx")
      ss >> model.grid.dx;
    else if (key == "units") {
      std::string units;
      ss >> units;
      if (units != "km/s")
        throw io_error("unsupported model units '" + units + "' in " + meta_path.string());
    }
  }
  model.validate();
  return model;
}

struct CsvWriter::Impl {
  std::ofstream os;
};

CsvWriter::CsvWriter(const std::filesystem::path& path,
                     const std::vector<std::string>& columns)
    : impl_(new Impl) {
  impl_->os.open(path);
  if (!impl_->os) {
    delete impl_;
    throw io_error("cannot open for writing: " + path.string());
  }
  for (size_t i = 0; i < columns.size(); ++i)
    impl_->os << columns[i] << (i + 1 < columns.size() ? "," : "\n");
}

CsvWriter::~CsvWriter() {
  close();
  delete impl_;
}

void CsvWriter::row(const std::vector<double>& values) {
  impl_->os.precision(17);
  for (size_t i = 0; i < values.size(); ++i)
    impl_->os << values[i] << (i + 1 < values.size() ? "," : "\n");
}

void CsvWriter::close() {
  if (impl_ && impl_->os.is_open()) impl_->os.close();
}

}  // namespace otfwi
