#include "mvkp/grid.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>

namespace mvkp {
namespace {

static_assert(std::endian::native == std::endian::little,
              "grid dumps are written assuming a little-endian host");

void write_i32(std::ostream& out, std::int32_t value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(value));
}

std::int32_t read_i32(std::istream& in) {
  std::int32_t value = 0;
  in.read(reinterpret_cast<char*>(&value), sizeof(value));
  return value;
}

}  // namespace

double plane_sum(std::span<const double> values) {
  return std::accumulate(values.begin(), values.end(), 0.0);
}

double normalize_in_place(std::span<double> values) {
  const double sum = plane_sum(values);
  if (sum > 0.0) {
    for (double& v : values) v /= sum;
  }
  return sum;
}

void write_grid_dump(const std::filesystem::path& path, const GridShape& shape,
                     std::span<const double> values) {
  require(values.size() == shape.size(), ErrorCode::kShapeMismatch,
          "grid dump values do not match the declared shape");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  write_i32(out, shape.width);
  write_i32(out, shape.height);
  write_i32(out, shape.channels);
  std::vector<float> buffer(values.begin(), values.end());
  out.write(reinterpret_cast<const char*>(buffer.data()),
            static_cast<std::streamsize>(buffer.size() * sizeof(float)));
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

GridDump read_grid_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  GridDump dump;
  dump.shape.width = read_i32(in);
  dump.shape.height = read_i32(in);
  dump.shape.channels = read_i32(in);
  if (!in || dump.shape.width <= 0 || dump.shape.height <= 0 || dump.shape.channels <= 0) {
    fail(ErrorCode::kFormat, "bad grid header in " + path.string());
  }
  std::vector<float> buffer(dump.shape.size());
  in.read(reinterpret_cast<char*>(buffer.data()),
          static_cast<std::streamsize>(buffer.size() * sizeof(float)));
  if (!in) fail(ErrorCode::kFormat, "truncated grid payload in " + path.string());
  dump.values.assign(buffer.begin(), buffer.end());
  return dump;
}

}  // namespace mvkp
