#include "dvd/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>

#include "dvd/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

namespace dvd::diffnet {

namespace {

constexpr char kMagic[4] = {'D', 'V', 'D', 'R'};
constexpr std::uint16_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const char* what) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError(std::string("checkpoint: truncated reading ") + what);
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const TensorRecords& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kMagic, 4);
  write_pod(out, kVersion);
  write_pod(out, static_cast<std::uint32_t>(records.size()));
  for (const auto& [name, m] : records) {
    if (name.size() > 0xFFFF) throw InvalidInput("checkpoint: tensor name too long");
    write_pod(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod(out, static_cast<std::uint8_t>(2));
    write_pod(out, static_cast<std::uint32_t>(m.rows()));
    write_pod(out, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) write_pod(out, m(i, j));
  }
  if (!out) throw IoError("write failed for " + path.string());
}

TensorRecords load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("checkpoint: bad magic in " + path.string());
  const auto version = read_pod<std::uint16_t>(in, "version");
  if (version != kVersion) throw IoError("checkpoint: unsupported format version");
  const auto count = read_pod<std::uint32_t>(in, "record count");

  TensorRecords records;
  records.reserve(count);
  for (std::uint32_t r = 0; r < count; ++r) {
    const auto name_len = read_pod<std::uint16_t>(in, "name length");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw IoError("checkpoint: truncated reading name");
    const auto rank = read_pod<std::uint8_t>(in, "rank");
    if (rank != 2) throw IoError("checkpoint: only rank-2 tensors are supported");
    const auto rows = read_pod<std::uint32_t>(in, "rows");
    const auto cols = read_pod<std::uint32_t>(in, "cols");
    Mat m(rows, cols);
    for (std::uint32_t i = 0; i < rows; ++i)
      for (std::uint32_t j = 0; j < cols; ++j) m(i, j) = read_pod<double>(in, "value");
    records.emplace_back(std::move(name), std::move(m));
  }
  return records;
}

TensorRecords to_records(const ParameterSet& params) {
  TensorRecords records;
  records.reserve(params.names().size());
  for (const auto& name : params.names()) records.emplace_back(name, params.at(name).value);
  return records;
}

void assign_records(ParameterSet& params, const TensorRecords& records) {
  std::set<std::string> seen;
  for (const auto& [name, m] : records) {
    if (!params.contains(name)) continue;  // training-state records ride along
    params.set_value(name, m);             // throws ShapeError on mismatch
    seen.insert(name);
  }
  for (const auto& name : params.names()) {
    if (!seen.count(name)) throw IoError("checkpoint: missing tensor " + name);
  }
}

}  // namespace dvd::diffnet
