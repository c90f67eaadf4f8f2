#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "dvd/diffnet.hpp"

namespace dvd::diffnet {

/// Named-tensor records as stored in a checkpoint file.
using TensorRecords = std::vector<std::pair<std::string, Mat>>;

/// Binary layout: magic "DVDR", u16 format version, u32 record count, then per
/// record: u16 name length, name bytes, u8 rank, rank x u32 dims, row-major
/// 64-bit reals. All integers and reals little-endian.
void save_checkpoint(const std::filesystem::path& path, const TensorRecords& records);
TensorRecords load_checkpoint(const std::filesystem::path& path);

/// Serializes a ParameterSet in iteration order.
TensorRecords to_records(const ParameterSet& params);

/// Assigns matching records into `params`. Every parameter must be present
/// with an identical shape (ShapeError/IoError otherwise); records that do not
/// name a parameter are ignored so training state can ride along.
void assign_records(ParameterSet& params, const TensorRecords& records);

}  // namespace dvd::diffnet
