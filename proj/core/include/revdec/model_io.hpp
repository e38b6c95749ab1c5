#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "revdec/recipe.hpp"

namespace revdec {

// Model file layout (all integers little-endian):
//   "RVDM"                      4-byte magic
//   u32 format version          currently kModelFormatVersion
//   u64 header length, header   UTF-8 JSON: model kind, feature schema id,
//                               hyperparameters, pipeline description, metadata
//   u32 tensor count, then per tensor:
//     u32 name length, name, u32 rank, u64 dims[rank], f64 values
//   64 hex chars                SHA-256 of every preceding byte
inline constexpr std::uint32_t kModelFormatVersion = 1;

std::string serialize_model(const TrainedModel& model);
// Throws VersionError for an unknown format version and FormatError for a
// bad magic, checksum, truncation or inconsistent content.
TrainedModel deserialize_model(std::string_view bytes);

void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace revdec
