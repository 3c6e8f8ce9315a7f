#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "ssmail/nn/parameter_set.hpp"

namespace ssmail::nn {

/// Named parameter sets stored together in one file.
using Bundle = std::map<std::string, ParameterSet>;

/// File layout: the line "SSMAIL-CKPT 1", a line holding the byte length of
/// a JSON manifest, the manifest itself ({"sets": [{"name", "params":
/// [{"name", "shape"}]}], "meta": {...}}), then every parameter as raw
/// little-endian float64 in manifest order.
void save_checkpoint(const std::filesystem::path& path, const Bundle& sets, const std::string& meta_json = "{}");

struct LoadedCheckpoint {
  Bundle sets;
  std::string meta_json;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ssmail::nn
