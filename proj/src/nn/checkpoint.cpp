#include "ssmail/nn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>

#include "json.hpp"

#include "ssmail/common/error.hpp"

namespace ssmail::nn {

namespace {

constexpr const char* kMagic = "SSMAIL-CKPT 1";

void write_doubles(std::ostream& os, std::span<const double> values) {
  for (double x : values) {
    auto bits = std::bit_cast<std::uint64_t>(x);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    char buf[8];
    std::memcpy(buf, &bits, 8);
    os.write(buf, 8);
  }
}

void read_doubles(std::istream& is, std::span<double> out, const std::string& name) {
  for (double& x : out) {
    char buf[8];
    if (!is.read(buf, 8)) throw Error("checkpoint: truncated data for '" + name + "'");
    std::uint64_t bits;
    std::memcpy(&bits, buf, 8);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    x = std::bit_cast<double>(bits);
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Bundle& sets, const std::string& meta_json) {
  nlohmann::json manifest;
  manifest["sets"] = nlohmann::json::array();
  for (const auto& [set_name, params] : sets) {
    nlohmann::json entry{{"name", set_name}, {"params", nlohmann::json::array()}};
    for (const auto& [name, t] : params) entry["params"].push_back({{"name", name}, {"shape", t.shape()}});
    manifest["sets"].push_back(std::move(entry));
  }
  manifest["meta"] = nlohmann::json::parse(meta_json);
  const std::string text = manifest.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("checkpoint: cannot open '" + path.string() + "' for writing");
  os << kMagic << '\n' << text.size() << '\n' << text;
  for (const auto& [set_name, params] : sets) {
    for (const auto& [name, t] : params) write_doubles(os, t.data());
  }
  if (!os) throw Error("checkpoint: write failed for '" + path.string() + "'");
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("checkpoint: cannot open '" + path.string() + "'");
  std::string magic;
  std::getline(is, magic);
  if (magic != kMagic) throw Error("checkpoint: '" + path.string() + "' is not a checkpoint file");
  std::string len_line;
  std::getline(is, len_line);
  std::size_t len = 0;
  try {
    len = std::stoull(len_line);
  } catch (const std::exception&) {
    throw Error("checkpoint: bad manifest length in '" + path.string() + "'");
  }
  std::string text(len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(len))) throw Error("checkpoint: truncated manifest");

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("checkpoint: bad manifest: ") + e.what());
  }
  LoadedCheckpoint out;
  out.meta_json = manifest.value("meta", nlohmann::json::object()).dump();
  for (const auto& entry : manifest.at("sets")) {
    ParameterSet params;
    for (const auto& p : entry.at("params")) {
      const auto name = p.at("name").get<std::string>();
      const auto shape = p.at("shape").get<ad::Shape>();
      ad::Tensor t = ad::Tensor::zeros(shape);
      read_doubles(is, t.mutable_data(), name);
      params.add(name, t);
    }
    out.sets.emplace(entry.at("name").get<std::string>(), std::move(params));
  }
  return out;
}

}  // namespace ssmail::nn
