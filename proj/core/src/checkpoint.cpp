#include "adafuse/checkpoint.hpp"

#include <zlib.h>

#include <fstream>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "adafuse/errors.hpp"
#include "adafuse/json.hpp"
#include "binio.hpp"

namespace adafuse {

namespace {

constexpr char kMagic[4] = {'A', 'D', 'F', 'S'};

std::uint32_t crc32_of(const std::string& payload) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  crc = ::crc32(crc, reinterpret_cast<const Bytef*>(payload.data()),
                static_cast<uInt>(payload.size()));
  return static_cast<std::uint32_t>(crc);
}

} // namespace

void save_checkpoint(const std::string& path, const FusionParams& params) {
  nlohmann::json meta;
  meta["config"] = params.config;
  nlohmann::json manifest = nlohmann::json::array();
  for (const ConstTensorRef& t : params.tensors()) {
    manifest.push_back({{"name", t.name}, {"shape", t.shape}});
  }
  meta["tensors"] = manifest;
  const std::string meta_str = meta.dump();

  std::string payload;
  for (const ConstTensorRef& t : params.tensors()) {
    for (std::size_t i = 0; i < t.size; ++i) {
      binio::append_f32(payload, static_cast<float>(t.data[i]));
    }
  }

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) {
    throw IoError("save_checkpoint: cannot open " + path);
  }
  binio::put_bytes(os, kMagic, 4);
  binio::put_u32(os, kCheckpointVersion);
  binio::put_u32(os, static_cast<std::uint32_t>(meta_str.size()));
  binio::put_bytes(os, meta_str.data(), meta_str.size());
  binio::put_bytes(os, payload.data(), payload.size());
  binio::put_u32(os, crc32_of(payload));
  os.flush();
  if (!os) {
    throw IoError("save_checkpoint: write failed for " + path);
  }
}

FusionParams load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw IoError("load_checkpoint: cannot open " + path);
  }

  char magic[4];
  if (!binio::get_bytes(is, magic, 4)) {
    throw CheckpointTruncatedError("load_checkpoint: " + path +
                                   " shorter than its header");
  }
  if (std::string(magic, 4) != std::string(kMagic, 4)) {
    throw FormatError("load_checkpoint: " + path + " is not a checkpoint");
  }
  std::uint32_t version = 0;
  std::uint32_t meta_len = 0;
  if (!binio::get_u32(is, version) || !binio::get_u32(is, meta_len)) {
    throw CheckpointTruncatedError("load_checkpoint: " + path +
                                   " shorter than its header");
  }
  if (version > kCheckpointVersion) {
    throw CheckpointVersionError("load_checkpoint: " + path + " has version " +
                                 std::to_string(version) +
                                 ", newest understood is " +
                                 std::to_string(kCheckpointVersion));
  }

  std::string meta_str(meta_len, '\0');
  if (!binio::get_bytes(is, meta_str.data(), meta_len)) {
    throw CheckpointTruncatedError("load_checkpoint: " + path +
                                   " ends inside the metadata block");
  }
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_str);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("load_checkpoint: bad metadata JSON in " + path + ": " +
                      e.what());
  }

  FusionParams params;
  try {
    FusionConfig config = meta.at("config").get<FusionConfig>();
    params = FusionParams::zeros(config);

    // The manifest must spell out exactly the tensors this config implies,
    // in order; anything else is a foreign or corrupted file.
    const nlohmann::json& manifest = meta.at("tensors");
    std::vector<TensorRef> tensors = params.tensors();
    if (!manifest.is_array() || manifest.size() != tensors.size()) {
      throw FormatError("load_checkpoint: manifest lists " +
                        std::to_string(manifest.size()) + " tensors, config " +
                        "implies " + std::to_string(tensors.size()));
    }
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      const std::string name = manifest[i].at("name").get<std::string>();
      const auto shape =
          manifest[i].at("shape").get<std::vector<std::size_t>>();
      if (name != tensors[i].name || shape != tensors[i].shape) {
        throw FormatError("load_checkpoint: manifest entry " +
                          std::to_string(i) + " is " + name +
                          ", expected " + tensors[i].name);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("load_checkpoint: bad metadata in " + path + ": " +
                      e.what());
  }

  std::size_t total = 0;
  for (const TensorRef& t : params.tensors()) total += t.size;
  std::string payload(total * 4, '\0');
  if (!binio::get_bytes(is, payload.data(), payload.size())) {
    throw CheckpointTruncatedError("load_checkpoint: " + path +
                                   " ends inside the tensor payload");
  }
  std::uint32_t stored_crc = 0;
  if (!binio::get_u32(is, stored_crc)) {
    throw CheckpointTruncatedError("load_checkpoint: " + path +
                                   " is missing its checksum");
  }
  const std::uint32_t actual_crc = crc32_of(payload);
  if (stored_crc != actual_crc) {
    throw CheckpointChecksumError("load_checkpoint: " + path +
                                  " payload checksum mismatch");
  }

  const unsigned char* p = reinterpret_cast<const unsigned char*>(payload.data());
  for (TensorRef& t : params.tensors()) {
    for (std::size_t i = 0; i < t.size; ++i, p += 4) {
      t.data[i] = static_cast<real>(binio::read_f32(p));
    }
  }
  return params;
}

} // namespace adafuse
