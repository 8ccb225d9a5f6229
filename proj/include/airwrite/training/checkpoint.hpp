#pragma once

// Checkpoint layout (all integers little-endian):
//
//   "AWCK"  u32 format_version  u64 header_length  header (JSON, UTF-8)  payload
//
// The header carries the model config, label vocabulary, training metadata
// and a manifest of {path, kind, shape, offset, count} entries. Offsets are
// byte offsets into the payload of 32-bit float arrays and must tile it
// exactly, in order.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "airwrite/error.hpp"
#include "airwrite/model/model.hpp"
#include "airwrite/training/optimizer.hpp"

namespace airwrite {

inline constexpr std::array<char, 4> checkpoint_magic = {'A', 'W', 'C', 'K'};
inline constexpr std::uint32_t checkpoint_version = 1;

struct CheckpointMetadata {
  int epoch = 0;
  std::uint64_t seed = 0;
  nlohmann::json history = nlohmann::json::array();
  std::string model_version;  // filled with a payload digest when empty
};

struct LoadedCheckpoint {
  Model model;
  CheckpointMetadata metadata;
  std::optional<AdamState> optimizer;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline std::uint64_t get_le(const std::string& in, std::size_t offset, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
  }
  return v;
}

inline void put_f32(std::string& out, double x) {
  put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
}

inline std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

}  // namespace detail

/// Rounds every parameter and buffer to float precision in place, matching
/// what a save/load round trip produces.
inline void quantize_to_f32(Model& model) {
  for (auto& [path, value] : model.parameters())
    for (double& x : value.mutable_data()) x = static_cast<double>(static_cast<float>(x));
  model.visit_buffers([](const std::string&, std::vector<double>& buf) {
    for (double& x : buf) x = static_cast<double>(static_cast<float>(x));
  });
}

inline std::string serialize_checkpoint(const Model& model, CheckpointMetadata meta,
                                        const AdamState* optimizer = nullptr) {
  nlohmann::json manifest = nlohmann::json::array();
  std::string payload;
  auto append = [&](const std::string& path, const std::string& kind, const Shape& shape,
                    std::span<const double> data) {
    manifest.push_back({{"path", path}, {"kind", kind}, {"shape", shape}, {"offset", payload.size()},
                        {"count", data.size()}});
    for (double x : data) detail::put_f32(payload, x);
  };
  for (const auto& [path, value] : model.parameters()) append(path, "param", value.shape(), value.data());
  model.visit_buffers([&](const std::string& path, std::vector<double>& buf) {
    append(path, "buffer", {buf.size()}, buf);
  });
  if (optimizer) {
    for (const auto& [path, m] : optimizer->first_moment) append(path, "adam_m", {m.size()}, m);
    for (const auto& [path, v] : optimizer->second_moment) append(path, "adam_v", {v.size()}, v);
  }
  if (meta.model_version.empty()) meta.model_version = detail::fnv1a_hex(payload);

  nlohmann::json header = {
      {"format_version", checkpoint_version},
      {"model", to_json(model.config())},
      {"labels", model.labels()},
      {"manifest", manifest},
      {"payload_bytes", payload.size()},
      {"metadata",
       {{"epoch", meta.epoch},
        {"seed", meta.seed},
        {"history", meta.history},
        {"model_version", meta.model_version}}},
  };
  if (optimizer) header["adam_step"] = optimizer->step;
  const std::string header_text = header.dump();

  std::string out(checkpoint_magic.begin(), checkpoint_magic.end());
  detail::put_u32(out, checkpoint_version);
  detail::put_u64(out, header_text.size());
  out += header_text;
  out += payload;
  return out;
}

inline void save_checkpoint(const Model& model, const std::string& path, CheckpointMetadata meta = {},
                            const AdamState* optimizer = nullptr) {
  const std::string bytes = serialize_checkpoint(model, std::move(meta), optimizer);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write checkpoint '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::io, "failed writing checkpoint '" + path + "'");
}

/// Parses a checkpoint image. When `expected` is given, the stored model
/// config must equal it.
inline LoadedCheckpoint deserialize_checkpoint(const std::string& bytes,
                                               const ModelConfig* expected = nullptr) {
  if (bytes.size() < 16 || !std::equal(checkpoint_magic.begin(), checkpoint_magic.end(), bytes.begin())) {
    throw Error(ErrorKind::integrity, "not a checkpoint (bad magic or truncated preamble)");
  }
  const auto version = static_cast<std::uint32_t>(detail::get_le(bytes, 4, 4));
  if (version != checkpoint_version) {
    throw Error(ErrorKind::version, "unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint64_t header_len = detail::get_le(bytes, 8, 8);
  if (header_len > bytes.size() - 16) throw Error(ErrorKind::integrity, "truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(16, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::integrity, std::string("corrupt header: ") + e.what());
  }
  const std::size_t payload_start = 16 + header_len;
  const std::size_t payload_size = bytes.size() - payload_start;

  try {
    if (header.at("format_version").get<std::uint32_t>() != checkpoint_version) {
      throw Error(ErrorKind::version, "header version does not match preamble");
    }
    if (header.at("payload_bytes").get<std::size_t>() != payload_size) {
      throw Error(ErrorKind::integrity, "payload is " + std::to_string(payload_size) + " bytes, header says " +
                                            std::to_string(header.at("payload_bytes").get<std::size_t>()));
    }
    ModelConfig cfg = model_config_from_json(header.at("model"));
    cfg.validate();
    if (expected) {
      ModelConfig want = *expected;
      want.validate();
      if (!(want == cfg)) {
        throw Error(ErrorKind::config_mismatch, "checkpoint config " + to_json(cfg).dump() +
                                                    " does not match requested " + to_json(want).dump());
      }
    }

    Model model(cfg);
    model.set_labels(header.at("labels").get<std::vector<std::string>>());

    std::map<std::string, std::vector<double>*> buffers;
    model.visit_buffers([&](const std::string& path, std::vector<double>& buf) { buffers[path] = &buf; });

    CheckpointMetadata meta;
    const auto& md = header.at("metadata");
    meta.epoch = md.at("epoch").get<int>();
    meta.seed = md.at("seed").get<std::uint64_t>();
    meta.history = md.at("history");
    meta.model_version = md.at("model_version").get<std::string>();

    std::optional<AdamState> optimizer;
    if (header.contains("adam_step")) {
      optimizer.emplace();
      optimizer->step = header.at("adam_step").get<std::uint64_t>();
    }

    std::size_t expected_offset = 0;
    std::size_t params_seen = 0;
    std::size_t buffers_seen = 0;
    for (const auto& entry : header.at("manifest")) {
      const auto path = entry.at("path").get<std::string>();
      const auto kind = entry.at("kind").get<std::string>();
      const auto shape = entry.at("shape").get<Shape>();
      const auto offset = entry.at("offset").get<std::size_t>();
      const auto count = entry.at("count").get<std::size_t>();
      if (offset != expected_offset || shape_size(shape) != count || offset + 4 * count > payload_size) {
        throw Error(ErrorKind::integrity, "manifest entry '" + path + "' does not tile the payload");
      }
      expected_offset += 4 * count;
      std::vector<double> values(count);
      for (std::size_t i = 0; i < count; ++i) {
        const auto bitsv = static_cast<std::uint32_t>(detail::get_le(bytes, payload_start + offset + 4 * i, 4));
        values[i] = static_cast<double>(std::bit_cast<float>(bitsv));
      }
      if (kind == "param") {
        if (!model.parameters().contains(path)) throw Error(ErrorKind::integrity, "unknown parameter '" + path + "'");
        Value& p = model.parameters().at(path);
        if (p.shape() != shape) throw Error(ErrorKind::integrity, "shape mismatch for '" + path + "'");
        std::copy(values.begin(), values.end(), p.mutable_data().begin());
        ++params_seen;
      } else if (kind == "buffer") {
        auto it = buffers.find(path);
        if (it == buffers.end() || it->second->size() != count) {
          throw Error(ErrorKind::integrity, "unknown or mis-sized buffer '" + path + "'");
        }
        *it->second = std::move(values);
        ++buffers_seen;
      } else if ((kind == "adam_m" || kind == "adam_v") && optimizer) {
        (kind == "adam_m" ? optimizer->first_moment : optimizer->second_moment)[path] = std::move(values);
      } else {
        throw Error(ErrorKind::integrity, "unknown manifest kind '" + kind + "'");
      }
    }
    if (expected_offset != payload_size) throw Error(ErrorKind::integrity, "manifest does not cover the payload");
    if (params_seen != model.parameters().size() || buffers_seen != buffers.size()) {
      throw Error(ErrorKind::integrity, "checkpoint is missing parameters or buffers");
    }
    return {std::move(model), std::move(meta), std::move(optimizer)};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::integrity, std::string("malformed header: ") + e.what());
  }
}

inline LoadedCheckpoint load_checkpoint(const std::string& path, const ModelConfig* expected = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open checkpoint '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str(), expected);
}

}  // namespace airwrite
