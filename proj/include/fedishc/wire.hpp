#pragma once

// Upload wire format, version 1:
//   "FISH" | u8 version | canonical JSON | u32 CRC-32 of the JSON (big-endian)

#include <zlib.h>

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedishc/error.hpp"
#include "fedishc/federation.hpp"

namespace fedishc {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::array<std::uint8_t, 4> kWireMagic{'F', 'I', 'S', 'H'};
inline constexpr std::uint8_t kWireVersion = 1;

namespace wire {

inline nlohmann::json grid_to_json(const RealGrid& g) { return g.nested(); }

inline RealGrid grid_from_json(const nlohmann::json& j, std::size_t d, const char* what) {
  if (!j.is_array() || j.size() != d) throw DecodeError(std::string("field ") + what + " has wrong shape");
  RealGrid g(d, d);
  for (std::size_t r = 0; r < d; ++r) {
    const auto& row = j[r];
    if (!row.is_array() || row.size() != d) throw DecodeError(std::string("field ") + what + " has wrong shape");
    for (std::size_t c = 0; c < d; ++c) g(r, c) = row[c].get<double>();
  }
  return g;
}

inline nlohmann::json table_to_json(const CumulantTable& t) {
  return {{"c3", t.c3_values()}, {"c12", grid_to_json(t.c12_grid())}, {"c21", grid_to_json(t.c21_grid())}};
}

inline CumulantTable table_from_json(const nlohmann::json& j, const std::vector<std::string>& ids) {
  const std::size_t d = ids.size();
  const auto c3 = j.at("c3").get<std::vector<double>>();
  if (c3.size() != d) throw DecodeError("field c3 has wrong length");
  const RealGrid c12 = grid_from_json(j.at("c12"), d, "c12");
  const RealGrid c21 = grid_from_json(j.at("c21"), d, "c21");
  CumulantTable t(ids);
  for (std::size_t i = 0; i < d; ++i) {
    t.set_c3(i, c3[i]);
    for (std::size_t k = 0; k < d; ++k) {
      if (k == i) continue;
      if (c21(i, k) != c12(k, i)) throw DecodeError("c21/c12 mirror mismatch");
      t.set_c21(i, k, c21(i, k));
    }
  }
  return t;
}

inline std::uint32_t crc32_of(std::span<const std::uint8_t> data) {
  return static_cast<std::uint32_t>(::crc32(0L, data.data(), static_cast<uInt>(data.size())));
}

inline void put_u32_be(Bytes& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

inline std::uint32_t get_u32_be(std::span<const std::uint8_t> in) {
  return (std::uint32_t{in[0]} << 24) | (std::uint32_t{in[1]} << 16) | (std::uint32_t{in[2]} << 8) | in[3];
}

}  // namespace wire

inline nlohmann::json upload_to_json(const ClientUpload& up) {
  up.validate();
  if (!up.tensor.base.all_finite()) throw InvalidArgument("upload " + up.client_id + ": non-finite cumulant");
  nlohmann::json reps = nlohmann::json::array();
  for (const auto& r : up.tensor.replicates) {
    if (!r.all_finite()) throw InvalidArgument("upload " + up.client_id + ": non-finite cumulant");
    reps.push_back(wire::table_to_json(r));
  }
  return {{"client_id", up.client_id},
          {"n_k", up.n_k},
          {"variable_ids", up.variable_ids},
          {"B", up.tensor.count()},
          {"seed", up.tensor.seed},
          {"base", wire::table_to_json(up.tensor.base)},
          {"replicates", std::move(reps)},
          {"cov", wire::grid_to_json(up.covariance)}};
}

inline ClientUpload upload_from_json(const nlohmann::json& j) {
  ClientUpload up;
  try {
    up.client_id = j.at("client_id").get<std::string>();
    up.n_k = j.at("n_k").get<std::uint64_t>();
    up.variable_ids = j.at("variable_ids").get<std::vector<std::string>>();
    const auto count = j.at("B").get<std::size_t>();
    up.tensor.seed = j.at("seed").get<std::uint64_t>();
    up.tensor.base = wire::table_from_json(j.at("base"), up.variable_ids);
    const auto& reps = j.at("replicates");
    if (!reps.is_array() || reps.size() != count) throw DecodeError("replicate count differs from B");
    for (const auto& r : reps) up.tensor.replicates.push_back(wire::table_from_json(r, up.variable_ids));
    up.covariance = wire::grid_from_json(j.at("cov"), up.variable_ids.size(), "cov");
  } catch (const nlohmann::json::exception& e) {
    throw DecodeError(std::string("malformed upload: ") + e.what());
  }
  try {
    up.validate();
  } catch (const InvalidArgument& e) {
    throw DecodeError(e.what());
  }
  return up;
}

inline Bytes encode_upload(const ClientUpload& up) {
  const std::string body = upload_to_json(up).dump();
  Bytes out(kWireMagic.begin(), kWireMagic.end());
  out.push_back(kWireVersion);
  out.insert(out.end(), body.begin(), body.end());
  wire::put_u32_be(out, wire::crc32_of({reinterpret_cast<const std::uint8_t*>(body.data()), body.size()}));
  return out;
}

inline ClientUpload decode_upload(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t header = kWireMagic.size() + 1;
  if (bytes.size() < header) throw TruncatedPayload("payload shorter than header");
  if (!std::equal(kWireMagic.begin(), kWireMagic.end(), bytes.begin())) throw DecodeError("bad magic bytes");
  if (bytes[4] != kWireVersion) throw VersionMismatch(bytes[4], kWireVersion);
  if (bytes.size() < header + 4) throw TruncatedPayload("payload missing checksum");
  const auto body = bytes.subspan(header, bytes.size() - header - 4);
  if (wire::crc32_of(body) != wire::get_u32_be(bytes.subspan(bytes.size() - 4)))
    throw ChecksumMismatch("CRC-32 mismatch");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body.begin(), body.end());
  } catch (const nlohmann::json::exception& e) {
    throw DecodeError(std::string("malformed JSON: ") + e.what());
  }
  return upload_from_json(j);
}

inline CommunicationCost communication_cost(const ClientUpload& up) {
  CommunicationCost c;
  c.client_id = up.client_id;
  c.d_k = up.variable_ids.size();
  c.replicates = up.tensor.count();
  c.scalars = scalar_count(c.d_k, c.replicates);
  c.encoded_bytes = encode_upload(up).size();
  return c;
}

}  // namespace fedishc
