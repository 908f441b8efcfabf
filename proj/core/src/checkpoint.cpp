#include "tsinception/checkpoint.hpp"

#include <json.hpp>

#include <array>
#include <bit>
#include <fstream>
#include <type_traits>

#include "tsinception/config.hpp"
#include "tsinception/error.hpp"
#include "tsinception/version.hpp"

namespace tsinception {

using nlohmann::json;

namespace {

constexpr const char* magic_line = "TSINET\n";

template <typename S>
struct dtype_of;
template <>
struct dtype_of<float> {
  static constexpr const char* name = "f32";
};
template <>
struct dtype_of<double> {
  static constexpr const char* name = "f64";
};

template <typename S>
using bits_of = std::conditional_t<sizeof(S) == 4, std::uint32_t, std::uint64_t>;

template <typename S>
void append_le(std::string& out, S v) {
  auto u = std::bit_cast<bits_of<S>>(v);
  for (std::size_t b = 0; b < sizeof(u); ++b)
    out.push_back(static_cast<char>((u >> (8 * b)) & 0xFF));
}

template <typename S>
S read_le(const char* p) {
  bits_of<S> u = 0;
  for (std::size_t b = 0; b < sizeof(u); ++b)
    u |= static_cast<bits_of<S>>(static_cast<unsigned char>(p[b])) << (8 * b);
  return std::bit_cast<S>(u);
}

const std::array<std::uint32_t, 256>& crc_table() {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  return table;
}

}  // namespace

std::uint32_t crc32(const void* data, std::size_t size) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint32_t c = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < size; ++i) c = crc_table()[(c ^ p[i]) & 0xFF] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

template <typename S>
void save_checkpoint(Network<S>& net, const std::string& path) {
  std::string payload;
  json table = json::array();
  for (auto& ref : net.state_tensors()) {
    table.push_back({{"name", ref.name},
                     {"shape", ref.value->shape},
                     {"offset", payload.size()}});
    for (S v : ref.value->data) append_le(payload, v);
  }

  const json header = {
      {"schema_version", checkpoint_schema_version},
      {"dtype", dtype_of<S>::name},
      {"config", json::parse(config_to_json(net.config))},
      {"tensors", table},
      {"payload_bytes", payload.size()},
      {"crc32", crc32(payload.data(), payload.size())},
  };
  const std::string htext = header.dump(2);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  check(out.good(), "checkpoint: cannot write \"", path, "\"");
  out << magic_line << htext.size() << '\n' << htext << '\n';
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  out.flush();
  check(out.good(), "checkpoint: write to \"", path, "\" failed");
}

template <typename S>
Network<S> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), "checkpoint: cannot open \"", path, "\"");
  std::string file((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  const std::size_t magic_len = std::string(magic_line).size();
  check(file.size() >= magic_len && file.compare(0, magic_len, magic_line) == 0,
        "checkpoint: \"", path, "\" is not a TSINET checkpoint");

  const std::size_t len_end = file.find('\n', magic_len);
  check(len_end != std::string::npos, "checkpoint: truncated header length line");
  std::size_t hlen = 0;
  try {
    hlen = std::stoul(file.substr(magic_len, len_end - magic_len));
  } catch (const std::exception&) {
    fail("checkpoint: malformed header length line");
  }
  const std::size_t hstart = len_end + 1;
  check(hstart + hlen + 1 <= file.size(), "checkpoint: truncated header");

  json header;
  try {
    header = json::parse(file.substr(hstart, hlen));
  } catch (const std::exception& e) {
    fail("checkpoint: invalid header: ", e.what());
  }

  NetworkConfig config;
  std::size_t payload_bytes = 0;
  std::uint32_t stored_crc = 0;
  json table;
  try {
    const int schema = header.at("schema_version").get<int>();
    check(schema == checkpoint_schema_version, "checkpoint: unsupported schema version ",
          schema, " (this build reads ", checkpoint_schema_version, ")");
    const auto dtype = header.at("dtype").get<std::string>();
    check(dtype == dtype_of<S>::name, "checkpoint: precision mismatch: file holds ", dtype,
          ", loader expects ", dtype_of<S>::name);
    config = config_from_json(header.at("config").dump());
    payload_bytes = header.at("payload_bytes").get<std::size_t>();
    stored_crc = header.at("crc32").get<std::uint32_t>();
    table = header.at("tensors");
    check(table.is_array(), "checkpoint: tensor table must be an array");
  } catch (const json::exception& e) {
    fail("checkpoint: ", e.what());
  }

  const std::size_t pstart = hstart + hlen + 1;
  const std::size_t found = file.size() - pstart;
  check(found == payload_bytes, "checkpoint: truncated payload (expected ", payload_bytes,
        " bytes, found ", found, ")");
  check(crc32(file.data() + pstart, payload_bytes) == stored_crc,
        "checkpoint: payload checksum mismatch (file is corrupted)");

  Rng rng(0);
  auto net = build_network<S>(config, rng);
  auto refs = net.state_tensors();
  check(table.size() == refs.size(), "checkpoint: tensor table has ", table.size(),
        " entries, network has ", refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    try {
      const auto name = table[i].at("name").get<std::string>();
      check(name == refs[i].name, "checkpoint: tensor ", i, " is \"", name,
            "\", expected \"", refs[i].name, "\"");
      const auto shape = table[i].at("shape").get<std::vector<int>>();
      check(shape == refs[i].value->shape, "checkpoint: tensor \"", name,
            "\" shape does not match the config");
      const auto offset = table[i].at("offset").get<std::size_t>();
      const std::size_t need = offset + sizeof(S) * refs[i].value->size();
      check(need <= payload_bytes, "checkpoint: tensor \"", name, "\" overruns the payload");
      const char* p = file.data() + pstart + offset;
      for (auto& v : refs[i].value->data) {
        v = read_le<S>(p);
        p += sizeof(S);
      }
    } catch (const json::exception& e) {
      fail("checkpoint: tensor table entry ", i, ": ", e.what());
    }
  }
  return net;
}

template void save_checkpoint<float>(Network<float>&, const std::string&);
template void save_checkpoint<double>(Network<double>&, const std::string&);
template Network<float> load_checkpoint<float>(const std::string&);
template Network<double> load_checkpoint<double>(const std::string&);

}  // namespace tsinception
