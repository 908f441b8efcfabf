#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "tsinception/network.hpp"

namespace tsinception {

// crc over the reflected polynomial 0xEDB88320 (init and final xor 0xFFFFFFFF)
std::uint32_t crc32(const void* data, std::size_t size);

// file layout: "TSINET\n", the header byte count in decimal, "\n", a json
// header (schema version, value precision, network config, tensor table with
// byte offsets, payload size, payload crc), "\n", then every parameter and
// running-statistics tensor as raw little-endian values in declaration order
template <typename S>
void save_checkpoint(Network<S>& net, const std::string& path);

// rebuilds the network from the stored config, then verifies the checksum and
// the tensor table (names, shapes, offsets) before filling in the values
template <typename S>
Network<S> load_checkpoint(const std::string& path);

}  // namespace tsinception
