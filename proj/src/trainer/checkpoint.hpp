#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "trainer/config.hpp"

namespace ipseg::train {

constexpr std::uint32_t kCheckpointVersion = 1;

// "IPUN", u32 version, config JSON, epoch, RNG state, named float32 blobs,
// optimizer state, then a CRC32 of everything after the magic. Little-endian.
std::string encode_checkpoint(const Checkpoint& ck);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ipseg::train
