#pragma once

// Single-file binary checkpoint. Layout is documented in docs/checkpoint.md.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "devgan/training.hpp"

namespace devgan {

inline constexpr char kCheckpointMagic[8] = {'D', 'E', 'V', 'G', 'A', 'N', '0', '1'};

/// FNV-1a 64-bit.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_checkpoint(const TrainState& state);

/// Validates magic and checksum before parsing anything else. Throws
/// checkpoint_magic, checkpoint_checksum, checkpoint_truncated,
/// checkpoint_missing_network or checkpoint_shape; never returns partial
/// state.
TrainState decode_checkpoint(std::span<const std::uint8_t> bytes);

/// Writes to a temporary sibling and renames it into place.
void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
TrainState load_checkpoint(const std::filesystem::path& path);

}  // namespace devgan
