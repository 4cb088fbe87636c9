#pragma once

// Versioned checkpoint container:
//   "PSYNCKPT" | u32 format_version | u64 header bytes | JSON header | tensor payload
// The header records the resolved training config and its SHA-256, the
// step, schedule parameters and a table of named tensors (f_sub and
// eps_theta parameters, AdamW moments) stored back to back as raw
// little-endian arrays.

#include <filesystem>
#include <string>

#include "pathosyn/trainer.hpp"

namespace pathosyn {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

void save_checkpoint(const TrainingState& state, const std::filesystem::path& path);

/// Rebuilds the full training state. Throws DataError on a bad container or
/// format version; with `expected` set, throws ConfigError when the stored
/// config digest differs from expected's.
[[nodiscard]] TrainingState load_checkpoint(const std::filesystem::path& path,
                                            const TrainConfig* expected = nullptr);

[[nodiscard]] std::string config_digest(const TrainConfig& config);

}  // namespace pathosyn
