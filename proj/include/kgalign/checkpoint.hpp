#pragma once

#include <filesystem>

#include "kgalign/encoder.hpp"
#include "kgalign/train.hpp"

namespace kgalign {

inline constexpr std::uint8_t kCheckpointVersion = 1;

/// Writes the input table and encoder weights as little-endian float32.
void write_checkpoint(const EmbeddingState<float>& state, const std::filesystem::path& file);

/// Reads a checkpoint; the encoder shape other than `dim` comes from `shape`
/// (dim is taken from the header and must match when shape.dim != 0).
EmbeddingState<float> read_checkpoint(const std::filesystem::path& file, EncoderShape shape);

}  // namespace kgalign
