#include "kgalign/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

namespace kgalign {
namespace {

void put_le(std::vector<unsigned char>& out, std::uint64_t value, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<unsigned char>(value >> (8 * i)));
}

std::uint64_t get_le(const unsigned char* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

void put_floats(std::vector<unsigned char>& out, const Mat<float>& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, m.data() + i, 4);
    put_le(out, bits, 4);
  }
}

constexpr std::size_t kHeader = 4 + 1 + 4 + 8;

}  // namespace

void write_checkpoint(const EmbeddingState<float>& state, const std::filesystem::path& file) {
  std::vector<unsigned char> bytes = {'K', 'G', 'A', 'L', kCheckpointVersion};
  put_le(bytes, static_cast<std::uint64_t>(state.input_table.cols()), 4);
  put_le(bytes, static_cast<std::uint64_t>(state.input_table.rows()), 8);
  put_floats(bytes, state.input_table);
  for (const auto* block : state.params.blocks()) put_floats(bytes, *block);
  std::uint64_t sum = 0;
  for (std::size_t i = kHeader; i < bytes.size(); ++i) sum += bytes[i];
  put_le(bytes, sum, 8);

  std::ofstream out(file, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write " + file.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw RuntimeFailure("short write to " + file.string());
}

EmbeddingState<float> read_checkpoint(const std::filesystem::path& file, EncoderShape shape) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ValidationError("missing checkpoint " + file.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < kHeader + 8 || std::memcmp(bytes.data(), "KGAL", 4) != 0) {
    throw ValidationError(file.string() + ": not a checkpoint");
  }
  if (bytes[4] != kCheckpointVersion) {
    throw ValidationError(file.string() + ": unsupported checkpoint version " + std::to_string(bytes[4]));
  }
  const auto dim = static_cast<std::size_t>(get_le(bytes.data() + 5, 4));
  const auto nodes = static_cast<std::size_t>(get_le(bytes.data() + 9, 8));
  if (shape.dim != 0 && shape.dim != dim) {
    throw ValidationError(file.string() + ": checkpoint dim " + std::to_string(dim) + " does not match config dim " +
                          std::to_string(shape.dim));
  }
  shape.dim = dim;

  EmbeddingState<float> state;
  state.input_table.resize(static_cast<Eigen::Index>(nodes), static_cast<Eigen::Index>(dim));
  state.params = EncoderParams<float>::zeros(shape);
  std::vector<Mat<float>*> blocks{&state.input_table};
  for (auto* b : state.params.blocks()) blocks.push_back(b);
  std::size_t floats = 0;
  for (auto* b : blocks) floats += static_cast<std::size_t>(b->size());
  if (bytes.size() != kHeader + 4 * floats + 8) {
    throw ValidationError(file.string() + ": size does not match the expected encoder shape");
  }

  std::uint64_t sum = 0;
  for (std::size_t i = kHeader; i < bytes.size() - 8; ++i) sum += bytes[i];
  if (sum != get_le(bytes.data() + bytes.size() - 8, 8)) throw ValidationError(file.string() + ": checksum mismatch");

  const unsigned char* p = bytes.data() + kHeader;
  for (auto* b : blocks) {
    for (Eigen::Index i = 0; i < b->size(); ++i, p += 4) {
      const auto bits = static_cast<std::uint32_t>(get_le(p, 4));
      std::memcpy(b->data() + i, &bits, 4);
    }
  }
  return state;
}

}  // namespace kgalign
