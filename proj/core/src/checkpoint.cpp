#include "braindec/checkpoint.hpp"

#include <fstream>
#include <string>

#include "braindec/errors.hpp"
#include "braindec/io.hpp"

namespace braindec {

namespace {

constexpr char kMagic[8] = {'L', 'S', 'T', 'M', 'D', 'E', 'C', '1'};
constexpr std::uint8_t kVersion = 1;

template <class Tensor>
void write_tensor(std::ostream& os, const Tensor& t) {
  constexpr bool is_vector = Tensor::ColsAtCompileTime == 1;
  if constexpr (is_vector) {
    bin::write_u32(os, 1);
    bin::write_u32(os, static_cast<std::uint32_t>(t.size()));
    for (Eigen::Index i = 0; i < t.size(); ++i) bin::write_f64(os, t(i));
  } else {
    bin::write_u32(os, 2);
    bin::write_u32(os, static_cast<std::uint32_t>(t.rows()));
    bin::write_u32(os, static_cast<std::uint32_t>(t.cols()));
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) bin::write_f64(os, t(r, c));
  }
}

template <class Tensor>
void read_tensor(std::istream& is, const char* name, Tensor& t) {
  constexpr bool is_vector = Tensor::ColsAtCompileTime == 1;
  const std::uint32_t rank = bin::read_u32(is);
  const std::uint32_t want_rank = is_vector ? 1 : 2;
  if (rank != want_rank) {
    throw ParseError(std::string("checkpoint: tensor ") + name + " has rank " +
                     std::to_string(rank) + ", expected " + std::to_string(want_rank));
  }
  if constexpr (is_vector) {
    const std::uint32_t n = bin::read_u32(is);
    t.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) t(i) = bin::read_f64(is);
  } else {
    const std::uint32_t rows = bin::read_u32(is);
    const std::uint32_t cols = bin::read_u32(is);
    t.resize(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c) t(r, c) = bin::read_f64(is);
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const DecoderParams& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os.write(kMagic, sizeof(kMagic));
  bin::write_u8(os, kVersion);
  visit_tensors([&os](const char*, const auto& t) { write_tensor(os, t); }, params);
  if (!os) throw IoError("write failed: " + path.string());
}

DecoderParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path.string());
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::string(magic, 8) != std::string(kMagic, 8)) {
    throw ParseError(path.string() + ": bad checkpoint magic");
  }
  const std::uint8_t version = bin::read_u8(is);
  if (version != kVersion) {
    throw ParseError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  DecoderParams p;
  try {
    visit_tensors([&is](const char* name, auto& t) { read_tensor(is, name, t); }, p);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  // Trailing garbage or cross-tensor inconsistency both mean a corrupt file.
  if (is.peek() != EOF) throw ParseError(path.string() + ": trailing bytes after last tensor");
  if (p.layer2.input_size() != p.layer1.hidden_size() ||
      p.w_s.cols() != p.layer2.hidden_size() || p.b_s.size() != p.w_s.rows()) {
    throw ParseError(path.string() + ": tensor shapes are mutually inconsistent");
  }
  return p;
}

bool is_decoder_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path.string());
  char magic[8];
  return is.read(magic, sizeof(magic)) && std::string(magic, 8) == std::string(kMagic, 8);
}

}  // namespace braindec
