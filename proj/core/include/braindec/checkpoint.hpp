#pragma once

#include <filesystem>

#include "braindec/lstm.hpp"

namespace braindec {

// Decoder checkpoint file.
//
//   magic   8 bytes  "LSTMDEC1"
//   version u8       currently 1
//   then the 18 tensors in visit_tensors order, each as
//     rank  u32 little-endian          (2 for matrices, 1 for vectors)
//     dims  rank x u32 little-endian   (rows, cols)
//     data  row-major f64 little-endian
void save_checkpoint(const std::filesystem::path& path, const DecoderParams& params);
DecoderParams load_checkpoint(const std::filesystem::path& path);

// True when the file starts with the decoder magic; used by the CLI to tell
// decoder checkpoints from forest checkpoints.
bool is_decoder_checkpoint(const std::filesystem::path& path);

}  // namespace braindec
