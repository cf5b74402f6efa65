#pragma once

#include <filesystem>
#include <iosfwd>

#include "fawmf/model.hpp"

namespace fawmf {

// Binary layout, all integers and floats little-endian:
//   "FAWMF01\0"                      8 bytes
//   n, m, K, D                        uint64 each
//   beta (n*D), alpha (n), w (m), b (m), U (n*K), V (m*K)
//                                     IEEE-754 binary64, row-major
void save_checkpoint(std::ostream& out, const ModelParams& params);
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);

/// Throws FormatError on a bad magic, truncation or trailing bytes.
ModelParams load_checkpoint(std::istream& in);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace fawmf
