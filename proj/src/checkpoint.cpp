#include "fawmf/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>

#include "fawmf/errors.hpp"

namespace fawmf {
namespace {

constexpr std::array<char, 8> kMagic = {'F', 'A', 'W', 'M', 'F', '0', '1', '\0'};
// Refuse headers that would ask for absurd allocations.
constexpr std::uint64_t kMaxDim = std::uint64_t{1} << 32;

void put_u64(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int k = 0; k < 8; ++k) bytes[k] = static_cast<char>((v >> (8 * k)) & 0xff);
  out.write(bytes, 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw FormatError("checkpoint truncated");
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(bytes[k]) << (8 * k);
  return v;
}

void put_doubles(std::ostream& out, std::span<const double> values) {
  for (double d : values) put_u64(out, std::bit_cast<std::uint64_t>(d));
}

void get_doubles(std::istream& in, std::span<double> values) {
  for (double& d : values) d = std::bit_cast<double>(get_u64(in));
}

}  // namespace

void save_checkpoint(std::ostream& out, const ModelParams& params) {
  out.write(kMagic.data(), kMagic.size());
  put_u64(out, params.n_users());
  put_u64(out, params.n_items());
  put_u64(out, params.factors());
  put_u64(out, params.communities());
  put_doubles(out, params.beta.values());
  put_doubles(out, params.alpha);
  put_doubles(out, params.w);
  put_doubles(out, params.b);
  put_doubles(out, params.user_factors.values());
  put_doubles(out, params.item_factors.values());
  if (!out) throw IoError("checkpoint write failed");
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  save_checkpoint(out, params);
}

ModelParams load_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size())) throw FormatError("checkpoint truncated");
  if (magic != kMagic) throw FormatError("not a FAWMF01 checkpoint (bad magic)");
  const std::uint64_t n = get_u64(in);
  const std::uint64_t m = get_u64(in);
  const std::uint64_t K = get_u64(in);
  const std::uint64_t D = get_u64(in);
  if (n == 0 || m == 0 || K == 0 || D == 0 || n > kMaxDim || m > kMaxDim || K > 4096 || D > 4096) {
    throw FormatError("checkpoint header has implausible dimensions");
  }
  ModelParams p;
  p.beta = Matrix(n, D);
  p.alpha.resize(n);
  p.w.resize(m);
  p.b.resize(m);
  p.user_factors = Matrix(n, K);
  p.item_factors = Matrix(m, K);
  get_doubles(in, p.beta.values());
  get_doubles(in, p.alpha);
  get_doubles(in, p.w);
  get_doubles(in, p.b);
  get_doubles(in, p.user_factors.values());
  get_doubles(in, p.item_factors.values());
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after checkpoint");
  return p;
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return load_checkpoint(in);
}

}  // namespace fawmf
