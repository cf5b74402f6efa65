#include <doctest.h>

#include <bit>
#include <cstring>
#include <sstream>

#include "fawmf/checkpoint.hpp"
#include "fawmf/errors.hpp"
#include "support.hpp"

using namespace fawmf;

TEST_SUITE("checkpoint") {

TEST_CASE("round trip is bit-identical") {
  Rng rng(1);
  auto p = random_params(7, 5, 3, 2, rng);
  p.beta(0, 0) = -0.0;
  p.w[1] = std::numeric_limits<double>::denorm_min();
  std::stringstream buf;
  save_checkpoint(buf, p);
  const auto q = load_checkpoint(buf);
  CHECK(q == p);
  CHECK(std::signbit(q.beta(0, 0)));
}

TEST_CASE("byte layout") {
  Rng rng(2);
  auto p = random_params(1, 1, 1, 1, rng);
  p.beta(0, 0) = 1.0;
  std::stringstream buf;
  save_checkpoint(buf, p);
  const std::string bytes = buf.str();
  REQUIRE(bytes.size() == 8 + 4 * 8 + 6 * 8);
  CHECK(std::memcmp(bytes.data(), "FAWMF01\0", 8) == 0);
  for (int field = 0; field < 4; ++field) {
    CHECK(bytes[8 + field * 8] == 1);
    for (int b = 1; b < 8; ++b) CHECK(bytes[8 + field * 8 + b] == 0);
  }
  // 1.0 is 0x3FF0000000000000, stored little-endian.
  const char one[8] = {0, 0, 0, 0, 0, 0, char(0xF0), 0x3F};
  CHECK(std::memcmp(bytes.data() + 40, one, 8) == 0);
}

TEST_CASE("corrupt inputs are format errors") {
  Rng rng(3);
  const auto p = random_params(3, 4, 2, 2, rng);
  std::stringstream buf;
  save_checkpoint(buf, p);
  const std::string good = buf.str();

  auto load = [](std::string bytes) {
    std::istringstream in(bytes);
    return load_checkpoint(in);
  };
  std::string bad_magic = good;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(load(bad_magic), FormatError);
  CHECK_THROWS_AS(load(good.substr(0, good.size() - 1)), FormatError);
  CHECK_THROWS_AS(load(good.substr(0, 20)), FormatError);
  CHECK_THROWS_AS(load(good + "x"), FormatError);
  CHECK_THROWS_AS(load(""), FormatError);
  CHECK_THROWS_AS(load_checkpoint(std::filesystem::path("/nonexistent/model.ckpt")), IoError);
}

}  // TEST_SUITE
