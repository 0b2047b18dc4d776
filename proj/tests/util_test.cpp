#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "ctimeta/util.hpp"

using namespace ctimeta;

TEST_CASE("string helpers") {
  CHECK(to_lower("MiXeD Case") == "mixed case");
  CHECK(trim("  x  ") == "x");
  CHECK(trim("\t\r\n") == "");
  CHECK(collapse_whitespace("a\t b\n\nc") == "a b c");
  CHECK(collapse_whitespace("  a  ") == "a");

  auto parts = split("a,b,,c", ',');
  REQUIRE(parts.size() == 4);
  CHECK(parts[2] == "");
}

TEST_CASE("sha256 hex matches known vectors") {
  // Values from the SHA-2 standard test vectors.
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(is_lower_hex(sha256_hex("anything")));
  CHECK_FALSE(is_lower_hex("XYZ"));
}

TEST_CASE("atomic file round trip creates parents") {
  auto dir = std::filesystem::temp_directory_path() / "ctimeta_util_test";
  std::filesystem::remove_all(dir);
  auto path = dir / "a" / "b.txt";
  write_file_atomic(path, "payload");
  CHECK(read_file(path) == "payload");
  std::filesystem::remove_all(dir);
}

TEST_CASE("seeded rng is reproducible and well-ranged") {
  Rng a(1234), b(1234);
  for (int i = 0; i < 100; ++i) CHECK(a.word() == b.word());

  Rng r(99);
  for (int i = 0; i < 1000; ++i) {
    auto v = r.below(7);
    CHECK(v < 7);
    auto u = r.unit();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    auto s = r.range(-3, 3);
    CHECK(s >= -3);
    CHECK(s <= 3);
  }
}

TEST_CASE("shuffle permutes deterministically") {
  std::vector<int> v{1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<int> w = v;
  Rng a(7), b(7);
  a.shuffle(v);
  b.shuffle(w);
  CHECK(v == w);
  std::sort(w.begin(), w.end());
  CHECK(w == std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8});
}
