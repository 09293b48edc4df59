#include "doctest.h"
#include "support.hpp"

#include "locagent/errors.hpp"
#include "locagent/image.hpp"

using namespace locagent;

TEST_CASE("ppm round trip keeps every byte") {
  Rng rng(4);
  const Image img = locagent::testing::random_image(rng, 37, 21, 3);
  const auto bytes = encode_ppm(img);
  CHECK(bytes.size() == std::string("P6\n37 21\n255\n").size() + 37 * 21 * 3);
  CHECK(decode_ppm(bytes) == img);
}

TEST_CASE("gray images are written as rgb") {
  Image gray(4, 3, 1);
  gray.at(2, 1, 0) = 200;
  const Image back = decode_ppm(encode_ppm(gray));
  CHECK(back.channels == 3);
  CHECK(back.at(2, 1, 0) == 200);
  CHECK(back.at(2, 1, 2) == 200);
}

TEST_CASE("decoder tolerates comments and rejects garbage") {
  std::string text = "P6\n# made by hand\n2 1\n255\n";
  std::vector<std::uint8_t> bytes(text.begin(), text.end());
  for (int i = 0; i < 6; ++i) bytes.push_back(std::uint8_t(i));
  const Image img = decode_ppm(bytes);
  CHECK(img.width == 2);
  CHECK(img.at(1, 0, 2) == 5);

  bytes.pop_back();
  CHECK_THROWS_AS(decode_ppm(bytes), ValidationError);
  const std::string p3 = "P3\n1 1\n255\n0 0 0\n";
  CHECK_THROWS_AS(decode_ppm(std::vector<std::uint8_t>(p3.begin(), p3.end())), ValidationError);
  const std::string deep = "P6\n1 1\n65535\n";
  CHECK_THROWS_AS(decode_ppm(std::vector<std::uint8_t>(deep.begin(), deep.end())), ValidationError);
}

TEST_CASE("files round trip") {
  const auto dir = locagent::testing::scratch_dir("image");
  Rng rng(8);
  const Image img = locagent::testing::random_image(rng, 40, 32, 3);
  write_ppm(dir / "nested" / "a.ppm", img);
  CHECK(read_ppm(dir / "nested" / "a.ppm") == img);
  write_text_file(dir / "t.txt", "hello\n");
  CHECK(read_text_file(dir / "t.txt") == "hello\n");
  CHECK_THROWS_AS(read_file_bytes(dir / "missing.bin"), ValidationError);
}
