#include "locagent/image.hpp"

#include <cctype>
#include <fstream>
#include <iterator>
#include <sstream>

#include "locagent/errors.hpp"

namespace locagent {
namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(bytes[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  std::string token;
  while (pos < bytes.size() && !std::isspace(bytes[pos]) && bytes[pos] != '#') {
    token.push_back(static_cast<char>(bytes[pos++]));
  }
  if (token.empty()) throw ValidationError("ppm: truncated header");
  return token;
}

int parse_positive(const std::string& token, const char* field) {
  int value = 0;
  try {
    std::size_t used = 0;
    value = std::stoi(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
  } catch (const std::exception&) {
    throw ValidationError(std::string("ppm: bad ") + field + " '" + token + "'");
  }
  if (value <= 0) throw ValidationError(std::string("ppm: non-positive ") + field);
  return value;
}

}  // namespace

std::vector<std::uint8_t> encode_ppm(const Image& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw ContractError("ppm: only 1 or 3 channel images can be written");
  }
  const std::string header =
      "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const std::size_t npix = static_cast<std::size_t>(image.width) * static_cast<std::size_t>(image.height);
  out.reserve(out.size() + npix * 3);
  if (image.channels == 3) {
    out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  } else {
    for (std::uint8_t v : image.pixels) out.insert(out.end(), {v, v, v});
  }
  return out;
}

Image decode_ppm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  if (next_token(bytes, pos) != "P6") throw ValidationError("ppm: missing P6 magic");
  const int width = parse_positive(next_token(bytes, pos), "width");
  const int height = parse_positive(next_token(bytes, pos), "height");
  if (parse_positive(next_token(bytes, pos), "maxval") != 255) {
    throw ValidationError("ppm: only maxval 255 is supported");
  }
  ++pos;  // single whitespace byte after maxval
  Image image(width, height, 3);
  if (bytes.size() < pos + image.pixels.size()) throw ValidationError("ppm: truncated pixel data");
  std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(pos), image.pixels.size(), image.pixels.begin());
  return image;
}

void write_ppm(const std::filesystem::path& path, const Image& image) {
  write_file_bytes(path, encode_ppm(image));
}

Image read_ppm(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_ppm(bytes);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw RuntimeFailure("write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace locagent
