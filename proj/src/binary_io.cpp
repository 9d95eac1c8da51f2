#include "segraph/binary_io.hpp"

#include <fstream>
#include <iterator>

#include <fmt/format.h>

namespace segraph {

void ByteWriter::write_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot open '{}' for writing", path));
  out.write(reinterpret_cast<const char*>(bytes_.data()), static_cast<std::streamsize>(bytes_.size()));
  if (!out) throw DataError(fmt::format("write to '{}' failed", path));
}

ByteReader ByteReader::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path));
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return ByteReader(std::move(bytes), path);
}

void ByteReader::fail(std::string_view message) const {
  throw DataError(fmt::format("{}{}at byte offset {}: {}", origin_, origin_.empty() ? "" : " ", pos_, message));
}

void ByteReader::require(std::size_t n, std::string_view what) const {
  if (bytes_.size() - pos_ < n) {
    fail(fmt::format("truncated {} (need {} bytes, {} left)", what, n, bytes_.size() - pos_));
  }
}

std::string ByteReader::get_bytes(std::size_t n, std::string_view what) {
  require(n, what);
  std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
  pos_ += n;
  return s;
}

void ByteReader::get_floats(std::span<float> out, std::string_view what) {
  require(out.size_bytes(), what);
  std::memcpy(out.data(), bytes_.data() + pos_, out.size_bytes());
  pos_ += out.size_bytes();
}

}  // namespace segraph
