#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

namespace artiprobe {

// Incremental SHA-256; digests are lowercase hex.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(std::string_view bytes);
  // Length-prefixed, so a sequence of fields hashes unambiguously.
  Sha256& field(std::string_view bytes);
  Sha256& file(const std::filesystem::path& path);
  std::string hex();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace artiprobe
