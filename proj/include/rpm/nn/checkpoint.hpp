#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rpm/nn/model.hpp"

namespace rpm::nn {

class CheckpointError : public Error {
 public:
  using Error::Error;
};

inline constexpr std::uint8_t kCheckpointVersion = 1;

struct Checkpoint {
  Model model;
  std::vector<std::string> vocabulary;
};

/// "RPMM" | version u8 | architecture descriptor | every parameter in
/// declaration order as big-endian f64 | vocabulary (count, then
/// length-prefixed labels).
std::vector<std::uint8_t> serialize_checkpoint(const Model& model, std::span<const std::string> vocabulary);

/// Throws CheckpointError on a malformed buffer, or when `expected` is given and
/// the stored architecture differs from it.
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes,
                                  const std::optional<Architecture>& expected = std::nullopt);

void save_checkpoint(const std::filesystem::path& path, const Model& model, std::span<const std::string> vocabulary);
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const std::optional<Architecture>& expected = std::nullopt);

}  // namespace rpm::nn
