#include "rpm/nn/checkpoint.hpp"

#include <fstream>
#include <iterator>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "rpm/domain/bytes.hpp"

namespace rpm::nn {

namespace {

constexpr std::uint8_t kMagic[4] = {'R', 'P', 'M', 'M'};

void put_architecture(std::vector<std::uint8_t>& out, const Architecture& arch) {
  bytes::put_u32(out, static_cast<std::uint32_t>(arch.in_channels));
  bytes::put_u32(out, static_cast<std::uint32_t>(arch.in_height));
  bytes::put_u32(out, static_cast<std::uint32_t>(arch.in_width));
  bytes::put_u32(out, static_cast<std::uint32_t>(arch.kernel));
  bytes::put_u32(out, static_cast<std::uint32_t>(arch.block_channels.size()));
  for (auto c : arch.block_channels) bytes::put_u32(out, static_cast<std::uint32_t>(c));
  bytes::put_u32(out, static_cast<std::uint32_t>(arch.n_classes));
}

Architecture get_architecture(bytes::Reader& in) {
  Architecture arch;
  arch.in_channels = in.u32();
  arch.in_height = in.u32();
  arch.in_width = in.u32();
  arch.kernel = in.u32();
  const std::uint32_t blocks = in.u32();
  if (blocks > 64) throw CheckpointError(fmt::format("implausible block count {}", blocks));
  arch.block_channels.clear();
  for (std::uint32_t b = 0; b < blocks; ++b) arch.block_channels.push_back(in.u32());
  arch.n_classes = in.u32();
  return arch;
}

std::string describe(const Architecture& a) {
  return fmt::format("in {}x{}x{}, kernel {}, blocks [{}], classes {}", a.in_channels, a.in_height, a.in_width,
                     a.kernel, fmt::join(a.block_channels, ","), a.n_classes);
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Model& model, std::span<const std::string> vocabulary) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  bytes::put_u8(out, kCheckpointVersion);
  put_architecture(out, model.architecture());
  for (const auto values : model.parameter_values()) {
    for (double v : values) bytes::put_f64(out, v);
  }
  bytes::put_u32(out, static_cast<std::uint32_t>(vocabulary.size()));
  for (const auto& label : vocabulary) {
    if (label.size() > 0xFFFF) throw CheckpointError("vocabulary label too long");
    bytes::put_u16(out, static_cast<std::uint16_t>(label.size()));
    out.insert(out.end(), label.begin(), label.end());
  }
  return out;
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> data, const std::optional<Architecture>& expected) {
  try {
    bytes::Reader in(data);
    const auto magic = in.take(4);
    if (!std::equal(magic.begin(), magic.end(), std::begin(kMagic))) throw CheckpointError("not a model checkpoint");
    const auto version = in.u8();
    if (version != kCheckpointVersion) throw CheckpointError(fmt::format("unsupported checkpoint version {}", version));

    const Architecture arch = get_architecture(in);
    if (expected && !(arch == *expected)) {
      throw CheckpointError(fmt::format("architecture mismatch: file has {}, expected {}", describe(arch),
                                        describe(*expected)));
    }
    Model model(arch, 0);
    for (auto& param : model.parameters()) {
      for (double& v : param.values) v = in.f64();
    }
    std::vector<std::string> vocabulary(in.u32());
    for (auto& label : vocabulary) {
      const auto raw = in.take(in.u16());
      label.assign(raw.begin(), raw.end());
    }
    if (in.remaining() != 0) throw CheckpointError("trailing bytes after checkpoint");
    if (!vocabulary.empty() && vocabulary.size() != arch.n_classes) {
      throw CheckpointError(
          fmt::format("vocabulary of {} labels for a {}-class model", vocabulary.size(), arch.n_classes));
    }
    return Checkpoint{std::move(model), std::move(vocabulary)};
  } catch (const CheckpointError&) {
    throw;
  } catch (const Error& e) {
    throw CheckpointError(fmt::format("malformed checkpoint: {}", e.what()));
  }
}

void save_checkpoint(const std::filesystem::path& path, const Model& model, std::span<const std::string> vocabulary) {
  const auto buf = serialize_checkpoint(model, vocabulary);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(fmt::format("cannot open {} for writing", path.string()));
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw CheckpointError(fmt::format("write to {} failed", path.string()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const std::optional<Architecture>& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(fmt::format("cannot open {}", path.string()));
  const std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(buf, expected);
}

}  // namespace rpm::nn
