#include "music102/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "music102/errors.hpp"

namespace music102 {

namespace {
constexpr char kMagic[4] = {'M', '1', '0', '2'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_le(std::ostream& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    for (size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  unsigned char buf[sizeof(T)];
  in.read(reinterpret_cast<char*>(buf), sizeof(T));
  if (!in) throw CheckpointError("checkpoint truncated");
  if constexpr (std::endian::native == std::endian::big)
    for (size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}
}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& config,
                     const ParamSet& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open '" + path + "' for writing");
  out.write(kMagic, 4);
  write_le<uint32_t>(out, kVersion);
  const std::string cfg = config.to_json();
  write_le<uint64_t>(out, cfg.size());
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  write_le<uint64_t>(out, params.scalar_count());
  for (const ParamSet::Entry& e : params.entries)
    for (double x : e.value.data) write_le<double>(out, x);
  if (!out) throw CheckpointError("write to '" + path + "' failed");
}

CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open '" + path + "'");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw CheckpointError("'" + path + "' is not a model checkpoint (bad magic)");
  const uint32_t version = read_le<uint32_t>(in);
  if (version != kVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const uint64_t cfg_len = read_le<uint64_t>(in);
  if (cfg_len > (1u << 20)) throw CheckpointError("config block implausibly large");
  std::string cfg(cfg_len, '\0');
  in.read(cfg.data(), static_cast<std::streamsize>(cfg_len));
  if (!in) throw CheckpointError("checkpoint truncated inside config");

  CheckpointData data;
  data.config = ModelConfig::from_json(cfg);
  // Shapes are derived from the config; the stored scalar count must agree.
  data.params = init_params(data.config, 0);
  const uint64_t stored = read_le<uint64_t>(in);
  if (stored != data.params.scalar_count())
    throw CheckpointError("checkpoint scalar count " + std::to_string(stored) +
                          " does not match config (" +
                          std::to_string(data.params.scalar_count()) + ")");
  for (ParamSet::Entry& e : data.params.entries)
    for (double& x : e.value.data) x = read_le<double>(in);
  char extra;
  if (in.read(&extra, 1))
    throw CheckpointError("trailing bytes after checkpoint payload");
  return data;
}

}  // namespace music102
