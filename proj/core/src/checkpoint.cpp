#include "seqlink/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace seqlink::neural {

namespace {

constexpr char kMagic[4] = {'S', 'L', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const char* what) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw ParseError(std::string("checkpoint: truncated while reading ") + what);
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParamStore& store,
                     std::uint64_t config_hash) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("checkpoint: cannot open for writing: " + path.string());
  os.write(kMagic, 4);
  write_pod(os, kVersion);
  write_pod(os, config_hash);
  auto names = store.names();
  write_pod(os, static_cast<std::uint64_t>(names.size()));
  for (const auto& name : names) {
    const Mat& m = store.param(name);
    write_pod(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod(os, static_cast<std::uint64_t>(m.rows()));
    write_pod(os, static_cast<std::uint64_t>(m.cols()));
    os.write(reinterpret_cast<const char*>(m.data()),
             static_cast<std::streamsize>(sizeof(double) * m.size()));
  }
  if (!os) throw ValidationError("checkpoint: write failed: " + path.string());
}

std::uint64_t load_checkpoint(const std::filesystem::path& path, ParamStore& store,
                              std::optional<std::uint64_t> expect_config_hash) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("checkpoint: cannot open: " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw ParseError("checkpoint: bad magic in " + path.string());
  auto version = read_pod<std::uint32_t>(is, "version");
  if (version != kVersion)
    throw ParseError("checkpoint: unsupported version " + std::to_string(version));
  auto hash = read_pod<std::uint64_t>(is, "config hash");
  if (expect_config_hash && *expect_config_hash != hash)
    throw ValidationError("checkpoint: config hash mismatch for " + path.string() +
                          " (checkpoint was produced by a different configuration)");
  auto count = read_pod<std::uint64_t>(is, "tensor count");
  for (std::uint64_t t = 0; t < count; ++t) {
    auto name_len = read_pod<std::uint32_t>(is, "name length");
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) throw ParseError("checkpoint: truncated name");
    auto rows = static_cast<int>(read_pod<std::uint64_t>(is, "rows"));
    auto cols = static_cast<int>(read_pod<std::uint64_t>(is, "cols"));
    Mat& m = store.has(name) ? store.param(name) : store.create(name, rows, cols);
    if (m.rows() != rows || m.cols() != cols)
      throw DimensionError("checkpoint: shape mismatch for " + name);
    if (!is.read(reinterpret_cast<char*>(m.data()),
                 static_cast<std::streamsize>(sizeof(double) * m.size())))
      throw ParseError("checkpoint: truncated data for " + name);
  }
  return hash;
}

}  // namespace seqlink::neural
