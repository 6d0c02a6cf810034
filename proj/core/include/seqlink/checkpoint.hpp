#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "seqlink/neural.hpp"

namespace seqlink::neural {

// Checkpoint binary layout (little-endian):
//   bytes 0..3   magic "SLCK"
//   u32          format version (currently 1)
//   u64          config hash of the run that produced the parameters
//   u64          tensor count
//   per tensor:  u32 name length, name bytes,
//                u64 rows, u64 cols,
//                rows*cols f64 values, row-major
void save_checkpoint(const std::filesystem::path& path, const ParamStore& store,
                     std::uint64_t config_hash);

// Loads every tensor into `store` (creating parameters as needed) and returns
// the stored config hash. When `expect_config_hash` is set, a mismatch raises
// ValidationError before anything is loaded.
std::uint64_t load_checkpoint(const std::filesystem::path& path, ParamStore& store,
                              std::optional<std::uint64_t> expect_config_hash = std::nullopt);

}  // namespace seqlink::neural
