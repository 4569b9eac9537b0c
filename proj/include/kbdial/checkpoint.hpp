#ifndef KBDIAL_CHECKPOINT_HPP_
#define KBDIAL_CHECKPOINT_HPP_

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "kbdial/parameters.hpp"

namespace kbdial {

// On-disk layout, all integers little-endian:
//   magic "KBDIALCK" | u32 version | u64 manifest bytes | manifest JSON
//   | u64 record count | records...
// record: u32 name bytes | name | u32 rank | u64 dims[rank] | f64 payload
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  nlohmann::json manifest;
  std::vector<std::pair<std::string, Tensor>> records;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

Checkpoint snapshot(const ParameterSet& params, nlohmann::json manifest);
// Copies every record into the parameter of the same name; names and shapes
// must match exactly.
void restore(const Checkpoint& ckpt, ParameterSet& params);

}  // namespace kbdial

#endif  // KBDIAL_CHECKPOINT_HPP_
