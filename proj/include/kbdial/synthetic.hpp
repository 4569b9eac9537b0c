#ifndef KBDIAL_SYNTHETIC_HPP_
#define KBDIAL_SYNTHETIC_HPP_

#include <cstdint>
#include <string>

#include <json.hpp>

#include "kbdial/corpus.hpp"

namespace kbdial {

// Templated navigation dialogues over randomly drawn KBs, written in the
// KVRET JSON layout so they go through the regular loader.
struct SyntheticConfig {
  std::size_t dialogues = 500;
  std::size_t kb_rows = 8;
  std::uint64_t seed = 7;
  std::string id_prefix = "synth";
};

nlohmann::json synthetic_kvret(const SyntheticConfig& config);

// Raw KVRET-style "items" for the two navigation tables used as fixtures.
nlohmann::json gas_station_kb_items();  // eight rows, Valero is the gas station
nlohmann::json chevron_kb_items();      // seven rows, Chevron is the gas station

KBTable navigation_table(const nlohmann::json& items);

}  // namespace kbdial

#endif  // KBDIAL_SYNTHETIC_HPP_
