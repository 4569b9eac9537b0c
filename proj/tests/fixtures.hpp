#ifndef KBDIAL_TESTS_FIXTURES_HPP_
#define KBDIAL_TESTS_FIXTURES_HPP_

#include <memory>

#include "kbdial/corpus.hpp"
#include "kbdial/synthetic.hpp"

namespace kbdial::testing {

// Small navigation world: the gas-station table plus a few words.
inline Vocabulary tiny_vocab(const KBTable& kb) {
  std::vector<std::string> words = {"address", "to", "the", "is", "located", "at", "gas_station",
                                    "valero", "200_alester_ave", "."};
  return Vocabulary::from_tokens(words, kb.columns);
}

inline std::shared_ptr<const KBTable> gas_station_table() {
  return std::make_shared<const KBTable>(navigation_table(gas_station_kb_items()));
}

inline Instance gas_station_instance(std::shared_ptr<const KBTable> kb) {
  Instance inst;
  inst.dialogue_id = "fixture";
  inst.turn_index = 1;
  inst.input = {"<driver>", "address", "to", "the", "gas_station", "."};
  inst.target = {"valero", "is", "located", "at", "200_alester_ave", ".", "<eos>"};
  inst.kb = std::move(kb);
  return inst;
}

}  // namespace kbdial::testing

#endif  // KBDIAL_TESTS_FIXTURES_HPP_
