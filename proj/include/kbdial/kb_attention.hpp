#ifndef KBDIAL_KB_ATTENTION_HPP_
#define KBDIAL_KB_ATTENTION_HPP_

#include <span>
#include <vector>

#include "kbdial/model.hpp"

namespace kbdial {

// Cell representations of a whole table. Column k*m + c of `cells` is the
// representation of entry k, column c: tanh(W^C [value emb; column-name emb]).
struct TableEncoding {
  Var cells;  // d x (|T| * m)
  std::size_t entries = 0;
  std::size_t columns = 0;

  // C_k, d x m
  Var entry(std::size_t k) const;
};

// value_ids holds |T|*m embedding ids in row-major (entry, column) order;
// column_ids holds the m column-name embedding ids.
TableEncoding encode_table(Var embedding, Var wc, std::span<const std::size_t> value_ids,
                           std::span<const std::size_t> column_ids);

struct KBQueryResult {
  Var similarity;   // |T| x 1, sum over slots of c_{k,t} . u_t
  Var entry_probs;  // |T| x 1
  Var kb_memory;    // U^KB, d x m
  Var memory;       // U = tanh(W^CAT [U^IN; U^KB]), d x m
};

KBQueryResult query(const TableEncoding& table, Var state_memory, Var wcat);

}  // namespace kbdial

#endif  // KBDIAL_KB_ATTENTION_HPP_
