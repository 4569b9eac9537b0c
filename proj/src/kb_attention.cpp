#include "kbdial/kb_attention.hpp"

#include <utility>

namespace kbdial {

Var TableEncoding::entry(std::size_t k) const {
  if (k >= entries) throw DimensionError("entry index out of range");
  return ad::slice_cols(cells, k * columns, columns);
}

TableEncoding encode_table(Var embedding, Var wc, std::span<const std::size_t> value_ids,
                           std::span<const std::size_t> column_ids) {
  const std::size_t m = column_ids.size();
  if (m == 0) throw ContractError("encode_table: table has no columns");
  if (value_ids.empty() || value_ids.size() % m != 0)
    throw ContractError("encode_table: " + std::to_string(value_ids.size()) +
                        " cell ids do not fill rows of " + std::to_string(m) + " columns");
  const std::size_t rows = value_ids.size() / m;
  std::vector<std::size_t> names;
  names.reserve(value_ids.size());
  for (std::size_t k = 0; k < rows; ++k) names.insert(names.end(), column_ids.begin(), column_ids.end());
  Var values = ad::embed_lookup(embedding, value_ids);
  Var fields = ad::embed_lookup(embedding, names);
  const Var parts[] = {values, fields};
  Var cells = ad::tanh(ad::matmul(wc, ad::concat_rows(parts)));
  return {cells, rows, m};
}

KBQueryResult query(const TableEncoding& table, Var state_memory, Var wcat) {
  if (table.entries == 0) throw ContractError("query: empty knowledge base");
  if (state_memory.cols() != table.columns || state_memory.rows() != table.cells.rows())
    throw DimensionError("query: state memory is " + std::to_string(state_memory.rows()) + "x" +
                         std::to_string(state_memory.cols()) + " but cells are " +
                         std::to_string(table.cells.rows()) + "x" + std::to_string(table.columns));
  const std::size_t n = table.entries, m = table.columns;
  std::vector<Var> sims;
  sims.reserve(n);
  for (std::size_t k = 0; k < n; ++k)
    sims.push_back(ad::sum(ad::mul(table.entry(k), state_memory)));
  Var similarity = n == 1 ? sims[0] : ad::concat_rows(sims);
  Var probs = ad::softmax(similarity, 0);

  // U^KB = cells * S where S[k*m + c, c] = p_k.
  std::vector<std::pair<std::size_t, std::size_t>> spread;
  spread.reserve(n * m);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t c = 0; c < m; ++c) spread.emplace_back(k, (k * m + c) * m + c);
  Var selector = ad::scatter_add(probs, {n * m, m}, spread);
  Var kb_memory = ad::matmul(table.cells, selector);

  const Var parts[] = {state_memory, kb_memory};
  Var memory = ad::tanh(ad::matmul(wcat, ad::concat_rows(parts)));
  return {similarity, probs, kb_memory, memory};
}

}  // namespace kbdial
