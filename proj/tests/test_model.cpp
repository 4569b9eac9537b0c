#include <doctest.h>

#include <cmath>
#include <numeric>

#include "checks.hpp"
#include "fixtures.hpp"
#include "kbdial/decoder.hpp"
#include "kbdial/encoder.hpp"
#include "kbdial/kb_attention.hpp"
#include "support.hpp"

using namespace kbdial;
using namespace kbdial::testing;

namespace {

ModelConfig small_config(std::size_t words, std::size_t slots, std::size_t dim = 3) {
  ModelConfig c;
  c.dim = dim;
  c.word_count = words;
  c.slot_count = slots;
  c.dropout = 0.0;
  c.init_range = 0.5;
  c.embed_init_range = 0.5;
  return c;
}

double column_sum(const Tensor& t, std::size_t c) {
  double s = 0.0;
  for (std::size_t r = 0; r < t.rows(); ++r) s += t.at(r, c);
  return s;
}

}  // namespace

TEST_CASE("model matches the straight-line oracle on the d=2 fixture") {
  for (const auto& m : checks::brute_force_errors(KBDIAL_TEST_DATA "/brute_force.json")) {
    CAPTURE(m.name);
    CHECK(m.value < 1e-12);
  }
}

TEST_CASE("every distribution sums to one over random parameterizations") {
  CHECK(checks::normalization_deviation(300, 99) < 1e-9);
}

TEST_CASE("encoder: one state per token, deterministic, empty input rejected") {
  Model model(small_config(10, 2), 4);
  Graph g = Graph::inference();
  ModelVars w(g, model);
  const std::size_t one[] = {7};
  CHECK(encode(w, one, ForwardMode{}).states.cols() == 1);
  const std::size_t ids[] = {7, 8, 9, 3};
  const Tensor a = encode(w, ids, ForwardMode{}).states.value();
  const Tensor b = encode(w, ids, ForwardMode{}).states.value();
  CHECK(a.cols() == 4);
  CHECK(a == b);
  CHECK_THROWS_AS(encode(w, std::span<const std::size_t>{}, ForwardMode{}), ContractError);
}

TEST_CASE("forget gate bias starts at one, other weights inside the init range") {
  ModelConfig cfg = small_config(10, 2, 4);
  cfg.init_range = 0.08;
  Model model(cfg, 5);
  const Tensor& b = model.params().get("encoder.b").value;
  for (std::size_t i = 0; i < 16; ++i) {
    if (i >= 4 && i < 8)
      CHECK(b[i] == 1.0);
    else
      CHECK(std::abs(b[i]) <= 0.08);
  }
  for (double v : model.params().get("decoder.wh").value.values()) CHECK(std::abs(v) <= 0.08);
}

TEST_CASE("state representation: single position and zero scoring vectors") {
  Graph g = Graph::inference();
  std::mt19937_64 rng(6);
  Var h1 = g.constant(random_tensor({3, 1}, rng));
  Var wa = g.constant(random_tensor({3, 4}, rng));
  const StateRepresentation one = state_representation(h1, wa);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(one.attention.value().at(k, 0) == 1.0);
    for (std::size_t r = 0; r < 3; ++r) CHECK(one.memory.value().at(r, k) == h1.value()[r]);
  }

  const Tensor hs = random_tensor({3, 5}, rng);
  const StateRepresentation zero = state_representation(g.constant(hs), g.constant(Tensor({3, 2})));
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t r = 0; r < 3; ++r) {
      double mean = 0.0;
      for (std::size_t t = 0; t < 5; ++t) mean += hs.at(r, t) / 5.0;
      CHECK(zero.memory.value().at(r, k) == doctest::Approx(mean).epsilon(1e-14));
    }
}

TEST_CASE("state representation is a convex combination and permutes with W^A columns") {
  Graph g = Graph::inference();
  std::mt19937_64 rng(7);
  const Tensor hs = random_tensor({4, 6}, rng);
  const Tensor wa = random_tensor({4, 3}, rng, -3, 3);
  const StateRepresentation st = state_representation(g.constant(hs), g.constant(wa));
  const Tensor& a = st.attention.value();
  for (std::size_t k = 0; k < 3; ++k) {
    double s = 0.0;
    for (std::size_t t = 0; t < 6; ++t) {
      CHECK(a.at(k, t) >= 0.0);
      s += a.at(k, t);
    }
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
  Tensor swapped = wa;
  for (std::size_t r = 0; r < 4; ++r) std::swap(swapped.at(r, 0), swapped.at(r, 2));
  const StateRepresentation sw = state_representation(g.constant(hs), g.constant(swapped));
  for (std::size_t r = 0; r < 4; ++r) {
    CHECK(sw.memory.value().at(r, 0) == st.memory.value().at(r, 2));
    CHECK(sw.memory.value().at(r, 1) == st.memory.value().at(r, 1));
  }
}

TEST_CASE("cell encoding matches tanh(W^C [value; column]) by hand") {
  Graph g = Graph::inference();
  // rows: 0 value a, 1 value b, 2 column name
  Var emb = g.constant(Tensor::matrix(3, 2, {0.5, -1.0, 2.0, 0.25, -0.75, 1.5}));
  Var wc = g.constant(Tensor::matrix(2, 4, {0.1, 0.2, 0.3, 0.4, -0.5, 0.6, -0.7, 0.8}));
  const std::size_t values[] = {0, 1};
  const std::size_t columns[] = {2};
  const TableEncoding t = encode_table(emb, wc, values, columns);
  CHECK(t.entries == 2);
  CHECK(t.columns == 1);
  const Tensor& c = t.cells.value();
  CHECK(c.at(0, 0) == doctest::Approx(std::tanh(0.1 * 0.5 + 0.2 * -1.0 + 0.3 * -0.75 + 0.4 * 1.5)).epsilon(1e-15));
  CHECK(c.at(1, 0) == doctest::Approx(std::tanh(-0.5 * 0.5 + 0.6 * -1.0 + -0.7 * -0.75 + 0.8 * 1.5)).epsilon(1e-15));
  CHECK(c.at(0, 1) == doctest::Approx(std::tanh(0.1 * 2.0 + 0.2 * 0.25 + 0.3 * -0.75 + 0.4 * 1.5)).epsilon(1e-15));
  CHECK(c.at(1, 1) == doctest::Approx(std::tanh(-0.5 * 2.0 + 0.6 * 0.25 + -0.7 * -0.75 + 0.8 * 1.5)).epsilon(1e-15));

  const std::size_t ragged[] = {0, 1, 0};
  const std::size_t two_columns[] = {2, 2};
  CHECK_THROWS_AS(encode_table(emb, wc, ragged, two_columns), ContractError);
}

TEST_CASE("rows differing in one cell differ only in that cell's representation") {
  Model model(small_config(12, 3), 8);
  Graph g = Graph::inference();
  ModelVars w(g, model);
  const std::size_t values[] = {7, 8, 9, 7, 10, 9};
  const std::size_t columns[] = {12, 13, 14};
  const Tensor c = encode_table(w.embedding, w.kb_wc, values, columns).cells.value();
  for (std::size_t r = 0; r < c.rows(); ++r) {
    CHECK(c.at(r, 0) == c.at(r, 3));
    CHECK(c.at(r, 2) == c.at(r, 5));
  }
  CHECK(c.at(0, 1) != c.at(0, 4));
}

TEST_CASE("KB query: single entry, identical entries, shift invariance, row shuffles") {
  Model model(small_config(12, 2), 9);
  Graph g = Graph::inference();
  ModelVars w(g, model);
  std::mt19937_64 rng(10);
  Var u_in = g.constant(random_tensor({3, 2}, rng));
  const std::size_t columns[] = {12, 13};

  const std::size_t single[] = {7, 8};
  const TableEncoding t1 = encode_table(w.embedding, w.kb_wc, single, columns);
  const KBQueryResult q1 = query(t1, u_in, w.kb_wcat);
  CHECK(q1.entry_probs.value()[0] == 1.0);
  CHECK(q1.kb_memory.value() == t1.cells.value());

  const std::size_t twins[] = {7, 8, 7, 8};
  const KBQueryResult q2 = query(encode_table(w.embedding, w.kb_wc, twins, columns), u_in, w.kb_wcat);
  CHECK(q2.entry_probs.value()[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(q2.entry_probs.value()[1] == doctest::Approx(0.5).epsilon(1e-15));

  const std::size_t rows[] = {7, 8, 9, 10, 11, 7};
  const std::size_t shuffled[] = {11, 7, 7, 8, 9, 10};
  const KBQueryResult a = query(encode_table(w.embedding, w.kb_wc, rows, columns), u_in, w.kb_wcat);
  const KBQueryResult b =
      query(encode_table(w.embedding, w.kb_wc, shuffled, columns), u_in, w.kb_wcat);
  const std::size_t perm[] = {1, 2, 0};  // row k of `rows` is row perm[k] of `shuffled`
  for (std::size_t k = 0; k < 3; ++k)
    CHECK(a.entry_probs.value()[k] == doctest::Approx(b.entry_probs.value()[perm[k]]).epsilon(1e-14));
  for (std::size_t i = 0; i < a.kb_memory.value().size(); ++i)
    CHECK(a.kb_memory.value()[i] == doctest::Approx(b.kb_memory.value()[i]).epsilon(1e-14));

  Var shifted = ad::add(a.similarity, g.constant(Tensor({3, 1}, 17.0)));
  const Tensor p = ad::softmax(shifted, 0).value();
  for (std::size_t k = 0; k < 3; ++k)
    CHECK(p[k] == doctest::Approx(a.entry_probs.value()[k]).epsilon(1e-13));

  CHECK_THROWS_AS(query(t1, g.constant(Tensor({3, 3})), w.kb_wcat), DimensionError);
}

TEST_CASE("one checkpoint queries tables of any row count") {
  Model model(small_config(12, 2), 11);
  const std::size_t before = model.params().size();
  Graph g = Graph::inference();
  ModelVars w(g, model);
  std::mt19937_64 rng(12);
  Var u_in = g.constant(random_tensor({3, 2}, rng));
  const std::size_t columns[] = {12, 13};
  for (std::size_t rows = 1; rows <= 9; rows += 4) {
    std::vector<std::size_t> values(rows * 2, 7);
    const KBQueryResult q = query(encode_table(w.embedding, w.kb_wc, values, columns), u_in, w.kb_wcat);
    CHECK(q.entry_probs.rows() == rows);
    CHECK(q.memory.rows() == 3);
    CHECK(q.memory.cols() == 2);
  }
  CHECK(model.params().size() == before);
}

TEST_CASE("input and memory attention: single key and zero scoring vector") {
  Graph g = Graph::inference();
  std::mt19937_64 rng(13);
  Var h = g.constant(random_tensor({2, 1}, rng));
  Var w1 = g.constant(random_tensor({2, 2}, rng));
  Var w2 = g.constant(random_tensor({2, 2}, rng));
  Var v = g.constant(random_tensor({1, 2}, rng));
  Var one = g.constant(random_tensor({2, 1}, rng));
  const Attention in_one = input_attention(one, h, w1, w2, v);
  const Attention mem_one = memory_attention(one, h, w1, w2, v);
  CHECK(in_one.weights.value()[0] == 1.0);
  CHECK(in_one.context.value() == one.value());
  CHECK(mem_one.context.value() == one.value());

  const Tensor keys = random_tensor({2, 3}, rng);
  Var zero_v = g.constant(Tensor({1, 2}));
  for (const Attention& a : {input_attention(g.constant(keys), h, w1, w2, zero_v),
                             memory_attention(g.constant(keys), h, w1, w2, zero_v)})
    for (std::size_t r = 0; r < 2; ++r)
      CHECK(a.context.value()[r] ==
            doctest::Approx((keys.at(r, 0) + keys.at(r, 1) + keys.at(r, 2)) / 3.0).epsilon(1e-14));
}

TEST_CASE("input attention matches a hand computation") {
  Graph g = Graph::inference();
  const Tensor keys = Tensor::matrix(2, 3, {0.2, -0.4, 0.9, 0.5, 0.1, -0.3});
  Var h = g.constant(Tensor::matrix(2, 1, {0.3, -0.6}));
  Var w_enc = g.constant(Tensor::matrix(2, 2, {1.0, 0.5, -0.5, 2.0}));
  Var w_dec = g.constant(Tensor::matrix(2, 2, {0.25, 0.0, 0.75, -1.0}));
  Var v = g.constant(Tensor::matrix(1, 2, {1.5, -0.5}));
  const Attention a = input_attention(g.constant(keys), h, w_enc, w_dec, v);
  const double q0 = 0.25 * 0.3, q1 = 0.75 * 0.3 - 1.0 * -0.6;
  double s[3], z = 0.0;
  for (int t = 0; t < 3; ++t) {
    const double k0 = keys.at(0, t), k1 = keys.at(1, t);
    s[t] = 1.5 * std::tanh(1.0 * k0 + 0.5 * k1 + q0) - 0.5 * std::tanh(-0.5 * k0 + 2.0 * k1 + q1);
  }
  const double top = std::max({s[0], s[1], s[2]});
  for (double& x : s) z += (x = std::exp(x - top));
  for (int r = 0; r < 2; ++r) {
    const double ctx = (s[0] * keys.at(r, 0) + s[1] * keys.at(r, 1) + s[2] * keys.at(r, 2)) / z;
    CHECK(std::abs(a.context.value()[r] - ctx) < 1e-12);
  }
}

TEST_CASE("output distribution: zero weights give uniform over words and slots") {
  Graph g = Graph::inference();
  Var w = g.constant(Tensor({12, 6}));
  Var f = g.constant(Tensor({6, 2}, 0.3));
  const Tensor ext = output_distribution(w, f, 10, true).value();
  CHECK(ext.rows() == 12);
  for (double v : ext.values()) CHECK(v == doctest::Approx(1.0 / 12).epsilon(1e-15));
  const Tensor words = output_distribution(w, f, 10, false).value();
  CHECK(words.rows() == 10);
  for (double v : words.values()) CHECK(v == doctest::Approx(0.1).epsilon(1e-15));
}

TEST_CASE("copy: all mass on the poi slot and the Valero row yields valero") {
  auto kb = gas_station_table();
  const Vocabulary vocab = tiny_vocab(*kb);
  const CopyMap map(*kb, vocab);
  const std::size_t poi = *kb->column_index("poi");
  const std::size_t valero_row = 3;
  CHECK(kb->rows[valero_row][poi] == "valero");

  Graph g = Graph::inference();
  Tensor ext({vocab.size(), 1});
  ext[vocab.slot_id(poi)] = 1.0;
  Tensor p({kb->row_count(), 1});
  p[valero_row] = 1.0;
  const Tensor fin = copy_redistribute(g.constant(ext), g.constant(p), map).value();
  CHECK(fin.rows() == map.size());
  CHECK(fin[*vocab.find_word("valero")] == 1.0);
  CHECK(column_sum(fin, 0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("copy: zero slot mass leaves the word distribution unchanged") {
  auto kb = gas_station_table();
  const Vocabulary vocab = tiny_vocab(*kb);
  const CopyMap map(*kb, vocab);
  std::mt19937_64 rng(14);
  Graph g = Graph::inference();
  Tensor ext = random_tensor({vocab.size(), 2}, rng, 0.0, 1.0);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t s = 0; s < vocab.slot_count(); ++s) ext.at(vocab.slot_id(s), c) = 0.0;
  Var p = ad::softmax(g.constant(random_tensor({kb->row_count(), 1}, rng)), 0);
  const Tensor fin = copy_redistribute(g.constant(ext), p, map).value();
  for (std::size_t r = 0; r < map.size(); ++r)
    for (std::size_t c = 0; c < 2; ++c)
      CHECK(fin.at(r, c) == (r < vocab.word_count() ? ext.at(r, c) : 0.0));
}

TEST_CASE("copy: two rows sharing 1_miles pass the whole distance-slot mass to it") {
  KBTable kb;
  kb.columns = {"poi", "distance"};
  kb.rows = {{"cafe_venetia", "1_miles"}, {"palo_alto_garage_r", "1_miles"}};
  const Vocabulary vocab = Vocabulary::from_tokens({"is", "away"}, kb.columns);
  const CopyMap map(kb, vocab);
  const std::size_t miles = map.index_of("1_miles", vocab);
  CHECK(miles >= vocab.word_count());

  Graph g = Graph::inference();
  Tensor ext({vocab.size(), 1});
  ext[vocab.word_count() - 1] = 0.5;          // "away"
  ext[vocab.slot_id(1)] = 0.5;                // <distance>
  Var p = g.constant(Tensor::matrix(2, 1, {0.3, 0.7}));
  const Tensor fin = copy_redistribute(g.constant(ext), p, map).value();
  CHECK(fin[miles] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(column_sum(fin, 0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("copy is linear in each argument and only adds mass to known words") {
  auto kb = gas_station_table();
  const Vocabulary vocab = tiny_vocab(*kb);
  const CopyMap map(*kb, vocab);
  std::mt19937_64 rng(15);
  Graph g = Graph::inference();
  const Tensor e1 = random_tensor({vocab.size(), 1}, rng, 0, 1);
  const Tensor e2 = random_tensor({vocab.size(), 1}, rng, 0, 1);
  const Tensor p1 = random_tensor({kb->row_count(), 1}, rng, 0, 1);
  const Tensor p2 = random_tensor({kb->row_count(), 1}, rng, 0, 1);
  auto f = [&](const Tensor& e, const Tensor& p) {
    return copy_redistribute(g.constant(e), g.constant(p), map).value();
  };
  auto plus = [](Tensor a, const Tensor& b, double s) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += s * b[i];
    return a;
  };
  const Tensor lhs_e = f(plus(e1, e2, 2.0), p1);
  const Tensor rhs_e = plus(f(e1, p1), f(e2, p1), 2.0);
  // affine in p: the word part does not depend on it
  const Tensor base = f(e1, Tensor({kb->row_count(), 1}));
  const Tensor lhs_p = f(e1, plus(p1, p2, -0.5));
  const Tensor rhs_p = plus(f(e1, p1), plus(f(e1, p2), base, -1.0), -0.5);
  for (std::size_t i = 0; i < lhs_e.size(); ++i) {
    CHECK(lhs_e[i] == doctest::Approx(rhs_e[i]).epsilon(1e-13));
    CHECK(lhs_p[i] == doctest::Approx(rhs_p[i]).epsilon(1e-13));
  }
  const Tensor fin = f(e1, p1);
  for (std::size_t w = 0; w < vocab.word_count(); ++w) CHECK(fin[w] >= e1[w]);
}

TEST_CASE("greedy decoding is deterministic and a uniform model runs to max_len") {
  auto kb = gas_station_table();
  const Vocabulary vocab = tiny_vocab(*kb);
  ModelConfig cfg = small_config(vocab.word_count(), vocab.slot_count(), 4);
  Model model(cfg, 16);
  const Tokens input = {"<driver>", "address", "to", "the", "gas_station", "."};
  const DecodeResult a = decode_greedy(model, vocab, *kb, input, 12);
  const DecodeResult b = decode_greedy(model, vocab, *kb, input, 12);
  CHECK(a.tokens == b.tokens);
  CHECK(a.trace.to_json() == b.trace.to_json());

  // without copy every word ties and the lowest index wins
  cfg.copy = false;
  Model flat(cfg, 16);
  flat.params().get("output.w").value.fill(0.0);
  const DecodeResult u = decode_greedy(flat, vocab, *kb, input, 12);
  CHECK(u.tokens == Tokens(12, "<pad>"));
}

TEST_CASE("decode trace has m x n state attention and survives a JSON round trip") {
  auto kb = gas_station_table();
  const Vocabulary vocab = tiny_vocab(*kb);
  Model model(small_config(vocab.word_count(), vocab.slot_count(), 4), 17);
  const Tokens input = {"<driver>", "address", "to", "the", "gas_station", "."};
  const DecodeResult r = decode_greedy(model, vocab, *kb, input, 8);
  const DecodeTrace& t = r.trace;
  CHECK(t.state_attention.size() == kb->column_count());
  for (const auto& row : t.state_attention) CHECK(row.size() == input.size());
  CHECK(t.entry_probs.size() == kb->row_count());
  CHECK(t.steps.size() == r.tokens.size());
  for (const auto& s : t.steps) {
    CHECK(std::abs(s.final_mass - 1.0) < 1e-9);
    CHECK(std::abs(s.extended_mass - 1.0) < 1e-9);
  }
  const DecodeTrace back = DecodeTrace::from_json(t.to_json());
  CHECK(back.to_json() == t.to_json());
}

TEST_CASE("decoding rejects a KB whose column count differs from the model") {
  auto kb = gas_station_table();
  const Vocabulary vocab = tiny_vocab(*kb);
  Model model(small_config(vocab.word_count(), vocab.slot_count() + 1, 4), 18);
  CHECK_THROWS_AS(decode_greedy(model, vocab, *kb, {"hi"}, 4), ContractError);
}
