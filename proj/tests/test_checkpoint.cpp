#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include "kbdial/bundle.hpp"
#include "kbdial/checkpoint.hpp"
#include "kbdial/decoder.hpp"
#include "kbdial/synthetic.hpp"

using namespace kbdial;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "kbdial_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

Vocabulary nav_vocab() {
  return Vocabulary::from_tokens({"is", "at", "valero"}, domain_columns(Domain::navigation));
}

}  // namespace

TEST_CASE("checkpoint round trip is bit exact, special values included") {
  ParameterSet params;
  params.add("a", Tensor::matrix(2, 3, {0.1, -0.0, 1e-310, std::numeric_limits<double>::max(),
                                        -INFINITY, 3.0}));
  params.add("b", Tensor({4, 1}, 1.0 / 3.0));
  Tensor nan_tensor({1, 1});
  nan_tensor[0] = std::numeric_limits<double>::quiet_NaN();
  params.add("c", nan_tensor);
  const auto path = scratch("roundtrip.ckpt");
  write_checkpoint(path, snapshot(params, {{"note", "x"}}));
  const Checkpoint back = read_checkpoint(path);
  CHECK(back.manifest["note"] == "x");
  REQUIRE(back.records.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.records[i].first == params[i].name);
    CHECK(bit_equal(back.records[i].second, params[i].value));
  }
}

TEST_CASE("checkpoint header is little-endian and versioned") {
  ParameterSet params;
  params.add("w", Tensor::matrix(1, 1, {1.0}));
  const auto path = scratch("header.ckpt");
  write_checkpoint(path, snapshot(params, nlohmann::json::object()));
  std::ifstream in(path, std::ios::binary);
  unsigned char head[12];
  in.read(reinterpret_cast<char*>(head), 12);
  CHECK(std::memcmp(head, "KBDIALCK", 8) == 0);
  CHECK(head[8] == kCheckpointVersion);
  CHECK(head[9] == 0);
}

TEST_CASE("corrupt or mismatched checkpoints are rejected") {
  ParameterSet params;
  params.add("w", Tensor::matrix(2, 2, {1, 2, 3, 4}));
  const auto path = scratch("bad.ckpt");
  write_checkpoint(path, snapshot(params, nlohmann::json::object()));
  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 3);
  CHECK_THROWS_AS(read_checkpoint(path), std::runtime_error);

  {
    std::ofstream out(path, std::ios::binary);
    out << "NOTACKPTxxxxxxxxxxxx";
  }
  CHECK_THROWS_AS(read_checkpoint(path), std::runtime_error);

  ParameterSet other;
  other.add("w", Tensor({3, 2}));
  CHECK_THROWS_AS(restore(snapshot(params, {}), other), std::runtime_error);
  ParameterSet renamed;
  renamed.add("v", Tensor({2, 2}));
  CHECK_THROWS_AS(restore(snapshot(params, {}), renamed), std::runtime_error);
}

TEST_CASE("bundle save/load restores the exact model and checks the vocabulary hash") {
  const Vocabulary vocab = nav_vocab();
  ModelConfig cfg;
  cfg.dim = 6;
  cfg.word_count = vocab.word_count();
  cfg.slot_count = vocab.slot_count();
  cfg.dropout = 0.2;
  cfg.embed_init_range = 1.0;
  Model model(cfg, 42);
  const auto dir = scratch("bundle");
  std::filesystem::remove_all(dir);
  save_bundle(dir, model, vocab, Domain::navigation, {{"seed", 1}});

  const Bundle b = load_bundle(dir);
  CHECK(b.domain == Domain::navigation);
  CHECK(b.vocab.hash() == vocab.hash());
  CHECK(b.model->config().to_json() == cfg.to_json());
  CHECK(b.manifest["train"]["seed"] == 1);
  for (std::size_t p = 0; p < model.params().size(); ++p)
    CHECK(bit_equal(b.model->params()[p].value, model.params()[p].value));

  const KBTable kb = navigation_table(gas_station_kb_items());
  const Tokens input = {"<driver>", "where", "is", "valero", "?"};
  CHECK(decode_greedy(*b.model, b.vocab, kb, input, 10).tokens ==
        decode_greedy(model, vocab, kb, input, 10).tokens);

  Vocabulary::from_tokens({"is", "at", "chevron"}, domain_columns(Domain::navigation))
      .save(vocab_path(dir));
  CHECK_THROWS_AS(load_bundle(dir), std::runtime_error);
  CHECK_THROWS_AS(load_bundle(scratch("no_such_bundle")), std::runtime_error);
}
