#include "kbdial/bundle.hpp"

#include <cstdio>
#include <stdexcept>

#include "kbdial/checkpoint.hpp"

namespace kbdial {

std::filesystem::path checkpoint_path(const std::filesystem::path& dir) {
  return dir / "model.ckpt";
}

std::filesystem::path vocab_path(const std::filesystem::path& dir) { return dir / "vocab.txt"; }

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json make_manifest(const Model& model, const Vocabulary& vocab, Domain domain,
                             const nlohmann::json& train_config) {
  return {{"format", "kbdial"},
          {"vocab_hash", hash_hex(vocab.hash())},
          {"vocab_size", vocab.size()},
          {"domain", domain_name(domain)},
          {"columns", domain_columns(domain)},
          {"model", model.config().to_json()},
          {"train", train_config}};
}

void save_bundle(const std::filesystem::path& dir, const Model& model, const Vocabulary& vocab,
                 Domain domain, const nlohmann::json& train_config) {
  std::filesystem::create_directories(dir);
  vocab.save(vocab_path(dir));
  write_checkpoint(checkpoint_path(dir),
                   snapshot(model.params(), make_manifest(model, vocab, domain, train_config)));
}

Bundle load_bundle(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(checkpoint_path(dir)))
    throw std::runtime_error("no checkpoint at " + checkpoint_path(dir).string());
  if (!std::filesystem::exists(vocab_path(dir)))
    throw std::runtime_error("no vocabulary at " + vocab_path(dir).string());
  const Checkpoint ckpt = read_checkpoint(checkpoint_path(dir));
  Bundle b;
  b.manifest = ckpt.manifest;
  b.domain = parse_domain(ckpt.manifest.at("domain").get<std::string>());
  b.vocab = Vocabulary::load(vocab_path(dir), domain_columns(b.domain));
  const std::string expected = ckpt.manifest.at("vocab_hash").get<std::string>();
  if (hash_hex(b.vocab.hash()) != expected)
    throw std::runtime_error("vocabulary hash " + hash_hex(b.vocab.hash()) +
                             " does not match checkpoint manifest " + expected);
  const ModelConfig cfg = ModelConfig::from_json(ckpt.manifest.at("model"));
  b.model = std::make_unique<Model>(cfg, 0);
  restore(ckpt, b.model->params());
  return b;
}

}  // namespace kbdial
