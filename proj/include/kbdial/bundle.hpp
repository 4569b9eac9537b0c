#ifndef KBDIAL_BUNDLE_HPP_
#define KBDIAL_BUNDLE_HPP_

#include <filesystem>
#include <memory>
#include <string>

#include <json.hpp>

#include "kbdial/corpus.hpp"
#include "kbdial/model.hpp"

namespace kbdial {

// A trained model on disk: <dir>/model.ckpt holds the parameters and a
// manifest (vocabulary hash, hyperparameters, domain); <dir>/vocab.txt holds
// the vocabulary.
struct Bundle {
  Domain domain = Domain::navigation;
  Vocabulary vocab;
  std::unique_ptr<Model> model;
  nlohmann::json manifest;
};

std::filesystem::path checkpoint_path(const std::filesystem::path& dir);
std::filesystem::path vocab_path(const std::filesystem::path& dir);

std::string hash_hex(std::uint64_t h);

nlohmann::json make_manifest(const Model& model, const Vocabulary& vocab, Domain domain,
                             const nlohmann::json& train_config);

void save_bundle(const std::filesystem::path& dir, const Model& model, const Vocabulary& vocab,
                 Domain domain, const nlohmann::json& train_config);

// Throws std::runtime_error if files are missing or the vocabulary hash does
// not match the manifest.
Bundle load_bundle(const std::filesystem::path& dir);

}  // namespace kbdial

#endif  // KBDIAL_BUNDLE_HPP_
