#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "kbdial/bundle.hpp"
#include "kbdial/corpus.hpp"
#include "kbdial/decoder.hpp"
#include "kbdial/evaluate.hpp"
#include "kbdial/server.hpp"
#include "kbdial/synthetic.hpp"
#include "kbdial/training.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace kbdial;

namespace {

struct Corpus {
  Domain domain;
  std::vector<Dialogue> train, dev, test;
};

Corpus load_corpus(const fs::path& dir, const std::string& domain_name) {
  Corpus c{parse_domain(domain_name), {}, {}, {}};
  c.train = load_kvret(dir / "train.json", c.domain, Split::train);
  if (fs::exists(dir / "dev.json")) c.dev = load_kvret(dir / "dev.json", c.domain, Split::dev);
  if (fs::exists(dir / "test.json")) c.test = load_kvret(dir / "test.json", c.domain, Split::test);
  return c;
}

const std::vector<Dialogue>& pick_split(const Corpus& c, const std::string& split) {
  switch (parse_split(split)) {
    case Split::train: return c.train;
    case Split::dev: return c.dev;
    default: return c.test;
  }
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

int cmd_synth(const fs::path& out, std::uint64_t seed, std::size_t train_n, std::size_t dev_n,
              std::size_t test_n) {
  fs::create_directories(out);
  const std::pair<const char*, std::size_t> splits[] = {
      {"train", train_n}, {"dev", dev_n}, {"test", test_n}};
  std::uint64_t offset = 0;
  for (const auto& [name, n] : splits) {
    SyntheticConfig cfg;
    cfg.dialogues = n;
    cfg.seed = seed + offset++;
    cfg.id_prefix = std::string("synth-") + name;
    write_json_file(out / (std::string(name) + ".json"), synthetic_kvret(cfg));
  }
  std::cout << "wrote synthetic corpus to " << out << "\n";
  return 0;
}

int cmd_prepare(const fs::path& data, const std::string& domain, const fs::path& out,
                bool augment, std::size_t min_dialogues) {
  const Corpus c = load_corpus(data, domain);
  const Vocabulary vocab = Vocabulary::build(c.train, domain_columns(c.domain), min_dialogues);
  fs::create_directories(out);
  vocab.save(out / "vocab.txt");
  json stats = {{"domain", domain_name(c.domain)},
                {"vocab_size", vocab.size()},
                {"vocab_hash", hash_hex(vocab.hash())}};
  const std::pair<const char*, const std::vector<Dialogue>*> splits[] = {
      {"train", &c.train}, {"dev", &c.dev}, {"test", &c.test}};
  for (const auto& [name, dialogues] : splits) {
    const auto instances = build_instances(*dialogues, augment && std::string(name) == "train");
    std::ofstream f(out / (std::string(name) + ".jsonl"));
    for (const auto& inst : instances) f << instance_to_json(inst).dump() << "\n";
    stats[name] = {{"dialogues", dialogues->size()},
                   {"instances", instances.size()},
                   {"oov_rate", instances.empty() ? 0.0 : oov_rate(instances, vocab)}};
  }
  write_json_file(out / "stats.json", stats);
  std::cout << stats.dump(2) << "\n";
  return 0;
}

int cmd_train(const fs::path& data, const std::string& domain, const fs::path& out,
              const TrainConfig& config, std::size_t min_dialogues) {
  const Corpus c = load_corpus(data, domain);
  const Vocabulary vocab = Vocabulary::build(c.train, domain_columns(c.domain), min_dialogues);
  const auto train_set = build_instances(c.train, config.augment && config.copy);
  const auto dev_set = build_instances(c.dev, false);
  Model model(model_config(config, vocab), config.seed);
  fs::create_directories(out);
  std::ofstream metrics(out / "metrics.jsonl");
  TrainCallbacks cb;
  cb.on_epoch = [&](const EpochMetrics& m) {
    metrics << m.to_json().dump() << std::endl;
    std::cerr << m.to_json().dump() << "\n";
  };
  cb.on_best = [&](const Model& best, const EpochMetrics&) {
    save_bundle(out, best, vocab, c.domain, config.to_json());
  };
  const TrainResult r = train(model, vocab, config, train_set, dev_set, cb);
  save_bundle(out, model, vocab, c.domain, config.to_json());
  std::cout << json{{"best_epoch", r.best_epoch},
                    {"best_dev_micro_f1", r.best_dev_micro_f1},
                    {"rl_entry_accuracy", r.rl_entry_accuracy},
                    {"checkpoint", checkpoint_path(out).string()}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_eval(const fs::path& model_dir, const fs::path& data, const std::string& split,
             bool global_lexicon, const std::string& report_path) {
  const Bundle b = load_bundle(model_dir);
  const Corpus c = load_corpus(data, domain_name(b.domain));
  const auto instances = build_instances(pick_split(c, split), false);
  EvalOptions opt;
  opt.global_lexicon = global_lexicon;
  const EvalReport r = evaluate(*b.model, b.vocab, instances, opt);
  std::cout << r.table_row(domain_name(b.domain) + "/" + split) << "\n";
  if (!report_path.empty()) write_json_file(report_path, r.to_json());
  return 0;
}

std::string tsv_heatmap(const DecodeTrace& t) {
  std::ostringstream os;
  os << "slot";
  for (const auto& tok : t.input_tokens) os << '\t' << tok;
  os << '\n' << std::fixed << std::setprecision(6);
  for (std::size_t k = 0; k < t.slots.size(); ++k) {
    os << t.slots[k];
    for (double v : t.state_attention[k]) os << '\t' << v;
    os << '\n';
  }
  return os.str();
}

int cmd_viz(const fs::path& model_dir, const fs::path& data, const std::string& split,
            const std::string& dialogue_id, long turn, const std::string& format) {
  const Bundle b = load_bundle(model_dir);
  const Corpus c = load_corpus(data, domain_name(b.domain));
  const auto instances = build_instances(pick_split(c, split), false);
  const Instance* found = nullptr;
  for (const auto& inst : instances)
    if (inst.dialogue_id == dialogue_id &&
        (turn < 0 || inst.turn_index == static_cast<std::size_t>(turn))) {
      found = &inst;
      break;
    }
  if (!found) throw std::runtime_error("no response turn for dialogue " + dialogue_id);
  const DecodeResult r = decode_greedy(*b.model, b.vocab, *found->kb, found->input);
  if (format == "tsv") {
    std::cout << tsv_heatmap(r.trace);
  } else {
    json j = r.trace.to_json();
    j["dialogue_id"] = dialogue_id;
    j["turn"] = found->turn_index;
    std::cout << j.dump(2) << "\n";
  }
  return 0;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return json::parse(in);
}

int cmd_chat(const fs::path& model_dir, const fs::path& kb_file, bool show_trace) {
  const Bundle b = load_bundle(model_dir);
  ChatService service(*b.model, b.vocab, b.domain);
  const std::string id = service.create_session(read_json_file(kb_file));
  std::string line;
  std::cout << "> " << std::flush;
  while (std::getline(std::cin, line)) {
    if (line == "/quit" || line == "/exit") break;
    if (!line.empty()) {
      const json r = service.chat(id, line);
      std::cout << r["response"].get<std::string>() << "\n";
      if (show_trace) std::cout << r["trace"].dump() << "\n";
    }
    std::cout << "> " << std::flush;
  }
  return 0;
}

int cmd_serve(const fs::path& model_dir, const std::string& host, int port) {
  const Bundle b = load_bundle(model_dir);
  ChatService service(*b.model, b.vocab, b.domain);
  httplib::Server server;
  register_routes(server, service);
  std::cerr << "listening on " << host << ":" << port << "\n";
  if (!server.listen(host, port)) throw std::runtime_error("cannot listen on port " + std::to_string(port));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge-base grounded dialogue model"};
  app.require_subcommand(1);

  std::string data, domain = "navigate", out, model_dir, split = "test";

  auto* synth = app.add_subcommand("synth", "Write a templated navigation corpus");
  std::uint64_t synth_seed = 7;
  std::size_t synth_train = 500, synth_dev = 50, synth_test = 100;
  synth->add_option("--out", out, "Output directory")->required();
  synth->add_option("--seed", synth_seed, "Random seed");
  synth->add_option("--train", synth_train, "Training dialogues");
  synth->add_option("--dev", synth_dev, "Dev dialogues");
  synth->add_option("--test", synth_test, "Test dialogues");

  auto* prepare = app.add_subcommand("prepare", "Load KVRET files, build vocabulary and instances");
  bool augment = false;
  prepare->add_option("--data", data, "Directory with train/dev/test.json")->required();
  prepare->add_option("--domain", domain, "navigate or weather");
  prepare->add_option("--out", out, "Output directory")->required();
  prepare->add_flag("--augment", augment, "Add delexicalized copies of training turns");
  std::size_t min_dialogues = 1;
  prepare->add_option("--min-dialogues", min_dialogues,
                      "Keep tokens seen in at least this many training dialogues");

  auto* train_cmd = app.add_subcommand("train", "Train a model");
  TrainConfig tc;
  bool no_copy = false, no_rl = false;
  train_cmd->add_option("--data", data, "Directory with train/dev/test.json")->required();
  train_cmd->add_option("--domain", domain, "navigate or weather");
  train_cmd->add_option("--out", out, "Model directory")->required();
  train_cmd->add_flag("--no-copy", no_copy, "Disable the copy mechanism");
  train_cmd->add_flag("--no-rl", no_rl, "Disable the RL loss and pretraining");
  train_cmd->add_flag("--augment", tc.augment, "Add delexicalized training targets");
  train_cmd->add_flag("--sampled-rl", tc.sampled_rl, "Single-sample REINFORCE estimate");
  train_cmd->add_flag("--eval-rl-epochs", tc.eval_rl_epochs, "Score dev after RL-only epochs");
  train_cmd->add_option("--seed", tc.seed, "Random seed");
  train_cmd->add_option("--dim", tc.dim, "Embedding and hidden size");
  train_cmd->add_option("--embed-init", tc.embed_init, "Embedding init range (uniform +-x)");
  train_cmd->add_option("--dropout", tc.dropout, "Dropout rate")->check(CLI::Range(0.0, 0.999));
  train_cmd->add_option("--lr", tc.lr, "Learning rate");
  train_cmd->add_option("--lambda", tc.lambda, "RL loss weight")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--baseline", tc.baseline, "RL reward baseline");
  train_cmd->add_option("--weight-decay", tc.weight_decay, "Decoupled weight decay");
  train_cmd->add_option("--batch-size", tc.batch_size, "Batch size");
  train_cmd->add_option("--epochs", tc.max_epochs, "Maximum joint epochs");
  train_cmd->add_option("--rl-epochs", tc.rl_epochs, "RL-only pretraining epochs");
  train_cmd->add_option("--patience", tc.patience, "Early stopping patience");
  train_cmd->add_option("--min-dialogues", min_dialogues,
                        "Keep tokens seen in at least this many training dialogues");

  auto* eval_cmd = app.add_subcommand("eval", "Score a model on a split");
  bool global_lexicon = false;
  std::string report;
  eval_cmd->add_option("--model", model_dir, "Model directory")->required();
  eval_cmd->add_option("--data", data, "Directory with train/dev/test.json")->required();
  eval_cmd->add_option("--split", split, "train, dev or test");
  eval_cmd->add_flag("--global-lexicon", global_lexicon, "Match entities from all scenarios");
  eval_cmd->add_option("--report", report, "Write the per-instance report here");

  auto* viz = app.add_subcommand("viz", "Dump state-attention weights for one turn");
  std::string dialogue_id, format = "json";
  long turn = -1;
  viz->add_option("--model", model_dir, "Model directory")->required();
  viz->add_option("--data", data, "Directory with train/dev/test.json")->required();
  viz->add_option("--split", split, "train, dev or test");
  viz->add_option("--dialogue", dialogue_id, "Dialogue id")->required();
  viz->add_option("--turn", turn, "Turn index of the response (default: first)");
  viz->add_option("--format", format, "json or tsv")->check(CLI::IsMember({"json", "tsv"}));

  auto* chat = app.add_subcommand("chat", "Terminal chat against a KB file");
  std::string kb_file;
  bool show_trace = false;
  chat->add_option("--model", model_dir, "Model directory")->required();
  chat->add_option("--kb", kb_file, "KB JSON {columns, rows}")->required()->check(CLI::ExistingFile);
  chat->add_flag("--trace", show_trace, "Print the decode trace after each reply");

  auto* serve = app.add_subcommand("serve", "HTTP chat service");
  std::string host = "127.0.0.1";
  int port = 8080;
  serve->add_option("--model", model_dir, "Model directory")->required();
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port")->check(CLI::Range(0, 65535));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return cmd_synth(out, synth_seed, synth_train, synth_dev, synth_test);
    if (*prepare) return cmd_prepare(data, domain, out, augment, min_dialogues);
    if (*train_cmd) {
      tc.copy = !no_copy;
      tc.rl = !no_rl;
      return cmd_train(data, domain, out, tc, min_dialogues);
    }
    if (*eval_cmd) return cmd_eval(model_dir, data, split, global_lexicon, report);
    if (*viz) return cmd_viz(model_dir, data, split, dialogue_id, turn, format);
    if (*chat) return cmd_chat(model_dir, kb_file, show_trace);
    if (*serve) return cmd_serve(model_dir, host, port);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
