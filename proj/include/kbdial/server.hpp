#ifndef KBDIAL_SERVER_HPP_
#define KBDIAL_SERVER_HPP_

#include <memory>
#include <mutex>
#include <random>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "kbdial/corpus.hpp"
#include "kbdial/decoder.hpp"
#include "kbdial/model.hpp"

namespace httplib {
class Server;
}

namespace kbdial {

class SessionNotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Validates a client-supplied table against the model's columns and returns
// it in model column order. Throws ParseError naming the bad column.
KBTable session_table(const nlohmann::json& kb, Domain domain);

// In-memory chat sessions over one shared read-only model. Requests to
// different sessions run concurrently; requests to one session are
// serialized by its own mutex.
class ChatService {
 public:
  ChatService(const Model& model, const Vocabulary& vocab, Domain domain);

  std::string create_session(const nlohmann::json& kb);
  // {response, trace}
  nlohmann::json chat(const std::string& session_id, const std::string& utterance);
  // {session_id, kb, history}
  nlohmann::json describe(const std::string& session_id) const;
  std::size_t session_count() const;

 private:
  struct Session {
    mutable std::mutex mu;
    std::shared_ptr<const KBTable> kb;
    std::vector<Turn> history;
    std::vector<DecodeTrace> traces;
  };

  std::shared_ptr<Session> find(const std::string& id) const;

  const Model& model_;
  const Vocabulary& vocab_;
  Domain domain_;
  mutable std::shared_mutex sessions_mu_;
  std::unordered_map<std::string, std::shared_ptr<Session>> sessions_;
  std::mt19937_64 id_rng_;
  std::uint64_t counter_ = 0;
};

// Routes: POST /session, POST /chat, GET /session/{id}, GET /health.
void register_routes(httplib::Server& server, ChatService& service);

}  // namespace kbdial

#endif  // KBDIAL_SERVER_HPP_
