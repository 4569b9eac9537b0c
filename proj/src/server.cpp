#include "kbdial/server.hpp"

#include <algorithm>
#include <cstdio>

#include <httplib.h>

namespace kbdial {

using json = nlohmann::json;

KBTable session_table(const json& kb, Domain domain) {
  KBTable raw = kb_from_json(kb);
  const auto& want = domain_columns(domain);
  for (const auto& c : raw.columns)
    if (std::find(want.begin(), want.end(), c) == want.end()) {
      std::string list;
      for (const auto& w : want) list += (list.empty() ? "" : ", ") + w;
      throw ParseError("kb: unknown column \"" + c + "\" (expected " + list + ")");
    }
  KBTable out;
  out.domain = domain;
  out.columns = want;
  std::vector<std::size_t> source;
  for (const auto& c : want) {
    auto idx = raw.column_index(c);
    if (!idx) throw ParseError("kb: missing column \"" + c + "\"");
    source.push_back(*idx);
  }
  for (const auto& row : raw.rows) {
    std::vector<std::string> r;
    for (auto s : source) r.push_back(row[s]);
    out.rows.push_back(std::move(r));
  }
  return out;
}

ChatService::ChatService(const Model& model, const Vocabulary& vocab, Domain domain)
    : model_(model), vocab_(vocab), domain_(domain), id_rng_(std::random_device{}()) {
  if (model.config().slot_count != domain_columns(domain).size())
    throw ContractError("model slot count does not match the domain");
}

std::string ChatService::create_session(const json& kb) {
  auto s = std::make_shared<Session>();
  s->kb = std::make_shared<const KBTable>(session_table(kb, domain_));
  std::unique_lock lock(sessions_mu_);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%08llx%016llx", static_cast<unsigned long long>(++counter_),
                static_cast<unsigned long long>(id_rng_()));
  sessions_.emplace(buf, std::move(s));
  return buf;
}

std::shared_ptr<ChatService::Session> ChatService::find(const std::string& id) const {
  std::shared_lock lock(sessions_mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw SessionNotFound("unknown session " + id);
  return it->second;
}

std::size_t ChatService::session_count() const {
  std::shared_lock lock(sessions_mu_);
  return sessions_.size();
}

namespace {
Tokens flatten(const std::vector<Turn>& history) {
  const auto& special = Vocabulary::special_tokens();
  Tokens out;
  for (const auto& t : history) {
    out.push_back(special[t.speaker == Speaker::driver ? Vocabulary::kDriver : Vocabulary::kCar]);
    out.insert(out.end(), t.tokens.begin(), t.tokens.end());
  }
  return out;
}
}  // namespace

json ChatService::chat(const std::string& session_id, const std::string& utterance) {
  auto s = find(session_id);
  std::lock_guard lock(s->mu);
  Tokens tokens = s->kb->lexicon().merge(tokenize(utterance));
  if (tokens.empty()) throw ParseError("utterance is empty");
  s->history.push_back({Speaker::driver, std::move(tokens)});
  DecodeResult r = decode_greedy(model_, vocab_, *s->kb, flatten(s->history));
  s->history.push_back({Speaker::car, r.tokens});
  json out = {{"response", join(r.tokens)}, {"trace", r.trace.to_json()}};
  s->traces.push_back(std::move(r.trace));
  return out;
}

json ChatService::describe(const std::string& session_id) const {
  auto s = find(session_id);
  std::lock_guard lock(s->mu);
  json history = json::array();
  for (const auto& t : s->history)
    history.push_back(
        {{"speaker", t.speaker == Speaker::driver ? "driver" : "car"}, {"text", join(t.tokens)}});
  return {{"session_id", session_id}, {"kb", kb_to_json(*s->kb)}, {"history", history}};
}

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void error(httplib::Response& res, int status, const std::string& message) {
  reply(res, status, {{"error", message}});
}

}  // namespace

void register_routes(httplib::Server& server, ChatService& service) {
  server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, {{"status", "ok"}});
  });

  server.Post("/session", [&service](const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::parse_error& e) {
      return error(res, 400, std::string("malformed JSON: ") + e.what());
    }
    if (!body.is_object() || !body.contains("kb"))
      return error(res, 400, "request needs a \"kb\" object");
    try {
      reply(res, 200, {{"session_id", service.create_session(body["kb"])}});
    } catch (const ParseError& e) {
      error(res, 400, e.what());
    } catch (const json::exception& e) {
      error(res, 400, std::string("kb: ") + e.what());
    }
  });

  server.Post("/chat", [&service](const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::parse_error& e) {
      return error(res, 400, std::string("malformed JSON: ") + e.what());
    }
    if (!body.is_object() || !body.contains("session_id") || !body["session_id"].is_string() ||
        !body.contains("utterance") || !body["utterance"].is_string())
      return error(res, 400, "request needs string fields \"session_id\" and \"utterance\"");
    try {
      reply(res, 200,
            service.chat(body["session_id"].get<std::string>(), body["utterance"].get<std::string>()));
    } catch (const SessionNotFound& e) {
      error(res, 404, e.what());
    } catch (const ParseError& e) {
      error(res, 400, e.what());
    }
  });

  server.Get(R"(/session/([^/]+))", [&service](const httplib::Request& req, httplib::Response& res) {
    try {
      reply(res, 200, service.describe(req.matches[1].str()));
    } catch (const SessionNotFound& e) {
      error(res, 404, e.what());
    }
  });

  server.set_exception_handler(
      [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        try {
          std::rethrow_exception(ep);
        } catch (const std::exception& e) {
          error(res, 500, e.what());
        } catch (...) {
          error(res, 500, "internal error");
        }
      });
}

}  // namespace kbdial
