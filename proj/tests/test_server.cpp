#include <doctest.h>

#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "kbdial/server.hpp"
#include "kbdial/synthetic.hpp"

using namespace kbdial;
using json = nlohmann::json;

namespace {

struct Fixture {
  Vocabulary vocab = Vocabulary::from_tokens({"is", "at", "the", "address", "chevron", "valero"},
                                             domain_columns(Domain::navigation));
  Model model;
  ChatService service;
  httplib::Server server;
  std::thread thread;
  int port = 0;

  static ModelConfig config(const Vocabulary& v) {
    ModelConfig c;
    c.dim = 6;
    c.word_count = v.word_count();
    c.slot_count = v.slot_count();
    return c;
  }

  Fixture() : model(config(vocab), 11), service(model, vocab, Domain::navigation) {
    register_routes(server, service);
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~Fixture() {
    server.stop();
    thread.join();
  }

  httplib::Client client() const { return httplib::Client("127.0.0.1", port); }
};

json kb_json(const json& items) { return kb_to_json(navigation_table(items)); }

std::string post(httplib::Client& c, const std::string& path, const json& body, int expect) {
  auto res = c.Post(path, body.dump(), "application/json");
  REQUIRE(res);
  CHECK(res->status == expect);
  return res->body;
}

}  // namespace

TEST_CASE("http: health, session lifecycle, chat and unknown sessions") {
  Fixture f;
  auto c = f.client();
  auto health = c.Get("/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(json::parse(health->body)["status"] == "ok");

  const json created = json::parse(post(c, "/session", {{"kb", kb_json(chevron_kb_items())}}, 200));
  const std::string id = created["session_id"];
  CHECK(!id.empty());

  const json reply = json::parse(post(c, "/chat", {{"session_id", id}, {"utterance", "address of chevron"}}, 200));
  CHECK(reply["response"].is_string());
  CHECK(reply["trace"]["state_attention"].size() == f.vocab.slot_count());

  auto described = c.Get("/session/" + id);
  REQUIRE(described);
  CHECK(described->status == 200);
  const json d = json::parse(described->body);
  CHECK(d["session_id"] == id);
  REQUIRE(d["history"].size() == 2);
  CHECK(d["history"][0]["speaker"] == "driver");
  CHECK(d["history"][0]["text"] == "address of chevron");
  CHECK(d["kb"]["rows"].size() == 7);

  post(c, "/chat", {{"session_id", "nope"}, {"utterance", "hi"}}, 404);
  auto missing = c.Get("/session/nope");
  REQUIRE(missing);
  CHECK(missing->status == 404);
}

TEST_CASE("http: malformed requests and tables are rejected with 400") {
  Fixture f;
  auto c = f.client();
  auto bad_json = c.Post("/session", "{not json", "application/json");
  REQUIRE(bad_json);
  CHECK(bad_json->status == 400);
  post(c, "/session", json::object(), 400);

  const json colour = {{"kb", json::parse(R"({"columns": ["poi", "colour"], "rows": [["a", "red"]]})")}};
  const std::string body = post(c, "/session", colour, 400);
  CHECK(json::parse(body)["error"].get<std::string>().find("colour") != std::string::npos);

  const json missing_col = {{"kb", json::parse(R"({"columns": ["poi"], "rows": [["a"]]})")}};
  CHECK(json::parse(post(c, "/session", missing_col, 400))["error"].get<std::string>().find(
            "missing column \"traffic_info\"") != std::string::npos);

  const std::string id =
      json::parse(post(c, "/session", {{"kb", kb_json(chevron_kb_items())}}, 200))["session_id"];
  post(c, "/chat", {{"session_id", id}}, 400);
  post(c, "/chat", {{"session_id", id}, {"utterance", "   "}}, 400);
  CHECK(f.service.session_count() == 1);
}

TEST_CASE("http: sessions keep separate tables and histories") {
  Fixture f;
  auto c = f.client();
  const std::string a =
      json::parse(post(c, "/session", {{"kb", kb_json(chevron_kb_items())}}, 200))["session_id"];
  const std::string b =
      json::parse(post(c, "/session", {{"kb", kb_json(gas_station_kb_items())}}, 200))["session_id"];
  CHECK(a != b);

  std::thread ta([&] {
    auto ca = f.client();
    for (int i = 0; i < 3; ++i) post(ca, "/chat", {{"session_id", a}, {"utterance", "where is it"}}, 200);
  });
  std::thread tb([&] {
    auto cb = f.client();
    for (int i = 0; i < 2; ++i) post(cb, "/chat", {{"session_id", b}, {"utterance", "hello"}}, 200);
  });
  ta.join();
  tb.join();

  const json da = json::parse(c.Get("/session/" + a)->body);
  const json db = json::parse(c.Get("/session/" + b)->body);
  CHECK(da["history"].size() == 6);
  CHECK(db["history"].size() == 4);
  CHECK(da["kb"]["rows"].size() == 7);
  CHECK(db["kb"]["rows"].size() == 8);
  CHECK(da["kb"]["rows"][0][0] == "chevron");
  CHECK(db["kb"]["rows"][3][0] == "valero");
}
