#include "kbdial/synthetic.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "kbdial/tensor.hpp"

namespace kbdial {

namespace {

using json = nlohmann::json;

struct PoiKind {
  std::string type;
  std::vector<std::string> names;
  std::string suffix;  // appended to generated names
};

const std::vector<PoiKind>& poi_kinds() {
  static const std::vector<PoiKind> kinds = {
      {"gas station", {"Valero", "Chevron", "Shell", "Arco", "Mobil"}, "Gas"},
      {"grocery store", {"Sigona Farmers Market", "Willows Market", "Safeway", "Whole Foods"}, "Market"},
      {"coffee or tea place", {"Cafe Venetia", "Teavana", "Coupa", "Philz", "Peets Coffee"}, "Cafe"},
      {"hospital", {"Stanford Childrens Health", "Palo Alto Medical Foundation", "El Camino Hospital"}, "Clinic"},
      {"parking garage", {"Palo Alto Garage R", "Civic Center Garage", "Dish Parking"}, "Garage"},
      {"shopping center", {"Town and Country", "Stanford Shopping Center", "Ravenswood Shopping Center"}, "Plaza"},
      {"rest stop", {"The Clement Hotel", "Four Seasons", "Travelers Lodge"}, "Inn"},
      {"chinese restaurant", {"tai pan", "Panda Express", "Mandarin Roots"}, "Kitchen"},
      {"pizza restaurant", {"Pizza Hut", "Round Table", "Pizza Chicago"}, "Pizza"},
      {"friends house", {"jacks house", "toms house", "jills house"}, "House"},
      {"certain address", {"the office", "the studio"}, "Studio"},
  };
  return kinds;
}

const std::vector<std::string>& streets() {
  static const std::vector<std::string> s = {
      "Alester Ave", "Amherst St", "Alger Dr",    "Ames Ct",      "Amaranta Ave",
      "Bollard St",  "Arcadia Pl", "University Ave", "Almanor Ln", "Ames Ave",
      "Barringer St", "Cedar Rd",  "Oak Ct",      "Middlefield Rd", "El Camino Real",
      "Alma St",     "Lytton Ave", "Hamilton Ave", "Webster St",  "Bryant St"};
  return s;
}

const std::vector<std::string>& traffic_kinds() {
  static const std::vector<std::string> t = {"no traffic", "moderate traffic", "heavy traffic",
                                             "road block nearby", "car collision nearby"};
  return t;
}

struct Row {
  std::string poi, type, address, distance, traffic;
  bool well_known = true;  // poi comes from the fixed name list
};

// Two or three random syllables, e.g. "Kavoru".
std::string invented_name(std::mt19937_64& rng) {
  static const char* onsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"};
  static const char* vowels[] = {"a", "e", "i", "o", "u"};
  std::uniform_int_distribution<int> syllables(2, 3);
  std::string name;
  for (int i = syllables(rng); i > 0; --i) {
    name += onsets[std::uniform_int_distribution<std::size_t>(0, 13)(rng)];
    name += vowels[std::uniform_int_distribution<std::size_t>(0, 4)(rng)];
  }
  name[0] = static_cast<char>(name[0] - 'a' + 'A');
  return name;
}

json row_json(const Row& r) {
  return {{"poi", r.poi},
          {"poi_type", r.type},
          {"address", r.address},
          {"distance", r.distance},
          {"traffic_info", r.traffic}};
}

template <typename T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

std::vector<Row> draw_kb(std::size_t rows, std::mt19937_64& rng) {
  std::vector<std::size_t> kinds(poi_kinds().size());
  for (std::size_t i = 0; i < kinds.size(); ++i) kinds[i] = i;
  std::shuffle(kinds.begin(), kinds.end(), rng);
  if (rows > kinds.size()) throw ContractError("synthetic KB: more rows than POI types");
  std::vector<Row> out;
  std::set<std::string> addresses;
  for (std::size_t k = 0; k < rows; ++k) {
    const PoiKind& kind = poi_kinds()[kinds[k]];
    Row r;
    r.type = kind.type;
    r.well_known = std::bernoulli_distribution(0.5)(rng);
    r.poi = r.well_known ? pick(kind.names, rng) : invented_name(rng) + " " + kind.suffix;
    do {
      r.address = std::to_string(std::uniform_int_distribution<int>(100, 999)(rng)) + " " +
                  pick(streets(), rng);
    } while (!addresses.insert(r.address).second);
    r.distance = std::to_string(std::uniform_int_distribution<int>(1, 8)(rng)) + " miles";
    r.traffic = pick(traffic_kinds(), rng);
    out.push_back(std::move(r));
  }
  return out;
}

struct Exchange {
  std::string driver, car;
};

// Kinds 1 and 3 name the place, so they are only used for well-known names.
Exchange ask(const Row& r, std::size_t kind) {
  switch (kind) {
    case 0:
      return {"Address to the " + r.type + ".", r.poi + " is located at " + r.address + "."};
    case 1:
      return {"address of " + r.poi, "the address is " + r.address + " ."};
    case 2:
      return {"How far is the " + r.type + "?", r.poi + " is " + r.distance + " away."};
    case 3:
      return {"Is there traffic on the way to " + r.poi + "?",
              "there is " + r.traffic + " on the way to " + r.poi + "."};
    default:
      return {"Find me a " + r.type + " please.",
              "there is a " + r.poi + " " + r.distance + " away ."};
  }
}

json turn(const std::string& who, const std::string& text) {
  return {{"turn", who}, {"data", {{"utterance", text}}}};
}

}  // namespace

json synthetic_kvret(const SyntheticConfig& config) {
  std::mt19937_64 rng(config.seed);
  json out = json::array();
  for (std::size_t i = 0; i < config.dialogues; ++i) {
    const auto kb = draw_kb(config.kb_rows, rng);
    json items = json::array();
    for (const auto& r : kb) items.push_back(row_json(r));
    json turns = json::array();
    const Row& first = pick(kb, rng);
    auto choose = [&](std::vector<std::size_t> kinds) {
      if (!first.well_known) std::erase_if(kinds, [](std::size_t k) { return k == 1 || k == 3; });
      return pick(kinds, rng);
    };
    const Exchange a = ask(first, choose({0, 1, 2, 3, 4}));
    turns.push_back(turn("driver", a.driver));
    turns.push_back(turn("assistant", a.car));
    switch (std::uniform_int_distribution<int>(0, 2)(rng)) {
      case 0:
        break;
      case 1: {
        // Follow-up about the same place.
        const Exchange b = ask(first, choose({1, 2, 3}));
        turns.push_back(turn("driver", b.driver));
        turns.push_back(turn("assistant", b.car));
        break;
      }
      default:
        turns.push_back(turn("driver", "thank you!"));
        turns.push_back(turn("assistant", "you 're welcome!"));
        break;
    }
    std::ostringstream id;
    id << config.id_prefix << "-" << i;
    out.push_back({{"dialogue", turns},
                   {"scenario",
                    {{"kb", {{"items", items}}},
                     {"task", {{"intent", "navigate"}}},
                     {"uuid", id.str()}}}});
  }
  return out;
}

json gas_station_kb_items() {
  const std::vector<Row> rows = {
      {"Sigona Farmers Market", "grocery store", "638 Amherst St", "3 miles", "car collision nearby"},
      {"Cafe Venetia", "coffee or tea place", "269 Alger Dr", "1 miles", "car collision nearby"},
      {"5672 barringer street", "certain address", "5672 barringer street", "5 miles", "no traffic"},
      {"Valero", "gas station", "200 Alester Ave", "2 miles", "road block nearby"},
      {"Stanford Childrens Health", "hospital", "899 Ames Ct", "5 miles", "moderate traffic"},
      {"Palo Alto Garage R", "parking garage", "481 Amaranta Ave", "1 miles", "moderate traffic"},
      {"Teavana", "coffee or tea place", "145 Amherst St", "1 miles", "road block nearby"},
      {"Willows Market", "grocery store", "409 Bollard St", "5 miles", "no traffic"},
  };
  json items = json::array();
  for (const auto& r : rows) items.push_back(row_json(r));
  return items;
}

json chevron_kb_items() {
  const std::vector<Row> rows = {
      {"Chevron", "gas station", "783 Arcadia Pl", "5 miles", "moderate traffic"},
      {"Town and Country", "shopping center", "383 University Ave", "5 miles", "no traffic"},
      {"jacks house", "friends house", "864 Almanor Ln", "5 miles", "no traffic"},
      {"home", "home", "5671 barringer street", "6 miles", "heavy traffic"},
      {"The Clement Hotel", "rest stop", "657 Ames Ave", "4 miles", "no traffic"},
      {"Sigona Farmers Market", "grocery store", "638 Amherst St", "1 miles", "heavy traffic"},
      {"tai pan", "chinese restaurant", "830 Almanor Ln", "6 miles", "no traffic"},
  };
  json items = json::array();
  for (const auto& r : rows) items.push_back(row_json(r));
  return items;
}

KBTable navigation_table(const json& items) {
  json entry = {{"dialogue", json::array({turn("driver", "hi"), turn("assistant", "hi")})},
                {"scenario",
                 {{"kb", {{"items", items}}},
                  {"task", {{"intent", "navigate"}}},
                  {"uuid", "fixture"}}}};
  const auto dialogues = parse_kvret(json::array({entry}), Domain::navigation, Split::test);
  if (dialogues.empty()) throw ParseError("navigation_table: no rows");
  return *dialogues.front().kb;
}

}  // namespace kbdial
