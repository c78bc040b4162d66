#include "docie/kg.hpp"

#include <fstream>
#include <sstream>

#include "docie/error.hpp"
#include "json.hpp"
#include "world.hpp"

namespace docie {

using nlohmann::json;

const KgEntry* KgSnapshot::find(const std::string& entity_id) const {
  for (const auto& e : entries)
    if (e.entity_id == entity_id) return &e;
  return nullptr;
}

KgSnapshot parse_kg_json(const std::string& json_text,
                         const std::string& origin) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(origin + ": " + e.what());
  }
  if (!root.is_array())
    throw ParseError(origin + ": KG snapshot must be a JSON list");
  KgSnapshot kg;
  for (const auto& je : root) {
    KgEntry entry;
    entry.entity_id = je.at("entity_id").get<std::string>();
    std::istringstream desc(je.value("description", std::string{}));
    std::string word;
    while (desc >> word) entry.description.push_back(word);
    for (const auto& t : je.value("fine_types", json::array()))
      entry.fine_types.push_back(t.get<std::string>());
    kg.entries.push_back(std::move(entry));
  }
  return kg;
}

KgSnapshot load_kg(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open KG snapshot: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_kg_json(buf.str(), path);
}

std::string serialize_kg(const KgSnapshot& kg) {
  json root = json::array();
  for (const auto& e : kg.entries) {
    std::string desc;
    for (std::size_t i = 0; i < e.description.size(); ++i) {
      if (i) desc += ' ';
      desc += e.description[i];
    }
    root.push_back({{"entity_id", e.entity_id},
                    {"description", desc},
                    {"fine_types", e.fine_types}});
  }
  return root.dump(1);
}

void write_kg(const KgSnapshot& kg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write KG snapshot: " + path);
  out << serialize_kg(kg) << '\n';
}

KgSnapshot generate_desk_kg(const Schema& schema) {
  KgSnapshot kg;
  for (std::size_t i = 0; i < schema.entities.size(); ++i) {
    const int e = static_cast<int>(i);
    KgEntry entry;
    entry.entity_id = schema.entities[i];
    entry.fine_types = {schema.fine_types[world::fine_type(e, schema)]};
    entry.description = {
        "the",
        schema.fine_types[world::fine_type(e, schema)],
        schema.entity_types[world::coarse_type(e, schema)],
        "called",
        world::name(e),
        "from",
        world::kRegions[i % world::kRegions.size()]};
    kg.entries.push_back(std::move(entry));
  }
  return kg;
}

}  // namespace docie
