#ifndef DOCIE_KG_HPP_
#define DOCIE_KG_HPP_

#include <string>
#include <vector>

#include "docie/corpus.hpp"

namespace docie {

struct KgEntry {
  std::string entity_id;
  std::vector<std::string> description;  // whitespace-tokenized
  std::vector<std::string> fine_types;
};

// Desk-scale stand-in for the reference knowledge graph: entity descriptions
// and fine-grained types keyed by identifier.
struct KgSnapshot {
  std::vector<KgEntry> entries;

  const KgEntry* find(const std::string& entity_id) const;
};

// File format: JSON list of {entity_id, description, fine_types}.
KgSnapshot load_kg(const std::string& path);
KgSnapshot parse_kg_json(const std::string& json_text,
                         const std::string& origin = "<memory>");
std::string serialize_kg(const KgSnapshot& kg);
void write_kg(const KgSnapshot& kg, const std::string& path);

// Snapshot consistent with the synthetic corpus world: every schema entity
// gets a short discriminative description and a deterministic fine type.
KgSnapshot generate_desk_kg(const Schema& schema);

}  // namespace docie

#endif  // DOCIE_KG_HPP_
