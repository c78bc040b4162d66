// Shared tables for the deterministic synthetic world. Internal to the
// corpus and KG generators, not part of the public API.
#ifndef DOCIE_SRC_WORLD_HPP_
#define DOCIE_SRC_WORLD_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "docie/corpus.hpp"

namespace docie::world {

inline const std::vector<std::string> kNames = {
    "varek", "tolma", "ketra", "dorin", "selva",  "brint", "ondor", "malis",
    "perth", "quell", "ravon", "sivel", "tresk", "ulmar", "vonda", "welin",
    "xanto", "yerba", "zorel", "ambra", "belos", "cintra", "drava", "elkin",
    "ferno", "golvan", "harex", "istra", "jelko", "korvat"};

inline const std::vector<std::string> kAmbiguous = {
    "mira", "orin", "solen", "vexa", "narim", "kitel", "rhoan", "zedra"};

inline const std::vector<std::string> kTypeSuffix = {"jr", "group", "valley",
                                                     "summit", "saga"};

inline const std::vector<std::string> kFiller = {
    "the",     "a",       "report",  "notes",    "that",    "meanwhile",
    "later",   "during",  "its",     "visit",    "deal",    "announced",
    "local",   "sources", "confirm", "new",      "annual",  "press",
    "meeting", "today",   "signed",  "official", "between", "quiet",
    "spring"};

inline const std::vector<std::string> kRegions = {"north", "south", "east",
                                                  "west",  "upper", "lower"};

inline std::string name(int entity) { return kNames[entity % kNames.size()]; }

inline int coarse_type(int entity, const Schema& schema) {
  return entity % static_cast<int>(schema.entity_types.size());
}

inline int fine_type(int entity, const Schema& schema) {
  return entity % static_cast<int>(schema.fine_types.size());
}

// Deterministic fact map: the world's triples are a pure function of the
// entity pair, so corpora drawn with different seeds agree on the facts.
inline std::uint64_t pair_hash(int a, int b) {
  std::uint64_t h = 1469598103934665603ull;
  h = (h ^ static_cast<std::uint64_t>(a + 1)) * 1099511628211ull;
  h = (h ^ static_cast<std::uint64_t>(b + 1)) * 1099511628211ull;
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdull;
  h ^= h >> 33;
  return h;
}

inline int fact_relation(int a, int b, const Schema& schema) {
  if (a == b) return -1;
  const auto h = pair_hash(a, b);
  if (h % 4 != 0) return -1;
  return static_cast<int>((h / 7) % schema.relations.size());
}

// Entities 2k and 2k+1 for k < |kAmbiguous| share an alias.
inline int alias_index(int entity) {
  const int k = entity / 2;
  if (k < static_cast<int>(kAmbiguous.size())) return k;
  return -1;
}

inline std::vector<std::string> surface_tokens(int entity, int variant,
                                               const Schema& schema) {
  if (variant == 1)
    return {name(entity), kTypeSuffix[coarse_type(entity, schema)]};
  if (variant == 2 && alias_index(entity) >= 0)
    return {kAmbiguous[alias_index(entity)]};
  return {name(entity)};
}

}  // namespace docie::world

#endif  // DOCIE_SRC_WORLD_HPP_
