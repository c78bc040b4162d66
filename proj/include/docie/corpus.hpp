#ifndef DOCIE_CORPUS_HPP_
#define DOCIE_CORPUS_HPP_

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace docie {

// Label inventories of the target knowledge graph: coarse entity types T,
// relations R, entity identifiers E, plus the fine-grained type and relation
// inventories consumed by the disambiguation heads.
struct Schema {
  std::vector<std::string> entity_types;
  std::vector<std::string> relations;
  std::vector<std::string> entities;
  std::vector<std::string> fine_types;
  std::vector<std::string> fine_relations;

  // Throws ValidationError on empty or duplicated inventories.
  void validate() const;

  int type_index(const std::string& label) const;
  int relation_index(const std::string& label) const;
  int entity_index(const std::string& id) const;
  int fine_type_index(const std::string& label) const;
  int fine_relation_index(const std::string& label) const;
};

// Token span [start, end), end exclusive.
struct MentionSpan {
  int start = 0;
  int end = 0;

  int length() const { return end - start; }
  auto operator<=>(const MentionSpan&) const = default;
};

// A set of coreferent mentions with their entity type labels and an optional
// KG identifier (empty string = unlinked / NIL).
struct EntityCluster {
  std::vector<MentionSpan> mentions;  // sorted, unique
  std::vector<std::string> types;     // sorted, unique
  std::string entity_id;

  bool linked() const { return !entity_id.empty(); }
};

// Directed fact between two clusters of one document.
struct Triple {
  int head = 0;
  int tail = 0;
  std::string relation;

  auto operator<=>(const Triple&) const = default;
};

struct Document {
  std::string id;
  std::vector<std::string> tokens;
  std::vector<int> sentence_starts;  // token index of each sentence start
  std::vector<EntityCluster> gold_clusters;
  std::vector<Triple> gold_triples;

  int n_tokens() const { return static_cast<int>(tokens.size()); }
  // Sentence index containing token position `pos`.
  int sentence_of(int pos) const;
  std::string surface(const MentionSpan& span) const;
};

using Corpus = std::vector<Document>;

// Mention surface -> candidates ranked by descending prior P(e|m).
struct CandidateTable {
  std::map<std::string, std::vector<std::pair<std::string, double>>> entries;

  const std::vector<std::pair<std::string, double>>* lookup(
      const std::string& surface) const;
};

struct CorpusStats {
  std::size_t docs = 0;
  double entities_per_doc = 0.0;
  double facts_per_doc = 0.0;
  std::size_t distinct_types = 0;
  std::size_t distinct_relations = 0;
};

// Loads a corpus JSON file, validating every document against the schema.
// Gold clusters with zero mentions are dropped together with their triples,
// duplicate triples are removed, and overlapping gold mentions are rejected.
Corpus parse_corpus(const std::string& path, const Schema& schema);

// Same cleanup and validation applied to an in-memory JSON string.
Corpus parse_corpus_json(const std::string& json_text, const Schema& schema,
                         const std::string& origin = "<memory>");

std::string serialize_corpus(const Corpus& corpus);
void write_corpus(const Corpus& corpus, const std::string& path);

Schema parse_schema_json(const std::string& json_text);
std::string serialize_schema(const Schema& schema);

// Conditional link frequency P(e|m) over gold links in `corpus`, truncated to
// the `max_candidates` highest-prior entities per surface.
CandidateTable build_candidate_table(const Corpus& corpus,
                                     std::size_t max_candidates);

CorpusStats corpus_stats(const Corpus& corpus);

// Deterministic desk-scale corpus with cross-sentence facts, multi-mention
// clusters and ambiguous surface forms.
Corpus generate_synthetic_corpus(std::uint64_t seed, std::size_t n_docs,
                                 const Schema& schema);

// Fixed small schema matching the synthetic generator's world.
Schema make_desk_schema();

// Fraction of triples whose head/tail mentions never share a sentence.
double cross_sentence_fraction(const Corpus& corpus);

}  // namespace docie

#endif  // DOCIE_CORPUS_HPP_
