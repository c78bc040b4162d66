#include "docie/corpus.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>

#include "docie/error.hpp"
#include "docie/rng.hpp"
#include "json.hpp"
#include "world.hpp"

namespace docie {

using nlohmann::json;

namespace {

void check_unique_nonempty(const std::vector<std::string>& labels,
                           const std::string& what) {
  if (labels.empty())
    throw ValidationError("schema: " + what + " list is empty");
  std::set<std::string> seen;
  for (const auto& l : labels) {
    if (!seen.insert(l).second)
      throw ValidationError("schema: duplicate " + what + " label '" + l + "'");
  }
}

int index_in(const std::vector<std::string>& labels, const std::string& label) {
  auto it = std::find(labels.begin(), labels.end(), label);
  return it == labels.end() ? -1 : static_cast<int>(it - labels.begin());
}

}  // namespace

void Schema::validate() const {
  check_unique_nonempty(entity_types, "entity type");
  check_unique_nonempty(relations, "relation");
  check_unique_nonempty(entities, "entity");
  check_unique_nonempty(fine_types, "fine type");
  check_unique_nonempty(fine_relations, "fine relation");
}

int Schema::type_index(const std::string& label) const {
  return index_in(entity_types, label);
}
int Schema::relation_index(const std::string& label) const {
  return index_in(relations, label);
}
int Schema::entity_index(const std::string& id) const {
  return index_in(entities, id);
}
int Schema::fine_type_index(const std::string& label) const {
  return index_in(fine_types, label);
}
int Schema::fine_relation_index(const std::string& label) const {
  return index_in(fine_relations, label);
}

int Document::sentence_of(int pos) const {
  if (sentence_starts.empty()) return 0;
  int sent = 0;
  for (std::size_t i = 0; i < sentence_starts.size(); ++i) {
    if (sentence_starts[i] <= pos) sent = static_cast<int>(i);
  }
  return sent;
}

std::string Document::surface(const MentionSpan& span) const {
  std::string out;
  for (int i = span.start; i < span.end; ++i) {
    if (i > span.start) out += ' ';
    out += tokens[i];
  }
  return out;
}

const std::vector<std::pair<std::string, double>>* CandidateTable::lookup(
    const std::string& surface) const {
  auto it = entries.find(surface);
  return it == entries.end() ? nullptr : &it->second;
}

namespace {

std::string span_str(const MentionSpan& s) {
  return "[" + std::to_string(s.start) + ", " + std::to_string(s.end) + ")";
}

Document document_from_json(const json& jd, const Schema& schema,
                            std::size_t doc_pos) {
  Document doc;
  doc.id = jd.value("id", "doc" + std::to_string(doc_pos));
  if (!jd.contains("tokens") || !jd["tokens"].is_array())
    throw ParseError("document '" + doc.id + "': missing tokens array");
  for (const auto& t : jd["tokens"]) doc.tokens.push_back(t.get<std::string>());

  if (jd.contains("sentence_starts")) {
    for (const auto& s : jd["sentence_starts"])
      doc.sentence_starts.push_back(s.get<int>());
  }
  if (doc.sentence_starts.empty()) doc.sentence_starts.push_back(0);
  if (doc.sentence_starts.front() != 0)
    throw ValidationError("document '" + doc.id +
                          "': sentence_starts must begin at 0");
  for (std::size_t i = 1; i < doc.sentence_starts.size(); ++i) {
    if (doc.sentence_starts[i] <= doc.sentence_starts[i - 1] ||
        doc.sentence_starts[i] >= doc.n_tokens())
      throw ValidationError("document '" + doc.id +
                            "': sentence_starts not strictly increasing "
                            "within token bounds");
  }

  const int n = doc.n_tokens();
  std::vector<EntityCluster> raw_clusters;
  for (const auto& jc : jd.value("clusters", json::array())) {
    EntityCluster c;
    for (const auto& jm : jc.value("mentions", json::array())) {
      MentionSpan span{jm.at(0).get<int>(), jm.at(1).get<int>()};
      if (span.start < 0 || span.start >= span.end || span.end > n)
        throw ValidationError("document '" + doc.id + "': mention span " +
                              span_str(span) + " out of bounds (doc length " +
                              std::to_string(n) + ")");
      c.mentions.push_back(span);
    }
    std::sort(c.mentions.begin(), c.mentions.end());
    c.mentions.erase(std::unique(c.mentions.begin(), c.mentions.end()),
                     c.mentions.end());
    for (const auto& jt : jc.value("types", json::array())) {
      const auto label = jt.get<std::string>();
      if (schema.type_index(label) < 0)
        throw ValidationError("document '" + doc.id + "': unknown entity type '" +
                              label + "'");
      c.types.push_back(label);
    }
    std::sort(c.types.begin(), c.types.end());
    c.types.erase(std::unique(c.types.begin(), c.types.end()), c.types.end());
    if (jc.contains("entity_id") && !jc["entity_id"].is_null()) {
      c.entity_id = jc["entity_id"].get<std::string>();
      if (schema.entity_index(c.entity_id) < 0)
        throw ValidationError("document '" + doc.id + "': unknown entity id '" +
                              c.entity_id + "'");
    }
    raw_clusters.push_back(std::move(c));
  }

  std::vector<Triple> raw_triples;
  for (const auto& jt : jd.value("triples", json::array())) {
    Triple t;
    t.head = jt.at("head").get<int>();
    t.tail = jt.at("tail").get<int>();
    t.relation = jt.at("relation").get<std::string>();
    const int nc = static_cast<int>(raw_clusters.size());
    if (t.head < 0 || t.head >= nc || t.tail < 0 || t.tail >= nc)
      throw ValidationError("document '" + doc.id +
                            "': triple cluster index out of range");
    if (t.head == t.tail)
      throw ValidationError("document '" + doc.id +
                            "': triple with identical head and tail");
    if (schema.relation_index(t.relation) < 0)
      throw ValidationError("document '" + doc.id + "': unknown relation '" +
                            t.relation + "'");
    raw_triples.push_back(std::move(t));
  }

  // Drop empty clusters and remap triple indices; triples referencing a
  // dropped cluster are dropped with it.
  std::vector<int> remap(raw_clusters.size(), -1);
  for (std::size_t i = 0; i < raw_clusters.size(); ++i) {
    if (raw_clusters[i].mentions.empty()) continue;
    remap[i] = static_cast<int>(doc.gold_clusters.size());
    doc.gold_clusters.push_back(std::move(raw_clusters[i]));
  }
  std::set<Triple> seen_triples;
  for (auto& t : raw_triples) {
    if (remap[t.head] < 0 || remap[t.tail] < 0) continue;
    t.head = remap[t.head];
    t.tail = remap[t.tail];
    if (seen_triples.insert(t).second) doc.gold_triples.push_back(t);
  }

  // Overlapping gold mentions cannot be expressed in BIO tags.
  std::vector<std::pair<MentionSpan, int>> all_mentions;
  for (std::size_t ci = 0; ci < doc.gold_clusters.size(); ++ci)
    for (const auto& m : doc.gold_clusters[ci].mentions)
      all_mentions.emplace_back(m, static_cast<int>(ci));
  std::sort(all_mentions.begin(), all_mentions.end());
  for (std::size_t i = 1; i < all_mentions.size(); ++i) {
    const auto& prev = all_mentions[i - 1].first;
    const auto& cur = all_mentions[i].first;
    if (prev.end > cur.start)
      throw ValidationError("document '" + doc.id +
                            "': overlapping gold mentions " + span_str(prev) +
                            " (cluster " +
                            std::to_string(all_mentions[i - 1].second) +
                            ") and " + span_str(cur) + " (cluster " +
                            std::to_string(all_mentions[i].second) + ")");
  }
  return doc;
}

}  // namespace

Corpus parse_corpus_json(const std::string& json_text, const Schema& schema,
                         const std::string& origin) {
  schema.validate();
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(origin + ": " + e.what());
  }
  if (!root.contains("documents") || !root["documents"].is_array())
    throw ParseError(origin + ": top-level 'documents' array missing");
  Corpus corpus;
  std::size_t pos = 0;
  for (const auto& jd : root["documents"])
    corpus.push_back(document_from_json(jd, schema, pos++));
  return corpus;
}

Corpus parse_corpus(const std::string& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open corpus file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_corpus_json(buf.str(), schema, path);
}

std::string serialize_corpus(const Corpus& corpus) {
  json docs = json::array();
  for (const auto& doc : corpus) {
    json jd;
    jd["id"] = doc.id;
    jd["tokens"] = doc.tokens;
    jd["sentence_starts"] = doc.sentence_starts;
    json jclusters = json::array();
    for (const auto& c : doc.gold_clusters) {
      json jc;
      json jmentions = json::array();
      for (const auto& m : c.mentions) jmentions.push_back({m.start, m.end});
      jc["mentions"] = jmentions;
      jc["types"] = c.types;
      if (c.linked())
        jc["entity_id"] = c.entity_id;
      else
        jc["entity_id"] = nullptr;
      jclusters.push_back(jc);
    }
    jd["clusters"] = jclusters;
    json jtriples = json::array();
    for (const auto& t : doc.gold_triples)
      jtriples.push_back({{"head", t.head},
                          {"relation", t.relation},
                          {"tail", t.tail}});
    jd["triples"] = jtriples;
    docs.push_back(jd);
  }
  return json{{"documents", docs}}.dump(1);
}

void write_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write corpus file: " + path);
  out << serialize_corpus(corpus) << '\n';
}

Schema parse_schema_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("schema: ") + e.what());
  }
  Schema s;
  s.entity_types = j.at("entity_types").get<std::vector<std::string>>();
  s.relations = j.at("relations").get<std::vector<std::string>>();
  s.entities = j.at("entities").get<std::vector<std::string>>();
  s.fine_types = j.at("fine_types").get<std::vector<std::string>>();
  s.fine_relations = j.at("fine_relations").get<std::vector<std::string>>();
  s.validate();
  return s;
}

std::string serialize_schema(const Schema& schema) {
  return json{{"entity_types", schema.entity_types},
              {"relations", schema.relations},
              {"entities", schema.entities},
              {"fine_types", schema.fine_types},
              {"fine_relations", schema.fine_relations}}
      .dump(1);
}

CandidateTable build_candidate_table(const Corpus& corpus,
                                     std::size_t max_candidates) {
  std::map<std::string, std::map<std::string, std::size_t>> counts;
  std::map<std::string, std::size_t> totals;
  for (const auto& doc : corpus) {
    for (const auto& c : doc.gold_clusters) {
      if (!c.linked()) continue;
      for (const auto& m : c.mentions) {
        const auto surface = doc.surface(m);
        counts[surface][c.entity_id]++;
        totals[surface]++;
      }
    }
  }
  CandidateTable table;
  for (const auto& [surface, per_entity] : counts) {
    std::vector<std::pair<std::string, double>> ranked;
    const double total = static_cast<double>(totals[surface]);
    for (const auto& [id, cnt] : per_entity)
      ranked.emplace_back(id, static_cast<double>(cnt) / total);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    if (ranked.size() > max_candidates) ranked.resize(max_candidates);
    table.entries[surface] = std::move(ranked);
  }
  return table;
}

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats stats;
  stats.docs = corpus.size();
  if (corpus.empty()) return stats;
  std::size_t entities = 0, facts = 0;
  std::set<std::string> types, relations;
  for (const auto& doc : corpus) {
    entities += doc.gold_clusters.size();
    facts += doc.gold_triples.size();
    for (const auto& c : doc.gold_clusters)
      types.insert(c.types.begin(), c.types.end());
    for (const auto& t : doc.gold_triples) relations.insert(t.relation);
  }
  stats.entities_per_doc = static_cast<double>(entities) / corpus.size();
  stats.facts_per_doc = static_cast<double>(facts) / corpus.size();
  stats.distinct_types = types.size();
  stats.distinct_relations = relations.size();
  return stats;
}

// ---------------------------------------------------------------------------
// Synthetic desk-scale world.

Schema make_desk_schema() {
  Schema s;
  s.entity_types = {"person", "organization", "location", "event", "work"};
  s.relations = {"employer",  "based_in", "located_in",
                 "member_of", "creator",  "participant"};
  for (int i = 1; i <= 30; ++i) s.entities.push_back("Q" + std::to_string(i));
  s.fine_types = {"politician", "musician", "company", "university", "city",
                  "country",    "festival", "conflict", "album",      "novel"};
  s.fine_relations = {"P108", "P131", "P159", "P463",
                      "P170", "P1344", "P27",  "P361"};
  return s;
}

Corpus generate_synthetic_corpus(std::uint64_t seed, std::size_t n_docs,
                                 const Schema& schema) {
  schema.validate();
  Rng rng(seed * 0x9e3779b97f4a7c15ull + 0x12345);
  const int n_world = static_cast<int>(schema.entities.size());
  Corpus corpus;
  for (std::size_t d = 0; d < n_docs; ++d) {
    // Sample 3..5 distinct entities with at least one world fact among them.
    std::vector<int> ents;
    for (int attempt = 0; attempt < 64; ++attempt) {
      ents.clear();
      const int n_ent = static_cast<int>(rng.randint(3, 5));
      while (static_cast<int>(ents.size()) < n_ent) {
        const int e = static_cast<int>(rng.randint(0, n_world - 1));
        if (std::find(ents.begin(), ents.end(), e) == ents.end())
          ents.push_back(e);
      }
      bool has_fact = false;
      for (int a : ents)
        for (int b : ents)
          if (world::fact_relation(a, b, schema) >= 0) has_fact = true;
      if (has_fact) break;
    }

    Document doc;
    doc.id = "syn" + std::to_string(d);
    // One home sentence per entity; extra mentions step to the following
    // sentences. Fact pairs then mostly live in disjoint sentences, matching
    // the document-level character of the target datasets.
    const int n_sent = static_cast<int>(ents.size());

    struct PlannedMention {
      int entity_slot;
      int variant;
    };
    std::vector<std::vector<PlannedMention>> per_sentence(n_sent);
    for (std::size_t k = 0; k < ents.size(); ++k) {
      int n_mentions = k == 0 ? static_cast<int>(rng.randint(2, 3))
                              : (rng.uniform() < 0.3 ? 2 : 1);
      for (int m = 0; m < n_mentions; ++m) {
        int variant = static_cast<int>(rng.randint(0, 3));
        if (variant == 2 && world::alias_index(ents[k]) < 0) variant = 0;
        if (variant == 3) variant = 0;
        per_sentence[(static_cast<int>(k) + m) % n_sent].push_back(
            {static_cast<int>(k), variant});
      }
    }

    std::vector<EntityCluster> clusters(ents.size());
    for (std::size_t k = 0; k < ents.size(); ++k) {
      clusters[k].types = {
          schema.entity_types[world::coarse_type(ents[k], schema)]};
      clusters[k].entity_id = schema.entities[ents[k]];
    }

    for (int s = 0; s < n_sent; ++s) {
      doc.sentence_starts.push_back(doc.n_tokens());
      const int lead = static_cast<int>(rng.randint(2, 4));
      for (int i = 0; i < lead; ++i)
        doc.tokens.push_back(
            world::kFiller[rng.randint(0, world::kFiller.size() - 1)]);
      for (const auto& pm : per_sentence[s]) {
        const auto words =
            world::surface_tokens(ents[pm.entity_slot], pm.variant, schema);
        MentionSpan span;
        span.start = doc.n_tokens();
        for (const auto& w : words) doc.tokens.push_back(w);
        span.end = doc.n_tokens();
        clusters[pm.entity_slot].mentions.push_back(span);
        const int gap = static_cast<int>(rng.randint(1, 2));
        for (int i = 0; i < gap; ++i)
          doc.tokens.push_back(
              world::kFiller[rng.randint(0, world::kFiller.size() - 1)]);
      }
    }

    for (auto& c : clusters) {
      std::sort(c.mentions.begin(), c.mentions.end());
      c.mentions.erase(std::unique(c.mentions.begin(), c.mentions.end()),
                       c.mentions.end());
    }
    doc.gold_clusters = std::move(clusters);

    for (std::size_t a = 0; a < ents.size(); ++a) {
      for (std::size_t b = 0; b < ents.size(); ++b) {
        const int rel = world::fact_relation(ents[a], ents[b], schema);
        if (rel < 0) continue;
        doc.gold_triples.push_back({static_cast<int>(a), static_cast<int>(b),
                                    schema.relations[rel]});
      }
    }
    corpus.push_back(std::move(doc));
  }
  return corpus;
}

double cross_sentence_fraction(const Corpus& corpus) {
  std::size_t total = 0, cross = 0;
  for (const auto& doc : corpus) {
    for (const auto& t : doc.gold_triples) {
      ++total;
      std::set<int> head_sents, tail_sents;
      for (const auto& m : doc.gold_clusters[t.head].mentions)
        head_sents.insert(doc.sentence_of(m.start));
      for (const auto& m : doc.gold_clusters[t.tail].mentions)
        tail_sents.insert(doc.sentence_of(m.start));
      bool share = false;
      for (int s : head_sents)
        if (tail_sents.count(s)) share = true;
      if (!share) ++cross;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(cross) / total;
}

}  // namespace docie
