// Independent brute-force references shared by the unit and acceptance
// suites. Everything here is deliberately written as directly as possible
// from the metric definitions, without reusing the library's evaluation
// code.
#ifndef DOCIE_TESTS_ORACLES_HPP_
#define DOCIE_TESTS_ORACLES_HPP_

#include <algorithm>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "docie/corpus.hpp"
#include "docie/prediction.hpp"
#include "docie/rng.hpp"

namespace oracles {

struct HardCounts {
  std::size_t tp = 0;
  std::size_t n_pred = 0;
  std::size_t n_gold = 0;
};

// A mention is correct if it matches a gold span exactly. A cluster is
// correct if its mention set and type set (and, for the DocIE variant, its
// entity id) match a ground-truth cluster. A triple is correct if its
// relation matches and both clusters are correct.
inline HardCounts hard_metric_oracle(const docie::PredictedDoc& pred,
                                     const docie::Document& gold,
                                     bool require_id) {
  using docie::MentionSpan;
  auto cluster_matches = [&](const docie::PredictedCluster& pc,
                             const docie::EntityCluster& gc) {
    const std::set<MentionSpan> pm(pc.mentions.begin(), pc.mentions.end());
    const std::set<MentionSpan> gm(gc.mentions.begin(), gc.mentions.end());
    if (pm != gm) return false;
    const std::set<std::string> pt(pc.types.begin(), pc.types.end());
    const std::set<std::string> gt(gc.types.begin(), gc.types.end());
    if (pt != gt) return false;
    if (require_id && pc.entity_id != gc.entity_id) return false;
    return true;
  };

  HardCounts counts;
  std::set<std::tuple<int, std::string, int>> distinct_pred;
  for (const auto& t : pred.triples)
    distinct_pred.insert({t.head, t.relation, t.tail});
  counts.n_pred = distinct_pred.size();

  std::set<docie::Triple> gold_set(gold.gold_triples.begin(),
                                   gold.gold_triples.end());
  counts.n_gold = gold_set.size();

  std::set<docie::Triple> correct;
  for (const auto& [head, relation, tail] : distinct_pred) {
    for (const auto& gt : gold_set) {
      if (gt.relation != relation) continue;
      if (!cluster_matches(pred.clusters[head], gold.gold_clusters[gt.head]))
        continue;
      if (!cluster_matches(pred.clusters[tail], gold.gold_clusters[gt.tail]))
        continue;
      correct.insert(gt);
    }
  }
  counts.tp = correct.size();
  return counts;
}

struct HardFixture {
  docie::Document gold;
  docie::PredictedDoc pred;
};

// Random gold document plus a corruption of it: mentions added or dropped,
// types flipped, ids swapped, triples perturbed. Exercises the cluster
// matching boundary cases of the hard metrics.
inline HardFixture random_hard_fixture(docie::Rng& rng) {
  using docie::MentionSpan;
  HardFixture f;
  const int n_clusters = 1 + static_cast<int>(rng.randint(0, 3));
  const std::vector<std::string> types = {"person", "organization"};
  const std::vector<std::string> ids = {"", "Q1", "Q2", "Q3"};

  int next_token = 0;
  f.gold.id = "rand";
  f.gold.sentence_starts = {0};
  for (int c = 0; c < n_clusters; ++c) {
    docie::EntityCluster cluster;
    const int n_mentions = 1 + static_cast<int>(rng.randint(0, 2));
    for (int m = 0; m < n_mentions; ++m) {
      cluster.mentions.push_back({next_token, next_token + 1});
      next_token += 2;
    }
    cluster.types = {types[rng.randint(0, 1)]};
    cluster.entity_id = ids[rng.randint(0, 3)];
    f.gold.gold_clusters.push_back(std::move(cluster));
  }
  f.gold.tokens.assign(next_token + 8, "w");
  for (int h = 0; h < n_clusters; ++h)
    for (int t = 0; t < n_clusters; ++t) {
      if (h == t || rng.uniform() > 0.5) continue;
      f.gold.gold_triples.push_back(
          {h, t, rng.uniform() < 0.5 ? "works_for" : "founded"});
    }

  // prediction = corrupted copy
  for (int c = 0; c < n_clusters; ++c) {
    const auto& gc = f.gold.gold_clusters[c];
    docie::PredictedCluster pc;
    pc.mentions = gc.mentions;
    pc.types = gc.types;
    pc.entity_id = gc.entity_id;
    const double roll = rng.uniform();
    if (roll < 0.2) {
      pc.mentions.push_back({next_token, next_token + 1});  // spurious mention
      std::sort(pc.mentions.begin(), pc.mentions.end());
    } else if (roll < 0.35 && pc.mentions.size() > 1) {
      pc.mentions.pop_back();  // dropped mention
    } else if (roll < 0.5) {
      pc.types = {pc.types[0] == "person" ? "organization" : "person"};
    } else if (roll < 0.65) {
      pc.entity_id = ids[rng.randint(0, 3)];
    }
    f.pred.clusters.push_back(std::move(pc));
  }
  for (const auto& t : f.gold.gold_triples) {
    const double roll = rng.uniform();
    if (roll < 0.15) continue;  // dropped triple
    docie::Triple pt = t;
    if (roll < 0.3)
      pt.relation = pt.relation == "works_for" ? "founded" : "works_for";
    f.pred.triples.push_back(pt);
    if (rng.uniform() < 0.1) f.pred.triples.push_back(pt);  // duplicate
  }
  if (!f.pred.clusters.empty() && rng.uniform() < 0.3) {
    // spurious triple
    const int h = static_cast<int>(rng.randint(0, f.pred.clusters.size() - 1));
    const int t = static_cast<int>(rng.randint(0, f.pred.clusters.size() - 1));
    if (h != t) f.pred.triples.push_back({h, t, "works_for"});
  }
  for (const auto& c : f.pred.clusters)
    f.pred.mentions.insert(f.pred.mentions.end(), c.mentions.begin(),
                           c.mentions.end());
  return f;
}

}  // namespace oracles

#endif  // DOCIE_TESTS_ORACLES_HPP_
