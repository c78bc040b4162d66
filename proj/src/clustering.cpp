#include "docie/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "docie/error.hpp"

namespace docie {

SimilarityMatrix SimilarityMatrix::identity(int n) {
  SimilarityMatrix s;
  s.n = n;
  s.values.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) s.set(i, i, 1.0);
  return s;
}

void SimilarityMatrix::validate() const {
  if (values.size() != static_cast<std::size_t>(n) * n)
    throw ContractError("similarity matrix: size does not match n");
  for (int i = 0; i < n; ++i) {
    if (at(i, i) != 1.0)
      throw ContractError("similarity matrix: diagonal must be 1");
    for (int j = 0; j < n; ++j) {
      if (at(i, j) < 0.0 || at(i, j) > 1.0)
        throw ContractError("similarity matrix: entry outside [0, 1]");
      if (at(i, j) != at(j, i))
        throw ContractError("similarity matrix: not symmetric");
    }
  }
}

ClusterMethod cluster_method_from_string(const std::string& name) {
  if (name == "greedy") return ClusterMethod::kGreedy;
  if (name == "greedy_multi") return ClusterMethod::kGreedyMulti;
  if (name == "average_linkage") return ClusterMethod::kAverageLinkage;
  if (name == "complete_linkage") return ClusterMethod::kCompleteLinkage;
  if (name == "entity_link") return ClusterMethod::kEntityLink;
  throw ConfigError("unknown clustering method '" + name + "'");
}

std::string to_string(ClusterMethod method) {
  switch (method) {
    case ClusterMethod::kGreedy: return "greedy";
    case ClusterMethod::kGreedyMulti: return "greedy_multi";
    case ClusterMethod::kAverageLinkage: return "average_linkage";
    case ClusterMethod::kCompleteLinkage: return "complete_linkage";
    case ClusterMethod::kEntityLink: return "entity_link";
  }
  throw ConfigError("unknown clustering method");
}

void ClusteringConfig::validate() const {
  if (threshold < 0.0 || threshold > 1.0)
    throw ConfigError("clustering threshold outside [0, 1]");
}

SimilarityMatrix build_similarity(const std::vector<PairScore>& scores, int n) {
  SimilarityMatrix s = SimilarityMatrix::identity(n);
  for (const auto& p : scores) {
    s.set(p.i, p.j, p.coref);
    s.set(p.j, p.i, p.coref);
  }
  return s;
}

std::vector<std::vector<int>> cluster_greedy(const SimilarityMatrix& s,
                                             double threshold) {
  std::vector<bool> assigned(s.n, false);
  std::vector<std::vector<int>> clusters;
  for (int i = 0; i < s.n; ++i) {
    std::vector<int> cluster;
    for (int j = 0; j < s.n; ++j)
      if (!assigned[j] && s.at(i, j) > threshold) cluster.push_back(j);
    if (cluster.empty()) continue;
    for (int j : cluster) assigned[j] = true;
    clusters.push_back(std::move(cluster));
  }
  // With a strict threshold of 1 nothing clears the diagonal test; keep the
  // partition contract by emitting singletons.
  for (int j = 0; j < s.n; ++j)
    if (!assigned[j]) clusters.push_back({j});
  return clusters;
}

std::vector<std::vector<int>> cluster_greedy_multi(const SimilarityMatrix& s,
                                                   double threshold) {
  std::set<std::vector<int>> unique;
  std::vector<std::vector<int>> clusters;
  for (int i = 0; i < s.n; ++i) {
    std::vector<int> cluster;
    for (int j = 0; j < s.n; ++j)
      if (s.at(i, j) > threshold) cluster.push_back(j);
    if (cluster.empty()) continue;
    if (unique.insert(cluster).second) clusters.push_back(std::move(cluster));
  }
  return clusters;
}

namespace {

double linkage_distance(const SimilarityMatrix& s, const std::vector<int>& a,
                        const std::vector<int>& b, bool average) {
  double total = 0.0, worst = 0.0;
  for (int i : a)
    for (int j : b) {
      const double d = 1.0 - s.at(i, j);
      total += d;
      worst = std::max(worst, d);
    }
  return average ? total / (static_cast<double>(a.size()) * b.size()) : worst;
}

}  // namespace

std::vector<std::vector<int>> cluster_linkage(const SimilarityMatrix& s,
                                              double threshold, bool average) {
  std::vector<std::vector<int>> clusters;
  for (int i = 0; i < s.n; ++i) clusters.push_back({i});
  const double max_distance = 1.0 - threshold;
  while (clusters.size() > 1) {
    int best_a = -1, best_b = -1;
    double best_d = 0.0;
    for (std::size_t a = 0; a < clusters.size(); ++a)
      for (std::size_t b = a + 1; b < clusters.size(); ++b) {
        const double d = linkage_distance(s, clusters[a], clusters[b], average);
        if (best_a < 0 || d < best_d) {
          best_d = d;
          best_a = static_cast<int>(a);
          best_b = static_cast<int>(b);
        }
      }
    if (best_d > max_distance) break;
    auto merged = clusters[best_a];
    merged.insert(merged.end(), clusters[best_b].begin(),
                  clusters[best_b].end());
    std::sort(merged.begin(), merged.end());
    clusters[best_a] = std::move(merged);
    clusters.erase(clusters.begin() + best_b);
  }
  return clusters;
}

std::vector<std::vector<int>> cluster_by_entity_id(
    const std::vector<std::string>& mention_ids) {
  std::vector<std::vector<int>> clusters;
  std::map<std::string, int> cluster_of_id;
  for (std::size_t m = 0; m < mention_ids.size(); ++m) {
    const auto& id = mention_ids[m];
    if (id.empty()) {
      clusters.push_back({static_cast<int>(m)});
      continue;
    }
    auto it = cluster_of_id.find(id);
    if (it == cluster_of_id.end()) {
      cluster_of_id[id] = static_cast<int>(clusters.size());
      clusters.push_back({static_cast<int>(m)});
    } else {
      clusters[it->second].push_back(static_cast<int>(m));
    }
  }
  return clusters;
}

std::vector<std::vector<int>> run_clustering(
    const SimilarityMatrix& s, const ClusteringConfig& config,
    const std::vector<std::string>& mention_ids) {
  config.validate();
  switch (config.method) {
    case ClusterMethod::kGreedy:
      return cluster_greedy(s, config.threshold);
    case ClusterMethod::kGreedyMulti:
      return cluster_greedy_multi(s, config.threshold);
    case ClusterMethod::kAverageLinkage:
      return cluster_linkage(s, config.threshold, true);
    case ClusterMethod::kCompleteLinkage:
      return cluster_linkage(s, config.threshold, false);
    case ClusterMethod::kEntityLink:
      return cluster_by_entity_id(mention_ids);
  }
  throw ConfigError("unknown clustering method");
}

}  // namespace docie
