#ifndef DOCIE_CLUSTERING_HPP_
#define DOCIE_CLUSTERING_HPP_

#include <string>
#include <vector>

#include "docie/relation.hpp"

namespace docie {

// Symmetric mention-pair similarity with a unit diagonal, entries in [0, 1].
struct SimilarityMatrix {
  int n = 0;
  std::vector<double> values;  // n * n

  double at(int i, int j) const { return values[i * n + j]; }
  void set(int i, int j, double v) { values[i * n + j] = v; }

  static SimilarityMatrix identity(int n);
  // Throws ContractError when an invariant is broken.
  void validate() const;
};

enum class ClusterMethod {
  kGreedy,
  kGreedyMulti,
  kAverageLinkage,
  kCompleteLinkage,
  kEntityLink,
};

ClusterMethod cluster_method_from_string(const std::string& name);
std::string to_string(ClusterMethod method);

struct ClusteringConfig {
  ClusterMethod method = ClusterMethod::kAverageLinkage;
  double threshold = 0.5;

  void validate() const;
};

// Coref scores for surviving pairs; pruned pairs keep similarity 0.
SimilarityMatrix build_similarity(const std::vector<PairScore>& scores, int n);

// Partition per the greedy cluster equation; mentions left over at the
// strict threshold become singletons.
std::vector<std::vector<int>> cluster_greedy(const SimilarityMatrix& s,
                                             double threshold);

// Overlapping variant: every mention row yields its own cluster; identical
// clusters are collapsed.
std::vector<std::vector<int>> cluster_greedy_multi(const SimilarityMatrix& s,
                                                   double threshold);

// Agglomerative clustering on distance 1 - S; merging stops when the minimum
// inter-cluster linkage distance exceeds 1 - threshold.
std::vector<std::vector<int>> cluster_linkage(const SimilarityMatrix& s,
                                              double threshold, bool average);

// Groups mentions with equal non-NIL predicted ids; NIL mentions ("") become
// singletons.
std::vector<std::vector<int>> cluster_by_entity_id(
    const std::vector<std::string>& mention_ids);

// Dispatch on the configured method. `mention_ids` is consulted only by the
// entity-link method.
std::vector<std::vector<int>> run_clustering(
    const SimilarityMatrix& s, const ClusteringConfig& config,
    const std::vector<std::string>& mention_ids = {});

}  // namespace docie

#endif  // DOCIE_CLUSTERING_HPP_
