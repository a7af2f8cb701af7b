#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace cashbo {

// Leading entries of every meta-feature vector; task-descriptor extras follow.
inline constexpr int kMetaBaseLen = 8;

struct DatasetStats {
  double n_samples = 0.0;
  double n_features = 0.0;
  double n_classes = 0.0;
  double class_entropy = 0.0;
  double fraction_categorical = 0.0;
  double fraction_missing = 0.0;
  double skew_mean = 0.0;
  double skew_std = 0.0;
  std::vector<double> extras;
};

// Fixed-length vector: logs of counts, then the remaining stats, then
// `extra_len` descriptor slots (missing entries imputed 0, non-finite zeroed).
std::vector<double> make_meta_features(const DatasetStats& stats, int extra_len);

struct RankingRow {
  int group = 0;
  std::string target_id;
  std::string source_id;
  double score = 0.0;
  std::vector<double> target_meta;
  std::vector<double> source_meta;
};
using RankingDataset = std::vector<RankingRow>;

// The ranker consumes the componentwise absolute difference of the two
// meta-feature vectors.
std::vector<double> rank_features(const std::vector<double>& target_meta,
                                  const std::vector<double>& source_meta);

// Mean best-so-far value over all seeds, sampled every max(1, T/10)
// iterations. Traces must be nonempty, equal-length, and nondecreasing.
double score_tau(const std::vector<std::vector<double>>& best_traces);

// predicted_order[r] is the item placed at position r. Relevance of the item
// with true rank r (1-based, descending score) is (k-r+1)^2 for r <= k and 0
// beyond; DCG discounts position r by 1/log2(r+1).
double ndcg_at_k(const std::vector<double>& true_scores,
                 const std::vector<int>& predicted_order, int k);

// Pairwise pseudo-responses for one group: for every pair with
// relevance[i] > relevance[j], both sides move by
// |delta NDCG of swapping i,j| / (1 + exp(pred[i] - pred[j])).
std::vector<double> lambdarank_responses(const std::vector<double>& relevance,
                                         const std::vector<double>& predictions);

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  double value = 0.0;
  int left = -1;
  int right = -1;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;
  double predict(const std::vector<double>& features) const;
};

struct RankerModel {
  int num_features = 0;
  double learning_rate = 0.1;
  std::vector<RegressionTree> trees;
  double predict(const std::vector<double>& features) const;
};

struct RankerConfig {
  int rounds = 200;
  int max_depth = 3;
  double learning_rate = 0.1;
};

struct RankerReport {
  // Mean within-group training NDCG; entry 0 is before any boosting round.
  std::vector<double> train_ndcg;
  int groups_used = 0;
  int groups_skipped = 0;
};

// Gradient-boosted trees on LambdaRank pseudo-responses. Relevance labels come
// from within-group score ranks (competition ranking, so tied scores never
// form a pair). Degenerate groups are skipped with a warning. Deterministic.
RankerModel train_ranker(const RankingDataset& ds, const RankerConfig& cfg = {},
                         RankerReport* report = nullptr);

struct SourceMeta {
  std::string id;
  std::vector<double> meta;
};

// Sources sorted by predicted rank score descending; ties break by id.
std::vector<std::string> recommend_ptem(const RankerModel& model,
                                        const std::vector<double>& target_meta,
                                        const std::vector<SourceMeta>& sources);

// Full (target, source) cross product minus the diagonal; `best_trace` runs
// one optimization and returns its best-so-far curve. A throwing run drops
// that row with a warning; groups left with fewer than two rows are dropped.
RankingDataset build_ranking_dataset(
    const std::vector<SourceMeta>& sources, int num_seeds,
    const std::function<std::vector<double>(int target, int source, int seed)>&
        best_trace);

std::string ranking_dataset_to_tsv(const RankingDataset& ds);
RankingDataset ranking_dataset_from_tsv(const std::string& text);
void save_ranking_dataset(const RankingDataset& ds, const std::string& path);
RankingDataset load_ranking_dataset(const std::string& path);

std::string ranker_to_text(const RankerModel& model);
RankerModel ranker_from_text(const std::string& text);
void save_ranker(const RankerModel& model, const std::string& path);
RankerModel load_ranker(const std::string& path);

}  // namespace cashbo
