#include "cashbo/rank.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>

#include "cashbo/error.hpp"
#include "cashbo/textio.hpp"

namespace cashbo {

namespace {

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// Indices sorted by value descending; equal values keep their input order.
std::vector<int> argsort_desc(const std::vector<double>& values) {
  std::vector<int> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return values[a] > values[b]; });
  return order;
}

double position_discount(int pos_one_based) {
  return 1.0 / std::log2(static_cast<double>(pos_one_based) + 1.0);
}

}  // namespace

std::vector<double> make_meta_features(const DatasetStats& stats, int extra_len) {
  if (extra_len < 0) throw ConfigError("meta-feature extras length must be nonnegative");
  std::vector<double> v;
  v.reserve(kMetaBaseLen + extra_len);
  v.push_back(std::log(std::max(stats.n_samples, 1.0)));
  v.push_back(std::log(std::max(stats.n_features, 1.0)));
  v.push_back(stats.n_classes);
  v.push_back(stats.class_entropy);
  v.push_back(stats.fraction_categorical);
  v.push_back(stats.fraction_missing);
  v.push_back(stats.skew_mean);
  v.push_back(stats.skew_std);
  for (int i = 0; i < extra_len; ++i)
    v.push_back(i < static_cast<int>(stats.extras.size()) ? stats.extras[i] : 0.0);
  for (double& x : v)
    if (!std::isfinite(x)) x = 0.0;
  return v;
}

std::vector<double> rank_features(const std::vector<double>& target_meta,
                                  const std::vector<double>& source_meta) {
  if (target_meta.size() != source_meta.size())
    throw ConfigError("meta-feature lengths differ");
  std::vector<double> f(target_meta.size());
  for (std::size_t i = 0; i < f.size(); ++i)
    f[i] = std::abs(target_meta[i] - source_meta[i]);
  return f;
}

double score_tau(const std::vector<std::vector<double>>& best_traces) {
  if (best_traces.empty()) throw ConfigError("score needs at least one trace");
  const std::size_t T = best_traces[0].size();
  if (T == 0) throw ConfigError("score needs nonempty traces");
  for (const auto& tr : best_traces) {
    if (tr.size() != T) throw ConfigError("trace lengths differ");
    for (std::size_t t = 1; t < T; ++t)
      if (tr[t] < tr[t - 1])
        throw ConfigError("best-so-far traces must be nondecreasing");
  }
  const std::size_t step = std::max<std::size_t>(1, T / 10);
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& tr : best_traces)
    for (std::size_t t = step; t <= T; t += step) {
      sum += tr[t - 1];
      ++count;
    }
  return sum / static_cast<double>(count);
}

double ndcg_at_k(const std::vector<double>& true_scores,
                 const std::vector<int>& predicted_order, int k) {
  const int n = static_cast<int>(true_scores.size());
  if (k < 1 || k > n) throw ConfigError("ndcg cutoff out of range");
  if (static_cast<int>(predicted_order.size()) != n)
    throw ConfigError("ranking length mismatch");
  std::vector<char> seen(n, 0);
  for (int idx : predicted_order) {
    if (idx < 0 || idx >= n || seen[idx])
      throw ConfigError("ranking is not a permutation");
    seen[idx] = 1;
  }
  const auto ideal = argsort_desc(true_scores);
  std::vector<double> rel(n, 0.0);
  for (int r = 0; r < k; ++r)
    rel[ideal[r]] = static_cast<double>(k - r) * static_cast<double>(k - r);
  double dcg = 0.0, max_dcg = 0.0;
  for (int r = 0; r < k; ++r) {
    const double disc = position_discount(r + 1);
    dcg += rel[predicted_order[r]] * disc;
    max_dcg += static_cast<double>(k - r) * static_cast<double>(k - r) * disc;
  }
  return dcg / max_dcg;
}

std::vector<double> lambdarank_responses(const std::vector<double>& relevance,
                                         const std::vector<double>& predictions) {
  const int n = static_cast<int>(relevance.size());
  if (static_cast<int>(predictions.size()) != n)
    throw ConfigError("relevance and prediction lengths differ");
  std::vector<double> rho(n, 0.0);
  if (n < 2) return rho;

  const auto order = argsort_desc(predictions);
  std::vector<int> pos(n);
  for (int r = 0; r < n; ++r) pos[order[r]] = r + 1;

  auto sorted_rel = relevance;
  std::sort(sorted_rel.begin(), sorted_rel.end(), std::greater<>());
  double max_dcg = 0.0;
  for (int r = 0; r < n; ++r) max_dcg += sorted_rel[r] * position_discount(r + 1);
  if (max_dcg <= 0.0) return rho;

  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (relevance[i] <= relevance[j]) continue;
      const double delta = std::abs(relevance[i] - relevance[j]) *
                           std::abs(position_discount(pos[i]) - position_discount(pos[j])) /
                           max_dcg;
      const double push = delta / (1.0 + std::exp(predictions[i] - predictions[j]));
      rho[i] += push;
      rho[j] -= push;
    }
  return rho;
}

double RegressionTree::predict(const std::vector<double>& features) const {
  if (nodes.empty()) return 0.0;
  int at = 0;
  while (nodes[at].feature >= 0) {
    const auto& nd = nodes[at];
    if (nd.feature >= static_cast<int>(features.size()))
      throw ConfigError("feature length mismatch");
    at = features[nd.feature] <= nd.threshold ? nd.left : nd.right;
  }
  return nodes[at].value;
}

double RankerModel::predict(const std::vector<double>& features) const {
  if (static_cast<int>(features.size()) != num_features)
    throw ConfigError("feature length mismatch");
  double s = 0.0;
  for (const auto& tree : trees) s += learning_rate * tree.predict(features);
  return s;
}

namespace {

// Least-squares regression tree; splits chosen greedily, first strictly better
// (feature index, then threshold) wins, so the fit is deterministic.
class TreeBuilder {
 public:
  TreeBuilder(const std::vector<std::vector<double>>& features,
              const std::vector<double>& targets, int max_depth)
      : features_(features), targets_(targets), max_depth_(max_depth) {}

  RegressionTree build(std::vector<int> rows) {
    RegressionTree tree;
    grow(tree, std::move(rows), 0);
    return tree;
  }

 private:
  int grow(RegressionTree& tree, std::vector<int> rows, int depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    double sum = 0.0;
    for (int r : rows) sum += targets_[r];
    const double mean = sum / static_cast<double>(rows.size());
    tree.nodes[id].value = mean;
    if (depth >= max_depth_ || rows.size() < 2) return id;

    const int num_feat = static_cast<int>(features_[rows[0]].size());
    int best_feat = -1;
    double best_thr = 0.0;
    double best_gain = sum * sum / static_cast<double>(rows.size());
    for (int f = 0; f < num_feat; ++f) {
      auto sorted = rows;
      std::stable_sort(sorted.begin(), sorted.end(), [&](int a, int b) {
        return features_[a][f] < features_[b][f];
      });
      double left_sum = 0.0;
      for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        left_sum += targets_[sorted[i]];
        const double lo = features_[sorted[i]][f];
        const double hi = features_[sorted[i + 1]][f];
        if (lo == hi) continue;
        const double right_sum = sum - left_sum;
        const double nl = static_cast<double>(i + 1);
        const double nr = static_cast<double>(sorted.size() - i - 1);
        const double gain = left_sum * left_sum / nl + right_sum * right_sum / nr;
        if (gain > best_gain) {
          best_gain = gain;
          best_feat = f;
          best_thr = lo + 0.5 * (hi - lo);
        }
      }
    }
    if (best_feat < 0) return id;

    std::vector<int> left, right;
    for (int r : rows)
      (features_[r][best_feat] <= best_thr ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    tree.nodes[id].feature = best_feat;
    tree.nodes[id].threshold = best_thr;
    tree.nodes[id].left = grow(tree, std::move(left), depth + 1);
    tree.nodes[id].right = grow(tree, std::move(right), depth + 1);
    return id;
  }

  const std::vector<std::vector<double>>& features_;
  const std::vector<double>& targets_;
  int max_depth_;
};

struct GroupSlice {
  std::vector<int> rows;        // indices into the dataset
  std::vector<double> scores;   // true scores
  std::vector<double> relevance;
};

// Competition ranking of scores within the group: tied scores share the rank
// of their first occurrence, so pairs never form between equals.
std::vector<double> group_relevance(const std::vector<double>& scores) {
  const int k = static_cast<int>(scores.size());
  const auto order = argsort_desc(scores);
  std::vector<double> rel(k, 0.0);
  int rank = 1;
  for (int r = 0; r < k; ++r) {
    if (r > 0 && scores[order[r]] < scores[order[r - 1]]) rank = r + 1;
    const double level = static_cast<double>(k - rank + 1);
    rel[order[r]] = level * level;
  }
  return rel;
}

}  // namespace

RankerModel train_ranker(const RankingDataset& ds, const RankerConfig& cfg,
                         RankerReport* report) {
  if (ds.empty()) throw ConfigError("ranking data is empty");
  if (cfg.rounds < 0 || cfg.max_depth < 1 || cfg.learning_rate <= 0.0)
    throw ConfigError("invalid ranker configuration");

  std::vector<std::vector<double>> features(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i)
    features[i] = rank_features(ds[i].target_meta, ds[i].source_meta);
  const int num_feat = static_cast<int>(features[0].size());
  for (const auto& f : features)
    if (static_cast<int>(f.size()) != num_feat)
      throw ConfigError("meta-feature lengths differ across rows");

  std::vector<int> group_ids;
  std::vector<GroupSlice> groups;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto it = std::find(group_ids.begin(), group_ids.end(), ds[i].group);
    if (it == group_ids.end()) {
      group_ids.push_back(ds[i].group);
      groups.emplace_back();
      it = group_ids.end() - 1;
    }
    auto& g = groups[it - group_ids.begin()];
    g.rows.push_back(static_cast<int>(i));
    g.scores.push_back(ds[i].score);
  }
  if (groups.size() < 2) throw ConfigError("ranking data needs at least two groups");

  std::vector<GroupSlice> usable;
  int skipped = 0;
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    auto& g = groups[gi];
    const auto [lo, hi] = std::minmax_element(g.scores.begin(), g.scores.end());
    if (g.scores.size() < 2 || *lo == *hi) {
      std::cerr << "warning: skipping degenerate ranking group " << group_ids[gi]
                << "\n";
      ++skipped;
      continue;
    }
    g.relevance = group_relevance(g.scores);
    usable.push_back(std::move(g));
  }
  if (usable.empty()) throw ConfigError("ranking data has no usable groups");

  std::vector<int> train_rows;
  for (const auto& g : usable) train_rows.insert(train_rows.end(), g.rows.begin(), g.rows.end());

  RankerModel model;
  model.num_features = num_feat;
  model.learning_rate = cfg.learning_rate;

  std::vector<double> preds(ds.size(), 0.0);
  auto mean_train_ndcg = [&]() {
    double acc = 0.0;
    for (const auto& g : usable) {
      std::vector<double> gp(g.rows.size());
      for (std::size_t i = 0; i < g.rows.size(); ++i) gp[i] = preds[g.rows[i]];
      acc += ndcg_at_k(g.scores, argsort_desc(gp), static_cast<int>(g.rows.size()));
    }
    return acc / static_cast<double>(usable.size());
  };

  if (report) {
    report->train_ndcg.clear();
    report->groups_used = static_cast<int>(usable.size());
    report->groups_skipped = skipped;
    report->train_ndcg.push_back(mean_train_ndcg());
  }

  for (int round = 0; round < cfg.rounds; ++round) {
    std::vector<double> response(ds.size(), 0.0);
    for (const auto& g : usable) {
      std::vector<double> gp(g.rows.size());
      for (std::size_t i = 0; i < g.rows.size(); ++i) gp[i] = preds[g.rows[i]];
      const auto rho = lambdarank_responses(g.relevance, gp);
      for (std::size_t i = 0; i < g.rows.size(); ++i) response[g.rows[i]] = rho[i];
    }
    TreeBuilder builder(features, response, cfg.max_depth);
    auto tree = builder.build(train_rows);
    for (int r : train_rows)
      preds[r] += cfg.learning_rate * tree.predict(features[r]);
    model.trees.push_back(std::move(tree));
    if (report) report->train_ndcg.push_back(mean_train_ndcg());
  }
  return model;
}

std::vector<std::string> recommend_ptem(const RankerModel& model,
                                        const std::vector<double>& target_meta,
                                        const std::vector<SourceMeta>& sources) {
  if (sources.empty()) throw ConfigError("no candidate sources to rank");
  std::vector<std::pair<double, std::string>> scored;
  scored.reserve(sources.size());
  for (const auto& s : sources)
    scored.emplace_back(model.predict(rank_features(target_meta, s.meta)), s.id);
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::string> ids;
  ids.reserve(scored.size());
  for (const auto& [score, id] : scored) ids.push_back(id);
  return ids;
}

RankingDataset build_ranking_dataset(
    const std::vector<SourceMeta>& sources, int num_seeds,
    const std::function<std::vector<double>(int target, int source, int seed)>&
        best_trace) {
  const int S = static_cast<int>(sources.size());
  if (S < 3) throw ConfigError("ranking data needs at least three sources");
  if (num_seeds < 1) throw ConfigError("ranking data needs at least one seed");
  RankingDataset ds;
  for (int tau = 0; tau < S; ++tau) {
    std::vector<RankingRow> rows;
    for (int s = 0; s < S; ++s) {
      if (s == tau) continue;
      try {
        std::vector<std::vector<double>> traces;
        traces.reserve(num_seeds);
        for (int seed = 0; seed < num_seeds; ++seed)
          traces.push_back(best_trace(tau, s, seed));
        RankingRow row;
        row.group = tau;
        row.target_id = sources[tau].id;
        row.source_id = sources[s].id;
        row.score = score_tau(traces);
        row.target_meta = sources[tau].meta;
        row.source_meta = sources[s].meta;
        rows.push_back(std::move(row));
      } catch (const std::exception& e) {
        std::cerr << "warning: scoring pseudo target " << sources[tau].id
                  << " with source " << sources[s].id << " failed: " << e.what()
                  << "\n";
      }
    }
    if (rows.size() < 2) {
      std::cerr << "warning: dropping pseudo target " << sources[tau].id
                << ": fewer than two scored sources\n";
      continue;
    }
    for (auto& row : rows) ds.push_back(std::move(row));
  }
  return ds;
}

std::string ranking_dataset_to_tsv(const RankingDataset& ds) {
  if (ds.empty()) throw ConfigError("cannot serialize an empty ranking dataset");
  const std::size_t tn = ds[0].target_meta.size();
  const std::size_t sn = ds[0].source_meta.size();
  std::ostringstream out;
  out << "group\ttarget_id\tsource_id\tscore";
  for (std::size_t i = 0; i < tn; ++i) out << "\ttmeta_" << i;
  for (std::size_t i = 0; i < sn; ++i) out << "\tsmeta_" << i;
  out << "\n";
  for (const auto& row : ds) {
    if (row.target_meta.size() != tn || row.source_meta.size() != sn)
      throw ConfigError("meta-feature lengths differ across rows");
    if (row.target_id.find_first_of("\t\n") != std::string::npos ||
        row.source_id.find_first_of("\t\n") != std::string::npos)
      throw ConfigError("ids must not contain tabs or newlines");
    out << row.group << '\t' << row.target_id << '\t' << row.source_id << '\t'
        << format_double(row.score);
    for (double v : row.target_meta) out << '\t' << format_double(v);
    for (double v : row.source_meta) out << '\t' << format_double(v);
    out << "\n";
  }
  return out.str();
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t at = 0;
  while (true) {
    const auto tab = line.find('\t', at);
    if (tab == std::string::npos) {
      cells.push_back(line.substr(at));
      return cells;
    }
    cells.push_back(line.substr(at, tab - at));
    at = tab + 1;
  }
}

double parse_double(const std::string& cell) {
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end == cell.c_str() || *end != '\0')
    throw ConfigError("ranking table cell is not a number: " + cell);
  return v;
}

}  // namespace

RankingDataset ranking_dataset_from_tsv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("ranking table is empty");
  const auto header = split_tabs(line);
  if (header.size() < 6 || header[0] != "group" || header[1] != "target_id" ||
      header[2] != "source_id" || header[3] != "score")
    throw ConfigError("not a ranking table");
  std::size_t tn = 0;
  std::size_t at = 4;
  while (at < header.size() && header[at] == "tmeta_" + std::to_string(tn)) {
    ++tn;
    ++at;
  }
  std::size_t sn = 0;
  while (at < header.size() && header[at] == "smeta_" + std::to_string(sn)) {
    ++sn;
    ++at;
  }
  if (at != header.size() || tn == 0 || sn == 0)
    throw ConfigError("ranking table header is malformed");

  RankingDataset ds;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_tabs(line);
    if (cells.size() != 4 + tn + sn)
      throw ConfigError("ranking table row has wrong column count");
    RankingRow row;
    row.group = static_cast<int>(parse_double(cells[0]));
    row.target_id = cells[1];
    row.source_id = cells[2];
    row.score = parse_double(cells[3]);
    for (std::size_t i = 0; i < tn; ++i)
      row.target_meta.push_back(parse_double(cells[4 + i]));
    for (std::size_t i = 0; i < sn; ++i)
      row.source_meta.push_back(parse_double(cells[4 + tn + i]));
    ds.push_back(std::move(row));
  }
  if (ds.empty()) throw ConfigError("ranking table has no rows");
  return ds;
}

void save_ranking_dataset(const RankingDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << ranking_dataset_to_tsv(ds);
}

RankingDataset load_ranking_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return ranking_dataset_from_tsv(buf.str());
}

std::string ranker_to_text(const RankerModel& model) {
  std::ostringstream out;
  out << "cashbo-ranker v1\n";
  out << "features " << model.num_features << "\n";
  out << "lr " << to_hex16(model.learning_rate) << "\n";
  out << "trees " << model.trees.size() << "\n";
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    const auto& tree = model.trees[t];
    out << "tree " << t << " nodes " << tree.nodes.size() << "\n";
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      const auto& nd = tree.nodes[i];
      if (nd.feature < 0)
        out << "node " << i << " leaf " << to_hex16(nd.value) << "\n";
      else
        out << "node " << i << " split " << nd.feature << " "
            << to_hex16(nd.threshold) << " " << nd.left << " " << nd.right
            << "\n";
    }
  }
  const std::string body = out.str();
  return body + "check " + to_hex16_u64(fnv1a64(body)) + "\n";
}

RankerModel ranker_from_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  auto next_line = [&](const char* what) {
    if (!std::getline(in, line)) throw ConfigError(std::string("ranker file truncated: ") + what);
    return line;
  };

  if (next_line("header") != "cashbo-ranker v1") {
    if (line.rfind("cashbo-ranker ", 0) == 0)
      throw ConfigError("unsupported ranker version");
    throw ConfigError("not a ranker file");
  }
  std::string checked = line + "\n";

  RankerModel model;
  int num_trees = 0;
  {
    if (std::sscanf(next_line("features").c_str(), "features %d", &model.num_features) != 1 ||
        model.num_features < 1)
      throw ConfigError("ranker file corrupt: features");
    checked += line + "\n";
    char hex[32];
    if (std::sscanf(next_line("lr").c_str(), "lr %31s", hex) != 1)
      throw ConfigError("ranker file corrupt: lr");
    model.learning_rate = from_hex16(hex);
    checked += line + "\n";
    if (std::sscanf(next_line("trees").c_str(), "trees %d", &num_trees) != 1 || num_trees < 0)
      throw ConfigError("ranker file corrupt: trees");
    checked += line + "\n";
  }

  for (int t = 0; t < num_trees; ++t) {
    int idx = -1, count = -1;
    if (std::sscanf(next_line("tree").c_str(), "tree %d nodes %d", &idx, &count) != 2 ||
        idx != t || count < 1)
      throw ConfigError("ranker file corrupt: tree header");
    checked += line + "\n";
    RegressionTree tree;
    tree.nodes.resize(count);
    for (int i = 0; i < count; ++i) {
      next_line("node");
      checked += line + "\n";
      int ni = -1;
      char hex[32];
      TreeNode nd;
      if (std::sscanf(line.c_str(), "node %d leaf %31s", &ni, hex) == 2 && ni == i) {
        nd.value = from_hex16(hex);
      } else if (std::sscanf(line.c_str(), "node %d split %d %31s %d %d", &ni,
                             &nd.feature, hex, &nd.left, &nd.right) == 5 &&
                 ni == i) {
        nd.threshold = from_hex16(hex);
        if (nd.feature < 0 || nd.feature >= model.num_features || nd.left < 0 ||
            nd.left >= count || nd.right < 0 || nd.right >= count)
          throw ConfigError("ranker file corrupt: node links");
      } else {
        throw ConfigError("ranker file corrupt: node");
      }
      tree.nodes[i] = nd;
    }
    model.trees.push_back(std::move(tree));
  }

  char hex[32];
  if (std::sscanf(next_line("check").c_str(), "check %31s", hex) != 1)
    throw ConfigError("ranker file corrupt: check");
  if (from_hex16_u64(hex) != fnv1a64(checked))
    throw ConfigError("ranker file checksum mismatch");
  return model;
}

void save_ranker(const RankerModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << ranker_to_text(model);
}

RankerModel load_ranker(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return ranker_from_text(buf.str());
}

}  // namespace cashbo
