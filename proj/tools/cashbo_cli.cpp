#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cashbo/bench.hpp"
#include "cashbo/driver.hpp"
#include "cashbo/error.hpp"
#include "cashbo/pretrain.hpp"
#include "cashbo/ptem.hpp"
#include "cashbo/rank.hpp"

using namespace cashbo;
using nlohmann::json;

namespace {

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw ConfigError("config '" + path + "' is not a structured-text object");
  return j;
}

// Stable sub-seed derivation: depends only on the inputs, not on call order.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0) {
  return Rng(base).fork(a).fork(b).fork(c).seed();
}

SearchSpace space_from_config(const json& cfg, std::optional<SyntheticSuite>& suite) {
  if (cfg.contains("suite")) {
    suite = load_suite(cfg.at("suite").get<std::string>());
    return suite->space;
  }
  if (cfg.contains("space")) return SearchSpace::load(cfg.at("space").get<std::string>());
  throw ConfigError("config needs a 'space' or 'suite' entry");
}

struct PoolEntry {
  std::string id;
  std::string ptem_path;
  std::string suite_path;
};

std::vector<PoolEntry> pool_from_config(const json& cfg) {
  std::vector<PoolEntry> pool;
  if (!cfg.contains("ptem_pool")) return pool;
  for (const auto& e : cfg.at("ptem_pool")) {
    PoolEntry entry;
    entry.id = e.at("id").get<std::string>();
    entry.ptem_path = e.at("ptem").get<std::string>();
    if (e.contains("suite")) entry.suite_path = e.at("suite").get<std::string>();
    pool.push_back(std::move(entry));
  }
  return pool;
}

int cmd_bench_gen(const std::string& config_path, std::uint64_t seed, std::string out) {
  const json cfg = load_config(config_path);
  const auto gen_one = [&](const json& spec, const std::string& path) {
    const double descriptor = spec.value("descriptor", 0.5);
    const std::uint64_t family = spec.value("family_seed", seed);
    const std::string id = spec.value("id", std::string("suite"));
    const SyntheticSuite suite = make_synthetic_suite(descriptor, family, id);
    save_suite(suite, path);
    std::cout << "wrote " << path << " (id " << id << ", descriptor " << descriptor
              << ", family seed " << family << ")\n";
  };
  if (cfg.contains("suites")) {
    if (out.empty()) out = ".";
    for (const auto& spec : cfg.at("suites"))
      gen_one(spec, out + "/" + spec.at("id").get<std::string>() + ".json");
  } else {
    if (out.empty()) out = cfg.value("id", std::string("suite")) + ".json";
    gen_one(cfg, out);
  }
  return 0;
}

int cmd_pretrain(const std::string& config_path, std::uint64_t seed, std::string out) {
  const json cfg = load_config(config_path);
  std::optional<SyntheticSuite> suite;
  const SearchSpace space = space_from_config(cfg, suite);

  ObservationSet obs;
  if (cfg.contains("observations")) {
    obs = load_observations(cfg.at("observations").get<std::string>());
  } else if (suite.has_value()) {
    const int per_algo = cfg.value("per_algo", 10);
    Rng rng(cfg.value("sample_seed", derive_seed(seed, 1)));
    obs = sample_source_observations(*suite, per_algo, rng);
  } else {
    throw ConfigError("pretrain needs 'observations' or a 'suite' to sample from");
  }

  PretrainConfig pc;
  pc.beta = cfg.value("beta", pc.beta);
  pc.epochs = cfg.value("epochs", pc.epochs);
  pc.inner_steps = cfg.value("inner_steps", pc.inner_steps);
  pc.lr_embed = cfg.value("lr_embed", pc.lr_embed);
  pc.lr_classifier = cfg.value("lr_classifier", pc.lr_classifier);
  pc.latent_dim = cfg.value("latent_dim", pc.latent_dim);
  pc.classifier_hidden = cfg.value("classifier_hidden", pc.classifier_hidden);
  pc.seed = seed;

  PretrainReport report;
  PtemBundle bundle = train_ptem(obs, space, pc, &report);
  bundle.source_id =
      cfg.value("source_id", suite.has_value() ? suite->id : std::string("source"));

  if (out.empty()) out = "ptem.txt";
  ptem_save(bundle, out);
  std::cout << "wrote " << out << " (source " << bundle.source_id << ", objective "
            << report.initial_objective << " -> " << report.final_objective
            << (report.degenerate ? ", degenerate scores" : "") << ")\n";
  return 0;
}

int cmd_rank_data(const std::string& config_path, std::uint64_t seed, int iters_flag,
                  std::string out) {
  const json cfg = load_config(config_path);
  if (!cfg.contains("sources")) throw ConfigError("rank-data needs a 'sources' list");

  std::vector<SyntheticSuite> suites;
  std::vector<PtemBundle> bundles;
  std::vector<SourceMeta> metas;
  for (const auto& e : cfg.at("sources")) {
    const SyntheticSuite suite = load_suite(e.at("suite").get<std::string>());
    bundles.push_back(ptem_load(e.at("ptem").get<std::string>(), suite.space));
    metas.push_back({e.value("id", suite.id), suite.meta_features()});
    suites.push_back(suite);
  }

  const int num_seeds = cfg.value("num_seeds", 3);
  const int iterations = iters_flag >= 0 ? iters_flag : cfg.value("iterations", 20);

  RunConfig base;
  base.arm = Arm::proposed;
  base.iterations = iterations;
  base.init_per_algo = cfg.value("init_per_algo", 2);
  base.alpha = cfg.value("alpha", base.alpha);
  base.fit_steps = cfg.value("fit_steps", 20);

  const auto best_trace = [&](int target, int source, int k) {
    RunConfig rc = base;
    rc.space = suites[target].space;
    rc.ptem = bundles[source];
    rc.ptem_source = metas[source].id;
    rc.latent_dim = bundles[source].latent_dim();
    // Runs for one target share seeds across sources so curves pair up.
    rc.seed = derive_seed(seed, 1, target, k);
    const Objective obj =
        make_synthetic_objective(suites[target], derive_seed(seed, 2, target, k));
    return run_bo(rc, obj).best_trace();
  };

  const RankingDataset ds = build_ranking_dataset(metas, num_seeds, best_trace);
  if (out.empty()) out = "ranking.tsv";
  save_ranking_dataset(ds, out);
  std::cout << "wrote " << out << " (" << ds.size() << " rows)\n";
  return 0;
}

int cmd_rank_train(const std::string& config_path, std::string out) {
  const json cfg = load_config(config_path);
  if (!cfg.contains("data")) throw ConfigError("rank-train needs a 'data' entry");
  const RankingDataset ds = load_ranking_dataset(cfg.at("data").get<std::string>());

  RankerConfig rc;
  rc.rounds = cfg.value("rounds", rc.rounds);
  rc.max_depth = cfg.value("max_depth", rc.max_depth);
  rc.learning_rate = cfg.value("learning_rate", rc.learning_rate);

  RankerReport report;
  const RankerModel model = train_ranker(ds, rc, &report);
  if (out.empty()) out = "ranker.txt";
  save_ranker(model, out);
  std::cout << "wrote " << out << " (train ndcg " << report.train_ndcg.front() << " -> "
            << report.train_ndcg.back() << ", " << report.groups_used << " groups used, "
            << report.groups_skipped << " skipped)\n";
  return 0;
}

std::optional<PtemBundle> resolve_ptem(const std::string& choice, const json& cfg,
                                       const SearchSpace& space,
                                       const std::optional<SyntheticSuite>& suite,
                                       std::uint64_t seed, std::string& source_label) {
  source_label = choice;
  if (choice == "none") return std::nullopt;
  if (choice == "random") {
    const auto pool = pool_from_config(cfg);
    if (pool.empty()) throw ConfigError("--ptem random needs a 'ptem_pool' in the config");
    Rng rng(derive_seed(seed, 99));
    const auto& pick = pool[static_cast<std::size_t>(rng.uniform_int(
        0, static_cast<long long>(pool.size()) - 1))];
    source_label = "random:" + pick.id;
    return ptem_load(pick.ptem_path, space);
  }
  if (choice == "auto") {
    const auto pool = pool_from_config(cfg);
    if (pool.empty()) throw ConfigError("--ptem auto needs a 'ptem_pool' in the config");
    if (!cfg.contains("ranker")) throw ConfigError("--ptem auto needs a 'ranker' in the config");
    if (!suite.has_value())
      throw ConfigError("--ptem auto needs a synthetic 'suite' for target meta-features");
    const RankerModel ranker = load_ranker(cfg.at("ranker").get<std::string>());
    std::vector<SourceMeta> sources;
    for (const auto& entry : pool) {
      if (entry.suite_path.empty())
        throw ConfigError("ptem_pool entry '" + entry.id + "' needs a 'suite' for --ptem auto");
      sources.push_back({entry.id, load_suite(entry.suite_path).meta_features()});
    }
    const auto order = recommend_ptem(ranker, suite->meta_features(), sources);
    for (const auto& entry : pool)
      if (entry.id == order.front()) {
        source_label = "auto:" + entry.id;
        return ptem_load(entry.ptem_path, space);
      }
    throw ConfigError("recommended ptem '" + order.front() + "' not in the pool");
  }
  return ptem_load(choice, space);
}

int cmd_optimize(const std::string& config_path, std::uint64_t seed, const std::string& arm_flag,
                 const std::string& ptem_flag, int iters_flag, std::string out) {
  const json cfg = load_config(config_path);
  std::optional<SyntheticSuite> suite;
  const SearchSpace space = space_from_config(cfg, suite);

  RunConfig rc;
  rc.space = space;
  rc.arm = arm_from_name(!arm_flag.empty() ? arm_flag
                                           : cfg.value("arm", std::string("proposed")));
  rc.iterations = iters_flag >= 0 ? iters_flag : cfg.value("iterations", 50);
  rc.init_per_algo = cfg.value("init_per_algo", rc.init_per_algo);
  rc.alpha = cfg.value("alpha", rc.alpha);
  rc.beta = cfg.value("beta", rc.beta);
  rc.fit_steps = cfg.value("fit_steps", rc.fit_steps);
  rc.mask = mask_mode_from_name(cfg.value("mask", std::string("last_layer")));
  rc.fail_fast = cfg.value("fail_fast", false);
  rc.seed = seed;

  const std::string choice = !ptem_flag.empty() ? ptem_flag
                                                : cfg.value("ptem", std::string("none"));
  rc.ptem = resolve_ptem(choice, cfg, space, suite, seed, rc.ptem_source);
  if (rc.ptem.has_value()) rc.latent_dim = rc.ptem->latent_dim();
  else rc.latent_dim = cfg.value("latent_dim", rc.latent_dim);

  Objective objective;
  const json obj_cfg = cfg.value("objective", json{{"kind", "synthetic"}});
  const std::string kind = obj_cfg.value("kind", std::string("synthetic"));
  if (kind == "synthetic") {
    if (!suite.has_value()) throw ConfigError("a synthetic objective needs a 'suite'");
    objective = make_synthetic_objective(
        *suite, obj_cfg.value("noise_seed", derive_seed(seed, 100)));
  } else if (kind == "command") {
    std::vector<std::string> command;
    for (const auto& part : obj_cfg.at("command")) command.push_back(part.get<std::string>());
    auto evaluator = std::make_shared<ExternalEvaluator>(command, obj_cfg.value("timeout", 60.0));
    objective = [space, evaluator](const HpVector& x) { return evaluator->evaluate(space, x); };
  } else {
    throw ConfigError("unknown objective kind '" + kind + "'");
  }

  const RunLog log = run_bo(rc, objective);
  if (out.empty()) out = "runlog.jsonl";
  save_run_log(log, out);

  std::cout << "wrote " << out << "\n";
  std::cout << "best " << log.result.y_best << " with "
            << space.algorithms[log.result.algo].name << " (";
  for (std::size_t j = 0; j < log.result.raw.size(); ++j) {
    if (j) std::cout << ", ";
    std::cout << space.algorithms[log.result.algo].variables[j].name << "="
              << log.result.raw[j];
  }
  std::cout << ")\n";
  return 0;
}

int cmd_report(const std::string& config_path, std::vector<std::string> log_paths,
               std::string out) {
  const json cfg = load_config(config_path);
  if (cfg.contains("logs"))
    for (const auto& p : cfg.at("logs")) log_paths.push_back(p.get<std::string>());
  if (log_paths.empty()) throw ConfigError("report needs run logs (config 'logs' or arguments)");

  std::vector<RunLog> logs;
  for (const auto& path : log_paths) logs.push_back(load_run_log(path));
  const Report report = make_report(logs);

  if (out.empty()) out = "report";
  {
    std::ofstream ranks(out + ".ranks.tsv", std::ios::binary);
    if (!ranks) throw ConfigError("cannot write '" + out + ".ranks.tsv'");
    ranks << report.ranks_tsv();
    std::ofstream curves(out + ".curves.tsv", std::ios::binary);
    if (!curves) throw ConfigError("cannot write '" + out + ".curves.tsv'");
    curves << report.curves_tsv();
  }
  std::cout << "wrote " << out << ".ranks.tsv and " << out << ".curves.tsv\n";
  const int last = report.iterations - 1;
  for (const auto& arm : report.arms)
    std::cout << arm.arm << ": final mean rank " << arm.rank_mean[last] << " (se "
              << arm.rank_se[last] << "), final mean best " << arm.ybest_mean[last] << " (se "
              << arm.ybest_se[last] << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Combined algorithm selection and hyper-parameter tuning with a shared-latent-space multi-task surrogate"};
  app.fallthrough();  // shared options may follow the subcommand name
  app.require_subcommand(1);

  std::string config_path, out_path, arm_flag, ptem_flag;
  std::uint64_t seed = 0;
  int iters = -1;

  app.add_option("--config", config_path, "Structured-text config file")->capture_default_str();
  app.add_option("--seed", seed, "Run seed")->capture_default_str();
  app.add_option("--out", out_path, "Output path (subcommand-specific default)");
  app.add_option("--iters", iters, "Override the iteration count");

  auto* pretrain = app.add_subcommand("pretrain", "Train an embedding bundle on source observations");
  auto* rank_data = app.add_subcommand("rank-data", "Build a ranking dataset from cross-task runs");
  auto* rank_train = app.add_subcommand("rank-train", "Train the bundle recommender");
  auto* optimize = app.add_subcommand("optimize", "Run one optimization");
  optimize->add_option("--arm", arm_flag,
                       "proposed | proposed-no-pretrain | proposed-random-ptem | independent-gp | "
                       "random-search");
  optimize->add_option("--ptem", ptem_flag, "none | random | auto | <bundle file>");
  auto* report = app.add_subcommand("report", "Aggregate run logs into rank and curve tables");
  std::vector<std::string> report_logs;
  report->add_option("logs", report_logs, "Run log files");
  auto* bench = app.add_subcommand("bench", "Synthetic benchmark utilities");
  auto* bench_gen = bench->add_subcommand("gen", "Generate synthetic suites");
  bench->require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (pretrain->parsed()) return cmd_pretrain(config_path, seed, out_path);
    if (rank_data->parsed()) return cmd_rank_data(config_path, seed, iters, out_path);
    if (rank_train->parsed()) return cmd_rank_train(config_path, out_path);
    if (optimize->parsed()) return cmd_optimize(config_path, seed, arm_flag, ptem_flag, iters, out_path);
    if (report->parsed()) return cmd_report(config_path, report_logs, out_path);
    if (bench->parsed() && bench_gen->parsed()) return cmd_bench_gen(config_path, seed, out_path);
    std::cerr << "error: no subcommand\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const EvaluatorError& e) {
    std::cerr << "evaluator error: " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
