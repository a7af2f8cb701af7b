#include "cashbo/driver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cashbo/acquire.hpp"
#include "cashbo/error.hpp"
#include "cashbo/textio.hpp"

namespace cashbo {

namespace {

using nlohmann::ordered_json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << text;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string cur;
  for (char c : text) {
    if (c == '\n') {
      lines.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) lines.push_back(cur);
  return lines;
}

const ordered_json& require_field(const ordered_json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError("missing field '" + std::string(key) + "'");
  return *it;
}

std::vector<double> number_array(const ordered_json& j, const char* key) {
  const auto& a = require_field(j, key);
  if (!a.is_array()) throw ConfigError("field '" + std::string(key) + "' is not an array");
  std::vector<double> out;
  out.reserve(a.size());
  for (const auto& v : a) {
    if (!v.is_number()) throw ConfigError("non-numeric entry in '" + std::string(key) + "'");
    out.push_back(v.get<double>());
  }
  return out;
}

ordered_json record_to_json(const RunRecord& rec) {
  ordered_json j;
  j["record"] = rec.init ? "init" : "iter";
  if (!rec.init) j["t"] = rec.t;
  j["algo"] = rec.algo;
  j["unit"] = rec.unit;
  j["raw"] = rec.raw;
  j["ok"] = rec.ok;
  if (rec.ok)
    j["y"] = rec.y;
  else
    j["error"] = rec.error;
  j["y_best"] = rec.y_best;
  if (!rec.init) {
    j["acq"] = rec.acq;
    j["kernel"] = rec.kernel;
  }
  return j;
}

RunRecord record_from_json(const ordered_json& j, bool init) {
  RunRecord rec;
  rec.init = init;
  if (!init) rec.t = require_field(j, "t").get<int>();
  rec.algo = require_field(j, "algo").get<int>();
  rec.unit = number_array(j, "unit");
  rec.raw = number_array(j, "raw");
  rec.ok = require_field(j, "ok").get<bool>();
  if (rec.ok)
    rec.y = require_field(j, "y").get<double>();
  else
    rec.error = require_field(j, "error").get<std::string>();
  rec.y_best = require_field(j, "y_best").get<double>();
  if (!init) {
    rec.acq = require_field(j, "acq").get<double>();
    rec.kernel = number_array(j, "kernel");
  }
  return rec;
}

std::string config_json_line(const RunConfig& cfg) {
  ordered_json j;
  j["record"] = "config";
  j["version"] = 1;
  j["arm"] = arm_name(cfg.arm);
  j["seed"] = cfg.seed;
  j["iterations"] = cfg.iterations;
  j["init_per_algo"] = cfg.init_per_algo;
  j["alpha"] = cfg.alpha;
  j["beta"] = cfg.beta;
  j["latent_dim"] = cfg.latent_dim;
  j["fit_steps"] = cfg.fit_steps;
  j["mask"] = mask_mode_name(cfg.mask);
  j["fail_fast"] = cfg.fail_fast;
  j["ptem_source"] = cfg.ptem_source;
  j["space_fingerprint"] = to_hex16_u64(cfg.space.fingerprint());
  return j.dump();
}

// Mean with sample standard error; one sample has zero SE by convention.
void mean_se(const std::vector<double>& xs, double& mean, double& se) {
  const int n = static_cast<int>(xs.size());
  double s = 0.0;
  for (double x : xs) s += x;
  mean = s / n;
  if (n < 2) {
    se = 0.0;
    return;
  }
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  se = std::sqrt(ss / (n - 1)) / std::sqrt(static_cast<double>(n));
}

std::string format_g17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

Arm arm_from_name(const std::string& name) {
  if (name == "proposed") return Arm::proposed;
  if (name == "proposed-no-pretrain") return Arm::proposed_no_pretrain;
  if (name == "proposed-random-ptem") return Arm::proposed_random_ptem;
  if (name == "independent-gp") return Arm::independent_gp;
  if (name == "random-search") return Arm::random_search;
  throw ConfigError("unknown arm '" + name + "'");
}

std::string arm_name(Arm arm) {
  switch (arm) {
    case Arm::proposed: return "proposed";
    case Arm::proposed_no_pretrain: return "proposed-no-pretrain";
    case Arm::proposed_random_ptem: return "proposed-random-ptem";
    case Arm::independent_gp: return "independent-gp";
    case Arm::random_search: return "random-search";
  }
  throw ConfigError("unknown arm value");
}

void RunConfig::validate() const {
  space.validate();
  if (iterations < 0) throw ConfigError("iterations must be >= 0");
  if (init_per_algo < 1) throw ConfigError("init_per_algo must be >= 1");
  if (latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
  if (fit_steps < 1) throw ConfigError("fit_steps must be >= 1");
  if (!(alpha >= 0.0) || !(beta >= 0.0)) throw ConfigError("alpha and beta must be >= 0");
  const bool may_carry_ptem = arm == Arm::proposed || arm == Arm::proposed_random_ptem;
  if (ptem.has_value() && !may_carry_ptem)
    throw ConfigError("arm '" + arm_name(arm) + "' does not take a ptem bundle");
  if (arm == Arm::proposed_random_ptem && !ptem.has_value())
    throw ConfigError("arm 'proposed-random-ptem' needs a ptem bundle");
  if (ptem.has_value()) {
    ptem->validate_against(space);
    if (ptem->space_fingerprint != space.fingerprint())
      throw ConfigError("ptem fingerprint does not match the search space");
    if (ptem->latent_dim() != latent_dim)
      throw ConfigError("latent_dim disagrees with the ptem bundle");
  }
}

std::vector<double> RunLog::best_trace() const {
  std::vector<double> trace;
  trace.reserve(iterations);
  for (const auto& rec : records)
    if (!rec.init) trace.push_back(rec.y_best);
  if (static_cast<int>(trace.size()) != iterations)
    throw ConfigError("run log is missing iteration records");
  return trace;
}

std::string RunLog::to_jsonl() const {
  std::string out = config_line;
  out.push_back('\n');
  for (const auto& rec : records) {
    out += record_to_json(rec).dump();
    out.push_back('\n');
  }
  ordered_json j;
  j["record"] = "result";
  j["algo"] = result.algo;
  j["unit"] = result.unit;
  j["raw"] = result.raw;
  j["y_best"] = result.y_best;
  out += j.dump();
  out.push_back('\n');
  return out;
}

RunLog RunLog::from_jsonl(const std::string& text) try {
  const auto lines = split_lines(text);
  if (lines.empty()) throw ConfigError("not a run log: empty input");
  const auto head = ordered_json::parse(lines[0], nullptr, false);
  if (head.is_discarded() || !head.is_object() || head.value("record", "") != "config")
    throw ConfigError("not a run log");
  if (require_field(head, "version").get<int>() != 1)
    throw ConfigError("unsupported run log version");

  RunLog log;
  log.config_line = lines[0];
  log.arm = require_field(head, "arm").get<std::string>();
  log.seed = require_field(head, "seed").get<std::uint64_t>();
  log.iterations = require_field(head, "iterations").get<int>();
  log.init_per_algo = require_field(head, "init_per_algo").get<int>();

  bool have_result = false;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto j = ordered_json::parse(lines[i], nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw ConfigError("run log corrupt: unparseable line " + std::to_string(i + 1));
    const std::string kind = require_field(j, "record").get<std::string>();
    if (have_result) throw ConfigError("run log corrupt: records after result");
    if (kind == "init") {
      log.records.push_back(record_from_json(j, true));
    } else if (kind == "iter") {
      log.records.push_back(record_from_json(j, false));
    } else if (kind == "result") {
      log.result.algo = require_field(j, "algo").get<int>();
      log.result.unit = number_array(j, "unit");
      log.result.raw = number_array(j, "raw");
      log.result.y_best = require_field(j, "y_best").get<double>();
      have_result = true;
    } else {
      throw ConfigError("run log corrupt: unknown record '" + kind + "'");
    }
  }
  if (!have_result) throw ConfigError("run log truncated: missing result record");
  return log;
} catch (const nlohmann::json::exception& e) {
  throw ConfigError(std::string("run log corrupt: ") + e.what());
}

void save_run_log(const RunLog& log, const std::string& path) { write_file(path, log.to_jsonl()); }

RunLog load_run_log(const std::string& path) { return RunLog::from_jsonl(read_file(path)); }

RunLog run_bo(const RunConfig& cfg, const Objective& objective) {
  cfg.validate();
  const int M = cfg.space.num_algorithms();

  Rng root(cfg.seed);
  Rng init_rng = root.fork(1);
  Rng model_rng = root.fork(2);
  Rng acq_rng = root.fork(3);
  Rng fallback_rng = root.fork(4);

  RunLog log;
  log.arm = arm_name(cfg.arm);
  log.seed = cfg.seed;
  log.iterations = cfg.iterations;
  log.init_per_algo = cfg.init_per_algo;
  log.config_line = config_json_line(cfg);

  // The no-pretrain arm is the proposed loop with the transfer machinery
  // stripped: fresh random embeddings, no regularizer anchor, all parameters
  // trainable.
  double eff_alpha = cfg.alpha;
  MaskMode eff_mask = cfg.mask;
  const PtemBundle* pre = cfg.ptem.has_value() ? &*cfg.ptem : nullptr;
  if (cfg.arm == Arm::proposed_no_pretrain) {
    eff_alpha = 0.0;
    eff_mask = MaskMode::all;
    pre = nullptr;
  }

  const bool multitask = cfg.arm == Arm::proposed || cfg.arm == Arm::proposed_no_pretrain ||
                         cfg.arm == Arm::proposed_random_ptem;

  std::optional<Surrogate> joint;
  if (multitask) {
    std::vector<Mlp> models =
        pre ? pre->models : make_random_ptem(cfg.space, cfg.latent_dim, model_rng).models;
    joint.emplace(std::move(models), 0.0, true);
  }

  // One single-task GP per algorithm on unit coordinates, warm-started
  // across iterations like the joint surrogate.
  std::vector<Surrogate> singles;
  std::vector<SearchSpace> subspaces;
  if (cfg.arm == Arm::independent_gp) {
    for (int m = 0; m < M; ++m) {
      SearchSpace sub;
      sub.algorithms.push_back(cfg.space.algorithms[m]);
      subspaces.push_back(std::move(sub));
      singles.emplace_back(std::vector<Mlp>{Mlp::identity(cfg.space.dim(m))}, 0.0, true);
    }
  }

  ObservationSet obs;
  bool has_success = false;
  double incumbent = 0.0;  // scores live in [0,1]; the empty incumbent floors at 0

  const auto evaluate = [&](const HpVector& x, bool init, int t, double acq,
                            std::vector<double> kernel) {
    RunRecord rec;
    rec.init = init;
    rec.t = t;
    rec.algo = x.algo;
    rec.unit = x.values;
    rec.raw = unscale_from_unit(x.values, cfg.space.algorithms[x.algo]);
    try {
      const double y = objective(x);
      if (!std::isfinite(y)) throw EvaluatorError("objective returned a non-finite value");
      rec.ok = true;
      rec.y = y;
      obs.push_back({x, y});
      if (!has_success || y > incumbent) incumbent = y;
      has_success = true;
    } catch (const std::exception& e) {
      if (cfg.fail_fast) throw;
      rec.ok = false;
      rec.error = e.what();
    }
    rec.y_best = has_success ? incumbent : 0.0;
    rec.acq = acq;
    rec.kernel = std::move(kernel);
    log.records.push_back(std::move(rec));
  };

  for (int m = 0; m < M; ++m)
    for (int i = 0; i < cfg.init_per_algo; ++i)
      evaluate(sample_uniform(cfg.space, m, init_rng), true, 0, 0.0, {});

  FitOptions fit_opt;
  fit_opt.steps = cfg.fit_steps;
  fit_opt.alpha = eff_alpha;
  fit_opt.mask = eff_mask;

  const auto uniform_fallback = [&](int t) {
    const int m = static_cast<int>(fallback_rng.uniform_int(0, M - 1));
    evaluate(sample_uniform(cfg.space, m, fallback_rng), false, t, 0.0, {});
  };

  for (int t = 1; t <= cfg.iterations; ++t) {
    if (cfg.arm == Arm::random_search) {
      uniform_fallback(t);
      continue;
    }
    if (multitask) {
      if (static_cast<int>(obs.size()) < 2) {
        uniform_fallback(t);
        continue;
      }
      joint->set_prior_best(pre ? pre->y_best : incumbent);
      joint->set_data(obs);
      joint->fit(fit_opt, pre);
      const AcqResult best = maximize_acquisition(*joint, cfg.space, incumbent, acq_rng);
      evaluate(best.x, false, t, best.value, joint->params().pack());
      continue;
    }
    // independent_gp: fit every algorithm with enough points, take the best
    // expected improvement across them against the global incumbent.
    bool any = false;
    AcqResult best;
    int best_m = -1;
    std::vector<double> best_kernel;
    for (int m = 0; m < M; ++m) {
      ObservationSet local;
      for (const auto& o : obs)
        if (o.x.algo == m) local.push_back({{0, o.x.values}, o.y});
      if (static_cast<int>(local.size()) < 2) continue;
      singles[m].set_prior_best(incumbent);
      singles[m].set_data(std::move(local));
      singles[m].fit(fit_opt, nullptr);
      AcqResult r = maximize_acquisition(singles[m], subspaces[m], incumbent, acq_rng);
      if (!any || r.value > best.value) {
        any = true;
        best = std::move(r);
        best_m = m;
        best_kernel = singles[m].params().pack();
      }
    }
    if (!any) {
      uniform_fallback(t);
      continue;
    }
    best.x.algo = best_m;
    evaluate(best.x, false, t, best.value, std::move(best_kernel));
  }

  if (!has_success) throw EvaluatorError("run produced no successful evaluations");

  std::size_t arg = 0;
  for (std::size_t i = 1; i < obs.size(); ++i)
    if (obs[i].y > obs[arg].y) arg = i;
  log.result.algo = obs[arg].x.algo;
  log.result.unit = obs[arg].x.values;
  log.result.raw = unscale_from_unit(obs[arg].x.values, cfg.space.algorithms[obs[arg].x.algo]);
  log.result.y_best = obs[arg].y;
  return log;
}

Objective make_synthetic_objective(const SyntheticSuite& suite, std::uint64_t seed) {
  auto rng = std::make_shared<Rng>(seed);
  return [suite, rng](const HpVector& x) {
    if (x.algo < 0 || x.algo >= static_cast<int>(suite.tasks.size()))
      throw ConfigError("algorithm index out of range");
    return synth_eval(suite.tasks[x.algo], x, *rng);
  };
}

Report make_report(const std::vector<RunLog>& logs) {
  if (logs.empty()) throw ConfigError("no run logs to report on");
  const int T = logs.front().iterations;
  for (const auto& log : logs)
    if (log.iterations != T) throw ConfigError("run logs disagree on iteration count");
  if (T < 1) throw ConfigError("report needs at least one iteration");

  std::vector<std::string> arms;
  // arm -> seed -> trace
  std::vector<std::vector<std::pair<std::uint64_t, std::vector<double>>>> traces;
  for (const auto& log : logs) {
    std::size_t a = 0;
    while (a < arms.size() && arms[a] != log.arm) ++a;
    if (a == arms.size()) {
      arms.push_back(log.arm);
      traces.emplace_back();
    }
    for (const auto& entry : traces[a])
      if (entry.first == log.seed)
        throw ConfigError("duplicate seed " + std::to_string(log.seed) + " for arm '" + log.arm +
                          "'");
    traces[a].emplace_back(log.seed, log.best_trace());
  }

  const int A = static_cast<int>(arms.size());
  std::vector<std::uint64_t> seeds;
  for (const auto& entry : traces[0]) seeds.push_back(entry.first);
  std::sort(seeds.begin(), seeds.end());
  for (int a = 1; a < A; ++a) {
    std::vector<std::uint64_t> other;
    for (const auto& entry : traces[a]) other.push_back(entry.first);
    std::sort(other.begin(), other.end());
    if (other != seeds) throw ConfigError("arms do not share the same seeds");
  }
  const int S = static_cast<int>(seeds.size());

  // trace_of[a][s] follows the sorted seed order so arms pair up by seed.
  std::vector<std::vector<const std::vector<double>*>> trace_of(A);
  for (int a = 0; a < A; ++a) {
    trace_of[a].resize(S);
    for (const auto& entry : traces[a]) {
      const auto pos = std::lower_bound(seeds.begin(), seeds.end(), entry.first) - seeds.begin();
      trace_of[a][pos] = &entry.second;
    }
  }

  Report report;
  report.iterations = T;
  report.arms.resize(A);
  for (int a = 0; a < A; ++a) report.arms[a].arm = arms[a];

  std::vector<std::vector<double>> ranks(A), bests(A);
  for (int t = 0; t < T; ++t) {
    for (int a = 0; a < A; ++a) {
      ranks[a].clear();
      bests[a].clear();
    }
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const double va = (*trace_of[a][s])[t];
        int better = 0, tied = 0;
        for (int b = 0; b < A; ++b) {
          const double vb = (*trace_of[b][s])[t];
          if (vb > va) ++better;
          if (vb == va) ++tied;
        }
        // Competition-free average rank: ties share the mean of their span.
        ranks[a].push_back(1.0 + better + (tied - 1) / 2.0);
        bests[a].push_back(va);
      }
    }
    for (int a = 0; a < A; ++a) {
      double m, se;
      mean_se(ranks[a], m, se);
      report.arms[a].rank_mean.push_back(m);
      report.arms[a].rank_se.push_back(se);
      mean_se(bests[a], m, se);
      report.arms[a].ybest_mean.push_back(m);
      report.arms[a].ybest_se.push_back(se);
    }
  }
  return report;
}

namespace {

std::string report_tsv(const Report& report, bool ranks) {
  std::string out = "t";
  for (const auto& arm : report.arms) {
    out += "\t" + arm.arm + (ranks ? ":rank_mean" : ":ybest_mean");
    out += "\t" + arm.arm + (ranks ? ":rank_se" : ":ybest_se");
  }
  out.push_back('\n');
  for (int t = 0; t < report.iterations; ++t) {
    out += std::to_string(t + 1);
    for (const auto& arm : report.arms) {
      out += "\t" + format_g17(ranks ? arm.rank_mean[t] : arm.ybest_mean[t]);
      out += "\t" + format_g17(ranks ? arm.rank_se[t] : arm.ybest_se[t]);
    }
    out.push_back('\n');
  }
  return out;
}

}  // namespace

std::string Report::ranks_tsv() const { return report_tsv(*this, true); }

std::string Report::curves_tsv() const { return report_tsv(*this, false); }

std::string observations_to_jsonl(const ObservationSet& obs) {
  std::string out;
  for (const auto& o : obs) {
    ordered_json j;
    j["algo"] = o.x.algo;
    j["unit"] = o.x.values;
    j["y"] = o.y;
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

ObservationSet observations_from_jsonl(const std::string& text) try {
  ObservationSet obs;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto j = ordered_json::parse(lines[i], nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw ConfigError("bad observation line " + std::to_string(i + 1));
    Observation o;
    o.x.algo = require_field(j, "algo").get<int>();
    o.x.values = number_array(j, "unit");
    o.y = require_field(j, "y").get<double>();
    obs.push_back(std::move(o));
  }
  return obs;
} catch (const nlohmann::json::exception& e) {
  throw ConfigError(std::string("bad observation file: ") + e.what());
}

void save_observations(const ObservationSet& obs, const std::string& path) {
  write_file(path, observations_to_jsonl(obs));
}

ObservationSet load_observations(const std::string& path) {
  return observations_from_jsonl(read_file(path));
}

}  // namespace cashbo
