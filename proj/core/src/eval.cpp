#include "sprint/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sprint/errors.hpp"
#include "sprint/rng.hpp"

namespace sprint {

using nlohmann::json;

int pass_at_n(std::span<const uint8_t> z_row, std::span<const int> chosen, int n) {
  if (n < 1) throw usage_error("pass_at_n needs n >= 1");
  const int lh = static_cast<int>(z_row.size());
  const int prefix = std::min(n, lh);
  if (static_cast<int>(chosen.size()) < prefix) {
    throw usage_error("pass_at_n: candidate list shorter than the requested prefix");
  }
  std::set<int> seen;
  for (int j : chosen) {
    if (j < 0 || j >= lh) throw usage_error("pass_at_n: head index out of range");
    if (!seen.insert(j).second) throw usage_error("pass_at_n: duplicate head index");
  }
  for (int i = 0; i < prefix; ++i) {
    if (z_row[static_cast<std::size_t>(chosen[static_cast<std::size_t>(i)])] != 0) return 1;
  }
  return 0;
}

std::vector<int> greedy_head_ranking(const OutcomeMatrix& z_train, int pool_size) {
  const int lh = z_train.num_heads();
  const int n = z_train.num_questions();
  if (pool_size < 1 || pool_size > lh) {
    throw usage_error("pool size must be between 1 and the number of heads");
  }

  std::vector<bool> covered(static_cast<std::size_t>(n), false);
  std::vector<bool> picked(static_cast<std::size_t>(lh), false);
  std::vector<int> ranking;
  for (int t = 0; t < pool_size; ++t) {
    int best = -1;
    int best_gain = -1;
    for (int j = 0; j < lh; ++j) {
      if (picked[static_cast<std::size_t>(j)]) continue;
      int gain = 0;
      for (int i = 0; i < n; ++i) {
        if (!covered[static_cast<std::size_t>(i)] && z_train.value(i, j)) ++gain;
      }
      if (gain > best_gain) {
        best_gain = gain;
        best = j;
      }
    }
    picked[static_cast<std::size_t>(best)] = true;
    ranking.push_back(best);
    for (int i = 0; i < n; ++i) {
      if (z_train.value(i, best)) covered[static_cast<std::size_t>(i)] = true;
    }
  }
  return ranking;
}

std::vector<int> count_head_ranking(const OutcomeMatrix& z_train, int pool_size) {
  const int lh = z_train.num_heads();
  if (pool_size < 1 || pool_size > lh) {
    throw usage_error("pool size must be between 1 and the number of heads");
  }
  std::vector<int> counts(static_cast<std::size_t>(lh), 0);
  for (int i = 0; i < z_train.num_questions(); ++i) {
    for (int j = 0; j < lh; ++j) counts[static_cast<std::size_t>(j)] += z_train.value(i, j);
  }
  std::vector<int> order(static_cast<std::size_t>(lh));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (counts[static_cast<std::size_t>(a)] != counts[static_cast<std::size_t>(b)]) {
      return counts[static_cast<std::size_t>(a)] > counts[static_cast<std::size_t>(b)];
    }
    return a < b;
  });
  order.resize(static_cast<std::size_t>(pool_size));
  return order;
}

PolicySpec PolicySpec::sprint_policy(const TrainedModel& model, std::string name) {
  PolicySpec p;
  p.kind = Kind::sprint;
  p.name = std::move(name);
  p.model = &model;
  return p;
}

PolicySpec PolicySpec::random_policy(std::vector<int> pool, uint64_t seed, int replicates,
                                     std::string name) {
  if (pool.empty()) throw usage_error("random policy needs a nonempty head pool");
  if (replicates < 1) throw usage_error("random policy needs at least one replicate");
  PolicySpec p;
  p.kind = Kind::random_heads;
  p.name = std::move(name);
  p.pool = std::move(pool);
  p.seed = seed;
  p.replicates = replicates;
  return p;
}

PolicySpec PolicySpec::fixed_policy(std::vector<int> heads, std::string name) {
  if (heads.empty()) throw usage_error("fixed policy needs at least one head");
  PolicySpec p;
  p.kind = Kind::fixed;
  p.name = std::move(name);
  p.fixed_heads = std::move(heads);
  return p;
}

PolicySpec PolicySpec::oracle_policy(std::string name) {
  PolicySpec p;
  p.kind = Kind::oracle;
  p.name = std::move(name);
  return p;
}

namespace {

void validate_heads(const std::vector<int>& heads, int lh, const std::string& what) {
  std::set<int> seen;
  for (int j : heads) {
    if (j < 0 || j >= lh) throw usage_error(what + ": head index " + std::to_string(j) + " out of range");
    if (!seen.insert(j).second) throw usage_error(what + ": duplicate head index " + std::to_string(j));
  }
}

// Per-question pass counts for one replicate; candidates saturate once the
// list is exhausted so Pass@N stays monotone in N.
void accumulate_pass(std::span<const uint8_t> row, const std::vector<int>& chosen, int n_max,
                     std::vector<int>& hits) {
  for (int n = 1; n <= n_max; ++n) {
    int effective = std::min<int>(n, static_cast<int>(chosen.size()));
    hits[static_cast<std::size_t>(n - 1)] += pass_at_n(row, chosen, effective);
  }
}

}  // namespace

EvalReport evaluate(const std::vector<PolicySpec>& policies, const OutcomeMatrix& z_test,
                    const QuestionFeatures* features_test, int n_max) {
  if (n_max < 1) throw usage_error("n_max must be >= 1");
  if (policies.empty()) throw usage_error("evaluate needs at least one policy");
  const int n = z_test.num_questions();
  const int lh = z_test.num_heads();

  EvalReport report;
  report.n_test = n;
  report.n_max = n_max;

  for (const PolicySpec& spec : policies) {
    PolicyResult result;
    result.name = spec.name;

    if (spec.kind == PolicySpec::Kind::sprint) {
      if (spec.model == nullptr) throw usage_error("sprint policy has no model");
      if (features_test == nullptr) throw align_error("sprint policy needs test features");
      if (features_test->num_questions() != n) {
        throw align_error("test features have " + std::to_string(features_test->num_questions()) +
                          " rows, outcomes have " + std::to_string(n));
      }
      if (spec.model->num_heads() != lh) {
        throw align_error("model has " + std::to_string(spec.model->num_heads()) +
                          " heads, outcomes have " + std::to_string(lh));
      }
    }
    if (spec.kind == PolicySpec::Kind::random_heads) validate_heads(spec.pool, lh, "random pool");
    if (spec.kind == PolicySpec::Kind::fixed) validate_heads(spec.fixed_heads, lh, "fixed policy");

    const int replicates = spec.kind == PolicySpec::Kind::random_heads ? spec.replicates : 1;
    std::vector<std::vector<double>> per_replicate_rate(
        static_cast<std::size_t>(replicates), std::vector<double>(static_cast<std::size_t>(n_max)));

    for (int rep = 0; rep < replicates; ++rep) {
      std::vector<int> hits(static_cast<std::size_t>(n_max), 0);
      std::vector<std::vector<int>> audit(static_cast<std::size_t>(n));

      switch (spec.kind) {
        case PolicySpec::Kind::sprint: {
          for (int i = 0; i < n; ++i) {
            TopNSelection sel = select_top_n(*spec.model, features_test->values.row(i).transpose(),
                                             std::min(n_max, lh));
            accumulate_pass(z_test.row(i), sel.heads, n_max, hits);
            audit[static_cast<std::size_t>(i)] = std::move(sel.heads);
          }
          result.seeds.push_back(spec.model->config.seed);
          break;
        }
        case PolicySpec::Kind::random_heads: {
          uint64_t rep_seed = derive_seed(spec.seed, "eval/random/" + std::to_string(rep));
          Rng rng(rep_seed);
          result.seeds.push_back(rep_seed);
          int draw = std::min<int>(n_max, static_cast<int>(spec.pool.size()));
          std::vector<int> shared;
          if (spec.per_run_draw) shared = rng.sample_without_replacement(spec.pool, draw);
          for (int i = 0; i < n; ++i) {
            std::vector<int> chosen =
                spec.per_run_draw ? shared : rng.sample_without_replacement(spec.pool, draw);
            accumulate_pass(z_test.row(i), chosen, n_max, hits);
            audit[static_cast<std::size_t>(i)] = std::move(chosen);
          }
          break;
        }
        case PolicySpec::Kind::fixed: {
          for (int i = 0; i < n; ++i) {
            accumulate_pass(z_test.row(i), spec.fixed_heads, n_max, hits);
            audit[static_cast<std::size_t>(i)] = spec.fixed_heads;
          }
          break;
        }
        case PolicySpec::Kind::oracle: {
          // Counts a question at every N iff any head column solves it.
          for (int i = 0; i < n; ++i) {
            auto row = z_test.row(i);
            std::vector<int> solvers;
            for (int j = 0; j < lh; ++j) {
              if (row[static_cast<std::size_t>(j)] != 0) solvers.push_back(j);
            }
            if (!solvers.empty()) {
              for (int k = 0; k < n_max; ++k) ++hits[static_cast<std::size_t>(k)];
            }
            audit[static_cast<std::size_t>(i)] = std::move(solvers);
          }
          break;
        }
      }

      for (int k = 0; k < n_max; ++k) {
        per_replicate_rate[static_cast<std::size_t>(rep)][static_cast<std::size_t>(k)] =
            static_cast<double>(hits[static_cast<std::size_t>(k)]) / static_cast<double>(n);
      }
      result.audit.push_back(std::move(audit));
    }

    result.pass_at.resize(static_cast<std::size_t>(n_max));
    result.stddev.resize(static_cast<std::size_t>(n_max));
    for (int k = 0; k < n_max; ++k) {
      double mean = 0.0;
      for (int rep = 0; rep < replicates; ++rep) {
        mean += per_replicate_rate[static_cast<std::size_t>(rep)][static_cast<std::size_t>(k)];
      }
      mean /= static_cast<double>(replicates);
      double var = 0.0;
      if (replicates > 1) {
        for (int rep = 0; rep < replicates; ++rep) {
          double d =
              per_replicate_rate[static_cast<std::size_t>(rep)][static_cast<std::size_t>(k)] - mean;
          var += d * d;
        }
        var /= static_cast<double>(replicates - 1);
      }
      result.pass_at[static_cast<std::size_t>(k)] = mean;
      result.stddev[static_cast<std::size_t>(k)] = std::sqrt(var);
    }
    report.policies.push_back(std::move(result));
  }
  return report;
}

std::string report_to_json(const EvalReport& report) {
  json policies = json::array();
  for (const auto& p : report.policies) {
    json pass = json::object();
    json dev = json::object();
    for (std::size_t k = 0; k < p.pass_at.size(); ++k) {
      pass[std::to_string(k + 1)] = p.pass_at[k];
      dev[std::to_string(k + 1)] = p.stddev[k];
    }
    policies.push_back({{"name", p.name},
                        {"pass_at", std::move(pass)},
                        {"stddev", std::move(dev)},
                        {"seeds", p.seeds},
                        {"audit", p.audit}});
  }
  json root{{"n_test", report.n_test}, {"n_max", report.n_max}, {"policies", std::move(policies)}};
  return root.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw parse_error(std::string("report JSON: ") + e.what());
  }
  EvalReport report;
  report.n_test = root.at("n_test").get<int>();
  report.n_max = root.at("n_max").get<int>();
  for (const auto& item : root.at("policies")) {
    PolicyResult p;
    p.name = item.at("name").get<std::string>();
    p.pass_at.resize(static_cast<std::size_t>(report.n_max));
    p.stddev.resize(static_cast<std::size_t>(report.n_max));
    for (int n = 1; n <= report.n_max; ++n) {
      p.pass_at[static_cast<std::size_t>(n - 1)] =
          item.at("pass_at").at(std::to_string(n)).get<double>();
      p.stddev[static_cast<std::size_t>(n - 1)] =
          item.at("stddev").at(std::to_string(n)).get<double>();
    }
    p.seeds = item.at("seeds").get<std::vector<uint64_t>>();
    p.audit = item.at("audit").get<std::vector<std::vector<std::vector<int>>>>();
    report.policies.push_back(std::move(p));
  }
  return report;
}

void save_report(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write report file '" + path.string() + "'");
  out << report_to_json(report);
  if (!out) throw io_error("failed while writing '" + path.string() + "'");
}

EvalReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open report file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return report_from_json(buf.str());
}

std::string report_plot_csv(const EvalReport& report) {
  std::ostringstream os;
  os.precision(17);
  os << "policy,N,mean,stddev\n";
  for (const auto& p : report.policies) {
    for (std::size_t k = 0; k < p.pass_at.size(); ++k) {
      os << p.name << "," << (k + 1) << "," << p.pass_at[k] << "," << p.stddev[k] << "\n";
    }
  }
  return os.str();
}

}  // namespace sprint
