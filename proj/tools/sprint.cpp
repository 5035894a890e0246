#include <chrono>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sprint/attention.hpp"
#include "sprint/errors.hpp"
#include "sprint/eval.hpp"
#include "sprint/manifest.hpp"
#include "sprint/outcomes.hpp"
#include "sprint/selector.hpp"
#include "sprint/trainer.hpp"
#include "sprint/version.hpp"

namespace {

using nlohmann::json;

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string dstr(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

sprint::RunManifest start_manifest(const std::string& command, uint64_t seed) {
  sprint::RunManifest m;
  m.command = command;
  m.seed = seed;
  m.tool_version = sprint::kToolVersion;
  return m;
}

void add_input(sprint::RunManifest& m, const std::string& path) {
  m.input_checksums[path] = sprint::file_checksum_hex(path);
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw sprint::io_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw sprint::io_error("failed while writing '" + path.string() + "'");
}

// ---------------------------------------------------------------- train ---

struct TrainOpts {
  std::string outcomes;
  std::string features;
  std::string out;
  sprint::TrainConfig cfg;
  std::string optimizer = "adam";
};

int cmd_train(const TrainOpts& o) {
  Timer timer;
  sprint::TrainConfig cfg = o.cfg;
  cfg.optimizer = sprint::optimizer_from_name(o.optimizer);
  cfg.validate();

  auto loaded = sprint::load_outcomes(o.outcomes);
  auto features = sprint::align_features(sprint::load_features(o.features), loaded.matrix);
  sprint::TrainedModel model = sprint::train(loaded.matrix, features, loaded.catalog, cfg);
  sprint::save_model(model, o.out);

  sprint::RunManifest m = start_manifest("train", cfg.seed);
  add_input(m, o.outcomes);
  add_input(m, o.features);
  m.options = {{"outcomes", o.outcomes},
               {"features", o.features},
               {"out", o.out},
               {"lambda", dstr(cfg.lambda)},
               {"learning-rate", dstr(cfg.learning_rate)},
               {"steps", std::to_string(cfg.steps)},
               {"batch-size", std::to_string(cfg.batch_size)},
               {"seed", std::to_string(cfg.seed)},
               {"radius", dstr(cfg.radius)},
               {"embedding-dim", std::to_string(cfg.embedding_dim)},
               {"optimizer", o.optimizer},
               {"momentum", dstr(cfg.momentum)},
               {"adam-beta1", dstr(cfg.adam_beta1)},
               {"adam-beta2", dstr(cfg.adam_beta2)},
               {"adam-epsilon", dstr(cfg.adam_epsilon)},
               {"trace-every", std::to_string(cfg.trace_every)}};
  m.wall_clock_seconds = timer.seconds();
  sprint::save_manifest(m, o.out + ".manifest.json");

  std::cout << "trained " << cfg.steps << " steps over "
            << (loaded.matrix.num_questions() - model.excluded_questions) << " questions ("
            << model.excluded_questions << " excluded: no pruned head solved them)\n";
  std::cout << "initial loss " << model.loss_trace.front().second << ", final loss "
            << model.loss_trace.back().second << "\n";
  std::cout << "model written to " << o.out << "\n";
  return 0;
}

// --------------------------------------------------------------- select ---

struct SelectOpts {
  std::string model;
  std::string features;
  int top_n = 1;
  std::string out;  // empty -> stdout only
};

int cmd_select(const SelectOpts& o) {
  Timer timer;
  sprint::TrainedModel model = sprint::load_model(o.model);
  sprint::QuestionFeatures features = sprint::load_features(o.features);

  json results = json::array();
  for (int i = 0; i < features.num_questions(); ++i) {
    sprint::TopNSelection top =
        sprint::select_top_n(model, features.values.row(i).transpose(), o.top_n);
    sprint::SelectionResult full = sprint::select(model, features.values.row(i).transpose());
    json ranked = json::array();
    for (std::size_t r = 0; r < top.heads.size(); ++r) {
      const auto& entry = full.ranked[r];
      ranked.push_back({{"j", entry.index},
                        {"layer", entry.layer},
                        {"head", entry.head},
                        {"squared_distance", entry.squared_distance}});
    }
    results.push_back({{"id", features.ids[static_cast<std::size_t>(i)]},
                       {"ranked", std::move(ranked)},
                       {"clamped", top.clamped}});
  }
  std::string text = results.dump(2) + "\n";
  if (o.out.empty()) {
    std::cout << text;
  } else {
    write_text_file(o.out, text);
    sprint::RunManifest m = start_manifest("select", model.config.seed);
    add_input(m, o.model);
    add_input(m, o.features);
    m.options = {{"model", o.model},
                 {"features", o.features},
                 {"top-n", std::to_string(o.top_n)},
                 {"out", o.out}};
    m.wall_clock_seconds = timer.seconds();
    sprint::save_manifest(m, o.out + ".manifest.json");
    std::cout << "selection written to " << o.out << "\n";
  }
  return 0;
}

// ----------------------------------------------------------------- eval ---

struct EvalOpts {
  std::string model;
  std::string outcomes;
  std::string features;
  std::string train_outcomes;
  std::string policies = "sprint,random,oracle";
  int n_max = 8;
  int seeds = 30;
  uint64_t seed = 0;
  int pool_size = 0;  // 0 -> all heads
  bool count_ranking = false;
  bool per_run_draw = false;
  std::string out_prefix;
};

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(text);
  while (std::getline(is, item, sep)) out.push_back(item);
  return out;
}

int cmd_eval(const EvalOpts& o) {
  Timer timer;
  auto loaded = sprint::load_outcomes(o.outcomes);
  const int lh = loaded.matrix.num_heads();

  std::optional<sprint::TrainedModel> model;
  std::optional<sprint::QuestionFeatures> features;
  std::optional<sprint::LoadedOutcomes> train_split;

  auto random_pool = [&]() {
    if (!o.train_outcomes.empty()) {
      if (!train_split) train_split.emplace(sprint::load_outcomes(o.train_outcomes));
      int size = o.pool_size > 0 ? o.pool_size : train_split->matrix.num_heads();
      return o.count_ranking ? sprint::count_head_ranking(train_split->matrix, size)
                             : sprint::greedy_head_ranking(train_split->matrix, size);
    }
    std::vector<int> pool(static_cast<std::size_t>(lh));
    for (int j = 0; j < lh; ++j) pool[static_cast<std::size_t>(j)] = j;
    if (o.pool_size > 0) pool.resize(static_cast<std::size_t>(std::min(o.pool_size, lh)));
    return pool;
  };

  std::vector<sprint::PolicySpec> specs;
  for (const std::string& name : split(o.policies, ',')) {
    if (name == "sprint") {
      if (o.model.empty()) throw sprint::usage_error("policy 'sprint' needs --model");
      if (o.features.empty()) throw sprint::usage_error("policy 'sprint' needs --features");
      if (!model) model.emplace(sprint::load_model(o.model));
      if (!features) {
        features.emplace(
            sprint::align_features(sprint::load_features(o.features), loaded.matrix));
      }
      specs.push_back(sprint::PolicySpec::sprint_policy(*model));
    } else if (name == "random") {
      auto spec = sprint::PolicySpec::random_policy(random_pool(), o.seed, o.seeds);
      spec.per_run_draw = o.per_run_draw;
      specs.push_back(std::move(spec));
    } else if (name == "oracle") {
      specs.push_back(sprint::PolicySpec::oracle_policy());
    } else if (name == "greedy") {
      if (o.train_outcomes.empty()) throw sprint::usage_error("policy 'greedy' needs --train-outcomes");
      if (!train_split) train_split.emplace(sprint::load_outcomes(o.train_outcomes));
      int size = o.pool_size > 0 ? o.pool_size : train_split->matrix.num_heads();
      auto ranking = o.count_ranking ? sprint::count_head_ranking(train_split->matrix, size)
                                     : sprint::greedy_head_ranking(train_split->matrix, size);
      specs.push_back(sprint::PolicySpec::fixed_policy(std::move(ranking), "greedy"));
    } else if (name.rfind("fixed:", 0) == 0) {
      std::vector<int> heads;
      for (const std::string& tok : split(name.substr(6), '+')) heads.push_back(std::stoi(tok));
      specs.push_back(sprint::PolicySpec::fixed_policy(std::move(heads)));
    } else {
      throw sprint::usage_error("unknown policy '" + name +
                                "' (valid: sprint, random, oracle, greedy, fixed:<j+j+...>)");
    }
  }

  sprint::EvalReport report = sprint::evaluate(
      specs, loaded.matrix, features ? &*features : nullptr, o.n_max);

  // Pass@N table.
  std::cout << std::left << std::setw(6) << "N";
  for (const auto& p : report.policies) std::cout << std::setw(14) << p.name;
  std::cout << "\n";
  for (int n = 1; n <= report.n_max; ++n) {
    std::cout << std::left << std::setw(6) << n;
    for (const auto& p : report.policies) {
      std::ostringstream cell;
      cell << std::fixed << std::setprecision(4) << p.pass(n);
      std::cout << std::setw(14) << cell.str();
    }
    std::cout << "\n";
  }

  if (!o.out_prefix.empty()) {
    sprint::save_report(report, o.out_prefix + ".report.json");
    write_text_file(o.out_prefix + ".plot.csv", sprint::report_plot_csv(report));

    sprint::RunManifest m = start_manifest("eval", o.seed);
    add_input(m, o.outcomes);
    if (!o.model.empty()) add_input(m, o.model);
    if (!o.features.empty()) add_input(m, o.features);
    if (!o.train_outcomes.empty()) add_input(m, o.train_outcomes);
    m.options = {{"outcomes", o.outcomes},
                 {"model", o.model},
                 {"features", o.features},
                 {"train-outcomes", o.train_outcomes},
                 {"policies", o.policies},
                 {"n-max", std::to_string(o.n_max)},
                 {"seeds", std::to_string(o.seeds)},
                 {"seed", std::to_string(o.seed)},
                 {"pool-size", std::to_string(o.pool_size)},
                 {"count-ranking", o.count_ranking ? "true" : "false"},
                 {"per-run-draw", o.per_run_draw ? "true" : "false"},
                 {"out-prefix", o.out_prefix}};
    m.wall_clock_seconds = timer.seconds();
    sprint::save_manifest(m, o.out_prefix + ".manifest.json");
    std::cout << "report written to " << o.out_prefix << ".report.json\n";
  }
  return 0;
}

// ---------------------------------------------------------------- stats ---

struct StatsOpts {
  std::string outcomes;
  std::string group_by = "subject";
  std::string out_csv;
};

int cmd_stats(const StatsOpts& o) {
  Timer timer;
  if (o.group_by != "subject" && o.group_by != "none") {
    throw sprint::usage_error("--group-by must be 'subject' or 'none'");
  }
  auto loaded = sprint::load_outcomes(o.outcomes);
  sprint::GainReport report = sprint::gain_stats(
      loaded.matrix, loaded.catalog,
      o.group_by == "subject" ? sprint::GroupBy::subject : sprint::GroupBy::none);

  std::cout << std::left << std::setw(24) << "group" << std::setw(8) << "n" << std::setw(12)
            << "baseline" << std::setw(12) << "best" << std::setw(10) << "best-col" << "gain\n";
  for (const auto& g : report.groups) {
    std::cout << std::left << std::setw(24) << g.group << std::setw(8) << g.n_questions
              << std::setw(12) << std::fixed << std::setprecision(4) << g.baseline_accuracy
              << std::setw(12) << g.best_accuracy << std::setw(10)
              << loaded.catalog.column_label(g.best_head) << std::showpos << g.gain
              << std::noshowpos << "\n";
  }

  if (!o.out_csv.empty()) {
    write_text_file(o.out_csv, sprint::gain_report_csv(report));
    sprint::RunManifest m = start_manifest("stats", 0);
    add_input(m, o.outcomes);
    m.options = {{"outcomes", o.outcomes}, {"group-by", o.group_by}, {"out-csv", o.out_csv}};
    m.wall_clock_seconds = timer.seconds();
    sprint::save_manifest(m, o.out_csv + ".manifest.json");
    std::cout << "gain rows written to " << o.out_csv << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------- synth ---

struct SynthOpts {
  sprint::SynthSpec spec;
  std::string out_prefix;
};

int cmd_synth(const SynthOpts& o) {
  Timer timer;
  sprint::SynthData data = sprint::generate_synthetic(o.spec);

  std::string outcomes_path = o.out_prefix + ".outcomes.csv";
  std::string features_path = o.out_prefix + ".features.jsonl";
  std::string catalog_path = o.out_prefix + ".catalog.json";
  std::string truth_path = o.out_prefix + ".truth.json";

  sprint::save_outcomes(data.outcomes, data.catalog, outcomes_path);
  sprint::save_features(data.features, features_path);
  sprint::save_catalog(data.catalog, catalog_path);
  json truth{{"cluster_heads", data.cluster_heads}, {"question_clusters", data.question_clusters}};
  write_text_file(truth_path, truth.dump(2) + "\n");

  sprint::RunManifest m = start_manifest("synth", o.spec.seed);
  m.options = {{"clusters", std::to_string(o.spec.clusters)},
               {"heads", std::to_string(o.spec.heads)},
               {"feature-dim", std::to_string(o.spec.feature_dim)},
               {"p-hi", dstr(o.spec.p_hi)},
               {"p-lo", dstr(o.spec.p_lo)},
               {"questions", std::to_string(o.spec.questions)},
               {"seed", std::to_string(o.spec.seed)},
               {"out-prefix", o.out_prefix}};
  m.wall_clock_seconds = timer.seconds();
  sprint::save_manifest(m, o.out_prefix + ".manifest.json");

  std::cout << "wrote " << outcomes_path << ", " << features_path << ", " << catalog_path << ", "
            << truth_path << "\n";
  return 0;
}

// ------------------------------------------------------------ attn-demo ---

struct AttnDemoOpts {
  int heads = 4;
  int head_dim = 8;
  int seq_len = 5;
  int model_dim = 0;  // 0 -> heads * head_dim
  uint64_t seed = 0;
};

int cmd_attn_demo(const AttnDemoOpts& o) {
  int model_dim = o.model_dim > 0 ? o.model_dim : o.heads * o.head_dim;
  sprint::AttentionConfig cfg(o.heads, o.head_dim, model_dim, o.seq_len);
  sprint::AttnDemoReport report = sprint::attn_demo(cfg, o.seed);
  for (const auto& line : report.lines) {
    std::cout << json{{"head", line.head}, {"max_abs_dev", line.max_abs_deviation}}.dump() << "\n";
  }
  std::cout << json{{"heads", cfg.num_heads},
                    {"head_dim", cfg.head_dim},
                    {"seq_len", cfg.seq_len},
                    {"seed", report.seed},
                    {"overall_max_abs_dev", report.max_abs_deviation}}
                   .dump()
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SPRINT: attention-head pruning analytics, contrastive head-embedding "
               "training, and Pass@N evaluation"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a key=value file ([subcommand] sections)");
  app.set_version_flag("--version", sprint::kToolVersion);

  TrainOpts train_opts;
  CLI::App* train = app.add_subcommand("train", "Train head embeddings and a question encoder");
  train->add_option("--outcomes", train_opts.outcomes, "Outcome CSV")->required();
  train->add_option("--features", train_opts.features, "Question features JSONL")->required();
  train->add_option("--out", train_opts.out, "Output model path")->required();
  train->add_option("--lambda", train_opts.cfg.lambda, "Diversity regularization weight")
      ->capture_default_str();
  train->add_option("--learning-rate", train_opts.cfg.learning_rate, "Step size")
      ->capture_default_str();
  train->add_option("--steps", train_opts.cfg.steps, "Mini-batch steps")->capture_default_str();
  train->add_option("--batch-size", train_opts.cfg.batch_size, "Questions per step")
      ->capture_default_str();
  train->add_option("--seed", train_opts.cfg.seed, "Run seed")->capture_default_str();
  train->add_option("--radius", train_opts.cfg.radius, "Embedding projection radius")
      ->capture_default_str();
  train->add_option("--embedding-dim", train_opts.cfg.embedding_dim, "Embedding dimension p")
      ->capture_default_str();
  train->add_option("--optimizer", train_opts.optimizer, "sgd, sgd_momentum, or adam")
      ->capture_default_str();
  train->add_option("--momentum", train_opts.cfg.momentum, "Momentum (sgd_momentum)")
      ->capture_default_str();
  train->add_option("--adam-beta1", train_opts.cfg.adam_beta1, "Adam first-moment decay")
      ->capture_default_str();
  train->add_option("--adam-beta2", train_opts.cfg.adam_beta2, "Adam second-moment decay")
      ->capture_default_str();
  train->add_option("--adam-epsilon", train_opts.cfg.adam_epsilon, "Adam denominator floor")
      ->capture_default_str();
  train->add_option("--trace-every", train_opts.cfg.trace_every, "Loss trace interval")
      ->capture_default_str();

  SelectOpts select_opts;
  CLI::App* select = app.add_subcommand("select", "Rank heads to prune for new questions");
  select->add_option("--model", select_opts.model, "Trained model file")->required();
  select->add_option("--features", select_opts.features, "Question features JSONL")->required();
  select->add_option("--top-n", select_opts.top_n, "Ranked heads to emit per question")
      ->capture_default_str();
  select->add_option("--out", select_opts.out, "Output JSON path (default: stdout)");

  EvalOpts eval_opts;
  CLI::App* eval = app.add_subcommand("eval", "Pass@N evaluation of selection policies");
  eval->add_option("--outcomes", eval_opts.outcomes, "Test outcome CSV")->required();
  eval->add_option("--model", eval_opts.model, "Trained model (sprint policy)");
  eval->add_option("--features", eval_opts.features, "Test features JSONL (sprint policy)");
  eval->add_option("--train-outcomes", eval_opts.train_outcomes,
                   "Training outcomes for the greedy head pool");
  eval->add_option("--policies", eval_opts.policies,
                   "Comma list: sprint, random, oracle, greedy, fixed:<j+j+...>")
      ->capture_default_str();
  eval->add_option("--n-max", eval_opts.n_max, "Largest N to sweep")->capture_default_str();
  eval->add_option("--seeds", eval_opts.seeds, "Replicates for the random policy")
      ->capture_default_str();
  eval->add_option("--seed", eval_opts.seed, "Base seed for random draws")->capture_default_str();
  eval->add_option("--pool-size", eval_opts.pool_size,
                   "Random/greedy pool size (0 = all heads)")
      ->capture_default_str();
  eval->add_flag("--count-ranking", eval_opts.count_ranking,
                 "Rank the pool by raw solve counts instead of marginal coverage");
  eval->add_flag("--per-run-draw", eval_opts.per_run_draw,
                 "Draw one random head set per replicate instead of per question");
  eval->add_option("--out-prefix", eval_opts.out_prefix,
                   "Write <prefix>.report.json and <prefix>.plot.csv");

  StatsOpts stats_opts;
  CLI::App* stats = app.add_subcommand("stats", "Pruning gain statistics against the baseline");
  stats->add_option("--outcomes", stats_opts.outcomes, "Outcome CSV with a base column")
      ->required();
  stats->add_option("--group-by", stats_opts.group_by, "subject or none")->capture_default_str();
  stats->add_option("--out-csv", stats_opts.out_csv, "Plot-ready gain CSV path");

  SynthOpts synth_opts;
  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic clustered fixture");
  synth->add_option("--clusters", synth_opts.spec.clusters, "Feature clusters")
      ->capture_default_str();
  synth->add_option("--heads", synth_opts.spec.heads, "Head columns")->capture_default_str();
  synth->add_option("--feature-dim", synth_opts.spec.feature_dim, "Feature dimension")
      ->capture_default_str();
  synth->add_option("--p-hi", synth_opts.spec.p_hi, "Dedicated-head hit rate")
      ->capture_default_str();
  synth->add_option("--p-lo", synth_opts.spec.p_lo, "Background hit rate")->capture_default_str();
  synth->add_option("--questions", synth_opts.spec.questions, "Questions to generate")
      ->capture_default_str();
  synth->add_option("--seed", synth_opts.spec.seed, "Generator seed")->capture_default_str();
  synth->add_option("--out-prefix", synth_opts.out_prefix, "Output file prefix")->required();

  AttnDemoOpts attn_opts;
  CLI::App* attn = app.add_subcommand(
      "attn-demo", "Cross-check head-output zeroing against projection-row zeroing");
  attn->add_option("--heads", attn_opts.heads, "Attention heads")->capture_default_str();
  attn->add_option("--head-dim", attn_opts.head_dim, "Per-head dimension")->capture_default_str();
  attn->add_option("--seq-len", attn_opts.seq_len, "Sequence length")->capture_default_str();
  attn->add_option("--model-dim", attn_opts.model_dim,
                   "Model dimension (default heads * head-dim)");
  attn->add_option("--seed", attn_opts.seed, "Weights/input seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(train)) return cmd_train(train_opts);
    if (app.got_subcommand(select)) return cmd_select(select_opts);
    if (app.got_subcommand(eval)) return cmd_eval(eval_opts);
    if (app.got_subcommand(stats)) return cmd_stats(stats_opts);
    if (app.got_subcommand(synth)) return cmd_synth(synth_opts);
    if (app.got_subcommand(attn)) return cmd_attn_demo(attn_opts);
  } catch (const sprint::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
