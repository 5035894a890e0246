#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sprint/outcomes.hpp"
#include "sprint/selector.hpp"
#include "sprint/trainer.hpp"

namespace sprint {

// 1 iff any of the first min(n, row size) chosen heads solved the question.
// `chosen` entries must be distinct, in range, and cover that prefix.
int pass_at_n(std::span<const uint8_t> z_row, std::span<const int> chosen, int n);

// Iterative marginal-coverage ranking: each pick is the head that solves the
// most questions no earlier pick solved; ties go to the lowest index.
std::vector<int> greedy_head_ranking(const OutcomeMatrix& z_train, int pool_size);

// Plain solve-count ranking, for comparison with the coverage variant.
std::vector<int> count_head_ranking(const OutcomeMatrix& z_train, int pool_size);

struct PolicySpec {
  enum class Kind { sprint, random_heads, fixed, oracle };

  Kind kind;
  std::string name;
  const TrainedModel* model = nullptr;  // sprint
  std::vector<int> pool;                // random_heads
  uint64_t seed = 0;                    // random_heads base seed
  int replicates = 1;                   // random_heads draws per question set
  bool per_run_draw = false;            // one shared draw per replicate instead of per question
  std::vector<int> fixed_heads;         // fixed

  static PolicySpec sprint_policy(const TrainedModel& model, std::string name = "sprint");
  static PolicySpec random_policy(std::vector<int> pool, uint64_t seed, int replicates,
                                  std::string name = "random");
  static PolicySpec fixed_policy(std::vector<int> heads, std::string name = "fixed");
  static PolicySpec oracle_policy(std::string name = "oracle");
};

struct PolicyResult {
  std::string name;
  std::vector<double> pass_at;  // index N-1 holds Pass@N, mean over replicates
  std::vector<double> stddev;   // sample stddev across replicates (0 when single)
  std::vector<uint64_t> seeds;  // replicate sub-seeds actually used
  std::vector<std::vector<std::vector<int>>> audit;  // [replicate][question] chosen heads

  double pass(int n) const { return pass_at[static_cast<std::size_t>(n - 1)]; }
};

struct EvalReport {
  int n_test = 0;
  int n_max = 0;
  std::vector<PolicyResult> policies;
};

// Pass@N for every policy over the test outcomes. `features_test` is needed
// only when a sprint policy is present and must be row-aligned with z_test.
EvalReport evaluate(const std::vector<PolicySpec>& policies, const OutcomeMatrix& z_test,
                    const QuestionFeatures* features_test, int n_max);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);
void save_report(const EvalReport& report, const std::filesystem::path& path);
EvalReport load_report(const std::filesystem::path& path);

// Plot-ready rows: policy,N,mean,stddev.
std::string report_plot_csv(const EvalReport& report);

struct SynthSpec {
  int clusters = 4;
  int heads = 8;
  int feature_dim = 16;
  double p_hi = 0.95;  // dedicated head hit rate on its own cluster
  double p_lo = 0.3;   // every other head/question combination
  int questions = 1000;
  uint64_t seed = 0;

  void validate() const;
};

struct SynthData {
  OutcomeMatrix outcomes;  // subjects = cluster labels, baseline drawn at p_lo
  QuestionFeatures features;
  HeadCatalog catalog;
  std::vector<int> cluster_heads;      // dedicated head per cluster
  std::vector<int> question_clusters;  // cluster per question
};

// Gaussian feature clusters with one dedicated high-hit-rate head each;
// serves as the ground-truth fixture for end-to-end checks.
SynthData generate_synthetic(const SynthSpec& spec);

}  // namespace sprint
