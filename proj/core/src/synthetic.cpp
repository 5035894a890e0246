#include <string>

#include "sprint/errors.hpp"
#include "sprint/eval.hpp"
#include "sprint/rng.hpp"

namespace sprint {

void SynthSpec::validate() const {
  if (clusters < 1) throw usage_error("clusters must be >= 1");
  if (heads < clusters) throw usage_error("heads must be >= clusters");
  if (feature_dim < 1) throw usage_error("feature dimension must be >= 1");
  if (questions < 1) throw usage_error("questions must be >= 1");
  if (!(p_lo >= 0.0 && p_lo < p_hi && p_hi <= 1.0)) {
    throw usage_error("hit rates must satisfy 0 <= p_lo < p_hi <= 1");
  }
}

SynthData generate_synthetic(const SynthSpec& spec) {
  spec.validate();

  constexpr double kCenterScale = 5.0;
  constexpr double kNoiseScale = 0.5;

  Rng center_rng = Rng::for_role(spec.seed, "synth/centers");
  Eigen::MatrixXd centers(spec.clusters, spec.feature_dim);
  for (int k = 0; k < spec.clusters; ++k) {
    for (int c = 0; c < spec.feature_dim; ++c) centers(k, c) = kCenterScale * center_rng.normal();
  }

  Rng head_rng = Rng::for_role(spec.seed, "synth/heads");
  std::vector<int> all_heads(static_cast<std::size_t>(spec.heads));
  for (int j = 0; j < spec.heads; ++j) all_heads[static_cast<std::size_t>(j)] = j;
  std::vector<int> cluster_heads = head_rng.sample_without_replacement(all_heads, spec.clusters);

  Rng assign_rng = Rng::for_role(spec.seed, "synth/assign");
  Rng noise_rng = Rng::for_role(spec.seed, "synth/noise");
  Rng outcome_rng = Rng::for_role(spec.seed, "synth/outcomes");
  Rng baseline_rng = Rng::for_role(spec.seed, "synth/baseline");

  std::vector<int> question_clusters(static_cast<std::size_t>(spec.questions));
  std::vector<std::string> ids;
  std::vector<std::string> subjects;
  std::vector<uint8_t> baseline;
  std::vector<uint8_t> bits;
  ids.reserve(static_cast<std::size_t>(spec.questions));
  bits.reserve(static_cast<std::size_t>(spec.questions) * static_cast<std::size_t>(spec.heads));

  QuestionFeatures features;
  features.values.resize(spec.questions, spec.feature_dim);

  for (int i = 0; i < spec.questions; ++i) {
    int k = assign_rng.uniform_int(spec.clusters);
    question_clusters[static_cast<std::size_t>(i)] = k;
    std::string id = "q" + std::to_string(i);
    ids.push_back(id);
    features.ids.push_back(std::move(id));
    subjects.push_back("cluster" + std::to_string(k));
    for (int c = 0; c < spec.feature_dim; ++c) {
      features.values(i, c) = centers(k, c) + kNoiseScale * noise_rng.normal();
    }
    int dedicated = cluster_heads[static_cast<std::size_t>(k)];
    for (int j = 0; j < spec.heads; ++j) {
      double p = (j == dedicated) ? spec.p_hi : spec.p_lo;
      bits.push_back(outcome_rng.uniform() < p ? 1 : 0);
    }
    baseline.push_back(baseline_rng.uniform() < spec.p_lo ? 1 : 0);
  }

  OutcomeMatrix outcomes(std::move(ids), spec.heads, std::move(bits), std::move(subjects),
                         std::move(baseline));
  return SynthData{std::move(outcomes), std::move(features),
                   HeadCatalog::single_layer(spec.heads), std::move(cluster_heads),
                   std::move(question_clusters)};
}

}  // namespace sprint
