#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sprint/outcomes.hpp"

namespace sprint {

// Precomputed sentence-feature vectors, one row per question.
struct QuestionFeatures {
  std::vector<std::string> ids;
  Eigen::MatrixXd values;  // n x feature_dim

  int num_questions() const { return static_cast<int>(values.rows()); }
  int feature_dim() const { return static_cast<int>(values.cols()); }
};

QuestionFeatures load_features(const std::filesystem::path& path);
void save_features(const QuestionFeatures& features, const std::filesystem::path& path);

// Reorders feature rows to match the outcome matrix's question order.
// Missing or extra ids are alignment errors.
QuestionFeatures align_features(const QuestionFeatures& features, const OutcomeMatrix& outcomes);

QuestionFeatures subset_features(const QuestionFeatures& features, const std::vector<int>& rows);

// Linear map from feature space into the shared embedding space.
struct QuestionEncoder {
  Eigen::MatrixXd weight;  // feature_dim x embedding_dim
  Eigen::VectorXd bias;    // embedding_dim
};

Eigen::VectorXd encode(const QuestionEncoder& encoder, const Eigen::VectorXd& features);

struct HeadEmbeddings {
  Eigen::MatrixXd vectors;  // num_heads x embedding_dim, row j is v_j

  int num_heads() const { return static_cast<int>(vectors.rows()); }
  int embedding_dim() const { return static_cast<int>(vectors.cols()); }
};

enum class OptimizerKind { sgd, sgd_momentum, adam };

std::string optimizer_name(OptimizerKind kind);
OptimizerKind optimizer_from_name(const std::string& name);

struct TrainConfig {
  double lambda = 0.01;
  double learning_rate = 1e-2;
  int steps = 2000;
  int batch_size = 64;
  uint64_t seed = 0;
  double radius = 10.0;  // embeddings are projected onto this ball after each step
  int embedding_dim = 8;
  OptimizerKind optimizer = OptimizerKind::adam;
  double momentum = 0.9;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int trace_every = 50;

  void validate() const;
};

struct TrainedModel {
  QuestionEncoder encoder;
  HeadEmbeddings embeddings;
  HeadCatalog catalog;
  TrainConfig config;
  std::vector<std::pair<int, double>> loss_trace;  // (step, full objective)
  int excluded_questions = 0;  // rows where no pruned head was correct

  int feature_dim() const { return static_cast<int>(encoder.weight.rows()); }
  int embedding_dim() const { return static_cast<int>(encoder.weight.cols()); }
  int num_heads() const { return embeddings.num_heads(); }
};

struct LossTerms {
  double total;        // alignment - lambda * weighted_spread
  double alignment;    // mean softmax cross term, always >= 0
  double weighted_spread;  // sum over j<k of s_jk * |v_j - v_k|^2
};

// Contrastive objective over the given question rows. Every row in
// `questions` must have a nonempty positive head set.
LossTerms loss(const QuestionEncoder& encoder, const HeadEmbeddings& embeddings,
               const OutcomeMatrix& z, const SimilarityMatrix& sim,
               const QuestionFeatures& features, double lambda, std::span<const int> questions);

struct LossGradients {
  LossTerms value;
  Eigen::MatrixXd d_weight;   // feature_dim x embedding_dim
  Eigen::VectorXd d_bias;     // embedding_dim
  Eigen::MatrixXd d_vectors;  // num_heads x embedding_dim
};

LossGradients loss_gradients(const QuestionEncoder& encoder, const HeadEmbeddings& embeddings,
                             const OutcomeMatrix& z, const SimilarityMatrix& sim,
                             const QuestionFeatures& features, double lambda,
                             std::span<const int> questions);

TrainedModel train(const OutcomeMatrix& z, const QuestionFeatures& features,
                   const HeadCatalog& catalog, const TrainConfig& config);

// Single-file container: magic "SPRINTM1", JSON header, raw little-endian
// float64 payload for the weight matrix, bias, and head embeddings.
std::string serialize_model(const TrainedModel& model);
TrainedModel parse_model(const std::string& bytes);
void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace sprint
