#include "sprint/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sprint/errors.hpp"
#include "sprint/rng.hpp"

namespace sprint {

using nlohmann::json;

QuestionFeatures load_features(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open features file '" + path.string() + "'");

  std::vector<std::string> ids;
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw parse_error("features line " + std::to_string(line_number) + ": " + e.what());
    }
    if (!obj.is_object() || !obj.contains("id") || !obj.contains("features")) {
      throw parse_error("features line " + std::to_string(line_number) +
                        ": expected {\"id\": ..., \"features\": [...]}");
    }
    ids.push_back(obj["id"].get<std::string>());
    std::vector<double> row;
    for (const auto& v : obj["features"]) {
      if (!v.is_number()) {
        throw parse_error("features line " + std::to_string(line_number) +
                          ": non-numeric feature value");
      }
      row.push_back(v.get<double>());
    }
    if (row.empty()) {
      throw parse_error("features line " + std::to_string(line_number) + ": empty feature vector");
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw parse_error("features line " + std::to_string(line_number) + ": dimension " +
                        std::to_string(row.size()) + " differs from first row's " +
                        std::to_string(rows.front().size()));
    }
    for (double v : row) {
      if (!std::isfinite(v)) {
        throw numeric_error("features line " + std::to_string(line_number) +
                            ": non-finite feature value");
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw parse_error("features file '" + path.string() + "' has no rows");

  QuestionFeatures features;
  features.ids = std::move(ids);
  features.values.resize(static_cast<Eigen::Index>(rows.size()),
                         static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < rows[i].size(); ++c) {
      features.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
    }
  }
  return features;
}

void save_features(const QuestionFeatures& features, const std::filesystem::path& path) {
  if (static_cast<int>(features.ids.size()) != features.num_questions()) {
    throw align_error("feature ids do not match row count");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write features file '" + path.string() + "'");
  for (int i = 0; i < features.num_questions(); ++i) {
    json obj;
    obj["id"] = features.ids[static_cast<std::size_t>(i)];
    json arr = json::array();
    for (int c = 0; c < features.feature_dim(); ++c) arr.push_back(features.values(i, c));
    obj["features"] = std::move(arr);
    out << obj.dump() << "\n";
  }
  if (!out) throw io_error("failed while writing '" + path.string() + "'");
}

QuestionFeatures align_features(const QuestionFeatures& features, const OutcomeMatrix& outcomes) {
  if (features.num_questions() != outcomes.num_questions()) {
    throw align_error("features have " + std::to_string(features.num_questions()) +
                      " rows, outcomes have " + std::to_string(outcomes.num_questions()));
  }
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < features.ids.size(); ++i) {
    if (!index.emplace(features.ids[i], static_cast<int>(i)).second) {
      throw align_error("duplicate feature id '" + features.ids[i] + "'");
    }
  }
  QuestionFeatures aligned;
  aligned.values.resize(features.values.rows(), features.values.cols());
  for (int i = 0; i < outcomes.num_questions(); ++i) {
    const std::string& id = outcomes.question_ids()[static_cast<std::size_t>(i)];
    auto it = index.find(id);
    if (it == index.end()) throw align_error("no feature row for question id '" + id + "'");
    aligned.ids.push_back(id);
    aligned.values.row(i) = features.values.row(it->second);
  }
  return aligned;
}

QuestionFeatures subset_features(const QuestionFeatures& features, const std::vector<int>& rows) {
  QuestionFeatures out;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), features.values.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    int r = rows[i];
    if (r < 0 || r >= features.num_questions()) {
      throw usage_error("feature row index out of range");
    }
    out.values.row(static_cast<Eigen::Index>(i)) = features.values.row(r);
    if (!features.ids.empty()) out.ids.push_back(features.ids[static_cast<std::size_t>(r)]);
  }
  return out;
}

Eigen::VectorXd encode(const QuestionEncoder& encoder, const Eigen::VectorXd& features) {
  if (features.size() != encoder.weight.rows()) {
    throw align_error("feature vector has dimension " + std::to_string(features.size()) +
                      ", encoder expects " + std::to_string(encoder.weight.rows()));
  }
  return encoder.weight.transpose() * features + encoder.bias;
}

std::string optimizer_name(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::sgd_momentum: return "sgd_momentum";
    case OptimizerKind::adam: return "adam";
  }
  throw usage_error("unknown optimizer kind");
}

OptimizerKind optimizer_from_name(const std::string& name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "sgd_momentum") return OptimizerKind::sgd_momentum;
  if (name == "adam") return OptimizerKind::adam;
  throw usage_error("unknown optimizer '" + name + "' (expected sgd, sgd_momentum, or adam)");
}

void TrainConfig::validate() const {
  if (lambda < 0) throw usage_error("lambda must be >= 0");
  if (learning_rate <= 0) throw usage_error("learning rate must be positive");
  if (steps < 0) throw usage_error("steps must be >= 0");
  if (batch_size < 1) throw usage_error("batch size must be >= 1");
  if (radius <= 0) throw usage_error("projection radius must be positive");
  if (embedding_dim < 1) throw usage_error("embedding dimension must be >= 1");
  if (trace_every < 1) throw usage_error("trace interval must be >= 1");
  if (momentum < 0 || momentum >= 1) throw usage_error("momentum must be in [0, 1)");
  if (adam_beta1 < 0 || adam_beta1 >= 1 || adam_beta2 < 0 || adam_beta2 >= 1) {
    throw usage_error("adam betas must be in [0, 1)");
  }
  if (adam_epsilon <= 0) throw usage_error("adam epsilon must be positive");
}

namespace {

void check_loss_inputs(const QuestionEncoder& encoder, const HeadEmbeddings& embeddings,
                       const OutcomeMatrix& z, const SimilarityMatrix& sim,
                       const QuestionFeatures& features, double lambda,
                       std::span<const int> questions) {
  if (lambda < 0) throw usage_error("lambda must be >= 0");
  if (questions.empty()) throw usage_error("loss needs a nonempty question subset");
  if (features.num_questions() != z.num_questions()) {
    throw align_error("features and outcomes disagree on question count");
  }
  if (encoder.weight.rows() != features.values.cols()) {
    throw align_error("encoder input dimension does not match features");
  }
  if (encoder.weight.cols() != embeddings.vectors.cols() ||
      encoder.bias.size() != embeddings.vectors.cols()) {
    throw align_error("encoder output dimension does not match embeddings");
  }
  if (embeddings.num_heads() != z.num_heads()) {
    throw align_error("embedding rows do not match outcome columns");
  }
  if (sim.size() != z.num_heads()) throw align_error("similarity size does not match heads");
  for (int i : questions) {
    if (i < 0 || i >= z.num_questions()) throw usage_error("question index out of range");
  }
}

// Alignment term for one question: log-sum-exp over all heads minus
// log-sum-exp over the positive set, both with max subtraction. When the
// positive set is every head the two scans are identical and the difference
// is exactly zero.
double alignment_term(const Eigen::VectorXd& neg_sq_dist, std::span<const uint8_t> row) {
  const Eigen::Index lh = neg_sq_dist.size();
  double max_all = -std::numeric_limits<double>::infinity();
  double max_pos = -std::numeric_limits<double>::infinity();
  bool any_pos = false;
  for (Eigen::Index j = 0; j < lh; ++j) {
    max_all = std::max(max_all, neg_sq_dist(j));
    if (row[static_cast<std::size_t>(j)] != 0) {
      any_pos = true;
      max_pos = std::max(max_pos, neg_sq_dist(j));
    }
  }
  if (!any_pos) {
    throw usage_error("question with empty positive head set reached the loss");
  }
  double sum_all = 0.0;
  double sum_pos = 0.0;
  for (Eigen::Index j = 0; j < lh; ++j) {
    sum_all += std::exp(neg_sq_dist(j) - max_all);
    if (row[static_cast<std::size_t>(j)] != 0) sum_pos += std::exp(neg_sq_dist(j) - max_pos);
  }
  return (max_all + std::log(sum_all)) - (max_pos + std::log(sum_pos));
}

double weighted_spread(const HeadEmbeddings& embeddings, const SimilarityMatrix& sim) {
  double total = 0.0;
  const int lh = embeddings.num_heads();
  for (int j = 0; j < lh; ++j) {
    for (int k = j + 1; k < lh; ++k) {
      total += sim.value(j, k) *
               (embeddings.vectors.row(j) - embeddings.vectors.row(k)).squaredNorm();
    }
  }
  return total;
}

}  // namespace

LossTerms loss(const QuestionEncoder& encoder, const HeadEmbeddings& embeddings,
               const OutcomeMatrix& z, const SimilarityMatrix& sim,
               const QuestionFeatures& features, double lambda, std::span<const int> questions) {
  check_loss_inputs(encoder, embeddings, z, sim, features, lambda, questions);

  double align_sum = 0.0;
  Eigen::VectorXd neg_sq_dist(embeddings.num_heads());
  for (int i : questions) {
    Eigen::VectorXd q = encode(encoder, features.values.row(i).transpose());
    for (int j = 0; j < embeddings.num_heads(); ++j) {
      neg_sq_dist(j) = -(q - embeddings.vectors.row(j).transpose()).squaredNorm();
    }
    align_sum += alignment_term(neg_sq_dist, z.row(i));
  }

  LossTerms terms;
  terms.alignment = align_sum / static_cast<double>(questions.size());
  terms.weighted_spread = weighted_spread(embeddings, sim);
  terms.total = terms.alignment - lambda * terms.weighted_spread;
  return terms;
}

LossGradients loss_gradients(const QuestionEncoder& encoder, const HeadEmbeddings& embeddings,
                             const OutcomeMatrix& z, const SimilarityMatrix& sim,
                             const QuestionFeatures& features, double lambda,
                             std::span<const int> questions) {
  check_loss_inputs(encoder, embeddings, z, sim, features, lambda, questions);

  const int lh = embeddings.num_heads();
  const double inv_batch = 1.0 / static_cast<double>(questions.size());

  LossGradients g;
  g.d_weight = Eigen::MatrixXd::Zero(encoder.weight.rows(), encoder.weight.cols());
  g.d_bias = Eigen::VectorXd::Zero(encoder.bias.size());
  g.d_vectors = Eigen::MatrixXd::Zero(lh, embeddings.embedding_dim());

  double align_sum = 0.0;
  Eigen::VectorXd neg_sq_dist(lh);
  Eigen::VectorXd softmax_all(lh);
  Eigen::VectorXd softmax_pos(lh);
  for (int i : questions) {
    Eigen::VectorXd x = features.values.row(i).transpose();
    Eigen::VectorXd q = encode(encoder, x);
    auto row = z.row(i);
    for (int j = 0; j < lh; ++j) {
      neg_sq_dist(j) = -(q - embeddings.vectors.row(j).transpose()).squaredNorm();
    }
    align_sum += alignment_term(neg_sq_dist, row);

    double max_all = neg_sq_dist.maxCoeff();
    double max_pos = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < lh; ++j) {
      if (row[static_cast<std::size_t>(j)] != 0) max_pos = std::max(max_pos, neg_sq_dist(j));
    }
    double sum_all = 0.0, sum_pos = 0.0;
    for (int j = 0; j < lh; ++j) {
      softmax_all(j) = std::exp(neg_sq_dist(j) - max_all);
      sum_all += softmax_all(j);
      if (row[static_cast<std::size_t>(j)] != 0) {
        softmax_pos(j) = std::exp(neg_sq_dist(j) - max_pos);
        sum_pos += softmax_pos(j);
      } else {
        softmax_pos(j) = 0.0;
      }
    }
    softmax_all /= sum_all;
    softmax_pos /= sum_pos;

    // d(alignment_i)/d(d_j) = pos_j - all_j with d_j the squared distance;
    // d(d_j)/dq = 2(q - v_j), d(d_j)/dv_j = -2(q - v_j).
    Eigen::VectorXd d_q = Eigen::VectorXd::Zero(q.size());
    for (int j = 0; j < lh; ++j) {
      double coef = softmax_pos(j) - softmax_all(j);
      if (coef == 0.0) continue;
      Eigen::VectorXd diff = q - embeddings.vectors.row(j).transpose();
      d_q += coef * 2.0 * diff;
      g.d_vectors.row(j) -= inv_batch * coef * 2.0 * diff.transpose();
    }
    g.d_weight += inv_batch * x * d_q.transpose();
    g.d_bias += inv_batch * d_q;
  }

  // Spread term: total includes -lambda * sum_{j<k} s_jk |v_j - v_k|^2.
  for (int j = 0; j < lh; ++j) {
    for (int k = j + 1; k < lh; ++k) {
      double s = sim.value(j, k);
      if (s == 0.0) continue;
      Eigen::RowVectorXd diff = embeddings.vectors.row(j) - embeddings.vectors.row(k);
      g.d_vectors.row(j) += -2.0 * lambda * s * diff;
      g.d_vectors.row(k) += 2.0 * lambda * s * diff;
    }
  }

  g.value.alignment = align_sum * inv_batch;
  g.value.weighted_spread = weighted_spread(embeddings, sim);
  g.value.total = g.value.alignment - lambda * g.value.weighted_spread;
  return g;
}

namespace {

// First-order update state for one parameter block.
struct OptimizerState {
  Eigen::MatrixXd momentum;
  Eigen::MatrixXd second_moment;

  void init(Eigen::Index rows, Eigen::Index cols) {
    momentum = Eigen::MatrixXd::Zero(rows, cols);
    second_moment = Eigen::MatrixXd::Zero(rows, cols);
  }

  void apply(Eigen::Ref<Eigen::MatrixXd> param, const Eigen::MatrixXd& grad,
             const TrainConfig& cfg, int step) {
    switch (cfg.optimizer) {
      case OptimizerKind::sgd:
        param -= cfg.learning_rate * grad;
        return;
      case OptimizerKind::sgd_momentum:
        momentum = cfg.momentum * momentum + grad;
        param -= cfg.learning_rate * momentum;
        return;
      case OptimizerKind::adam: {
        momentum = cfg.adam_beta1 * momentum + (1.0 - cfg.adam_beta1) * grad;
        second_moment = cfg.adam_beta2 * second_moment.array().matrix() +
                        (1.0 - cfg.adam_beta2) * grad.cwiseProduct(grad);
        double bias1 = 1.0 - std::pow(cfg.adam_beta1, step);
        double bias2 = 1.0 - std::pow(cfg.adam_beta2, step);
        Eigen::ArrayXXd m_hat = momentum.array() / bias1;
        Eigen::ArrayXXd v_hat = second_moment.array() / bias2;
        param.array() -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_epsilon);
        return;
      }
    }
  }
};

void project_rows(Eigen::MatrixXd& vectors, double radius) {
  for (Eigen::Index j = 0; j < vectors.rows(); ++j) {
    double norm = vectors.row(j).norm();
    if (norm > radius) vectors.row(j) *= radius / norm;
  }
}

}  // namespace

TrainedModel train(const OutcomeMatrix& z, const QuestionFeatures& features,
                   const HeadCatalog& catalog, const TrainConfig& config) {
  config.validate();
  if (features.num_questions() != z.num_questions()) {
    throw align_error("features have " + std::to_string(features.num_questions()) +
                      " rows, outcomes have " + std::to_string(z.num_questions()));
  }
  if (catalog.size() != z.num_heads()) {
    throw align_error("catalog size does not match outcome columns");
  }

  // Rows where no pruned head was correct have an undefined alignment term
  // and are excluded; their count is reported on the model.
  std::vector<int> trainable;
  for (int i = 0; i < z.num_questions(); ++i) {
    auto row = z.row(i);
    if (std::any_of(row.begin(), row.end(), [](uint8_t b) { return b != 0; })) {
      trainable.push_back(i);
    }
  }
  if (trainable.empty()) {
    throw align_error("no trainable questions: every row has an empty positive head set");
  }

  const int f = features.feature_dim();
  const int p = config.embedding_dim;
  const int lh = z.num_heads();

  TrainedModel model{QuestionEncoder{Eigen::MatrixXd(f, p), Eigen::VectorXd::Zero(p)},
                     HeadEmbeddings{Eigen::MatrixXd(lh, p)},
                     catalog,
                     config,
                     {},
                     z.num_questions() - static_cast<int>(trainable.size())};

  constexpr double kInitStddev = 0.1;
  Rng w_rng = Rng::for_role(config.seed, "train/init_W");
  for (int r = 0; r < f; ++r) {
    for (int c = 0; c < p; ++c) model.encoder.weight(r, c) = kInitStddev * w_rng.normal();
  }
  Rng v_rng = Rng::for_role(config.seed, "train/init_V");
  for (int r = 0; r < lh; ++r) {
    for (int c = 0; c < p; ++c) model.embeddings.vectors(r, c) = kInitStddev * v_rng.normal();
  }

  SimilarityMatrix sim = similarity(z);
  auto full_loss = [&] {
    return loss(model.encoder, model.embeddings, z, sim, features, config.lambda, trainable);
  };
  model.loss_trace.emplace_back(0, full_loss().total);

  OptimizerState w_state, b_state, v_state;
  w_state.init(f, p);
  b_state.init(p, 1);
  v_state.init(lh, p);

  Rng shuffle_rng = Rng::for_role(config.seed, "train/shuffle");
  std::vector<int> order = trainable;
  shuffle_rng.shuffle(order);
  std::size_t cursor = 0;
  auto next_batch = [&] {
    std::vector<int> batch;
    batch.reserve(static_cast<std::size_t>(config.batch_size));
    while (batch.size() < static_cast<std::size_t>(config.batch_size)) {
      if (cursor == order.size()) {
        shuffle_rng.shuffle(order);
        cursor = 0;
      }
      batch.push_back(order[cursor++]);
    }
    return batch;
  };

  for (int step = 1; step <= config.steps; ++step) {
    std::vector<int> batch = next_batch();
    LossGradients g = loss_gradients(model.encoder, model.embeddings, z, sim, features,
                                     config.lambda, batch);
    if (!std::isfinite(g.value.total) || !g.d_weight.allFinite() || !g.d_bias.allFinite() ||
        !g.d_vectors.allFinite()) {
      throw numeric_error("training diverged at step " + std::to_string(step) +
                          " (non-finite loss or gradient); lower the learning rate");
    }
    w_state.apply(model.encoder.weight, g.d_weight, config, step);
    Eigen::MatrixXd bias_mat = model.encoder.bias;
    b_state.apply(bias_mat, g.d_bias, config, step);
    model.encoder.bias = bias_mat;
    v_state.apply(model.embeddings.vectors, g.d_vectors, config, step);
    project_rows(model.embeddings.vectors, config.radius);

    if (step % config.trace_every == 0 || step == config.steps) {
      double value = full_loss().total;
      if (!std::isfinite(value)) {
        throw numeric_error("training diverged at step " + std::to_string(step) +
                            " (non-finite objective); lower the learning rate");
      }
      model.loss_trace.emplace_back(step, value);
    }
  }
  return model;
}

}  // namespace sprint
