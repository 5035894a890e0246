#include "sprint/attention.hpp"

#include <cmath>
#include <string>

#include "sprint/errors.hpp"

namespace sprint {

AttentionConfig::AttentionConfig(int heads, int dim, int model, int seq)
    : num_heads(heads), head_dim(dim), model_dim(model), seq_len(seq) {
  if (heads < 1 || dim < 1 || model < 1 || seq < 1) {
    throw usage_error("attention dimensions must all be >= 1");
  }
  if (model != heads * dim) {
    throw usage_error("model_dim must equal num_heads * head_dim (got " +
                      std::to_string(model) + " != " + std::to_string(heads) + " * " +
                      std::to_string(dim) + ")");
  }
}

void AttentionWeights::validate(const AttentionConfig& cfg) const {
  auto check_heads = [&](const std::vector<Eigen::MatrixXd>& ws, const char* name) {
    if (static_cast<int>(ws.size()) != cfg.num_heads) {
      throw align_error(std::string(name) + ": expected one matrix per head");
    }
    for (const auto& w : ws) {
      if (w.rows() != cfg.model_dim || w.cols() != cfg.head_dim) {
        throw align_error(std::string(name) + ": expected shape " +
                          std::to_string(cfg.model_dim) + "x" + std::to_string(cfg.head_dim));
      }
      if (!w.allFinite()) throw numeric_error(std::string(name) + ": non-finite entries");
    }
  };
  check_heads(w_query, "w_query");
  check_heads(w_key, "w_key");
  check_heads(w_value, "w_value");
  if (w_output.rows() != cfg.model_dim || w_output.cols() != cfg.model_dim) {
    throw align_error("w_output: expected shape " + std::to_string(cfg.model_dim) + "x" +
                      std::to_string(cfg.model_dim));
  }
  if (!w_output.allFinite()) throw numeric_error("w_output: non-finite entries");
  if (output_bias) {
    if (output_bias->size() != cfg.model_dim) {
      throw align_error("output_bias: expected length " + std::to_string(cfg.model_dim));
    }
    if (!output_bias->allFinite()) throw numeric_error("output_bias: non-finite entries");
  }
}

AttentionWeights AttentionWeights::random(const AttentionConfig& cfg, Rng& rng) {
  double scale = 1.0 / std::sqrt(static_cast<double>(cfg.model_dim));
  auto draw = [&](Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = scale * rng.normal();
    }
    return m;
  };
  AttentionWeights w;
  for (int h = 0; h < cfg.num_heads; ++h) {
    w.w_query.push_back(draw(cfg.model_dim, cfg.head_dim));
    w.w_key.push_back(draw(cfg.model_dim, cfg.head_dim));
    w.w_value.push_back(draw(cfg.model_dim, cfg.head_dim));
  }
  w.w_output = draw(cfg.model_dim, cfg.model_dim);
  return w;
}

HeadMask::HeadMask(int num_heads, int num_layers) : num_heads_(num_heads), num_layers_(num_layers) {
  if (num_heads < 1 || num_layers < 1) {
    throw usage_error("head mask needs at least one head and one layer");
  }
}

HeadMask HeadMask::single(int num_heads, int head) {
  HeadMask m(num_heads);
  m.prune(head);
  return m;
}

void HeadMask::prune(int layer, int head) {
  if (layer < 0 || layer >= num_layers_) {
    throw usage_error("mask layer " + std::to_string(layer) + " out of range");
  }
  if (head < 0 || head >= num_heads_) {
    throw usage_error("mask head " + std::to_string(head) + " out of range");
  }
  if (!pruned_.emplace(layer, head).second) {
    throw usage_error("duplicate mask entry for layer " + std::to_string(layer) + ", head " +
                      std::to_string(head));
  }
}

bool HeadMask::kept(int layer, int head) const {
  if (layer < 0 || layer >= num_layers_ || head < 0 || head >= num_heads_) {
    throw usage_error("mask lookup out of range");
  }
  return pruned_.find({layer, head}) == pruned_.end();
}

void softmax_rows(Eigen::MatrixXd& scores) {
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    double mx = scores.row(r).maxCoeff();
    scores.row(r) = (scores.row(r).array() - mx).exp();
    scores.row(r) /= scores.row(r).sum();
  }
}

static void check_forward_inputs(const Eigen::MatrixXd& input, const AttentionWeights& weights,
                                 const AttentionConfig& cfg, const HeadMask& mask, int layer) {
  weights.validate(cfg);
  if (input.rows() != cfg.seq_len || input.cols() != cfg.model_dim) {
    throw align_error("input: expected shape " + std::to_string(cfg.seq_len) + "x" +
                      std::to_string(cfg.model_dim) + ", got " + std::to_string(input.rows()) +
                      "x" + std::to_string(input.cols()));
  }
  if (!input.allFinite()) throw numeric_error("input: non-finite entries");
  if (mask.num_heads() != cfg.num_heads) {
    throw align_error("mask covers " + std::to_string(mask.num_heads()) + " heads, block has " +
                      std::to_string(cfg.num_heads));
  }
  if (layer < 0 || layer >= mask.num_layers()) {
    throw usage_error("layer " + std::to_string(layer) + " out of mask range");
  }
}

Eigen::MatrixXd mha_forward(const Eigen::MatrixXd& input, const AttentionWeights& weights,
                            const AttentionConfig& cfg, const HeadMask& mask, int layer) {
  check_forward_inputs(input, weights, cfg, mask, layer);

  Eigen::MatrixXd concat(cfg.seq_len, cfg.model_dim);
  double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(cfg.head_dim));
  for (int h = 0; h < cfg.num_heads; ++h) {
    auto slice = concat.middleCols(static_cast<Eigen::Index>(h) * cfg.head_dim, cfg.head_dim);
    if (!mask.kept(layer, h)) {
      slice.setZero();
      continue;
    }
    Eigen::MatrixXd q = input * weights.w_query[static_cast<std::size_t>(h)];
    Eigen::MatrixXd k = input * weights.w_key[static_cast<std::size_t>(h)];
    Eigen::MatrixXd v = input * weights.w_value[static_cast<std::size_t>(h)];
    Eigen::MatrixXd scores = q * k.transpose() * inv_sqrt_d;
    softmax_rows(scores);
    slice = scores * v;
  }

  Eigen::MatrixXd out = concat * weights.w_output;
  if (weights.output_bias) out.rowwise() += weights.output_bias->transpose();
  return out;
}

Eigen::MatrixXd mha_forward_zeroed_proj(const Eigen::MatrixXd& input,
                                        const AttentionWeights& weights,
                                        const AttentionConfig& cfg, const HeadMask& mask,
                                        int layer) {
  check_forward_inputs(input, weights, cfg, mask, layer);

  AttentionWeights modified = weights;
  for (int h = 0; h < cfg.num_heads; ++h) {
    if (!mask.kept(layer, h)) {
      modified.w_output.middleRows(static_cast<Eigen::Index>(h) * cfg.head_dim, cfg.head_dim)
          .setZero();
    }
  }
  return mha_forward(input, modified, cfg, HeadMask::none(cfg.num_heads));
}

Eigen::MatrixXd random_input(const AttentionConfig& cfg, Rng& rng) {
  Eigen::MatrixXd x(cfg.seq_len, cfg.model_dim);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = rng.normal();
  }
  return x;
}

AttnDemoReport attn_demo(const AttentionConfig& cfg, uint64_t seed) {
  Rng weight_rng = Rng::for_role(seed, "attn/weights");
  AttentionWeights weights = AttentionWeights::random(cfg, weight_rng);
  Rng input_rng = Rng::for_role(seed, "attn/input");
  Eigen::MatrixXd x = random_input(cfg, input_rng);

  AttnDemoReport report{cfg, seed, {}, 0.0};
  for (int h = 0; h < cfg.num_heads; ++h) {
    HeadMask mask = HeadMask::single(cfg.num_heads, h);
    Eigen::MatrixXd a = mha_forward(x, weights, cfg, mask);
    Eigen::MatrixXd b = mha_forward_zeroed_proj(x, weights, cfg, mask);
    double dev = (a - b).cwiseAbs().maxCoeff();
    report.lines.push_back({h, dev});
    report.max_abs_deviation = std::max(report.max_abs_deviation, dev);
  }
  return report;
}

}  // namespace sprint
