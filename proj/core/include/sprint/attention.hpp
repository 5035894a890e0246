#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "sprint/rng.hpp"

namespace sprint {

// Dimensions of one multi-head attention block. model_dim must equal
// num_heads * head_dim; construction enforces it.
struct AttentionConfig {
  int num_heads;
  int head_dim;
  int model_dim;
  int seq_len;

  AttentionConfig(int heads, int dim, int model, int seq);

  static AttentionConfig make(int heads, int dim, int seq) {
    return AttentionConfig(heads, dim, heads * dim, seq);
  }
};

struct AttentionWeights {
  std::vector<Eigen::MatrixXd> w_query;  // per head, model_dim x head_dim
  std::vector<Eigen::MatrixXd> w_key;
  std::vector<Eigen::MatrixXd> w_value;
  Eigen::MatrixXd w_output;  // model_dim x model_dim
  std::optional<Eigen::VectorXd> output_bias;

  void validate(const AttentionConfig& cfg) const;

  static AttentionWeights random(const AttentionConfig& cfg, Rng& rng);
};

// Which heads are zeroed. Holds (layer, head) pairs; layer 0 is the
// single-block view.
class HeadMask {
 public:
  explicit HeadMask(int num_heads, int num_layers = 1);

  static HeadMask none(int num_heads) { return HeadMask(num_heads); }
  static HeadMask single(int num_heads, int head);

  void prune(int head) { prune(0, head); }
  void prune(int layer, int head);

  bool kept(int head) const { return kept(0, head); }
  bool kept(int layer, int head) const;

  bool any_pruned() const { return !pruned_.empty(); }
  const std::set<std::pair<int, int>>& pruned_pairs() const { return pruned_; }
  int num_heads() const { return num_heads_; }
  int num_layers() const { return num_layers_; }

 private:
  int num_heads_;
  int num_layers_;
  std::set<std::pair<int, int>> pruned_;
};

// Row-wise softmax with max subtraction.
void softmax_rows(Eigen::MatrixXd& scores);

// Scaled dot-product multi-head attention over a seq_len x model_dim input.
// Pruned heads have their output vectors zeroed before the concatenation
// that feeds w_output.
Eigen::MatrixXd mha_forward(const Eigen::MatrixXd& input, const AttentionWeights& weights,
                            const AttentionConfig& cfg, const HeadMask& mask, int layer = 0);

// Same map, realized by zeroing the w_output rows that belong to the pruned
// heads and running the dense forward. Serves as an independent oracle for
// mha_forward.
Eigen::MatrixXd mha_forward_zeroed_proj(const Eigen::MatrixXd& input,
                                        const AttentionWeights& weights,
                                        const AttentionConfig& cfg, const HeadMask& mask,
                                        int layer = 0);

Eigen::MatrixXd random_input(const AttentionConfig& cfg, Rng& rng);

struct AttnDemoLine {
  int head;
  double max_abs_deviation;
};

struct AttnDemoReport {
  AttentionConfig config;
  uint64_t seed;
  std::vector<AttnDemoLine> lines;  // one per single-head mask
  double max_abs_deviation;
};

// Generates seeded weights and input, runs both forwards for every
// single-head mask, and reports the per-mask deviation.
AttnDemoReport attn_demo(const AttentionConfig& cfg, uint64_t seed);

}  // namespace sprint
