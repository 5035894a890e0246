#include "sprint/selector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sprint/errors.hpp"

namespace sprint {

std::vector<int> rank_by_distance(const std::vector<double>& squared_distances) {
  std::vector<int> order(squared_distances.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    double da = squared_distances[static_cast<std::size_t>(a)];
    double db = squared_distances[static_cast<std::size_t>(b)];
    if (da != db) return da < db;
    return a < b;
  });
  return order;
}

SelectionResult select(const TrainedModel& model, const Eigen::VectorXd& features) {
  if (features.size() != model.feature_dim()) {
    throw align_error("feature vector has dimension " + std::to_string(features.size()) +
                      ", model expects " + std::to_string(model.feature_dim()));
  }
  if (!features.allFinite()) throw numeric_error("feature vector has non-finite entries");

  Eigen::VectorXd q = encode(model.encoder, features);
  std::vector<double> dist(static_cast<std::size_t>(model.num_heads()));
  for (int j = 0; j < model.num_heads(); ++j) {
    dist[static_cast<std::size_t>(j)] =
        (q - model.embeddings.vectors.row(j).transpose()).squaredNorm();
  }

  SelectionResult result;
  for (int j : rank_by_distance(dist)) {
    const HeadEntry& e = model.catalog.entry(j);
    result.ranked.push_back({j, e.layer, e.head, dist[static_cast<std::size_t>(j)]});
  }
  return result;
}

TopNSelection select_top_n(const TrainedModel& model, const Eigen::VectorXd& features, int n) {
  if (n < 1) throw usage_error("top-n must be >= 1");
  SelectionResult full = select(model, features);
  TopNSelection out;
  out.clamped = n > model.num_heads();
  int take = std::min(n, model.num_heads());
  for (int i = 0; i < take; ++i) out.heads.push_back(full.ranked[static_cast<std::size_t>(i)].index);
  return out;
}

}  // namespace sprint
