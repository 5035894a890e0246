#pragma once

#include <Eigen/Dense>
#include <vector>

#include "sprint/trainer.hpp"

namespace sprint {

struct RankedHead {
  int index;
  int layer;
  int head;
  double squared_distance;
};

struct SelectionResult {
  std::vector<RankedHead> ranked;  // ascending distance; ties by ascending index

  int chosen() const { return ranked.front().index; }
};

// Head indices sorted by ascending value, ties by ascending index.
std::vector<int> rank_by_distance(const std::vector<double>& squared_distances);

// Ranks every head by squared Euclidean distance between its embedding and
// the encoded question.
SelectionResult select(const TrainedModel& model, const Eigen::VectorXd& features);

struct TopNSelection {
  std::vector<int> heads;  // first min(n, num_heads) of the ranking
  bool clamped = false;    // n exceeded the number of heads
};

TopNSelection select_top_n(const TrainedModel& model, const Eigen::VectorXd& features, int n);

}  // namespace sprint
