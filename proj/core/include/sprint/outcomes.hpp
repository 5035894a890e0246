#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sprint {

struct HeadEntry {
  int index;  // column position j
  int layer;
  int head;

  bool operator==(const HeadEntry&) const = default;
};

// Ordered list of the (layer, head) pairs behind the outcome columns.
// Rectangular: every layer contributes the same number of heads.
class HeadCatalog {
 public:
  explicit HeadCatalog(std::vector<HeadEntry> entries);

  static HeadCatalog dense(const std::vector<int>& layers, int heads_per_layer);
  static HeadCatalog single_layer(int num_heads, int layer = 0);

  int size() const { return static_cast<int>(entries_.size()); }
  int num_layers() const { return num_layers_; }
  int heads_per_layer() const { return heads_per_layer_; }
  const HeadEntry& entry(int j) const;
  const std::vector<HeadEntry>& entries() const { return entries_; }
  std::string column_label(int j) const;  // "L{layer}H{head}"

  bool operator==(const HeadCatalog& other) const { return entries_ == other.entries_; }

 private:
  std::vector<HeadEntry> entries_;
  int num_layers_ = 0;
  int heads_per_layer_ = 0;
};

// Binary per-question, per-pruned-head correctness matrix, with optional
// subject labels and an optional unpruned-baseline column. The baseline is
// kept outside the head columns on purpose: it is not a pruned variant.
class OutcomeMatrix {
 public:
  OutcomeMatrix(std::vector<std::string> question_ids, int num_heads, std::vector<uint8_t> bits,
                std::optional<std::vector<std::string>> subjects = std::nullopt,
                std::optional<std::vector<uint8_t>> baseline = std::nullopt);

  int num_questions() const { return static_cast<int>(ids_.size()); }
  int num_heads() const { return num_heads_; }
  bool value(int question, int head) const;
  std::span<const uint8_t> row(int question) const;

  const std::vector<std::string>& question_ids() const { return ids_; }
  bool has_subjects() const { return subjects_.has_value(); }
  const std::vector<std::string>& subjects() const;
  bool has_baseline() const { return baseline_.has_value(); }
  const std::vector<uint8_t>& baseline() const;

  OutcomeMatrix subset_rows(const std::vector<int>& rows) const;

 private:
  std::vector<std::string> ids_;
  int num_heads_;
  std::vector<uint8_t> bits_;  // row-major n x num_heads
  std::optional<std::vector<std::string>> subjects_;
  std::optional<std::vector<uint8_t>> baseline_;
};

struct RowPartition {
  std::vector<int> positive;  // heads with z_ij = 1
  std::vector<int> negative;
};

RowPartition partition_sets(const OutcomeMatrix& z, int question);

// Head-agreement fractions. Stored as exact integer agreement counts; the
// single division happens on access, so every entry is a multiple of 1/n.
class SimilarityMatrix {
 public:
  SimilarityMatrix(Eigen::MatrixXi agreement_counts, int num_questions);

  int size() const { return static_cast<int>(counts_.rows()); }
  int num_questions() const { return num_questions_; }
  int agreement_count(int j, int k) const { return counts_(j, k); }
  double value(int j, int k) const {
    return static_cast<double>(counts_(j, k)) / static_cast<double>(num_questions_);
  }
  Eigen::MatrixXd values() const;

 private:
  Eigen::MatrixXi counts_;
  int num_questions_;
};

SimilarityMatrix similarity(const OutcomeMatrix& z);

enum class GroupBy { subject, none };

struct GroupGain {
  std::string group;
  int n_questions = 0;
  double baseline_accuracy = 0.0;
  std::vector<double> head_accuracy;  // indexed by j
  int best_head = 0;                  // lowest j on ties
  double best_accuracy = 0.0;
  double gain = 0.0;                  // best - baseline
};

struct LayerGain {
  std::string group;
  int layer;
  double best_accuracy;
  double gain;
};

struct GainReport {
  std::vector<GroupGain> groups;
  std::vector<LayerGain> layer_gains;  // per (group, layer), for distribution plots
};

GainReport gain_stats(const OutcomeMatrix& z, const HeadCatalog& catalog, GroupBy group_by);

std::string gain_report_csv(const GainReport& report);

struct LoadedOutcomes {
  OutcomeMatrix matrix;
  HeadCatalog catalog;
};

// CSV with header `question_id[,subject][,base],L{l}H{h},...`, cells 0/1.
LoadedOutcomes load_outcomes(const std::filesystem::path& path);
void save_outcomes(const OutcomeMatrix& matrix, const HeadCatalog& catalog,
                   const std::filesystem::path& path);

HeadCatalog catalog_from_json(const std::string& text);
std::string catalog_to_json(const HeadCatalog& catalog);
HeadCatalog load_catalog(const std::filesystem::path& path);
void save_catalog(const HeadCatalog& catalog, const std::filesystem::path& path);

}  // namespace sprint
