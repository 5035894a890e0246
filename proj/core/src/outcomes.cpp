#include "sprint/outcomes.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sprint/errors.hpp"

namespace sprint {

using nlohmann::json;

HeadCatalog::HeadCatalog(std::vector<HeadEntry> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) throw parse_error("head catalog is empty");
  std::set<std::pair<int, int>> seen;
  std::map<int, int> per_layer;
  for (std::size_t j = 0; j < entries_.size(); ++j) {
    const HeadEntry& e = entries_[j];
    if (e.index != static_cast<int>(j)) {
      throw parse_error("head catalog index " + std::to_string(e.index) +
                        " does not match its position " + std::to_string(j));
    }
    if (e.layer < 0 || e.head < 0) throw parse_error("head catalog entries must be non-negative");
    if (!seen.emplace(e.layer, e.head).second) {
      throw parse_error("duplicate catalog entry for layer " + std::to_string(e.layer) +
                        ", head " + std::to_string(e.head));
    }
    per_layer[e.layer] += 1;
  }
  num_layers_ = static_cast<int>(per_layer.size());
  heads_per_layer_ = per_layer.begin()->second;
  for (const auto& [layer, count] : per_layer) {
    if (count != heads_per_layer_) {
      throw parse_error("layer " + std::to_string(layer) + " has " + std::to_string(count) +
                        " heads, expected " + std::to_string(heads_per_layer_));
    }
  }
}

HeadCatalog HeadCatalog::dense(const std::vector<int>& layers, int heads_per_layer) {
  std::vector<HeadEntry> entries;
  int j = 0;
  for (int layer : layers) {
    for (int h = 0; h < heads_per_layer; ++h) entries.push_back({j++, layer, h});
  }
  return HeadCatalog(std::move(entries));
}

HeadCatalog HeadCatalog::single_layer(int num_heads, int layer) {
  return dense({layer}, num_heads);
}

const HeadEntry& HeadCatalog::entry(int j) const {
  if (j < 0 || j >= size()) throw usage_error("catalog index " + std::to_string(j) + " out of range");
  return entries_[static_cast<std::size_t>(j)];
}

std::string HeadCatalog::column_label(int j) const {
  const HeadEntry& e = entry(j);
  return "L" + std::to_string(e.layer) + "H" + std::to_string(e.head);
}

OutcomeMatrix::OutcomeMatrix(std::vector<std::string> question_ids, int num_heads,
                             std::vector<uint8_t> bits,
                             std::optional<std::vector<std::string>> subjects,
                             std::optional<std::vector<uint8_t>> baseline)
    : ids_(std::move(question_ids)),
      num_heads_(num_heads),
      bits_(std::move(bits)),
      subjects_(std::move(subjects)),
      baseline_(std::move(baseline)) {
  if (ids_.empty()) throw parse_error("outcome matrix needs at least one question");
  if (num_heads_ < 1) throw parse_error("outcome matrix needs at least one head column");
  if (bits_.size() != ids_.size() * static_cast<std::size_t>(num_heads_)) {
    throw align_error("outcome bits size does not match n x heads");
  }
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i] > 1) {
      throw parse_error("outcome cell at flat index " + std::to_string(i) + " is not 0/1");
    }
  }
  std::set<std::string> seen;
  for (const auto& id : ids_) {
    if (id.empty()) throw parse_error("empty question id");
    if (!seen.insert(id).second) throw parse_error("duplicate question id '" + id + "'");
  }
  if (subjects_ && subjects_->size() != ids_.size()) {
    throw align_error("subject labels do not match question count");
  }
  if (baseline_) {
    if (baseline_->size() != ids_.size()) throw align_error("baseline does not match question count");
    for (uint8_t b : *baseline_) {
      if (b > 1) throw parse_error("baseline cell is not 0/1");
    }
  }
}

bool OutcomeMatrix::value(int question, int head) const {
  if (question < 0 || question >= num_questions() || head < 0 || head >= num_heads_) {
    throw usage_error("outcome lookup out of range");
  }
  return bits_[static_cast<std::size_t>(question) * static_cast<std::size_t>(num_heads_) +
               static_cast<std::size_t>(head)] != 0;
}

std::span<const uint8_t> OutcomeMatrix::row(int question) const {
  if (question < 0 || question >= num_questions()) {
    throw usage_error("row index " + std::to_string(question) + " out of range");
  }
  return {bits_.data() + static_cast<std::size_t>(question) * static_cast<std::size_t>(num_heads_),
          static_cast<std::size_t>(num_heads_)};
}

const std::vector<std::string>& OutcomeMatrix::subjects() const {
  if (!subjects_) throw usage_error("outcome matrix has no subject labels");
  return *subjects_;
}

const std::vector<uint8_t>& OutcomeMatrix::baseline() const {
  if (!baseline_) {
    throw usage_error(
        "outcome matrix has no baseline column; re-export the CSV with a 'base' column holding "
        "the unpruned model's 0/1 correctness per question");
  }
  return *baseline_;
}

OutcomeMatrix OutcomeMatrix::subset_rows(const std::vector<int>& rows) const {
  std::vector<std::string> ids;
  std::vector<uint8_t> bits;
  std::optional<std::vector<std::string>> subjects;
  std::optional<std::vector<uint8_t>> baseline;
  if (subjects_) subjects.emplace();
  if (baseline_) baseline.emplace();
  for (int r : rows) {
    auto src = row(r);
    ids.push_back(ids_[static_cast<std::size_t>(r)]);
    bits.insert(bits.end(), src.begin(), src.end());
    if (subjects_) subjects->push_back((*subjects_)[static_cast<std::size_t>(r)]);
    if (baseline_) baseline->push_back((*baseline_)[static_cast<std::size_t>(r)]);
  }
  return OutcomeMatrix(std::move(ids), num_heads_, std::move(bits), std::move(subjects),
                       std::move(baseline));
}

RowPartition partition_sets(const OutcomeMatrix& z, int question) {
  RowPartition part;
  auto r = z.row(question);
  for (int j = 0; j < z.num_heads(); ++j) {
    (r[static_cast<std::size_t>(j)] != 0 ? part.positive : part.negative).push_back(j);
  }
  return part;
}

SimilarityMatrix::SimilarityMatrix(Eigen::MatrixXi agreement_counts, int num_questions)
    : counts_(std::move(agreement_counts)), num_questions_(num_questions) {
  if (counts_.rows() != counts_.cols()) throw usage_error("similarity counts must be square");
  if (num_questions_ < 1) throw usage_error("similarity needs n >= 1");
}

Eigen::MatrixXd SimilarityMatrix::values() const {
  return counts_.cast<double>() / static_cast<double>(num_questions_);
}

SimilarityMatrix similarity(const OutcomeMatrix& z) {
  const int lh = z.num_heads();
  const int n = z.num_questions();
  Eigen::MatrixXi counts = Eigen::MatrixXi::Zero(lh, lh);
  for (int j = 0; j < lh; ++j) {
    counts(j, j) = n;
    for (int k = j + 1; k < lh; ++k) {
      int agree = 0;
      for (int i = 0; i < n; ++i) {
        auto r = z.row(i);
        if (r[static_cast<std::size_t>(j)] == r[static_cast<std::size_t>(k)]) ++agree;
      }
      counts(j, k) = agree;
      counts(k, j) = agree;
    }
  }
  return SimilarityMatrix(std::move(counts), n);
}

GainReport gain_stats(const OutcomeMatrix& z, const HeadCatalog& catalog, GroupBy group_by) {
  const auto& base = z.baseline();  // throws with guidance when absent
  if (catalog.size() != z.num_heads()) {
    throw align_error("catalog size does not match outcome columns");
  }

  // Group rows, preserving first-appearance order.
  std::vector<std::string> group_names;
  std::vector<std::vector<int>> group_rows;
  if (group_by == GroupBy::subject && z.has_subjects()) {
    std::map<std::string, int> pos;
    for (int i = 0; i < z.num_questions(); ++i) {
      const std::string& s = z.subjects()[static_cast<std::size_t>(i)];
      auto it = pos.find(s);
      if (it == pos.end()) {
        pos.emplace(s, static_cast<int>(group_names.size()));
        group_names.push_back(s);
        group_rows.emplace_back();
        it = pos.find(s);
      }
      group_rows[static_cast<std::size_t>(it->second)].push_back(i);
    }
  } else {
    group_names.push_back("all");
    group_rows.emplace_back();
    for (int i = 0; i < z.num_questions(); ++i) group_rows[0].push_back(i);
  }

  GainReport report;
  for (std::size_t g = 0; g < group_names.size(); ++g) {
    const auto& rows = group_rows[g];
    GroupGain gg;
    gg.group = group_names[g];
    gg.n_questions = static_cast<int>(rows.size());

    int base_hits = 0;
    for (int i : rows) base_hits += base[static_cast<std::size_t>(i)];
    gg.baseline_accuracy = static_cast<double>(base_hits) / static_cast<double>(rows.size());

    gg.head_accuracy.resize(static_cast<std::size_t>(z.num_heads()));
    for (int j = 0; j < z.num_heads(); ++j) {
      int hits = 0;
      for (int i : rows) hits += z.value(i, j) ? 1 : 0;
      gg.head_accuracy[static_cast<std::size_t>(j)] =
          static_cast<double>(hits) / static_cast<double>(rows.size());
    }
    gg.best_head = 0;
    for (int j = 1; j < z.num_heads(); ++j) {
      if (gg.head_accuracy[static_cast<std::size_t>(j)] >
          gg.head_accuracy[static_cast<std::size_t>(gg.best_head)]) {
        gg.best_head = j;
      }
    }
    gg.best_accuracy = gg.head_accuracy[static_cast<std::size_t>(gg.best_head)];
    gg.gain = gg.best_accuracy - gg.baseline_accuracy;

    // Per-layer bests within the group feed the distribution plot.
    std::map<int, double> layer_best;
    for (int j = 0; j < z.num_heads(); ++j) {
      int layer = catalog.entry(j).layer;
      double acc = gg.head_accuracy[static_cast<std::size_t>(j)];
      auto it = layer_best.find(layer);
      if (it == layer_best.end() || acc > it->second) layer_best[layer] = acc;
    }
    for (const auto& [layer, acc] : layer_best) {
      report.layer_gains.push_back({gg.group, layer, acc, acc - gg.baseline_accuracy});
    }
    report.groups.push_back(std::move(gg));
  }
  return report;
}

static std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string gain_report_csv(const GainReport& report) {
  std::ostringstream os;
  os << "group,layer,best_accuracy,baseline_accuracy,gain\n";
  for (const auto& lg : report.layer_gains) {
    double baseline = lg.best_accuracy - lg.gain;
    os << lg.group << "," << lg.layer << "," << format_double(lg.best_accuracy) << ","
       << format_double(baseline) << "," << format_double(lg.gain) << "\n";
  }
  return os.str();
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cell);
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  out.push_back(cell);
  return out;
}

bool parse_head_label(const std::string& label, int& layer, int& head) {
  if (label.size() < 4 || label[0] != 'L') return false;
  std::size_t h_pos = label.find('H', 1);
  if (h_pos == std::string::npos || h_pos == 1 || h_pos + 1 >= label.size()) return false;
  for (std::size_t i = 1; i < h_pos; ++i) {
    if (!std::isdigit(static_cast<unsigned char>(label[i]))) return false;
  }
  for (std::size_t i = h_pos + 1; i < label.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(label[i]))) return false;
  }
  layer = std::stoi(label.substr(1, h_pos - 1));
  head = std::stoi(label.substr(h_pos + 1));
  return true;
}

uint8_t parse_bit(const std::string& cell, const std::string& where) {
  if (cell == "0") return 0;
  if (cell == "1") return 1;
  throw parse_error("binary violation at " + where + ": cell '" + cell + "' is not 0 or 1");
}

}  // namespace

LoadedOutcomes load_outcomes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open outcomes file '" + path.string() + "'");

  std::string line;
  if (!std::getline(in, line)) throw parse_error("outcomes file '" + path.string() + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  auto header = split_csv_line(line);
  if (header.empty() || header[0] != "question_id") {
    throw parse_error("outcomes header must start with 'question_id'");
  }
  std::size_t col = 1;
  bool has_subject = col < header.size() && header[col] == "subject";
  if (has_subject) ++col;
  bool has_base = col < header.size() && header[col] == "base";
  if (has_base) ++col;

  std::vector<HeadEntry> entries;
  for (std::size_t c = col; c < header.size(); ++c) {
    int layer = 0, head = 0;
    if (!parse_head_label(header[c], layer, head)) {
      throw parse_error("header/catalog mismatch: column '" + header[c] +
                        "' is not of the form L<layer>H<head>");
    }
    entries.push_back({static_cast<int>(entries.size()), layer, head});
  }
  if (entries.empty()) throw parse_error("outcomes file has no head columns");
  HeadCatalog catalog = [&] {
    try {
      return HeadCatalog(std::move(entries));
    } catch (const Error& e) {
      throw parse_error(std::string("header/catalog mismatch: ") + e.what());
    }
  }();

  std::vector<std::string> ids;
  std::vector<std::string> subjects;
  std::vector<uint8_t> baseline;
  std::vector<uint8_t> bits;
  int row_number = 1;
  while (std::getline(in, line)) {
    ++row_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw parse_error("row " + std::to_string(row_number) + " has " +
                        std::to_string(cells.size()) + " cells, header has " +
                        std::to_string(header.size()));
    }
    std::size_t c = 0;
    ids.push_back(cells[c++]);
    if (has_subject) subjects.push_back(cells[c++]);
    if (has_base) {
      baseline.push_back(
          parse_bit(cells[c], "row " + std::to_string(row_number) + ", column 'base'"));
      ++c;
    }
    for (int j = 0; c < cells.size(); ++c, ++j) {
      bits.push_back(parse_bit(cells[c], "row " + std::to_string(row_number) + ", column '" +
                                             catalog.column_label(j) + "'"));
    }
  }
  if (ids.empty()) throw parse_error("outcomes file '" + path.string() + "' has no data rows");

  OutcomeMatrix matrix(std::move(ids), catalog.size(), std::move(bits),
                       has_subject ? std::optional(std::move(subjects)) : std::nullopt,
                       has_base ? std::optional(std::move(baseline)) : std::nullopt);
  return LoadedOutcomes{std::move(matrix), std::move(catalog)};
}

void save_outcomes(const OutcomeMatrix& matrix, const HeadCatalog& catalog,
                   const std::filesystem::path& path) {
  if (catalog.size() != matrix.num_heads()) {
    throw align_error("catalog size does not match outcome columns");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write outcomes file '" + path.string() + "'");

  out << "question_id";
  if (matrix.has_subjects()) out << ",subject";
  if (matrix.has_baseline()) out << ",base";
  for (int j = 0; j < catalog.size(); ++j) out << "," << catalog.column_label(j);
  out << "\n";

  for (int i = 0; i < matrix.num_questions(); ++i) {
    out << matrix.question_ids()[static_cast<std::size_t>(i)];
    if (matrix.has_subjects()) out << "," << matrix.subjects()[static_cast<std::size_t>(i)];
    if (matrix.has_baseline())
      out << "," << static_cast<int>(matrix.baseline()[static_cast<std::size_t>(i)]);
    for (int j = 0; j < matrix.num_heads(); ++j) out << "," << (matrix.value(i, j) ? 1 : 0);
    out << "\n";
  }
  if (!out) throw io_error("failed while writing '" + path.string() + "'");
}

HeadCatalog catalog_from_json(const std::string& text) {
  json parsed;
  try {
    parsed = json::parse(text);
  } catch (const json::exception& e) {
    throw parse_error(std::string("catalog JSON: ") + e.what());
  }
  if (!parsed.is_array()) throw parse_error("catalog JSON must be an array");
  std::vector<HeadEntry> entries;
  for (const auto& item : parsed) {
    if (!item.is_object() || !item.contains("j") || !item.contains("layer") ||
        !item.contains("head")) {
      throw parse_error("catalog JSON entries need fields j, layer, head");
    }
    entries.push_back({item["j"].get<int>(), item["layer"].get<int>(), item["head"].get<int>()});
  }
  return HeadCatalog(std::move(entries));
}

std::string catalog_to_json(const HeadCatalog& catalog) {
  json arr = json::array();
  for (const auto& e : catalog.entries()) {
    arr.push_back({{"j", e.index}, {"layer", e.layer}, {"head", e.head}});
  }
  return arr.dump();
}

HeadCatalog load_catalog(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open catalog file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return catalog_from_json(buf.str());
}

void save_catalog(const HeadCatalog& catalog, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write catalog file '" + path.string() + "'");
  out << catalog_to_json(catalog) << "\n";
  if (!out) throw io_error("failed while writing '" + path.string() + "'");
}

}  // namespace sprint
