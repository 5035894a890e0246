#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "sprint/errors.hpp"
#include "sprint/outcomes.hpp"
#include "support/oracles.hpp"

using namespace sprint;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& text) {
  auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path, std::ios::binary);
  out << text;
  return path;
}

OutcomeMatrix tiny_matrix(std::vector<uint8_t> bits, int heads,
                          std::optional<std::vector<uint8_t>> baseline = std::nullopt,
                          std::optional<std::vector<std::string>> subjects = std::nullopt) {
  int n = static_cast<int>(bits.size()) / heads;
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) ids.push_back("q" + std::to_string(i));
  return OutcomeMatrix(std::move(ids), heads, std::move(bits), std::move(subjects),
                       std::move(baseline));
}

}  // namespace

TEST_CASE("catalog validation") {
  auto cat = HeadCatalog::dense({5, 15}, 2);
  CHECK(cat.size() == 4);
  CHECK(cat.num_layers() == 2);
  CHECK(cat.heads_per_layer() == 2);
  CHECK(cat.column_label(3) == "L15H1");
  CHECK(cat.entry(2).layer == 15);

  CHECK_THROWS_AS(HeadCatalog({{0, 0, 0}, {0, 0, 1}}), Error);          // index/position
  CHECK_THROWS_AS(HeadCatalog({{0, 0, 0}, {1, 0, 0}}), Error);          // duplicate pair
  CHECK_THROWS_AS(HeadCatalog({{0, 0, 0}, {1, 1, 0}, {2, 1, 1}}), Error);  // ragged layers
}

TEST_CASE("catalog JSON round trip") {
  auto cat = HeadCatalog::dense({0, 5, 15, 27}, 3);
  auto copy = catalog_from_json(catalog_to_json(cat));
  CHECK(copy == cat);
  CHECK_THROWS_AS(catalog_from_json("{not json"), Error);
  CHECK_THROWS_AS(catalog_from_json("[{\"j\":0}]"), Error);
}

TEST_CASE("loads a small outcomes CSV") {
  auto path = write_temp("outcomes_small.csv",
                         "question_id,L0H0,L0H1\n"
                         "a,1,0\n"
                         "b,0,0\n"
                         "c,1,1\n");
  auto loaded = load_outcomes(path);
  CHECK(loaded.matrix.num_questions() == 3);
  CHECK(loaded.matrix.num_heads() == 2);
  CHECK(loaded.catalog.size() == 2);
  CHECK(loaded.matrix.value(0, 0));
  CHECK_FALSE(loaded.matrix.value(1, 1));
  CHECK_FALSE(loaded.matrix.has_baseline());
  CHECK_FALSE(loaded.matrix.has_subjects());
}

TEST_CASE("rejects non-binary cells by row and column") {
  auto path = write_temp("outcomes_bad_cell.csv",
                         "question_id,L0H0,L0H1\n"
                         "a,1,0\n"
                         "b,2,0\n");
  try {
    load_outcomes(path);
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.error_class() == ErrorClass::parse);
    std::string msg = e.what();
    CHECK(msg.find("row 3") != std::string::npos);
    CHECK(msg.find("L0H0") != std::string::npos);
  }
}

TEST_CASE("parses subject and base columns") {
  auto path = write_temp("outcomes_full.csv",
                         "question_id,subject,base,L5H0,L5H1\n"
                         "a,algebra,1,1,0\n"
                         "b,geometry,0,0,1\n");
  auto loaded = load_outcomes(path);
  CHECK(loaded.matrix.has_subjects());
  CHECK(loaded.matrix.has_baseline());
  CHECK(loaded.matrix.subjects()[1] == "geometry");
  CHECK(loaded.matrix.baseline()[0] == 1);
}

TEST_CASE("rejects malformed headers and rows") {
  CHECK_THROWS_AS(load_outcomes(write_temp("h1.csv", "id,L0H0\na,1\n")), Error);
  CHECK_THROWS_AS(load_outcomes(write_temp("h2.csv", "question_id,H0\na,1\n")), Error);
  CHECK_THROWS_AS(load_outcomes(write_temp("h3.csv", "question_id,L0H0,L0H0\na,1,1\n")), Error);
  CHECK_THROWS_AS(load_outcomes(write_temp("h4.csv", "question_id,L0H0\na,1\na,0\n")), Error);
  CHECK_THROWS_AS(load_outcomes(write_temp("h5.csv", "question_id,L0H0\na\n")), Error);
  CHECK_THROWS_AS(load_outcomes(write_temp("h6.csv", "question_id,L0H0\n")), Error);
  CHECK_THROWS_AS(load_outcomes("/nonexistent/file.csv"), Error);
}

TEST_CASE("outcomes CSV round trips") {
  Rng rng(31);
  auto z = oracles::random_outcomes(rng, 12, 6, 0.4, false);
  auto cat = HeadCatalog::dense({1, 9}, 3);
  auto path = std::filesystem::temp_directory_path() / "outcomes_rt.csv";
  save_outcomes(z, cat, path);
  auto loaded = load_outcomes(path);
  CHECK(loaded.catalog == cat);
  REQUIRE(loaded.matrix.num_questions() == z.num_questions());
  for (int i = 0; i < z.num_questions(); ++i) {
    CHECK(loaded.matrix.question_ids()[static_cast<std::size_t>(i)] ==
          z.question_ids()[static_cast<std::size_t>(i)]);
    for (int j = 0; j < z.num_heads(); ++j) CHECK(loaded.matrix.value(i, j) == z.value(i, j));
  }
}

TEST_CASE("partition_sets splits a row into its positive and negative heads") {
  auto z = tiny_matrix({1, 0, 1, 0, 0, 0, 1, 1, 1}, 3);
  auto p0 = partition_sets(z, 0);
  CHECK(p0.positive == std::vector<int>{0, 2});
  CHECK(p0.negative == std::vector<int>{1});
  CHECK(partition_sets(z, 1).positive.empty());
  CHECK(partition_sets(z, 2).negative.empty());
  CHECK_THROWS_AS(partition_sets(z, 3), Error);
  CHECK_THROWS_AS(partition_sets(z, -1), Error);
}

TEST_CASE("partition is exact on random rows") {
  Rng rng(41);
  auto z = oracles::random_outcomes(rng, 20, 9, 0.5, false);
  for (int i = 0; i < z.num_questions(); ++i) {
    auto part = partition_sets(z, i);
    CHECK(part.positive.size() + part.negative.size() == 9);
    for (int j : part.positive) CHECK(z.value(i, j));
    for (int j : part.negative) CHECK_FALSE(z.value(i, j));
  }
}

TEST_CASE("similarity diagonal is one and hand cases match") {
  // columns: j=(1,0,1), k=(1,1,1) agree on rows 0 and 2.
  auto z = tiny_matrix({1, 1, 0, 1, 1, 1}, 2);
  auto s = similarity(z);
  CHECK(s.value(0, 0) == 1.0);
  CHECK(s.value(1, 1) == 1.0);
  CHECK(s.agreement_count(0, 1) == 2);
  CHECK(s.value(0, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

  auto comp = tiny_matrix({1, 0, 0, 1}, 2);
  CHECK(similarity(comp).value(0, 1) == 0.0);
}

TEST_CASE("similarity equals the brute-force triple loop in integer counts") {
  Rng rng(43);
  for (int trial = 0; trial < 25; ++trial) {
    int n = 1 + rng.uniform_int(50);
    int lh = 2 + rng.uniform_int(19);
    auto z = oracles::random_outcomes(rng, n, lh, 0.5, false);
    auto s = similarity(z);
    for (int j = 0; j < lh; ++j) {
      for (int k = 0; k < lh; ++k) {
        int count = 0;
        for (int i = 0; i < n; ++i) {
          if (z.value(i, j) == z.value(i, k)) ++count;
        }
        CHECK(s.agreement_count(j, k) == count);
      }
    }
  }
}

TEST_CASE("similarity is symmetric and invariant to row permutation") {
  Rng rng(47);
  auto z = oracles::random_outcomes(rng, 15, 7, 0.5, false);
  auto s = similarity(z);
  std::vector<int> perm(15);
  for (int i = 0; i < 15; ++i) perm[static_cast<std::size_t>(i)] = i;
  rng.shuffle(perm);
  auto s_perm = similarity(z.subset_rows(perm));
  for (int j = 0; j < 7; ++j) {
    for (int k = 0; k < 7; ++k) {
      CHECK(s.agreement_count(j, k) == s.agreement_count(k, j));
      CHECK(s.agreement_count(j, k) == s_perm.agreement_count(j, k));
    }
  }
}

TEST_CASE("gain matches the paper-scale example") {
  // 25 questions: baseline solves 10 (0.40), the best head solves 14 (0.56).
  std::vector<uint8_t> bits;
  std::vector<uint8_t> base;
  for (int i = 0; i < 25; ++i) {
    base.push_back(i < 10 ? 1 : 0);
    bits.push_back(i < 14 ? 1 : 0);  // head 0
    bits.push_back(i < 5 ? 1 : 0);   // head 1
  }
  auto z = tiny_matrix(bits, 2, base);
  auto report = gain_stats(z, HeadCatalog::single_layer(2), GroupBy::none);
  REQUIRE(report.groups.size() == 1);
  const auto& g = report.groups[0];
  CHECK(g.group == "all");
  CHECK(g.baseline_accuracy == 10.0 / 25.0);
  CHECK(g.best_head == 0);
  CHECK(g.best_accuracy == 14.0 / 25.0);
  CHECK(g.gain == 14.0 / 25.0 - 10.0 / 25.0);
  CHECK(g.gain == doctest::Approx(0.16).epsilon(1e-12));
}

TEST_CASE("a head identical to the baseline has zero gain contribution") {
  std::vector<uint8_t> base{1, 0, 1, 0};
  std::vector<uint8_t> bits{1, 0, 0, 1, 1, 0, 0, 1};  // head 0 == baseline
  auto z = tiny_matrix(bits, 2, base);
  auto report = gain_stats(z, HeadCatalog::single_layer(2), GroupBy::none);
  CHECK(report.groups[0].head_accuracy[0] == report.groups[0].baseline_accuracy);
}

TEST_CASE("per-subject gains equal hand counts") {
  // algebra: 4 rows, baseline 2/4; head0 3/4, head1 1/4.
  // geometry: 2 rows, baseline 1/2; head0 0/2, head1 2/2.
  std::vector<std::string> subjects{"algebra", "algebra", "algebra", "algebra", "geometry",
                                    "geometry"};
  std::vector<uint8_t> base{1, 1, 0, 0, 1, 0};
  std::vector<uint8_t> bits{
      1, 0, 1, 0, 1, 1, 0, 0,  // algebra rows
      0, 1, 0, 1,              // geometry rows
  };
  auto z = tiny_matrix(bits, 2, base, subjects);
  auto report = gain_stats(z, HeadCatalog::single_layer(2), GroupBy::subject);
  REQUIRE(report.groups.size() == 2);
  CHECK(report.groups[0].group == "algebra");
  CHECK(report.groups[0].baseline_accuracy == 0.5);
  CHECK(report.groups[0].best_head == 0);
  CHECK(report.groups[0].best_accuracy == 0.75);
  CHECK(report.groups[0].gain == 0.25);
  CHECK(report.groups[1].group == "geometry");
  CHECK(report.groups[1].best_head == 1);
  CHECK(report.groups[1].best_accuracy == 1.0);
  CHECK(report.groups[1].gain == 0.5);
  CHECK(report.layer_gains.size() == 2);  // one layer per group
}

TEST_CASE("gain_stats without a baseline explains how to supply one") {
  auto z = tiny_matrix({1, 0}, 2);
  try {
    gain_stats(z, HeadCatalog::single_layer(2), GroupBy::none);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("base") != std::string::npos);
  }
}

TEST_CASE("gain respects its analytic range and ignores row order") {
  Rng rng(53);
  for (int trial = 0; trial < 20; ++trial) {
    int n = 4 + rng.uniform_int(20);
    int lh = 2 + rng.uniform_int(6);
    auto z0 = oracles::random_outcomes(rng, n, lh, 0.5, false);
    std::vector<uint8_t> base;
    for (int i = 0; i < n; ++i) base.push_back(rng.uniform() < 0.5 ? 1 : 0);
    std::vector<uint8_t> bits;
    for (int i = 0; i < n; ++i) {
      auto row = z0.row(i);
      bits.insert(bits.end(), row.begin(), row.end());
    }
    auto z = tiny_matrix(bits, lh, base);
    auto report = gain_stats(z, HeadCatalog::single_layer(lh), GroupBy::none);
    const auto& g = report.groups[0];
    CHECK(g.gain >= g.best_accuracy - 1.0 - 1e-15);
    CHECK(g.gain <= 1.0 - g.baseline_accuracy + 1e-15);

    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    rng.shuffle(perm);
    auto permuted = gain_stats(z.subset_rows(perm), HeadCatalog::single_layer(lh), GroupBy::none);
    CHECK(permuted.groups[0].gain == g.gain);
    CHECK(permuted.groups[0].baseline_accuracy == g.baseline_accuracy);
  }
}

TEST_CASE("gain CSV has one row per group-layer pair") {
  std::vector<uint8_t> base{1, 0};
  auto z = tiny_matrix({1, 0, 0, 1}, 2, base);
  auto report = gain_stats(z, HeadCatalog::dense({3, 9}, 1), GroupBy::none);
  std::string csv = gain_report_csv(report);
  CHECK(csv.find("group,layer,best_accuracy,baseline_accuracy,gain\n") == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("matrix constructor validates its invariants") {
  CHECK_THROWS_AS(tiny_matrix({2, 0}, 2), Error);                      // non-binary
  CHECK_THROWS_AS(OutcomeMatrix({"a", "a"}, 1, {1, 0}), Error);        // duplicate id
  CHECK_THROWS_AS(OutcomeMatrix({"a"}, 2, {1}), Error);                // size mismatch
  CHECK_THROWS_AS(OutcomeMatrix({"a"}, 1, {1}, std::nullopt, std::vector<uint8_t>{1, 0}), Error);
}
