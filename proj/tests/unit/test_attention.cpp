#include <doctest.h>

#include "sprint/attention.hpp"
#include "sprint/errors.hpp"
#include "support/oracles.hpp"

using namespace sprint;

namespace {

AttentionWeights seeded_weights(const AttentionConfig& cfg, uint64_t seed) {
  Rng rng(seed);
  return AttentionWeights::random(cfg, rng);
}

Eigen::MatrixXd seeded_input(const AttentionConfig& cfg, uint64_t seed) {
  Rng rng(seed + 1000);
  return random_input(cfg, rng);
}

}  // namespace

TEST_CASE("config rejects inconsistent dimensions") {
  CHECK_THROWS_AS(AttentionConfig(2, 3, 5, 1), Error);
  CHECK_THROWS_AS(AttentionConfig(0, 3, 0, 1), Error);
  CHECK_THROWS_AS(AttentionConfig(2, 2, 4, 0), Error);
  AttentionConfig ok = AttentionConfig::make(2, 3, 4);
  CHECK(ok.model_dim == 6);
}

TEST_CASE("all heads pruned with zero bias gives the zero matrix") {
  auto cfg = AttentionConfig::make(3, 2, 4);
  auto w = seeded_weights(cfg, 1);
  auto x = seeded_input(cfg, 1);
  HeadMask mask(cfg.num_heads);
  for (int h = 0; h < cfg.num_heads; ++h) mask.prune(h);
  Eigen::MatrixXd out = mha_forward(x, w, cfg, mask);
  CHECK(out.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("all heads pruned leaves only the bias") {
  auto cfg = AttentionConfig::make(2, 2, 3);
  auto w = seeded_weights(cfg, 2);
  Eigen::VectorXd bias(cfg.model_dim);
  bias << 0.5, -1.0, 2.0, 0.25;
  w.output_bias = bias;
  auto x = seeded_input(cfg, 2);
  HeadMask mask(cfg.num_heads);
  mask.prune(0);
  mask.prune(1);
  Eigen::MatrixXd out = mha_forward_zeroed_proj(x, w, cfg, mask);
  for (int t = 0; t < cfg.seq_len; ++t) {
    CHECK((out.row(t).transpose() - bias).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("single token attention is the identity on the value path") {
  // H=1, T=1: softmax over one position puts weight 1 on itself, so the
  // output is x * w_value * w_output; with identity maps it is x itself.
  auto cfg = AttentionConfig::make(1, 2, 1);
  AttentionWeights w;
  w.w_query.push_back(Eigen::MatrixXd::Identity(2, 2));
  w.w_key.push_back(Eigen::MatrixXd::Identity(2, 2));
  w.w_value.push_back(Eigen::MatrixXd::Identity(2, 2));
  w.w_output = Eigen::MatrixXd::Identity(2, 2);
  Eigen::MatrixXd x(1, 2);
  x << 1.0, 0.0;
  Eigen::MatrixXd out = mha_forward(x, w, cfg, HeadMask::none(1));
  CHECK((out - x).cwiseAbs().maxCoeff() <= 1e-15);

  Eigen::MatrixXd w_o(2, 2);
  w_o << 2.0, 1.0, 0.0, 3.0;
  w.w_output = w_o;
  out = mha_forward(x, w, cfg, HeadMask::none(1));
  CHECK((out - x * w_o).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("empty mask makes both forwards identical") {
  auto cfg = AttentionConfig::make(4, 3, 5);
  auto w = seeded_weights(cfg, 3);
  auto x = seeded_input(cfg, 3);
  HeadMask none = HeadMask::none(cfg.num_heads);
  Eigen::MatrixXd a = mha_forward(x, w, cfg, none);
  Eigen::MatrixXd b = mha_forward_zeroed_proj(x, w, cfg, none);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zeroing head outputs matches zeroing projection rows") {
  uint64_t seed = 7;
  for (int heads : {1, 2, 4, 8}) {
    for (int dim : {2, 8}) {
      for (int seq : {1, 5}) {
        auto cfg = AttentionConfig::make(heads, dim, seq);
        auto w = seeded_weights(cfg, seed);
        auto x = seeded_input(cfg, seed);
        ++seed;
        for (int h = 0; h < heads; ++h) {
          HeadMask mask = HeadMask::single(heads, h);
          Eigen::MatrixXd a = mha_forward(x, w, cfg, mask);
          Eigen::MatrixXd b = mha_forward_zeroed_proj(x, w, cfg, mask);
          CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12);
        }
      }
    }
  }
}

TEST_CASE("multi-head masks agree across both forwards") {
  auto cfg = AttentionConfig::make(4, 8, 5);
  auto w = seeded_weights(cfg, 7);
  w.output_bias = Eigen::VectorXd::Constant(cfg.model_dim, 0.3);
  auto x = seeded_input(cfg, 7);
  HeadMask mask(cfg.num_heads);
  mask.prune(1);
  mask.prune(2);
  Eigen::MatrixXd a = mha_forward(x, w, cfg, mask);
  Eigen::MatrixXd b = mha_forward_zeroed_proj(x, w, cfg, mask);
  CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("forward matches the scalar-loop reference") {
  for (uint64_t seed : {11u, 12u, 13u}) {
    auto cfg = AttentionConfig::make(3, 4, 6);
    auto w = seeded_weights(cfg, seed);
    w.output_bias = Eigen::VectorXd::Constant(cfg.model_dim, -0.2);
    auto x = seeded_input(cfg, seed);
    HeadMask mask = HeadMask::single(cfg.num_heads, 1);
    Eigen::MatrixXd got = mha_forward(x, w, cfg, mask);
    Eigen::MatrixXd want = oracles::naive_mha(x, w, cfg, mask);
    CHECK((got - want).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("pruning is additive through the projection when bias is absent") {
  auto cfg = AttentionConfig::make(4, 2, 3);
  auto w = seeded_weights(cfg, 21);
  auto x = seeded_input(cfg, 21);
  HeadMask a(cfg.num_heads);
  a.prune(0);
  HeadMask b(cfg.num_heads);
  b.prune(2);
  HeadMask both(cfg.num_heads);
  both.prune(0);
  both.prune(2);
  Eigen::MatrixXd lhs =
      mha_forward(x, w, cfg, both) + mha_forward(x, w, cfg, HeadMask::none(cfg.num_heads));
  Eigen::MatrixXd rhs = mha_forward(x, w, cfg, a) + mha_forward(x, w, cfg, b);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("softmax rows sum to one") {
  Rng rng(9);
  Eigen::MatrixXd m(6, 7);
  for (int r = 0; r < 6; ++r) {
    for (int c = 0; c < 7; ++c) m(r, c) = 10.0 * rng.normal();
  }
  softmax_rows(m);
  for (int r = 0; r < 6; ++r) {
    CHECK(std::abs(m.row(r).sum() - 1.0) <= 1e-12);
    CHECK(m.row(r).minCoeff() >= 0.0);
  }
}

TEST_CASE("identical seeds make attn_demo bit-identical") {
  auto cfg = AttentionConfig::make(4, 8, 5);
  AttnDemoReport a = attn_demo(cfg, 7);
  AttnDemoReport b = attn_demo(cfg, 7);
  REQUIRE(a.lines.size() == b.lines.size());
  for (std::size_t i = 0; i < a.lines.size(); ++i) {
    CHECK(a.lines[i].max_abs_deviation == b.lines[i].max_abs_deviation);
  }
}

TEST_CASE("attn_demo reports one line per head within tolerance") {
  AttnDemoReport two = attn_demo(AttentionConfig::make(2, 2, 2), 0);
  CHECK(two.lines.size() == 2);
  CHECK(two.max_abs_deviation <= 1e-12);
  AttnDemoReport one = attn_demo(AttentionConfig::make(1, 3, 4), 5);
  CHECK(one.lines.size() == 1);
}

TEST_CASE("mask and input validation") {
  auto cfg = AttentionConfig::make(2, 2, 3);
  auto w = seeded_weights(cfg, 4);
  auto x = seeded_input(cfg, 4);

  HeadMask mask(2);
  CHECK_THROWS_AS(mask.prune(2), Error);
  CHECK_THROWS_AS(mask.prune(-1), Error);
  mask.prune(1);
  CHECK_THROWS_AS(mask.prune(1), Error);
  CHECK(mask.kept(0));
  CHECK_FALSE(mask.kept(1));

  CHECK_THROWS_AS(mha_forward(x, w, cfg, HeadMask::none(3)), Error);

  Eigen::MatrixXd bad = x;
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(mha_forward(bad, w, cfg, HeadMask::none(2)), Error);

  Eigen::MatrixXd wrong_shape(cfg.seq_len + 1, cfg.model_dim);
  wrong_shape.setZero();
  CHECK_THROWS_AS(mha_forward(wrong_shape, w, cfg, HeadMask::none(2)), Error);
}
