#pragma once

// Hand-rolled reference implementations used as independent oracles in
// tests. Everything here is plain loops on purpose: these must not share a
// code path with the library.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "sprint/attention.hpp"
#include "sprint/outcomes.hpp"
#include "sprint/rng.hpp"
#include "sprint/trainer.hpp"

namespace oracles {

// W^T x + b with explicit loops.
inline Eigen::VectorXd naive_affine(const Eigen::MatrixXd& w, const Eigen::VectorXd& b,
                                    const Eigen::VectorXd& x) {
  Eigen::VectorXd q(w.cols());
  for (Eigen::Index c = 0; c < w.cols(); ++c) {
    double acc = 0.0;
    for (Eigen::Index r = 0; r < w.rows(); ++r) acc += w(r, c) * x(r);
    q(c) = acc + b(c);
  }
  return q;
}

// Scalar-loop multi-head attention with pruned head outputs zeroed.
inline Eigen::MatrixXd naive_mha(const Eigen::MatrixXd& x, const sprint::AttentionWeights& w,
                                 const sprint::AttentionConfig& cfg, const sprint::HeadMask& mask) {
  const int t_len = cfg.seq_len;
  const int d = cfg.head_dim;
  const int model = cfg.model_dim;
  std::vector<std::vector<double>> concat(
      static_cast<std::size_t>(t_len), std::vector<double>(static_cast<std::size_t>(model), 0.0));

  for (int h = 0; h < cfg.num_heads; ++h) {
    if (!mask.kept(h)) continue;
    std::vector<std::vector<double>> q(static_cast<std::size_t>(t_len),
                                       std::vector<double>(static_cast<std::size_t>(d)));
    auto k = q, v = q;
    for (int t = 0; t < t_len; ++t) {
      for (int c = 0; c < d; ++c) {
        double aq = 0.0, ak = 0.0, av = 0.0;
        for (int m = 0; m < model; ++m) {
          aq += x(t, m) * w.w_query[static_cast<std::size_t>(h)](m, c);
          ak += x(t, m) * w.w_key[static_cast<std::size_t>(h)](m, c);
          av += x(t, m) * w.w_value[static_cast<std::size_t>(h)](m, c);
        }
        q[static_cast<std::size_t>(t)][static_cast<std::size_t>(c)] = aq;
        k[static_cast<std::size_t>(t)][static_cast<std::size_t>(c)] = ak;
        v[static_cast<std::size_t>(t)][static_cast<std::size_t>(c)] = av;
      }
    }
    for (int t = 0; t < t_len; ++t) {
      std::vector<double> scores(static_cast<std::size_t>(t_len));
      double mx = -1e300;
      for (int u = 0; u < t_len; ++u) {
        double dot = 0.0;
        for (int c = 0; c < d; ++c) {
          dot += q[static_cast<std::size_t>(t)][static_cast<std::size_t>(c)] *
                 k[static_cast<std::size_t>(u)][static_cast<std::size_t>(c)];
        }
        scores[static_cast<std::size_t>(u)] = dot / std::sqrt(static_cast<double>(d));
        mx = std::max(mx, scores[static_cast<std::size_t>(u)]);
      }
      double denom = 0.0;
      for (int u = 0; u < t_len; ++u) {
        scores[static_cast<std::size_t>(u)] = std::exp(scores[static_cast<std::size_t>(u)] - mx);
        denom += scores[static_cast<std::size_t>(u)];
      }
      for (int c = 0; c < d; ++c) {
        double acc = 0.0;
        for (int u = 0; u < t_len; ++u) {
          acc += (scores[static_cast<std::size_t>(u)] / denom) *
                 v[static_cast<std::size_t>(u)][static_cast<std::size_t>(c)];
        }
        concat[static_cast<std::size_t>(t)][static_cast<std::size_t>(h * d + c)] = acc;
      }
    }
  }

  Eigen::MatrixXd out(t_len, model);
  for (int t = 0; t < t_len; ++t) {
    for (int m = 0; m < model; ++m) {
      double acc = 0.0;
      for (int c = 0; c < model; ++c) {
        acc += concat[static_cast<std::size_t>(t)][static_cast<std::size_t>(c)] * w.w_output(c, m);
      }
      if (w.output_bias) acc += (*w.output_bias)(m);
      out(t, m) = acc;
    }
  }
  return out;
}

// Eq.-style objective evaluated directly, without log-sum-exp stabilization.
inline double naive_loss(const sprint::QuestionEncoder& enc, const sprint::HeadEmbeddings& emb,
                         const sprint::OutcomeMatrix& z, const sprint::SimilarityMatrix& sim,
                         const sprint::QuestionFeatures& feats, double lambda,
                         const std::vector<int>& questions) {
  double align = 0.0;
  for (int i : questions) {
    Eigen::VectorXd q = naive_affine(enc.weight, enc.bias, feats.values.row(i).transpose());
    double num = 0.0, den = 0.0;
    for (int j = 0; j < emb.num_heads(); ++j) {
      double dist = 0.0;
      for (int c = 0; c < emb.embedding_dim(); ++c) {
        double diff = q(c) - emb.vectors(j, c);
        dist += diff * diff;
      }
      double e = std::exp(-dist);
      den += e;
      if (z.value(i, j)) num += e;
    }
    align += -std::log(num / den);
  }
  align /= static_cast<double>(questions.size());

  double spread = 0.0;
  for (int j = 0; j < emb.num_heads(); ++j) {
    for (int k = j + 1; k < emb.num_heads(); ++k) {
      double dist = 0.0;
      for (int c = 0; c < emb.embedding_dim(); ++c) {
        double diff = emb.vectors(j, c) - emb.vectors(k, c);
        dist += diff * diff;
      }
      spread += sim.value(j, k) * dist;
    }
  }
  return align - lambda * spread;
}

// Central finite difference of f with respect to one coordinate.
inline double central_difference(const std::function<double()>& f, double& coord, double step) {
  double orig = coord;
  coord = orig + step;
  double fp = f();
  coord = orig - step;
  double fm = f();
  coord = orig;
  return (fp - fm) / (2.0 * step);
}

inline bool grad_close(double analytic, double numeric, double rel_tol = 1e-5,
                       double abs_floor = 1e-8) {
  double diff = std::abs(analytic - numeric);
  double scale = std::max(std::abs(analytic), std::abs(numeric));
  return diff <= std::max(rel_tol * scale, abs_floor);
}

// Random binary matrix; when `nonempty_rows` is set every row gets at least
// one positive entry.
inline sprint::OutcomeMatrix random_outcomes(sprint::Rng& rng, int n, int lh, double density,
                                             bool nonempty_rows) {
  std::vector<std::string> ids;
  std::vector<uint8_t> bits;
  for (int i = 0; i < n; ++i) {
    ids.push_back("q" + std::to_string(i));
    bool any = false;
    std::vector<uint8_t> row(static_cast<std::size_t>(lh));
    for (int j = 0; j < lh; ++j) {
      row[static_cast<std::size_t>(j)] = rng.uniform() < density ? 1 : 0;
      any = any || row[static_cast<std::size_t>(j)] != 0;
    }
    if (nonempty_rows && !any) row[static_cast<std::size_t>(rng.uniform_int(lh))] = 1;
    bits.insert(bits.end(), row.begin(), row.end());
  }
  return sprint::OutcomeMatrix(std::move(ids), lh, std::move(bits));
}

inline sprint::QuestionFeatures random_features(sprint::Rng& rng, int n, int f) {
  sprint::QuestionFeatures feats;
  feats.values.resize(n, f);
  for (int i = 0; i < n; ++i) {
    feats.ids.push_back("q" + std::to_string(i));
    for (int c = 0; c < f; ++c) feats.values(i, c) = rng.normal();
  }
  return feats;
}

struct LossInstance {
  sprint::QuestionEncoder encoder;
  sprint::HeadEmbeddings embeddings;
  sprint::OutcomeMatrix outcomes;
  sprint::SimilarityMatrix sim;
  sprint::QuestionFeatures features;
  double lambda;
  std::vector<int> subset;  // rows with a nonempty positive set
};

inline LossInstance random_loss_instance(sprint::Rng& rng, int n, int lh, int p, int f,
                                         double lambda) {
  sprint::OutcomeMatrix z = oracles::random_outcomes(rng, n, lh, 0.5, false);
  std::vector<int> subset;
  for (int i = 0; i < n; ++i) {
    if (!sprint::partition_sets(z, i).positive.empty()) subset.push_back(i);
  }
  if (subset.empty()) {
    // Re-draw with guaranteed positives rather than loop forever.
    z = oracles::random_outcomes(rng, n, lh, 0.5, true);
    subset.clear();
    for (int i = 0; i < n; ++i) subset.push_back(i);
  }
  sprint::QuestionEncoder enc;
  enc.weight.resize(f, p);
  enc.bias.resize(p);
  for (int r = 0; r < f; ++r) {
    for (int c = 0; c < p; ++c) enc.weight(r, c) = rng.normal();
  }
  for (int c = 0; c < p; ++c) enc.bias(c) = 0.2 * rng.normal();
  sprint::HeadEmbeddings emb;
  emb.vectors.resize(lh, p);
  for (int j = 0; j < lh; ++j) {
    for (int c = 0; c < p; ++c) emb.vectors(j, c) = rng.normal();
  }
  sprint::SimilarityMatrix sim = sprint::similarity(z);
  sprint::QuestionFeatures feats = random_features(rng, n, f);
  return LossInstance{std::move(enc), std::move(emb), std::move(z),
                      std::move(sim), std::move(feats), lambda, std::move(subset)};
}

// Random orthogonal matrix via Householder QR of a Gaussian matrix.
inline Eigen::MatrixXd random_orthogonal(sprint::Rng& rng, int p) {
  Eigen::MatrixXd a(p, p);
  for (int r = 0; r < p; ++r) {
    for (int c = 0; c < p; ++c) a(r, c) = rng.normal();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  return qr.householderQ();
}

}  // namespace oracles
