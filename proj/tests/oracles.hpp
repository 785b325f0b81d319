#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance runner.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "labmap/corpus.hpp"
#include "labmap/date.hpp"
#include "labmap/dyntopic.hpp"
#include "labmap/lda.hpp"
#include "labmap/random.hpp"

namespace labmap::oracle {

// ---------------------------------------------------------------- LDA

inline corpus::Corpus make_corpus(const std::vector<std::vector<corpus::WordId>>& docs, std::size_t n_words) {
  std::vector<std::string> words;
  for (std::size_t w = 0; w < n_words; ++w) words.push_back("w" + std::to_string(w));
  corpus::Corpus c;
  c.vocabulary = corpus::Vocabulary(words);
  for (std::size_t d = 0; d < docs.size(); ++d) {
    corpus::Document doc;
    doc.tokens = docs[d];
    doc.event_id = "d" + std::to_string(d);
    c.documents.push_back(doc);
  }
  return c;
}

// log p(w, z) with theta and beta integrated out, up to a constant that
// does not depend on z.
inline double log_collapsed_joint(const std::vector<std::vector<corpus::WordId>>& docs,
                                  const std::vector<int>& z, int K, int V, double alpha, double eta) {
  std::vector<double> ndk(docs.size() * K, 0), nkw(K * V, 0), nk(K, 0);
  std::size_t i = 0;
  for (std::size_t d = 0; d < docs.size(); ++d)
    for (auto w : docs[d]) {
      const int k = z[i++];
      ndk[d * K + k] += 1;
      nkw[k * V + w] += 1;
      nk[k] += 1;
    }
  double lp = 0;
  for (std::size_t d = 0; d < docs.size(); ++d)
    for (int k = 0; k < K; ++k) lp += std::lgamma(ndk[d * K + k] + alpha);
  for (int k = 0; k < K; ++k) {
    for (int w = 0; w < V; ++w) lp += std::lgamma(nkw[k * V + w] + eta);
    lp -= std::lgamma(nk[k] + V * eta);
  }
  return lp;
}

// Exact posterior over every assignment vector; index = base-K digits of
// z in token order, first token most significant.
inline std::vector<double> enumerate_posterior(const std::vector<std::vector<corpus::WordId>>& docs, int K,
                                               int V, double alpha, double eta) {
  std::size_t n = 0;
  for (const auto& d : docs) n += d.size();
  std::size_t states = 1;
  for (std::size_t i = 0; i < n; ++i) states *= K;
  std::vector<double> lp(states);
  std::vector<int> z(n);
  for (std::size_t s = 0; s < states; ++s) {
    std::size_t x = s;
    for (std::size_t i = n; i-- > 0;) {
      z[i] = int(x % K);
      x /= K;
    }
    lp[s] = log_collapsed_joint(docs, z, K, V, alpha, eta);
  }
  const double mx = *std::max_element(lp.begin(), lp.end());
  double total = 0;
  for (double& v : lp) total += (v = std::exp(v - mx));
  for (double& v : lp) v /= total;
  return lp;
}

struct GibbsOracleResult {
  double tv = 0;
  std::size_t states = 0;
  std::size_t samples = 0;
};

// Total variation between the visited assignment vectors of a collapsed
// Gibbs chain and the enumerated posterior.
inline GibbsOracleResult gibbs_vs_enumeration(const std::vector<std::vector<corpus::WordId>>& docs, int K, int V,
                                              double alpha, double eta, std::uint64_t seed,
                                              std::size_t samples = 50000, int burn_in = 1000, int thin = 5) {
  const auto exact = enumerate_posterior(docs, K, V, alpha, eta);
  const auto c = make_corpus(docs, V);
  lda::GibbsSampler g(c, K, alpha, eta, seed);
  for (int i = 0; i < burn_in; ++i) g.sweep();
  std::vector<double> counts(exact.size(), 0);
  for (std::size_t s = 0; s < samples; ++s) {
    for (int t = 0; t < thin; ++t) g.sweep();
    std::size_t idx = 0;
    for (const auto& zd : g.assignments())
      for (auto k : zd) idx = idx * K + k;
    counts[idx] += 1;
  }
  g.check_consistency();
  GibbsOracleResult r;
  r.states = exact.size();
  r.samples = samples;
  for (std::size_t s = 0; s < exact.size(); ++s) r.tv += std::abs(counts[s] / double(samples) - exact[s]);
  r.tv *= 0.5;
  return r;
}

inline double l1(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

// Greedy matching of estimated rows to true rows by smallest L1 first;
// returns the L1 distance of each true row to its match.
inline std::vector<double> greedy_matched_l1(const Matrix& estimate, const Matrix& truth) {
  const std::size_t K = truth.rows();
  std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
  for (std::size_t a = 0; a < K; ++a)
    for (std::size_t b = 0; b < K; ++b) pairs.emplace_back(l1(estimate.row(a), truth.row(b)), a, b);
  std::sort(pairs.begin(), pairs.end());
  std::vector<bool> used_a(K), used_b(K);
  std::vector<double> out(K, std::numeric_limits<double>::infinity());
  for (auto [d, a, b] : pairs) {
    if (used_a[a] || used_b[b]) continue;
    used_a[a] = used_b[b] = true;
    out[b] = d;
  }
  return out;
}

inline lda::LdaModel random_generator(std::size_t K, std::size_t N, double alpha, double word_conc,
                                      std::uint64_t seed) {
  Rng rng(seed);
  lda::LdaModel m;
  m.k = int(K);
  m.alpha = alpha;
  m.eta = word_conc;
  for (std::size_t w = 0; w < N; ++w) m.vocabulary.push_back("w" + std::to_string(w));
  m.beta = Matrix(K, N);
  const std::vector<double> conc(N, word_conc);
  for (std::size_t k = 0; k < K; ++k) {
    const auto row = sample_dirichlet(conc, rng);
    std::copy(row.begin(), row.end(), m.beta.row(k).begin());
  }
  return m;
}

struct RecoveryResult {
  std::vector<double> fitted_l1;   // fitted beta vs generator
  std::vector<double> sampled_l1;  // empirical (z, w) frequencies vs generator
};

// K=3, N=50, D=500, length 100.
inline RecoveryResult recovery_experiment(std::uint64_t seed) {
  const auto truth = random_generator(3, 50, 0.5, 0.1, seed);
  const auto sample = lda::sample_corpus(truth, 500, {lda::DocLengthLaw::Kind::fixed, 100}, seed + 1);

  Matrix empirical(3, 50);
  for (std::size_t d = 0; d < sample.corpus.documents.size(); ++d)
    for (std::size_t i = 0; i < sample.topics[d].size(); ++i)
      empirical(sample.topics[d][i], sample.corpus.documents[d].tokens[i]) += 1;
  for (std::size_t k = 0; k < 3; ++k) {
    auto row = empirical.row(k);
    const double s = std::accumulate(row.begin(), row.end(), 0.0);
    for (double& x : row) x /= s;
  }

  lda::LdaOptions o;
  o.k = 3;
  o.alpha = 0.5;
  o.eta = 0.01;
  o.iterations = 400;
  o.burn_in = 200;
  o.seed = seed + 2;
  const auto fit = lda::fit_gibbs(sample.corpus, o);

  RecoveryResult r;
  r.fitted_l1 = greedy_matched_l1(fit.model.beta, truth.beta);
  for (std::size_t k = 0; k < 3; ++k) r.sampled_l1.push_back(l1(empirical.row(k), truth.beta.row(k)));
  return r;
}

// ---------------------------------------------------------------- chains

struct DenseGaussian {
  std::vector<double> mean;
  std::vector<double> variance;
};

// Posterior of the whole chain given the observed times, by conditioning
// the joint Gaussian: x ~ N(0, C), C_ij = v0 + s2 * (min(t_i, t_j) - t_0),
// y_i = x_i + e_i, e_i ~ N(0, r_i). Infinite r_i are left out.
inline DenseGaussian dense_chain_posterior(const std::vector<double>& y, const std::vector<double>& r,
                                           const std::vector<double>& t, double s2, double v0) {
  const int T = int(t.size());
  Eigen::MatrixXd C(T, T);
  for (int i = 0; i < T; ++i)
    for (int j = 0; j < T; ++j) C(i, j) = v0 + s2 * (std::min(t[i], t[j]) - t[0]);
  std::vector<int> obs;
  for (int i = 0; i < T; ++i)
    if (std::isfinite(r[i])) obs.push_back(i);
  const int M = int(obs.size());
  Eigen::MatrixXd S(M, M), Cxo(T, M);
  Eigen::VectorXd yo(M);
  for (int a = 0; a < M; ++a) {
    yo(a) = y[obs[a]];
    for (int b = 0; b < M; ++b) S(a, b) = C(obs[a], obs[b]) + (a == b ? r[obs[a]] : 0.0);
    for (int i = 0; i < T; ++i) Cxo(i, a) = C(i, obs[a]);
  }
  DenseGaussian g;
  if (M == 0) {
    for (int i = 0; i < T; ++i) {
      g.mean.push_back(0);
      g.variance.push_back(C(i, i));
    }
    return g;
  }
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
  const Eigen::VectorXd m = Cxo * ldlt.solve(yo);
  const Eigen::MatrixXd P = C - Cxo * ldlt.solve(Cxo.transpose());
  for (int i = 0; i < T; ++i) {
    g.mean.push_back(m(i));
    g.variance.push_back(P(i, i));
  }
  return g;
}

// Central differences of the pseudo-observation objective; returns the
// largest |analytic - numeric| over the largest |numeric|.
inline double gradient_check(const dyntopic::ChainParameters& chains, const dyntopic::Tensor3& counts,
                             const dyntopic::Tensor3& y, const dyntopic::Tensor3& r, double h = 1e-5) {
  const auto g = dyntopic::pseudo_obs_gradient(chains, counts, y, r);
  double worst = 0, scale = 0;
  for (std::size_t i = 0; i < y.data().size(); ++i) {
    auto plus = y, minus = y;
    plus.data()[i] += h;
    minus.data()[i] -= h;
    const double fd = (dyntopic::pseudo_obs_objective(chains, counts, plus, r) -
                       dyntopic::pseudo_obs_objective(chains, counts, minus, r)) /
                      (2 * h);
    worst = std::max(worst, std::abs(g.data()[i] - fd));
    scale = std::max(scale, std::abs(fd));
  }
  return worst / scale;
}

struct GradientInstance {
  dyntopic::ChainParameters chains;
  dyntopic::Tensor3 counts, y, r;
};

// T=2, K=2, N=3 with random counts, pseudo-observations and noise.
inline GradientInstance gradient_instance(std::uint64_t seed) {
  Rng rng(seed);
  GradientInstance g;
  g.chains.times = {0.0, 30.0 + 20 * uniform01(rng)};
  g.chains.sigma2_rate = 0.01;
  g.chains.v0 = 1.0;
  g.counts = dyntopic::Tensor3(2, 2, 3);
  g.y = dyntopic::Tensor3(2, 2, 3);
  g.r = dyntopic::Tensor3(2, 2, 3);
  for (std::size_t i = 0; i < g.y.data().size(); ++i) {
    g.counts.data()[i] = std::floor(10 * uniform01(rng));
    g.y.data()[i] = 2 * uniform01(rng) - 1;
    g.r.data()[i] = 0.1 + uniform01(rng);
  }
  return g;
}

// Two topics over 12 words and six monthly epochs. Topic 0 moves its mass
// from word 0 to word 1 over the span; topic 1 stays on words 6..11.
struct DriftCorpus {
  corpus::Corpus corpus;
  Matrix first_beta, last_beta;
};

inline DriftCorpus drift_corpus(std::uint64_t seed, std::size_t docs_per_month = 40, std::size_t length = 40) {
  constexpr std::size_t N = 12, T = 6;
  Rng rng(seed);
  DriftCorpus out;
  std::vector<std::string> words;
  for (std::size_t w = 0; w < N; ++w) words.push_back("w" + std::to_string(w));
  out.corpus.vocabulary = corpus::Vocabulary(words);
  const std::vector<double> alpha(2, 0.3);
  for (std::size_t t = 0; t < T; ++t) {
    const double f = double(t) / double(T - 1);
    Matrix beta(2, N, 0.0);
    beta(0, 0) = 0.45 - 0.4 * f;
    beta(0, 1) = 0.05 + 0.4 * f;
    for (std::size_t w = 2; w < 6; ++w) beta(0, w) = 0.5 / 4;
    for (std::size_t w = 6; w < N; ++w) beta(1, w) = 1.0 / 6;
    if (t == 0) out.first_beta = beta;
    if (t == T - 1) out.last_beta = beta;
    for (std::size_t d = 0; d < docs_per_month; ++d) {
      const auto theta = sample_dirichlet(alpha, rng);
      corpus::Document doc;
      doc.tokens = lda::sample_tokens(beta, theta, length, rng);
      const Date date{2010, int(t) + 1, int(1 + d % 28)};
      doc.timestamp = double(date.to_days());
      doc.year = date.year;
      doc.month = date.month;
      doc.event_id = "m" + std::to_string(t) + "-" + std::to_string(d);
      out.corpus.documents.push_back(std::move(doc));
    }
  }
  return out;
}

}  // namespace labmap::oracle
