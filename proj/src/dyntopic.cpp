#include "labmap/dyntopic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>

#include <boost/math/special_functions/digamma.hpp>
#include <json.hpp>

#include "labmap/date.hpp"
#include "labmap/error.hpp"
#include "labmap/lda.hpp"

namespace labmap::dyntopic {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double digamma(double x) { return boost::math::digamma(x); }

void check_times(std::span<const double> times) {
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1])) throw ArgumentError("observation times must be strictly increasing");
}

double process_variance(std::span<const double> times, std::size_t i, double sigma2_rate) {
  return sigma2_rate * (times[i] - times[i - 1]);
}

// Forward filter that also accumulates log p(values).
ChainEstimate filter_chain(std::span<const double> values, std::span<const double> variances,
                           std::span<const double> times, double sigma2_rate, double v0,
                           double* log_marginal) {
  const std::size_t T = times.size();
  ChainEstimate f{std::vector<double>(T), std::vector<double>(T)};
  double mean = 0.0;
  double var = v0;
  double lm = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    if (t > 0) var += process_variance(times, t, sigma2_rate);
    const double r = variances[t];
    if (std::isfinite(r)) {
      const double s = var + r;
      const double innov = values[t] - mean;
      lm += -0.5 * (std::log(2.0 * std::numbers::pi * s) + innov * innov / s);
      const double gain = var / s;
      mean += gain * innov;
      var = var * r / s;
    }
    f.mean[t] = mean;
    f.variance[t] = var;
  }
  if (log_marginal) *log_marginal = lm;
  return f;
}

}  // namespace

ChainEstimate kalman_forward(std::span<const double> values, std::span<const double> variances,
                             std::span<const double> times, double sigma2_rate, double v0) {
  if (values.size() != times.size() || variances.size() != times.size())
    throw ArgumentError("kalman_forward: length mismatch");
  if (times.empty()) throw ArgumentError("kalman_forward: no observation times");
  check_times(times);
  if (!(sigma2_rate >= 0.0) || !(v0 > 0.0)) throw ArgumentError("kalman_forward: invalid variances");
  for (double r : variances)
    if (!(r > 0.0)) throw ArgumentError("kalman_forward: observation variances must be positive");
  return filter_chain(values, variances, times, sigma2_rate, v0, nullptr);
}

ChainEstimate kalman_smooth(const ChainEstimate& filtered, std::span<const double> times,
                            double sigma2_rate) {
  const std::size_t T = times.size();
  if (filtered.mean.size() != T || filtered.variance.size() != T)
    throw ArgumentError("kalman_smooth: length mismatch");
  ChainEstimate s = filtered;
  for (std::size_t i = T - 1; i-- > 0;) {
    const double pred = filtered.variance[i] + process_variance(times, i + 1, sigma2_rate);
    const double gain = pred > 0.0 ? filtered.variance[i] / pred : 0.0;
    s.mean[i] = filtered.mean[i] + gain * (s.mean[i + 1] - filtered.mean[i]);
    s.variance[i] = filtered.variance[i] + gain * gain * (s.variance[i + 1] - pred);
  }
  return s;
}

double chain_log_marginal(std::span<const double> values, std::span<const double> variances,
                          std::span<const double> times, double sigma2_rate, double v0) {
  double lm = 0.0;
  filter_chain(values, variances, times, sigma2_rate, v0, &lm);
  return lm;
}

std::vector<double> expected_word_probs(std::span<const double> mean,
                                        std::span<const double> variance) {
  if (mean.size() != variance.size()) throw ArgumentError("expected_word_probs: length mismatch");
  std::vector<double> p(mean.size());
  double mx = -kInf;
  for (std::size_t w = 0; w < mean.size(); ++w) {
    p[w] = mean[w] + 0.5 * variance[w];
    mx = std::max(mx, p[w]);
  }
  double total = 0.0;
  for (double& x : p) total += (x = std::exp(x - mx));
  for (double& x : p) x /= total;
  return p;
}

// ---------------------------------------------------------------------------

double DocumentWords::length() const { return std::accumulate(counts.begin(), counts.end(), 0.0); }

DocumentWords DocumentWords::from_tokens(std::span<const WordId> tokens) {
  std::map<WordId, double> c;
  for (WordId w : tokens) c[w] += 1.0;
  DocumentWords d;
  for (auto [w, n] : c) {
    d.words.push_back(w);
    d.counts.push_back(n);
  }
  return d;
}

namespace {

// Fills phi from gamma; returns false if a word has zero weight under
// every topic.
void update_phi(const DocumentWords& doc, const Matrix& log_weights,
                const std::vector<double>& gamma, Matrix& phi) {
  const std::size_t K = gamma.size();
  std::vector<double> psi(K);
  for (std::size_t k = 0; k < K; ++k) psi[k] = digamma(gamma[k]);
  for (std::size_t u = 0; u < doc.words.size(); ++u) {
    auto row = phi.row(u);
    double mx = -kInf;
    for (std::size_t k = 0; k < K; ++k) {
      row[k] = psi[k] + log_weights(k, doc.words[u]);
      mx = std::max(mx, row[k]);
    }
    if (mx == -kInf)
      throw ArgumentError("word " + std::to_string(doc.words[u]) + " has zero weight under every topic");
    double total = 0.0;
    for (double& x : row) total += (x = std::exp(x - mx));
    for (double& x : row) x /= total;
  }
}

}  // namespace

EStepResult e_step_epoch(std::span<const DocumentWords> documents, const Matrix& word_weights,
                         double alpha, std::span<const std::vector<double>> warm_gamma, double tol,
                         int max_rounds) {
  const std::size_t K = word_weights.rows();
  const std::size_t N = word_weights.cols();
  if (K == 0) throw ArgumentError("e_step_epoch: no topics");
  if (!(alpha > 0.0)) throw ArgumentError("e_step_epoch: alpha must be positive");
  if (!warm_gamma.empty() && warm_gamma.size() != documents.size())
    throw ArgumentError("e_step_epoch: warm start size mismatch");

  Matrix log_weights(K, N);
  for (std::size_t i = 0; i < log_weights.data().size(); ++i) {
    const double w = word_weights.data()[i];
    if (w < 0.0) throw ArgumentError("e_step_epoch: negative word weight");
    log_weights.data()[i] = w > 0.0 ? std::log(w) : -kInf;
  }

  EStepResult out;
  out.expected_counts = Matrix(K, N);
  out.documents.resize(documents.size());
  for (std::size_t d = 0; d < documents.size(); ++d) {
    const auto& doc = documents[d];
    for (WordId w : doc.words)
      if (w >= N) throw ArgumentError("e_step_epoch: word outside vocabulary");
    auto& post = out.documents[d];
    post.phi = Matrix(doc.words.size(), K);
    if (!warm_gamma.empty()) {
      if (warm_gamma[d].size() != K) throw ArgumentError("e_step_epoch: warm gamma has wrong size");
      post.gamma = warm_gamma[d];
    } else {
      post.gamma.assign(K, alpha + doc.length() / static_cast<double>(K));
    }
    int rounds = 0;
    std::vector<double> next(K);
    while (rounds < max_rounds) {
      ++rounds;
      update_phi(doc, log_weights, post.gamma, post.phi);
      std::fill(next.begin(), next.end(), alpha);
      for (std::size_t u = 0; u < doc.words.size(); ++u)
        for (std::size_t k = 0; k < K; ++k) next[k] += doc.counts[u] * post.phi(u, k);
      double change = 0.0;
      for (std::size_t k = 0; k < K; ++k) change = std::max(change, std::abs(next[k] - post.gamma[k]));
      post.gamma = next;
      if (change < tol) break;
    }
    out.rounds = std::max(out.rounds, rounds);
    for (std::size_t u = 0; u < doc.words.size(); ++u)
      for (std::size_t k = 0; k < K; ++k)
        out.expected_counts(k, doc.words[u]) += doc.counts[u] * post.phi(u, k);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<Epoch> monthly_epochs(const corpus::Corpus& corpus) {
  std::map<int, std::vector<std::size_t>> by_month;
  for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
    const auto date = Date::from_days(static_cast<std::int64_t>(std::floor(corpus.documents[d].timestamp)));
    by_month[date.month_index()].push_back(d);
  }
  std::vector<Epoch> out;
  for (auto& [idx, docs] : by_month) {
    const int year = idx / 12;
    const int month = idx % 12 + 1;
    Epoch e;
    e.time = static_cast<double>(Date{year, month, 1}.to_days()) + days_in_month(year, month) / 2.0;
    e.documents = std::move(docs);
    out.push_back(std::move(e));
  }
  return out;
}

namespace {

struct ChainBuffers {
  std::vector<double> y, r;
};

// Runs filter + smoother on chain (k, w), writing smoothed moments into
// mean/variance. Returns log p(y) - E_q[log p(y | beta)].
double run_chain(const ChainParameters& chains, const Tensor3& pseudo_obs,
                 const Tensor3& obs_variance, std::size_t k, std::size_t w, Tensor3& mean,
                 Tensor3& variance, ChainBuffers& buf) {
  const std::size_t T = chains.times.size();
  buf.y.resize(T);
  buf.r.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    buf.y[t] = pseudo_obs(t, k, w);
    buf.r[t] = obs_variance(t, k, w);
  }
  double lm = 0.0;
  const auto f = filter_chain(buf.y, buf.r, chains.times, chains.sigma2_rate, chains.v0, &lm);
  const auto s = kalman_smooth(f, chains.times, chains.sigma2_rate);
  double expected_loglik = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    mean(t, k, w) = s.mean[t];
    variance(t, k, w) = s.variance[t];
    const double r = buf.r[t];
    if (!std::isfinite(r)) continue;
    const double e = buf.y[t] - s.mean[t];
    expected_loglik += -0.5 * std::log(2.0 * std::numbers::pi * r) - (e * e + s.variance[t]) / (2.0 * r);
  }
  return lm - expected_loglik;
}

double chain_terms(const ChainParameters& chains, const Tensor3& pseudo_obs,
                   const Tensor3& obs_variance, Tensor3& mean, Tensor3& variance) {
  const std::size_t T = chains.times.size();
  const std::size_t K = pseudo_obs.topics(), N = pseudo_obs.words();
  mean = Tensor3(T, K, N);
  variance = Tensor3(T, K, N);
  ChainBuffers buf;
  double total = 0.0;
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t w = 0; w < N; ++w)
      total += run_chain(chains, pseudo_obs, obs_variance, k, w, mean, variance, buf);
  return total;
}

double log_normalizer(std::span<const double> m, std::span<const double> v) {
  double mx = -kInf;
  for (std::size_t w = 0; w < m.size(); ++w) mx = std::max(mx, m[w] + 0.5 * v[w]);
  double s = 0.0;
  for (std::size_t w = 0; w < m.size(); ++w) s += std::exp(m[w] + 0.5 * v[w] - mx);
  return mx + std::log(s);
}

double word_terms(const Tensor3& counts, const Tensor3& mean, const Tensor3& variance) {
  double total = 0.0;
  for (std::size_t t = 0; t < counts.times(); ++t) {
    for (std::size_t k = 0; k < counts.topics(); ++k) {
      const auto n = counts.slice(t, k);
      const double n_tk = std::accumulate(n.begin(), n.end(), 0.0);
      if (n_tk == 0.0) continue;
      const auto m = mean.slice(t, k);
      double dot = 0.0;
      for (std::size_t w = 0; w < n.size(); ++w) dot += n[w] * m[w];
      total += dot - n_tk * log_normalizer(m, variance.slice(t, k));
    }
  }
  return total;
}

void check_shapes(const ChainParameters& chains, const Tensor3& counts, const Tensor3& y,
                  const Tensor3& r) {
  const std::size_t T = chains.times.size();
  if (T == 0) throw ArgumentError("no epochs");
  check_times(chains.times);
  auto same = [](const Tensor3& a, const Tensor3& b) {
    return a.times() == b.times() && a.topics() == b.topics() && a.words() == b.words();
  };
  if (y.times() != T || !same(y, r) || !same(y, counts))
    throw ArgumentError("pseudo-observation tensors have inconsistent shapes");
}

}  // namespace

void smooth_all(const ChainParameters& chains, const Tensor3& pseudo_obs,
                const Tensor3& obs_variance, Tensor3& mean, Tensor3& variance) {
  chain_terms(chains, pseudo_obs, obs_variance, mean, variance);
}

double pseudo_obs_objective(const ChainParameters& chains, const Tensor3& expected_counts,
                            const Tensor3& pseudo_obs, const Tensor3& obs_variance) {
  check_shapes(chains, expected_counts, pseudo_obs, obs_variance);
  Tensor3 m, v;
  const double chain = chain_terms(chains, pseudo_obs, obs_variance, m, v);
  return chain + word_terms(expected_counts, m, v);
}

// d/dy of the objective. m = Sigma R^-1 y is linear in y, and the gradient
// in m is x = g - R^-1 (y - m) with g from the word term. Multiplying by
// (dm/dy)^T = R^-1 Sigma needs Sigma x, built from the smoother's cross
// covariances Cov(t, t') = G_t ... G_{t'-1} Sigma_t't' in two sweeps.
Tensor3 pseudo_obs_gradient(const ChainParameters& chains, const Tensor3& expected_counts,
                            const Tensor3& pseudo_obs, const Tensor3& obs_variance) {
  check_shapes(chains, expected_counts, pseudo_obs, obs_variance);
  const std::size_t T = chains.times.size();
  const std::size_t K = pseudo_obs.topics(), N = pseudo_obs.words();
  Tensor3 m, v;
  chain_terms(chains, pseudo_obs, obs_variance, m, v);

  Tensor3 gm(T, K, N);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t k = 0; k < K; ++k) {
      const auto n = expected_counts.slice(t, k);
      const double n_tk = std::accumulate(n.begin(), n.end(), 0.0);
      const auto pi = expected_word_probs(m.slice(t, k), v.slice(t, k));
      for (std::size_t w = 0; w < N; ++w) gm(t, k, w) = n[w] - n_tk * pi[w];
    }
  }

  Tensor3 grad(T, K, N);
  std::vector<double> y(T), r(T), x(T), gain(T), after(T);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t w = 0; w < N; ++w) {
      for (std::size_t t = 0; t < T; ++t) {
        y[t] = pseudo_obs(t, k, w);
        r[t] = obs_variance(t, k, w);
        x[t] = gm(t, k, w);
        if (std::isfinite(r[t])) x[t] -= (y[t] - m(t, k, w)) / r[t];
      }
      const auto f = filter_chain(y, r, chains.times, chains.sigma2_rate, chains.v0, nullptr);
      for (std::size_t t = 0; t + 1 < T; ++t) {
        const double pred = f.variance[t] + process_variance(chains.times, t + 1, chains.sigma2_rate);
        gain[t] = pred > 0.0 ? f.variance[t] / pred : 0.0;
      }
      if (T > 0) after[T - 1] = 0.0;
      for (std::size_t t = T - 1; t-- > 0;) after[t] = gain[t] * (v(t + 1, k, w) * x[t + 1] + after[t + 1]);
      double before = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        if (t > 0) before = gain[t - 1] * (x[t - 1] + before);
        const double sx = v(t, k, w) * (x[t] + before) + after[t];
        grad(t, k, w) = std::isfinite(r[t]) ? sx / r[t] : 0.0;
      }
    }
  }
  return grad;
}

PseudoObsStep update_pseudo_observations(const ChainParameters& chains,
                                         const Tensor3& expected_counts,
                                         const Tensor3& pseudo_obs, const Tensor3& obs_variance) {
  const double base = pseudo_obs_objective(chains, expected_counts, pseudo_obs, obs_variance);
  const Tensor3 grad = pseudo_obs_gradient(chains, expected_counts, pseudo_obs, obs_variance);

  // Precondition by the observation variance: r ~ 1 / (count + 1) matches
  // the curvature of the word term.
  Tensor3 dir = grad;
  double slope = 0.0;
  double gmax = 0.0;
  for (std::size_t i = 0; i < dir.data().size(); ++i) {
    const double r = obs_variance.data()[i];
    dir.data()[i] = std::isfinite(r) ? grad.data()[i] * r : 0.0;
    slope += dir.data()[i] * grad.data()[i];
    gmax = std::max(gmax, std::abs(grad.data()[i]));
  }
  PseudoObsStep out{pseudo_obs, base, 0.0};
  if (gmax == 0.0 || slope <= 0.0) return out;

  Tensor3 candidate = pseudo_obs;
  for (double step = 1.0; step >= 1e-12; step *= 0.5) {
    for (std::size_t i = 0; i < candidate.data().size(); ++i)
      candidate.data()[i] = pseudo_obs.data()[i] + step * dir.data()[i];
    const double value = pseudo_obs_objective(chains, expected_counts, candidate, obs_variance);
    if (value >= base) {
      out.pseudo_obs = std::move(candidate);
      out.objective = value;
      out.step = step;
      return out;
    }
  }
  // A slope this small predicts gains below the objective's rounding
  // noise at every trial step: treat as stationary.
  if (slope < 1e-3 * std::max(1.0, std::abs(base))) return out;
  throw ConvergenceError("pseudo-observation step size underflow");
}

// ---------------------------------------------------------------------------

void CdtmModel::recompute_probs() {
  probs = Tensor3(mean.times(), mean.topics(), mean.words());
  for (std::size_t t = 0; t < mean.times(); ++t)
    for (std::size_t k = 0; k < mean.topics(); ++k) {
      const auto p = expected_word_probs(mean.slice(t, k), variance.slice(t, k));
      std::copy(p.begin(), p.end(), probs.slice(t, k).begin());
    }
}

std::vector<WordId> CdtmModel::top_words(std::size_t epoch, std::size_t topic, std::size_t n) const {
  const auto p = probs.slice(epoch, topic);
  std::vector<WordId> idx(p.size());
  std::iota(idx.begin(), idx.end(), 0u);
  n = std::min(n, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n), idx.end(),
                    [&](WordId a, WordId b) { return p[a] > p[b] || (p[a] == p[b] && a < b); });
  idx.resize(n);
  return idx;
}

namespace {

struct EpochedDocs {
  std::vector<DocumentWords> words;           // per corpus document
  std::vector<std::vector<std::size_t>> by_epoch;
};

EpochedDocs organize(const corpus::Corpus& corpus, std::span<const Epoch> epochs) {
  EpochedDocs e;
  e.words.resize(corpus.documents.size());
  std::vector<bool> used(corpus.documents.size(), false);
  for (const auto& ep : epochs) {
    e.by_epoch.emplace_back();
    for (std::size_t d : ep.documents) {
      if (d >= corpus.documents.size()) throw ArgumentError("epoch references a missing document");
      if (used[d]) throw ArgumentError("document assigned to more than one epoch");
      used[d] = true;
      e.words[d] = DocumentWords::from_tokens(corpus.documents[d].tokens);
      e.by_epoch.back().push_back(d);
    }
  }
  return e;
}

double lbeta_sym(double alpha, std::size_t K) {
  return static_cast<double>(K) * std::lgamma(alpha) - std::lgamma(static_cast<double>(K) * alpha);
}

// Document part of the bound: E[log p(theta)] + E[log p(z | theta)]
// + H[q(theta)] + H[q(z)].
double document_terms(const DocumentWords& doc, const DocumentPosterior& post, double alpha) {
  const std::size_t K = post.gamma.size();
  const double gsum = std::accumulate(post.gamma.begin(), post.gamma.end(), 0.0);
  const double psum = digamma(gsum);
  std::vector<double> elog(K);
  for (std::size_t k = 0; k < K; ++k) elog[k] = digamma(post.gamma[k]) - psum;

  double total = -lbeta_sym(alpha, K);
  for (std::size_t k = 0; k < K; ++k) total += (alpha - 1.0) * elog[k];
  // entropy of Dir(gamma)
  double lb = -std::lgamma(gsum);
  for (std::size_t k = 0; k < K; ++k) lb += std::lgamma(post.gamma[k]);
  total += lb;
  for (std::size_t k = 0; k < K; ++k) total -= (post.gamma[k] - 1.0) * elog[k];
  for (std::size_t u = 0; u < doc.words.size(); ++u) {
    for (std::size_t k = 0; k < K; ++k) {
      const double p = post.phi(u, k);
      if (p <= 0.0) continue;
      total += doc.counts[u] * p * (elog[k] - std::log(p));
    }
  }
  return total;
}

Tensor3 accumulate_counts(const EpochedDocs& docs, const std::vector<DocumentPosterior>& posts,
                          std::size_t K, std::size_t N) {
  Tensor3 n(docs.by_epoch.size(), K, N);
  for (std::size_t t = 0; t < docs.by_epoch.size(); ++t)
    for (std::size_t d : docs.by_epoch[t]) {
      const auto& dw = docs.words[d];
      for (std::size_t u = 0; u < dw.words.size(); ++u)
        for (std::size_t k = 0; k < K; ++k) n(t, k, dw.words[u]) += dw.counts[u] * posts[d].phi(u, k);
    }
  return n;
}

// exp(E_q[log p(w | z = k)]) under the bound: exp(m - log sum exp(m + V/2)).
Matrix word_weights(const CdtmModel& model, std::size_t t) {
  const std::size_t K = model.mean.topics(), N = model.mean.words();
  Matrix w(K, N);
  for (std::size_t k = 0; k < K; ++k) {
    const auto m = model.mean.slice(t, k);
    const double lse = log_normalizer(m, model.variance.slice(t, k));
    for (std::size_t v = 0; v < N; ++v) w(k, v) = std::exp(m[v] - lse);
  }
  return w;
}

void run_e_step(const CdtmModel& model, const EpochedDocs& docs, double alpha, bool warm,
                VariationalState& state, const std::vector<Matrix>* fixed_weights = nullptr) {
  for (std::size_t t = 0; t < docs.by_epoch.size(); ++t) {
    const auto& ids = docs.by_epoch[t];
    if (ids.empty()) continue;
    std::vector<DocumentWords> dws;
    std::vector<std::vector<double>> gammas;
    for (std::size_t d : ids) {
      dws.push_back(docs.words[d]);
      if (warm) gammas.push_back(state.documents[d].gamma);
    }
    const Matrix weights = fixed_weights ? (*fixed_weights)[t] : word_weights(model, t);
    auto res = e_step_epoch(dws, weights, alpha, gammas);
    for (std::size_t i = 0; i < ids.size(); ++i) state.documents[ids[i]] = std::move(res.documents[i]);
  }
  state.expected_counts =
      accumulate_counts(docs, state.documents, model.mean.topics(), model.mean.words());
}

}  // namespace

double elbo(const CdtmModel& model, const VariationalState& state, const corpus::Corpus& corpus,
            std::span<const Epoch> epochs) {
  const auto docs = organize(corpus, epochs);
  double total = pseudo_obs_objective(model.chains, state.expected_counts, state.pseudo_obs,
                                      state.obs_variance);
  for (const auto& ids : docs.by_epoch)
    for (std::size_t d : ids) total += document_terms(docs.words[d], state.documents[d], model.alpha);
  return total;
}

CdtmFit fit_cdtm(const corpus::Corpus& corpus, std::span<const Epoch> epochs,
                 const CdtmOptions& options) {
  if (options.k < 1) throw ArgumentError("number of topics must be >= 1");
  if (!(options.alpha > 0.0)) throw ArgumentError("alpha must be positive");
  if (!(options.sigma2_rate >= 0.0) || !(options.v0 > 0.0))
    throw ArgumentError("sigma2_rate must be >= 0 and v0 > 0");
  if (epochs.empty()) throw ArgumentError("at least one epoch is required");
  if (options.max_iters < 0) throw ArgumentError("max_iters must be >= 0");

  const std::size_t K = static_cast<std::size_t>(options.k);
  const std::size_t N = corpus.vocabulary.size();
  const std::size_t T = epochs.size();
  CdtmFit fit;
  CdtmModel& model = fit.model;
  model.k = options.k;
  model.alpha = options.alpha;
  model.vocabulary = corpus.vocabulary.words();
  model.chains.sigma2_rate = options.sigma2_rate;
  model.chains.v0 = options.v0;
  for (const auto& e : epochs) model.chains.times.push_back(e.time);
  check_times(model.chains.times);

  const auto docs = organize(corpus, epochs);

  // Warm start: a short static Gibbs fit supplies the initial topics.
  lda::LdaOptions init;
  init.k = options.k;
  init.alpha = options.alpha;
  init.eta = 0.01;
  init.iterations = std::max(options.init_iterations, 2);
  init.burn_in = std::clamp(options.init_burn_in, 0, init.iterations - 1);
  init.seed = options.seed;
  const auto static_fit = lda::fit_gibbs(corpus, init);

  VariationalState& state = fit.state;
  state.documents.resize(corpus.documents.size());
  for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
    state.documents[d].gamma.assign(K, options.alpha);
    state.documents[d].phi = Matrix(0, K);
  }
  model.mean = Tensor3(T, K, N);
  model.variance = Tensor3(T, K, N);
  std::vector<Matrix> static_weights(T, static_fit.model.beta);
  run_e_step(model, docs, options.alpha, false, state, &static_weights);

  state.epoch_tokens.assign(T, 0.0);
  state.pseudo_obs = Tensor3(T, K, N);
  state.obs_variance = Tensor3(T, K, N, kInf);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t d : docs.by_epoch[t]) state.epoch_tokens[t] += docs.words[d].length();
    if (state.epoch_tokens[t] == 0.0) continue;
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t w = 0; w < N; ++w) {
        state.pseudo_obs(t, k, w) = std::log(static_fit.model.beta(k, w));
        state.obs_variance(t, k, w) = 1.0 / (state.expected_counts(t, k, w) + 1.0);
      }
  }
  smooth_all(model.chains, state.pseudo_obs, state.obs_variance, model.mean, model.variance);
  fit.elbo_trace.push_back(elbo(model, state, corpus, epochs));

  for (int iter = 0; iter < options.max_iters; ++iter) {
    run_e_step(model, docs, options.alpha, true, state);
    auto step = update_pseudo_observations(model.chains, state.expected_counts, state.pseudo_obs,
                                           state.obs_variance);
    state.pseudo_obs = std::move(step.pseudo_obs);
    smooth_all(model.chains, state.pseudo_obs, state.obs_variance, model.mean, model.variance);
    const double value = elbo(model, state, corpus, epochs);
    const double previous = fit.elbo_trace.back();
    fit.elbo_trace.push_back(value);
    if (value - previous < options.tol * std::abs(previous)) {
      fit.converged = true;
      break;
    }
  }
  model.recompute_probs();
  return fit;
}

Matrix document_theta(const CdtmModel& model, const VariationalState& state) {
  const std::size_t K = static_cast<std::size_t>(model.k);
  Matrix theta(state.documents.size(), K);
  for (std::size_t d = 0; d < state.documents.size(); ++d) {
    const auto& g = state.documents[d].gamma;
    const double s = std::accumulate(g.begin(), g.end(), 0.0);
    for (std::size_t k = 0; k < K; ++k)
      theta(d, k) = (g.size() == K && s > 0.0) ? g[k] / s : 1.0 / static_cast<double>(K);
  }
  return theta;
}

std::string to_json(const CdtmModel& model) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["k"] = model.k;
  j["times"] = model.chains.times;
  j["sigma2_rate"] = model.chains.sigma2_rate;
  j["v0"] = model.chains.v0;
  j["alpha"] = model.alpha;
  j["vocab"] = model.vocabulary;
  auto cube = [](const Tensor3& x) {
    ordered_json a = ordered_json::array();
    for (std::size_t t = 0; t < x.times(); ++t) {
      ordered_json rows = ordered_json::array();
      for (std::size_t k = 0; k < x.topics(); ++k) {
        const auto s = x.slice(t, k);
        rows.push_back(std::vector<double>(s.begin(), s.end()));
      }
      a.push_back(std::move(rows));
    }
    return a;
  };
  j["m"] = cube(model.mean);
  j["V"] = cube(model.variance);
  return j.dump();
}

CdtmModel cdtm_from_json(std::string_view text) {
  CdtmModel m;
  try {
    const auto j = nlohmann::json::parse(text);
    m.k = j.at("k").get<int>();
    m.chains.times = j.at("times").get<std::vector<double>>();
    m.chains.sigma2_rate = j.at("sigma2_rate").get<double>();
    m.chains.v0 = j.at("v0").get<double>();
    m.alpha = j.value("alpha", 0.1);
    m.vocabulary = j.at("vocab").get<std::vector<std::string>>();
    const std::size_t T = m.chains.times.size(), K = static_cast<std::size_t>(m.k),
                      N = m.vocabulary.size();
    auto load = [&](const nlohmann::json& a, Tensor3& out) {
      const auto v = a.get<std::vector<std::vector<std::vector<double>>>>();
      if (v.size() != T) throw FormatError("cdtm json: wrong number of epochs");
      out = Tensor3(T, K, N);
      for (std::size_t t = 0; t < T; ++t) {
        if (v[t].size() != K) throw FormatError("cdtm json: wrong number of topics");
        for (std::size_t k = 0; k < K; ++k) {
          if (v[t][k].size() != N) throw FormatError("cdtm json: wrong number of words");
          std::copy(v[t][k].begin(), v[t][k].end(), out.slice(t, k).begin());
        }
      }
    };
    load(j.at("m"), m.mean);
    load(j.at("V"), m.variance);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("cdtm json: ") + e.what());
  }
  check_times(m.chains.times);
  m.recompute_probs();
  return m;
}

}  // namespace labmap::dyntopic
