#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "labmap/corpus.hpp"
#include "labmap/matrix.hpp"

namespace labmap::dyntopic {

using corpus::WordId;

// ---------------------------------------------------------------------------
// Scalar Brownian-motion chains.
//
// One chain is the natural parameter of a single (topic, word) pair. The
// state starts at N(0, v0) at the first observation time and diffuses with
// variance sigma2_rate * dt between consecutive times. Observations are
// Gaussian pseudo-observations; an infinite variance marks a time with no
// observation.

struct ChainEstimate {
  std::vector<double> mean;
  std::vector<double> variance;
};

ChainEstimate kalman_forward(std::span<const double> values, std::span<const double> variances,
                             std::span<const double> times, double sigma2_rate, double v0);

// Rauch-Tung-Striebel pass over a kalman_forward result.
ChainEstimate kalman_smooth(const ChainEstimate& filtered, std::span<const double> times,
                            double sigma2_rate);

// log p(values) under the chain prior with the given observation noise.
double chain_log_marginal(std::span<const double> values, std::span<const double> variances,
                          std::span<const double> times, double sigma2_rate, double v0);

// softmax(mean + variance / 2), computed with max subtraction.
std::vector<double> expected_word_probs(std::span<const double> mean,
                                        std::span<const double> variance);

// ---------------------------------------------------------------------------
// Per-epoch mean-field updates.

// A document as distinct words with multiplicities.
struct DocumentWords {
  std::vector<WordId> words;
  std::vector<double> counts;
  double length() const;
  static DocumentWords from_tokens(std::span<const WordId> tokens);
};

struct DocumentPosterior {
  Matrix phi;                  // distinct words x K, rows sum to one
  std::vector<double> gamma;   // K Dirichlet parameters
};

struct EStepResult {
  std::vector<DocumentPosterior> documents;
  Matrix expected_counts;  // K x N
  int rounds = 0;          // largest number of rounds any document needed
};

// phi[n,k] proportional to exp(digamma(gamma_k)) * word_weights(k, w_n);
// gamma_k = alpha + sum_n phi[n,k]. Iterates each document until the
// largest gamma change is below tol or max_rounds is reached. warm_gamma,
// when given, supplies the starting gamma per document.
EStepResult e_step_epoch(std::span<const DocumentWords> documents, const Matrix& word_weights,
                         double alpha, std::span<const std::vector<double>> warm_gamma = {},
                         double tol = 1e-6, int max_rounds = 100);

// ---------------------------------------------------------------------------
// Continuous-time topic model.

// Dense T x K x N array.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t t, std::size_t k, std::size_t n, double fill = 0.0)
      : t_(t), k_(k), n_(n), data_(t * k * n, fill) {}
  std::size_t times() const { return t_; }
  std::size_t topics() const { return k_; }
  std::size_t words() const { return n_; }
  double& operator()(std::size_t t, std::size_t k, std::size_t w) { return data_[(t * k_ + k) * n_ + w]; }
  double operator()(std::size_t t, std::size_t k, std::size_t w) const {
    return data_[(t * k_ + k) * n_ + w];
  }
  std::span<double> slice(std::size_t t, std::size_t k) { return {data_.data() + (t * k_ + k) * n_, n_}; }
  std::span<const double> slice(std::size_t t, std::size_t k) const {
    return {data_.data() + (t * k_ + k) * n_, n_};
  }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

 private:
  std::size_t t_ = 0, k_ = 0, n_ = 0;
  std::vector<double> data_;
};

struct Epoch {
  double time = 0.0;                   // days since 1970-01-01
  std::vector<std::size_t> documents;  // indexes into the corpus
};

// Documents grouped by calendar month; epoch time is the middle of the
// month. Only months that contain documents appear.
std::vector<Epoch> monthly_epochs(const corpus::Corpus& corpus);

struct ChainParameters {
  std::vector<double> times;
  double sigma2_rate = 1e-4;
  double v0 = 1.0;
};

// The part of the bound that depends on the pseudo-observations: the
// chain terms -KL(q(beta) || p(beta)) plus the expected word
// log-likelihood under the bound E[log sum exp] <= log sum exp(m + V/2).
double pseudo_obs_objective(const ChainParameters& chains, const Tensor3& expected_counts,
                            const Tensor3& pseudo_obs, const Tensor3& obs_variance);

Tensor3 pseudo_obs_gradient(const ChainParameters& chains, const Tensor3& expected_counts,
                            const Tensor3& pseudo_obs, const Tensor3& obs_variance);

struct PseudoObsStep {
  Tensor3 pseudo_obs;
  double objective = 0.0;
  double step = 0.0;  // 0 when the gradient vanished
};

// One ascent step along the gradient scaled by the observation variances,
// halving the step until the objective does not decrease. Throws
// ConvergenceError if the step falls below 1e-12 with a non-negligible
// gradient.
PseudoObsStep update_pseudo_observations(const ChainParameters& chains,
                                         const Tensor3& expected_counts,
                                         const Tensor3& pseudo_obs, const Tensor3& obs_variance);

// Smooth every (k, w) chain.
void smooth_all(const ChainParameters& chains, const Tensor3& pseudo_obs,
                const Tensor3& obs_variance, Tensor3& mean, Tensor3& variance);

struct CdtmModel {
  int k = 0;
  double alpha = 0.1;
  std::vector<std::string> vocabulary;
  ChainParameters chains;
  Tensor3 mean;      // smoothed natural parameters
  Tensor3 variance;  // smoothed variances
  Tensor3 probs;     // expected_word_probs per (t, k)

  void recompute_probs();
  std::vector<WordId> top_words(std::size_t epoch, std::size_t topic, std::size_t n) const;
};

struct VariationalState {
  Tensor3 pseudo_obs;
  Tensor3 obs_variance;
  Tensor3 expected_counts;
  std::vector<DocumentPosterior> documents;  // aligned with corpus documents
  std::vector<double> epoch_tokens;          // N_t
};

struct CdtmOptions {
  int k = 10;
  double alpha = 0.1;
  double sigma2_rate = 1e-4;  // per day
  double v0 = 1.0;
  int max_iters = 100;
  double tol = 1e-4;  // relative bound improvement
  std::uint64_t seed = 1;
  int init_iterations = 100;  // static Gibbs warm start
  int init_burn_in = 50;
};

struct CdtmFit {
  CdtmModel model;
  VariationalState state;
  std::vector<double> elbo_trace;  // after initialization, then every iteration
  bool converged = false;
};

// Evidence lower bound of the variational state for the epochs.
double elbo(const CdtmModel& model, const VariationalState& state, const corpus::Corpus& corpus,
            std::span<const Epoch> epochs);

CdtmFit fit_cdtm(const corpus::Corpus& corpus, std::span<const Epoch> epochs,
                 const CdtmOptions& options);

// Per-document mixtures gamma / sum(gamma). Documents outside every epoch
// get the uniform mixture.
Matrix document_theta(const CdtmModel& model, const VariationalState& state);

std::string to_json(const CdtmModel& model);
CdtmModel cdtm_from_json(std::string_view text);

}  // namespace labmap::dyntopic
