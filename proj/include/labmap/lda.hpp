#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "labmap/corpus.hpp"
#include "labmap/matrix.hpp"
#include "labmap/random.hpp"

namespace labmap::lda {

using corpus::WordId;

struct LdaModel {
  int k = 0;
  double alpha = 0.0;  // symmetric document-topic concentration
  double eta = 0.0;    // symmetric topic-word concentration
  std::vector<std::string> vocabulary;
  Matrix beta;  // k x N, rows sum to one

  std::size_t num_words() const { return beta.cols(); }
  // Indices of the n highest-probability words of a topic, ties by index.
  std::vector<WordId> top_words(std::size_t topic, std::size_t n) const;
  void validate() const;
};

struct LdaOptions {
  int k = 10;
  std::optional<double> alpha;  // defaults to 50 / k
  double eta = 0.01;
  int iterations = 2000;
  int burn_in = 1000;
  int thin = 10;
  std::uint64_t seed = 1;

  double resolved_alpha() const { return alpha ? *alpha : 50.0 / k; }
};

struct LdaFit {
  LdaModel model;
  Matrix theta;  // D x k
};

// Collapsed Gibbs state over a corpus. A sweep visits every token in
// document order; count tables stay consistent with the assignments.
class GibbsSampler {
 public:
  GibbsSampler(const corpus::Corpus& corpus, int k, double alpha, double eta, std::uint64_t seed);

  void sweep();
  // Throws std::logic_error if any count table disagrees with z.
  void check_consistency() const;

  // Smoothed means of the current state.
  void add_beta_estimate(Matrix& acc) const;
  void add_theta_estimate(Matrix& acc) const;

  const std::vector<std::vector<std::uint16_t>>& assignments() const { return z_; }
  std::uint64_t iteration() const { return iteration_; }
  int num_topics() const { return k_; }

 private:
  const corpus::Corpus& corpus_;
  int k_;
  std::size_t n_words_;
  double alpha_;
  double eta_;
  Rng rng_;
  std::vector<std::vector<std::uint16_t>> z_;
  std::vector<std::int32_t> doc_topic_;   // D x K
  std::vector<std::int32_t> word_topic_;  // N x K (word-major)
  std::vector<std::int32_t> topic_total_;
  std::vector<double> weights_;
  std::uint64_t iteration_ = 0;
};

LdaFit fit_gibbs(const corpus::Corpus& corpus, const LdaOptions& options);

// Fold-in Gibbs for one document with the topics held fixed.
std::vector<double> infer_theta(const LdaModel& model, std::span<const WordId> document,
                                int iterations, int burn_in, std::uint64_t seed, int thin = 10);
// Same, but first checks that the document's vocabulary is the model's.
std::vector<double> infer_theta(const LdaModel& model, const corpus::Vocabulary& vocabulary,
                                const corpus::Document& document, int iterations, int burn_in,
                                std::uint64_t seed, int thin = 10);

// exp(-log-likelihood / tokens) with p(w|d) = sum_k theta_dk beta_kw.
double perplexity(const LdaModel& model, const Matrix& theta, const corpus::Corpus& corpus);

struct DocLengthLaw {
  enum class Kind { fixed, poisson } kind = Kind::fixed;
  double mean = 100.0;
};

struct SampledCorpus {
  corpus::Corpus corpus;
  Matrix theta;                                 // the drawn mixtures
  std::vector<std::vector<std::uint32_t>> topics;  // z per token
};

// Generative process: theta ~ Dir(alpha), z ~ Cat(theta), w ~ Cat(beta_z).
SampledCorpus sample_corpus(const LdaModel& model, std::size_t num_documents,
                            const DocLengthLaw& length, std::uint64_t seed);

// Tokens for one document given its mixture; shared with the event
// synthesizer.
std::vector<WordId> sample_tokens(const Matrix& beta, std::span<const double> theta,
                                  std::size_t length, Rng& rng,
                                  std::vector<std::uint32_t>* topics = nullptr);

std::string to_json(const LdaModel& model);
LdaModel lda_from_json(std::string_view text);

}  // namespace labmap::lda
