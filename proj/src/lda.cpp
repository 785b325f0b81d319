#include "labmap/lda.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "labmap/error.hpp"

namespace labmap::lda {

namespace {

void check_priors(int k, double alpha, double eta) {
  if (k < 1) throw ArgumentError("number of topics must be >= 1");
  if (k > 65535) throw ArgumentError("number of topics must be < 65536");
  if (!(alpha > 0.0) || !(eta > 0.0)) throw ArgumentError("priors alpha and eta must be positive");
}

}  // namespace

std::vector<WordId> LdaModel::top_words(std::size_t topic, std::size_t n) const {
  std::vector<WordId> idx(beta.cols());
  std::iota(idx.begin(), idx.end(), 0u);
  const auto row = beta.row(topic);
  n = std::min(n, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n), idx.end(),
                    [&](WordId a, WordId b) { return row[a] > row[b] || (row[a] == row[b] && a < b); });
  idx.resize(n);
  return idx;
}

void LdaModel::validate() const {
  check_priors(k, alpha, eta);
  if (beta.rows() != static_cast<std::size_t>(k)) throw FormatError("beta row count != k");
  if (vocabulary.size() != beta.cols()) throw FormatError("beta column count != vocabulary size");
  for (std::size_t r = 0; r < beta.rows(); ++r) {
    double s = 0.0;
    for (double x : beta.row(r)) {
      if (!(x > 0.0)) throw FormatError("beta entries must be positive");
      s += x;
    }
    if (std::abs(s - 1.0) > 1e-9) throw FormatError("beta row does not sum to one");
  }
}

GibbsSampler::GibbsSampler(const corpus::Corpus& corpus, int k, double alpha, double eta,
                           std::uint64_t seed)
    : corpus_(corpus),
      k_(k),
      n_words_(corpus.vocabulary.size()),
      alpha_(alpha),
      eta_(eta),
      rng_(seed),
      weights_(static_cast<std::size_t>(k)) {
  check_priors(k, alpha, eta);
  if (corpus.documents.empty() || n_words_ == 0) throw ArgumentError("empty corpus");
  const auto K = static_cast<std::size_t>(k);
  doc_topic_.assign(corpus.documents.size() * K, 0);
  word_topic_.assign(n_words_ * K, 0);
  topic_total_.assign(K, 0);
  z_.resize(corpus.documents.size());
  for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
    const auto& tokens = corpus.documents[d].tokens;
    z_[d].resize(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (tokens[i] >= n_words_) throw ArgumentError("token index outside vocabulary");
      const auto t = static_cast<std::uint16_t>(uniform_index(rng_, K));
      z_[d][i] = t;
      ++doc_topic_[d * K + t];
      ++word_topic_[tokens[i] * K + t];
      ++topic_total_[t];
    }
  }
}

void GibbsSampler::sweep() {
  const auto K = static_cast<std::size_t>(k_);
  const double n_eta = static_cast<double>(n_words_) * eta_;
  for (std::size_t d = 0; d < corpus_.documents.size(); ++d) {
    const auto& tokens = corpus_.documents[d].tokens;
    std::int32_t* nd = doc_topic_.data() + d * K;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const WordId w = tokens[i];
      std::int32_t* nw = word_topic_.data() + static_cast<std::size_t>(w) * K;
      const std::uint16_t old = z_[d][i];
      --nd[old];
      --nw[old];
      --topic_total_[old];
      double total = 0.0;
      for (std::size_t t = 0; t < K; ++t) {
        const double p = (nd[t] + alpha_) * (nw[t] + eta_) / (topic_total_[t] + n_eta);
        weights_[t] = p;
        total += p;
      }
      const auto t = static_cast<std::uint16_t>(sample_categorical(weights_, total, rng_));
      z_[d][i] = t;
      ++nd[t];
      ++nw[t];
      ++topic_total_[t];
    }
  }
  ++iteration_;
#ifndef NDEBUG
  check_consistency();
#endif
}

void GibbsSampler::check_consistency() const {
  const auto K = static_cast<std::size_t>(k_);
  std::vector<std::int32_t> dt(doc_topic_.size(), 0), wt(word_topic_.size(), 0), tt(K, 0);
  for (std::size_t d = 0; d < z_.size(); ++d) {
    const auto& tokens = corpus_.documents[d].tokens;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      ++dt[d * K + z_[d][i]];
      ++wt[tokens[i] * K + z_[d][i]];
      ++tt[z_[d][i]];
    }
  }
  if (dt != doc_topic_ || wt != word_topic_ || tt != topic_total_)
    throw std::logic_error("Gibbs count tables inconsistent with assignments");
}

void GibbsSampler::add_beta_estimate(Matrix& acc) const {
  const auto K = static_cast<std::size_t>(k_);
  const double n_eta = static_cast<double>(n_words_) * eta_;
  for (std::size_t t = 0; t < K; ++t) {
    const double denom = topic_total_[t] + n_eta;
    for (std::size_t w = 0; w < n_words_; ++w) acc(t, w) += (word_topic_[w * K + t] + eta_) / denom;
  }
}

void GibbsSampler::add_theta_estimate(Matrix& acc) const {
  const auto K = static_cast<std::size_t>(k_);
  const double k_alpha = static_cast<double>(K) * alpha_;
  for (std::size_t d = 0; d < z_.size(); ++d) {
    const double denom = static_cast<double>(z_[d].size()) + k_alpha;
    for (std::size_t t = 0; t < K; ++t) acc(d, t) += (doc_topic_[d * K + t] + alpha_) / denom;
  }
}

LdaFit fit_gibbs(const corpus::Corpus& corpus, const LdaOptions& options) {
  const double alpha = options.resolved_alpha();
  check_priors(options.k, alpha, options.eta);
  if (options.burn_in < 0 || options.iterations <= options.burn_in)
    throw ArgumentError("require iterations > burn_in >= 0");
  if (options.thin < 1) throw ArgumentError("thin must be >= 1");
  if (corpus.documents.empty()) throw ArgumentError("empty corpus");

  GibbsSampler sampler(corpus, options.k, alpha, options.eta, options.seed);
  const auto K = static_cast<std::size_t>(options.k);
  Matrix beta(K, corpus.vocabulary.size());
  Matrix theta(corpus.documents.size(), K);
  int samples = 0;
  for (int s = 1; s <= options.iterations; ++s) {
    sampler.sweep();
    if (s == options.burn_in) sampler.check_consistency();
    if (s > options.burn_in && (s - options.burn_in - 1) % options.thin == 0) {
      sampler.add_beta_estimate(beta);
      sampler.add_theta_estimate(theta);
      ++samples;
    }
  }
  sampler.check_consistency();

  const double inv = 1.0 / samples;
  for (double& x : beta.data()) x *= inv;
  for (double& x : theta.data()) x *= inv;
  // Renormalize so rows sum to one to machine precision after averaging.
  for (Matrix* m : {&beta, &theta}) {
    for (std::size_t r = 0; r < m->rows(); ++r) {
      auto row = m->row(r);
      const double s = std::accumulate(row.begin(), row.end(), 0.0);
      for (double& x : row) x /= s;
    }
  }

  LdaFit fit;
  fit.model.k = options.k;
  fit.model.alpha = alpha;
  fit.model.eta = options.eta;
  fit.model.vocabulary = corpus.vocabulary.words();
  fit.model.beta = std::move(beta);
  fit.theta = std::move(theta);
  return fit;
}

std::vector<double> infer_theta(const LdaModel& model, std::span<const WordId> document,
                                int iterations, int burn_in, std::uint64_t seed, int thin) {
  if (burn_in < 0 || iterations <= burn_in) throw ArgumentError("require iterations > burn_in >= 0");
  if (thin < 1) throw ArgumentError("thin must be >= 1");
  const auto K = static_cast<std::size_t>(model.k);
  for (WordId w : document)
    if (w >= model.num_words()) throw ArgumentError("document token outside model vocabulary");
  std::vector<double> theta(K, 0.0);
  if (document.empty()) {
    std::fill(theta.begin(), theta.end(), 1.0 / static_cast<double>(K));
    return theta;
  }

  Rng rng(seed);
  std::vector<std::uint32_t> z(document.size());
  std::vector<std::int32_t> nd(K, 0);
  for (std::size_t i = 0; i < document.size(); ++i) {
    z[i] = static_cast<std::uint32_t>(uniform_index(rng, K));
    ++nd[z[i]];
  }
  std::vector<double> weights(K);
  const double denom = static_cast<double>(document.size()) + static_cast<double>(K) * model.alpha;
  int samples = 0;
  for (int s = 1; s <= iterations; ++s) {
    for (std::size_t i = 0; i < document.size(); ++i) {
      --nd[z[i]];
      double total = 0.0;
      for (std::size_t t = 0; t < K; ++t) {
        weights[t] = (nd[t] + model.alpha) * model.beta(t, document[i]);
        total += weights[t];
      }
      z[i] = static_cast<std::uint32_t>(sample_categorical(weights, total, rng));
      ++nd[z[i]];
    }
    if (s > burn_in && (s - burn_in - 1) % thin == 0) {
      for (std::size_t t = 0; t < K; ++t) theta[t] += (nd[t] + model.alpha) / denom;
      ++samples;
    }
  }
  const double total = std::accumulate(theta.begin(), theta.end(), 0.0);
  for (double& x : theta) x /= total;
  return theta;
}

std::vector<double> infer_theta(const LdaModel& model, const corpus::Vocabulary& vocabulary,
                                const corpus::Document& document, int iterations, int burn_in,
                                std::uint64_t seed, int thin) {
  if (vocabulary.words() != model.vocabulary)
    throw ArgumentError("document vocabulary does not match the model vocabulary");
  return infer_theta(model, document.tokens, iterations, burn_in, seed, thin);
}

double perplexity(const LdaModel& model, const Matrix& theta, const corpus::Corpus& corpus) {
  if (theta.rows() != corpus.documents.size())
    throw ArgumentError("theta rows do not align with corpus documents");
  if (theta.cols() != static_cast<std::size_t>(model.k))
    throw ArgumentError("theta columns != number of topics");
  const auto K = static_cast<std::size_t>(model.k);
  double log_lik = 0.0;
  std::size_t tokens = 0;
  for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
    const auto th = theta.row(d);
    for (WordId w : corpus.documents[d].tokens) {
      if (w >= model.num_words()) throw ArgumentError("token outside model vocabulary");
      double p = 0.0;
      for (std::size_t t = 0; t < K; ++t) p += th[t] * model.beta(t, w);
      if (!(p > 0.0)) throw ArgumentError("zero-probability token in perplexity");
      log_lik += std::log(p);
      ++tokens;
    }
  }
  if (tokens == 0) throw ArgumentError("perplexity of an empty corpus is undefined");
  return std::exp(-log_lik / static_cast<double>(tokens));
}

std::vector<WordId> sample_tokens(const Matrix& beta, std::span<const double> theta,
                                  std::size_t length, Rng& rng, std::vector<std::uint32_t>* topics) {
  std::vector<WordId> out(length);
  if (topics) topics->resize(length);
  for (std::size_t i = 0; i < length; ++i) {
    const auto t = sample_categorical(theta, rng);
    out[i] = static_cast<WordId>(sample_categorical(beta.row(t), rng));
    if (topics) (*topics)[i] = static_cast<std::uint32_t>(t);
  }
  return out;
}

SampledCorpus sample_corpus(const LdaModel& model, std::size_t num_documents,
                            const DocLengthLaw& length, std::uint64_t seed) {
  if (num_documents < 1) throw ArgumentError("number of documents must be >= 1");
  if (model.k < 1 || model.beta.rows() != static_cast<std::size_t>(model.k) || !(model.alpha > 0.0))
    throw ArgumentError("invalid generator model");
  for (std::size_t r = 0; r < model.beta.rows(); ++r) {
    double s = 0.0;
    for (double x : model.beta.row(r)) {
      if (!(x >= 0.0)) throw ArgumentError("negative topic-word probability");
      s += x;
    }
    if (std::abs(s - 1.0) > 1e-9) throw ArgumentError("beta row does not sum to one");
  }
  const auto K = static_cast<std::size_t>(model.k);
  Rng rng(seed);
  SampledCorpus out;
  out.corpus.vocabulary = corpus::Vocabulary(model.vocabulary);
  out.theta = Matrix(num_documents, K);
  out.topics.resize(num_documents);
  const std::vector<double> alpha(K, model.alpha);
  for (std::size_t d = 0; d < num_documents; ++d) {
    const auto theta = sample_dirichlet(alpha, rng);
    std::copy(theta.begin(), theta.end(), out.theta.row(d).begin());
    const std::size_t n = length.kind == DocLengthLaw::Kind::fixed
                              ? static_cast<std::size_t>(length.mean)
                              : sample_poisson(length.mean, rng);
    corpus::Document doc;
    doc.tokens = sample_tokens(model.beta, theta, n, rng, &out.topics[d]);
    doc.event_id = "doc-" + std::to_string(d);
    out.corpus.documents.push_back(std::move(doc));
  }
  return out;
}

std::string to_json(const LdaModel& model) {
  nlohmann::ordered_json j;
  j["k"] = model.k;
  j["alpha"] = model.alpha;
  j["eta"] = model.eta;
  j["vocab"] = model.vocabulary;
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t r = 0; r < model.beta.rows(); ++r) {
    const auto row = model.beta.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  j["beta"] = std::move(rows);
  return j.dump();
}

LdaModel lda_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("lda model json: ") + e.what());
  }
  LdaModel m;
  try {
    m.k = j.at("k").get<int>();
    m.alpha = j.at("alpha").get<double>();
    m.eta = j.at("eta").get<double>();
    m.vocabulary = j.at("vocab").get<std::vector<std::string>>();
    const auto rows = j.at("beta").get<std::vector<std::vector<double>>>();
    m.beta = Matrix(rows.size(), m.vocabulary.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != m.vocabulary.size()) throw FormatError("beta row length != vocabulary size");
      std::copy(rows[r].begin(), rows[r].end(), m.beta.row(r).begin());
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("lda model json: ") + e.what());
  }
  m.validate();
  return m;
}

}  // namespace labmap::lda
