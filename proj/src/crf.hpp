#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "nn/params.hpp"

namespace gp {

using nn::Tensor;

/// Linear-chain CRF scores. transitions(a, b) scores moving from label a to
/// label b; start and end score the first and last labels.
template <typename T>
struct CrfParams {
  Tensor<T> transitions;
  Tensor<T> start;
  Tensor<T> end;

  explicit CrfParams(std::size_t labels = 0)
      : transitions({labels, labels}), start({labels}), end({labels}) {}
  CrfParams(Tensor<T> trans, Tensor<T> s, Tensor<T> e)
      : transitions(std::move(trans)), start(std::move(s)), end(std::move(e)) {
    if (transitions.rank() != 2 || transitions.dim(0) != transitions.dim(1) || start.size() != labels() ||
        end.size() != labels()) {
      throw ShapeError("inconsistent CRF parameter shapes");
    }
  }

  std::size_t labels() const { return start.size(); }
};

struct LabelPath {
  std::vector<std::uint8_t> labels;
  double score = 0.0;
};

template <typename T>
struct CrfGrads {
  Tensor<T> emissions;
  Tensor<T> transitions;
  Tensor<T> start;
  Tensor<T> end;
};

namespace detail {

template <typename T>
void check_crf_inputs(const Tensor<T>& em, const CrfParams<T>& p) {
  if (em.rank() != 2 || em.dim(0) == 0) throw ShapeError("CRF emissions must be a nonempty (t, labels) matrix");
  if (em.dim(1) != p.labels()) {
    throw ShapeError("CRF emissions have " + std::to_string(em.dim(1)) + " labels, parameters " +
                     std::to_string(p.labels()));
  }
  if (!em.all_finite()) throw DomainError("CRF emissions contain non-finite values");
}

template <typename T>
T lse_pair(T a, T b) {
  const T m = std::max(a, b);
  if (m == -std::numeric_limits<T>::infinity()) return m;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace detail

/// Score of one label path, summed left to right.
template <typename T>
T path_score(const Tensor<T>& em, const std::vector<std::uint8_t>& labels, const CrfParams<T>& p) {
  const std::size_t t = em.dim(0), L = em.dim(1);
  if (labels.size() != t) throw ShapeError("label path length does not match emissions");
  for (auto l : labels) {
    if (l >= L) throw RangeError("label " + std::to_string(l) + " outside a " + std::to_string(L) + "-label scheme");
  }
  T s = p.start[labels[0]] + em.at(0, labels[0]);
  for (std::size_t i = 1; i < t; ++i) {
    s = s + p.transitions.at(labels[i - 1], labels[i]);
    s = s + em.at(i, labels[i]);
  }
  return s + p.end[labels[t - 1]];
}

/// Forward algorithm in log space; alpha is (t, labels) when requested.
template <typename T>
T log_partition(const Tensor<T>& em, const CrfParams<T>& p, Tensor<T>* alpha_out = nullptr) {
  detail::check_crf_inputs(em, p);
  const std::size_t t = em.dim(0), L = em.dim(1);
  Tensor<T> alpha({t, L});
  for (std::size_t j = 0; j < L; ++j) alpha.at(0, j) = p.start[j] + em.at(0, j);
  std::vector<T> buf(L);
  for (std::size_t i = 1; i < t; ++i) {
    for (std::size_t j = 0; j < L; ++j) {
      for (std::size_t a = 0; a < L; ++a) buf[a] = alpha.at(i - 1, a) + p.transitions.at(a, j);
      alpha.at(i, j) = nn::logsumexp<T>(buf) + em.at(i, j);
    }
  }
  for (std::size_t j = 0; j < L; ++j) buf[j] = alpha.at(t - 1, j) + p.end[j];
  const T log_z = nn::logsumexp<T>(buf);
  if (alpha_out) *alpha_out = std::move(alpha);
  return log_z;
}

/// Negative log-likelihood log Z − score(gold). Fills `grads` (via
/// forward-backward marginals) when non-null.
template <typename T>
T crf_nll(const Tensor<T>& em, const std::vector<std::uint8_t>& gold, const CrfParams<T>& p,
          CrfGrads<T>* grads = nullptr) {
  detail::check_crf_inputs(em, p);
  const std::size_t t = em.dim(0), L = em.dim(1);
  if (gold.size() != t) throw ShapeError("gold label count does not match emissions");
  Tensor<T> alpha;
  const T log_z = log_partition(em, p, &alpha);
  const T gold_score = path_score(em, gold, p);
  const T nll = std::max(T{0}, log_z - gold_score);
  if (!grads) return nll;

  Tensor<T> beta({t, L});
  for (std::size_t j = 0; j < L; ++j) beta.at(t - 1, j) = p.end[j];
  std::vector<T> buf(L);
  for (std::size_t i = t - 1; i-- > 0;) {
    for (std::size_t a = 0; a < L; ++a) {
      for (std::size_t b = 0; b < L; ++b) buf[b] = p.transitions.at(a, b) + em.at(i + 1, b) + beta.at(i + 1, b);
      beta.at(i, a) = nn::logsumexp<T>(buf);
    }
  }
  grads->emissions = Tensor<T>({t, L});
  grads->transitions = Tensor<T>({L, L});
  grads->start = Tensor<T>({L});
  grads->end = Tensor<T>({L});
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t j = 0; j < L; ++j) grads->emissions.at(i, j) = std::exp(alpha.at(i, j) + beta.at(i, j) - log_z);
  }
  for (std::size_t j = 0; j < L; ++j) {
    grads->start[j] = grads->emissions.at(0, j);
    grads->end[j] = grads->emissions.at(t - 1, j);
  }
  for (std::size_t i = 1; i < t; ++i) {
    for (std::size_t a = 0; a < L; ++a) {
      for (std::size_t b = 0; b < L; ++b) {
        grads->transitions.at(a, b) +=
            std::exp(alpha.at(i - 1, a) + p.transitions.at(a, b) + em.at(i, b) + beta.at(i, b) - log_z);
      }
    }
  }
  grads->start[gold[0]] -= T{1};
  grads->end[gold[t - 1]] -= T{1};
  for (std::size_t i = 0; i < t; ++i) {
    grads->emissions.at(i, gold[i]) -= T{1};
    if (i > 0) grads->transitions.at(gold[i - 1], gold[i]) -= T{1};
  }
  return nll;
}

/// Highest-scoring path. Ties go to the lowest label code at every
/// backtracking step, i.e. the reverse-lexicographically smallest optimum.
template <typename T>
LabelPath viterbi(const Tensor<T>& em, const CrfParams<T>& p) {
  detail::check_crf_inputs(em, p);
  const std::size_t t = em.dim(0), L = em.dim(1);
  Tensor<T> delta({t, L});
  std::vector<std::uint8_t> back(t * L, 0);
  for (std::size_t j = 0; j < L; ++j) delta.at(0, j) = p.start[j] + em.at(0, j);
  for (std::size_t i = 1; i < t; ++i) {
    for (std::size_t j = 0; j < L; ++j) {
      T best = delta.at(i - 1, 0) + p.transitions.at(0, j);
      std::uint8_t arg = 0;
      for (std::size_t a = 1; a < L; ++a) {
        const T cand = delta.at(i - 1, a) + p.transitions.at(a, j);
        if (cand > best) {
          best = cand;
          arg = static_cast<std::uint8_t>(a);
        }
      }
      delta.at(i, j) = best + em.at(i, j);
      back[i * L + j] = arg;
    }
  }
  T best = delta.at(t - 1, 0) + p.end[0];
  std::uint8_t last = 0;
  for (std::size_t j = 1; j < L; ++j) {
    const T cand = delta.at(t - 1, j) + p.end[j];
    if (cand > best) {
      best = cand;
      last = static_cast<std::uint8_t>(j);
    }
  }
  LabelPath path;
  path.labels.resize(t);
  path.labels[t - 1] = last;
  for (std::size_t i = t - 1; i > 0; --i) path.labels[i - 1] = back[i * L + path.labels[i]];
  path.score = static_cast<double>(best);
  return path;
}

struct BruteForceResult {
  double log_partition = 0.0;
  LabelPath best;
};

/// Exhaustive enumeration of all labels^t paths at 64-bit; ties resolved
/// like viterbi(). Throws SizeError above 10^6 paths.
BruteForceResult brute_force_reference(const Tensor<double>& em, const CrfParams<double>& p);

/// Mean per-position cross-entropy of softmax(emissions) against gold.
/// Fills d_emissions when non-null.
template <typename T>
T classification_nll(const Tensor<T>& em, const std::vector<std::uint8_t>& gold, Tensor<T>* d_emissions = nullptr) {
  if (em.rank() != 2 || em.dim(0) == 0) throw ShapeError("emissions must be a nonempty (t, labels) matrix");
  const std::size_t t = em.dim(0), L = em.dim(1);
  if (gold.size() != t) throw ShapeError("gold label count does not match emissions");
  if (d_emissions) *d_emissions = Tensor<T>({t, L});
  T total = 0;
  std::vector<T> row(L);
  for (std::size_t i = 0; i < t; ++i) {
    if (gold[i] >= L) throw RangeError("gold label outside the scheme");
    for (std::size_t j = 0; j < L; ++j) row[j] = em.at(i, j);
    const T lse = nn::logsumexp<T>(row);
    total += lse - em.at(i, gold[i]);
    if (d_emissions) {
      for (std::size_t j = 0; j < L; ++j) {
        d_emissions->at(i, j) = (std::exp(em.at(i, j) - lse) - (j == gold[i] ? T{1} : T{0})) / static_cast<T>(t);
      }
    }
  }
  return total / static_cast<T>(t);
}

/// Per-position argmax, lowest label on ties.
template <typename T>
std::vector<std::uint8_t> argmax_labels(const Tensor<T>& em) {
  const std::size_t t = em.dim(0), L = em.dim(1);
  std::vector<std::uint8_t> out(t, 0);
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t j = 1; j < L; ++j) {
      if (em.at(i, j) > em.at(i, out[i])) out[i] = static_cast<std::uint8_t>(j);
    }
  }
  return out;
}

}  // namespace gp
