#pragma once

#include <cstddef>
#include <vector>

#include "skewflow/core.hpp"
#include "skewflow/partition.hpp"
#include "skewflow/sample_path.hpp"
#include "skewflow/stepskew.hpp"

namespace skewflow {

/// Symbol word (s_0, ..., s_N) over cell indices.
using Word = std::vector<std::size_t>;

/// prod_{n=1}^{N} P(s_n, s_{n-1}); 1 for a single symbol. Throws
/// PreconditionError for an empty word or a symbol out of range.
double markov_cylinder_conditional(const TransitionMatrix& transition, const Word& word);

/// Fraction of paths starting with s_0 (and long enough) that follow the whole
/// word. Throws UndefinedConditional when no such path exists.
double empirical_cylinder_conditional(const std::vector<PathSample>& paths, const Word& word);

struct CylinderRow {
  Word word;
  double markov = 0.0;
  double empirical = 0.0;
  double deviation = 0.0;
  std::size_t count = 0;   // paths following the word
  std::size_t given = 0;   // paths starting with s_0, long enough for the word
  /// Binomial standard error of the empirical conditional at the Markov value.
  double sigma() const;
};

struct LawComparison {
  double max_deviation = 0.0;
  std::vector<CylinderRow> rows;
  /// Observed words of zero Markov mass, and the paths that followed them.
  std::size_t anomalous_words = 0;
  std::size_t anomalous_paths = 0;
  std::size_t paths = 0;
};

/// Every word of length <= max_len with positive Markov mass and an observed
/// start symbol, compared against the product law.
LawComparison law_comparison(const std::vector<PathSample>& paths,
                             const TransitionMatrix& transition, std::size_t max_len);

struct ShadowingReport {
  double fraction = 0.0;
  /// Mean over attractor starts of the product of true-transition masses.
  double oracle = 0.0;
  std::size_t orbits = 0;
  std::size_t shadowed = 0;
  std::size_t truncated = 0;
};

/// Fraction of paths with max_{1<=n<=N} |y_n - f^n(y_0)| < tolerance in the
/// sup norm. Truncated or short paths count as not shadowing.
ShadowingReport shadowing_fraction(const std::vector<PathSample>& paths,
                                   const StepSkewProcess& process, double tolerance,
                                   std::size_t steps);

/// sum_n 2^{-n} [p_n != q_n]. Throws PreconditionError on a length mismatch.
double path_metric(const Word& p, const Word& q);

}  // namespace skewflow
