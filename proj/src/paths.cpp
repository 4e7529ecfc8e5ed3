#include "skewflow/paths.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>

#include "skewflow/errors.hpp"

namespace skewflow {

double markov_cylinder_conditional(const TransitionMatrix& transition, const Word& word) {
  if (word.empty()) throw PreconditionError("empty cylinder word");
  const std::size_t m = transition.size();
  for (std::size_t s : word)
    if (s >= m) throw PreconditionError("symbol " + std::to_string(s) + " out of range");
  double mass = 1.0;
  for (std::size_t n = 1; n < word.size(); ++n) mass *= transition(word[n], word[n - 1]);
  return mass;
}

double empirical_cylinder_conditional(const std::vector<PathSample>& paths, const Word& word) {
  if (word.empty()) throw PreconditionError("empty cylinder word");
  std::size_t given = 0;
  std::size_t hits = 0;
  for (const auto& path : paths) {
    if (path.cells.size() < word.size() || path.cells.front() != word.front()) continue;
    ++given;
    hits += std::equal(word.begin(), word.end(), path.cells.begin()) ? 1 : 0;
  }
  if (given == 0)
    throw UndefinedConditional("no path starts with symbol " + std::to_string(word.front()));
  return static_cast<double>(hits) / static_cast<double>(given);
}

double CylinderRow::sigma() const {
  return given == 0 ? 0.0 : std::sqrt(markov * (1.0 - markov) / static_cast<double>(given));
}

LawComparison law_comparison(const std::vector<PathSample>& paths,
                             const TransitionMatrix& transition, std::size_t max_len) {
  if (paths.empty()) throw PreconditionError("law comparison needs at least one path");
  if (max_len == 0) throw PreconditionError("maximum word length must be positive");
  const std::size_t m = transition.size();

  // Prefix counts, plus per (s_0, length) counts of paths long enough.
  std::map<Word, std::size_t> prefix;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> given;
  for (const auto& path : paths) {
    const std::size_t upto = std::min(max_len, path.cells.size());
    for (std::size_t len = 1; len <= upto; ++len) {
      ++prefix[Word(path.cells.begin(), path.cells.begin() + static_cast<std::ptrdiff_t>(len))];
      ++given[{path.cells.front(), len}];
    }
  }

  LawComparison out;
  out.paths = paths.size();
  for (const auto& [word, count] : prefix) {
    for (std::size_t s : word)
      if (s >= m) throw PreconditionError("path symbol " + std::to_string(s) + " out of range");
    if (markov_cylinder_conditional(transition, word) == 0.0) {
      // Count only the shortest zero-mass prefix so each path is charged once.
      Word parent(word.begin(), word.end() - 1);
      if (parent.empty() || markov_cylinder_conditional(transition, parent) > 0.0) {
        ++out.anomalous_words;
        out.anomalous_paths += count;
      }
    }
  }

  std::function<void(Word&, double)> visit = [&](Word& word, double mass) {
    const auto g = given.find({word.front(), word.size()});
    if (g == given.end()) return;
    CylinderRow row;
    row.word = word;
    row.markov = mass;
    row.given = g->second;
    const auto hit = prefix.find(word);
    row.count = hit == prefix.end() ? 0 : hit->second;
    row.empirical = static_cast<double>(row.count) / static_cast<double>(row.given);
    row.deviation = std::abs(row.empirical - row.markov);
    out.max_deviation = std::max(out.max_deviation, row.deviation);
    out.rows.push_back(row);
    if (word.size() == max_len) return;
    for (std::size_t next : transition.successors(word.back())) {
      word.push_back(next);
      visit(word, mass * transition(next, word[word.size() - 2]));
      word.pop_back();
    }
  };
  for (std::size_t s = 0; s < m; ++s) {
    Word word{s};
    visit(word, 1.0);
  }
  return out;
}

ShadowingReport shadowing_fraction(const std::vector<PathSample>& paths,
                                   const StepSkewProcess& process, double tolerance,
                                   std::size_t steps) {
  if (!(tolerance > 0.0)) throw PreconditionError("shadowing tolerance must be positive");
  ShadowingReport report;
  report.orbits = paths.size();
  const MapSystem& system = process.system();
  for (const auto& path : paths) {
    if (path.truncated) ++report.truncated;
    if (path.points.size() < steps + 1) continue;
    Point x = path.points.front();
    bool close = true;
    for (std::size_t n = 1; n <= steps && close; ++n) {
      x = system.map(x);
      close = sup_distance(path.points[n], x) < tolerance;
    }
    report.shadowed += close ? 1 : 0;
  }
  report.fraction = paths.empty() ? 0.0
                                  : static_cast<double>(report.shadowed) /
                                        static_cast<double>(paths.size());
  report.oracle = clamp_free_probability(process, steps);
  return report;
}

double path_metric(const Word& p, const Word& q) {
  if (p.size() != q.size()) throw PreconditionError("symbol sequences differ in length");
  double total = 0.0;
  for (std::size_t n = 0; n < p.size(); ++n)
    if (p[n] != q[n]) total += std::ldexp(1.0, -static_cast<int>(n));
  return total;
}

}  // namespace skewflow
