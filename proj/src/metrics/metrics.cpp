// Copyright 2026 The GTFC Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace gtfc::metrics {
namespace {

using Key = std::pair<std::string, std::string>;

std::ifstream open_text(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return is;
}

// Shortest text that parses back to the same double.
std::string format_real(Real v) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

Real parse_real(const std::string& tok, const std::filesystem::path& path, std::size_t line) {
  try {
    std::size_t used = 0;
    const Real v = std::stod(tok, &used);
    if (used == tok.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::kFormat,
              path.string() + ":" + std::to_string(line) + ": bad number '" + tok + "'");
}

void split_labels(const TrialScoreSet& scores, std::vector<Real>& tar, std::vector<Real>& non) {
  for (const auto& row : scores) {
    if (row.label == Label::kTarget) tar.push_back(row.score);
    else if (row.label == Label::kNontarget) non.push_back(row.score);
    else throw Error(ErrorCode::kDegenerateSet, row.enroll + " " + row.test + " has no label");
  }
}

// Sorted copies plus the ascending distinct thresholds.
struct Sweep {
  std::vector<Real> tar, non, thresholds;
};

Sweep prepare(std::span<const Real> tar, std::span<const Real> non) {
  if (tar.empty() || non.empty()) {
    throw Error(ErrorCode::kDegenerateSet, "need at least one target and one nontarget trial");
  }
  Sweep s{{tar.begin(), tar.end()}, {non.begin(), non.end()}, {}};
  for (const auto* v : {&s.tar, &s.non}) {
    for (Real x : *v) {
      if (!std::isfinite(x)) throw Error(ErrorCode::kDomainError, "non-finite score");
    }
  }
  std::sort(s.tar.begin(), s.tar.end());
  std::sort(s.non.begin(), s.non.end());
  std::merge(s.tar.begin(), s.tar.end(), s.non.begin(), s.non.end(),
             std::back_inserter(s.thresholds));
  s.thresholds.erase(std::unique(s.thresholds.begin(), s.thresholds.end()), s.thresholds.end());
  return s;
}

std::size_t count_below(const std::vector<Real>& sorted, Real t) {
  return static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), t) -
                                  sorted.begin());
}

}  // namespace

std::vector<Trial> read_trials(const std::filesystem::path& path) {
  auto is = open_text(path);
  std::vector<Trial> out;
  std::string line;
  for (std::size_t n = 1; std::getline(is, line); ++n) {
    std::istringstream ls(line);
    std::string label, enroll, test, extra;
    if (!(ls >> label)) continue;
    if (!(ls >> enroll >> test) || (ls >> extra)) {
      throw Error(ErrorCode::kFormat, path.string() + ":" + std::to_string(n) +
                                          ": expected 'label enroll test'");
    }
    Trial t{enroll, test, Label::kUnknown};
    if (label == "1" || label == "target") t.label = Label::kTarget;
    else if (label == "0" || label == "nontarget") t.label = Label::kNontarget;
    else throw Error(ErrorCode::kFormat, path.string() + ":" + std::to_string(n) +
                                             ": label must be 1 or 0");
    out.push_back(std::move(t));
  }
  return out;
}

TrialScoreSet read_scores(const std::filesystem::path& path) {
  auto is = open_text(path);
  TrialScoreSet out;
  std::string line;
  for (std::size_t n = 1; std::getline(is, line); ++n) {
    std::istringstream ls(line);
    std::string enroll, test, score, extra;
    if (!(ls >> enroll)) continue;
    if (!(ls >> test >> score) || (ls >> extra)) {
      throw Error(ErrorCode::kFormat, path.string() + ":" + std::to_string(n) +
                                          ": expected 'enroll test score'");
    }
    out.push_back({enroll, test, Label::kUnknown, parse_real(score, path, n)});
  }
  return out;
}

void write_scores(const std::filesystem::path& path, const TrialScoreSet& scores) {
  std::ofstream os(path, std::ios::trunc);
  for (const auto& row : scores) {
    os << row.enroll << ' ' << row.test << ' ' << format_real(row.score) << '\n';
  }
  if (!os) throw Error(ErrorCode::kIo, "cannot write " + path.string());
}

TrialScoreSet attach_labels(const TrialScoreSet& scores, const std::vector<Trial>& trials) {
  std::map<Key, Real> by_key;
  for (const auto& row : scores) by_key[{row.enroll, row.test}] = row.score;
  TrialScoreSet out;
  std::vector<std::string> missing;
  for (const auto& t : trials) {
    const auto it = by_key.find({t.enroll, t.test});
    if (it == by_key.end()) {
      missing.push_back(t.enroll + " " + t.test);
      continue;
    }
    out.push_back({t.enroll, t.test, t.label, it->second});
  }
  if (!missing.empty()) {
    std::string msg = std::to_string(missing.size()) + " trials have no score:";
    for (std::size_t i = 0; i < std::min<std::size_t>(missing.size(), 5); ++i) {
      msg += " [" + missing[i] + "]";
    }
    throw Error(ErrorCode::kTrialMismatch, msg);
  }
  return out;
}

Real cosine_score(std::span<const Real> a, std::span<const Real> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kShapeMismatch, "embedding sizes differ");
  Real dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::kZeroVector, "cosine of a zero vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

void write_embeddings(const std::filesystem::path& path, const EmbeddingTable& table) {
  std::ofstream os(path, std::ios::trunc);
  for (const auto& [id, v] : table) {
    os << id;
    for (Real x : v) os << ' ' << format_real(x);
    os << '\n';
  }
  if (!os) throw Error(ErrorCode::kIo, "cannot write " + path.string());
}

EmbeddingTable read_embeddings(const std::filesystem::path& path) {
  auto is = open_text(path);
  EmbeddingTable out;
  std::string line;
  for (std::size_t n = 1; std::getline(is, line); ++n) {
    std::istringstream ls(line);
    std::string id, tok;
    if (!(ls >> id)) continue;
    std::vector<Real> v;
    while (ls >> tok) v.push_back(parse_real(tok, path, n));
    if (v.empty()) throw Error(ErrorCode::kFormat, path.string() + ": empty embedding " + id);
    out[id] = std::move(v);
  }
  return out;
}

TrialScoreSet score_trials(const EmbeddingTable& table, const std::vector<Trial>& trials) {
  std::set<std::string> missing;
  for (const auto& t : trials) {
    for (const auto* id : {&t.enroll, &t.test}) {
      if (!table.count(*id)) missing.insert(*id);
    }
  }
  if (!missing.empty()) {
    std::string msg = std::to_string(missing.size()) + " utterances have no embedding:";
    for (const auto& id : missing) msg += " " + id;
    throw Error(ErrorCode::kMissingUtterance, msg);
  }
  TrialScoreSet out;
  out.reserve(trials.size());
  for (const auto& t : trials) {
    out.push_back({t.enroll, t.test, t.label,
                   cosine_score(table.at(t.enroll), table.at(t.test))});
  }
  return out;
}

EerResult eer(std::span<const Real> target_scores, std::span<const Real> nontarget_scores) {
  const Sweep s = prepare(target_scores, nontarget_scores);
  const Real nt = Real(s.tar.size()), nn = Real(s.non.size());
  Real prev_frr = 0, prev_far = 0, prev_t = 0;
  const std::size_t n = s.thresholds.size() + 1;  // last point is +inf
  for (std::size_t k = 0; k < n; ++k) {
    const bool end = k + 1 == n;
    const Real t = end ? std::numeric_limits<Real>::infinity() : s.thresholds[k];
    const Real frr = end ? 1.0 : Real(count_below(s.tar, t)) / nt;
    const Real far = end ? 0.0 : Real(s.non.size() - count_below(s.non, t)) / nn;
    const Real d = far - frr;
    if (d <= 0.0) {
      if (d == 0.0) return {frr, t};
      // The lowest threshold accepts everything, so d > 0 there and k > 0.
      const Real prev_d = prev_far - prev_frr;
      const Real w = prev_d / (prev_d - d);
      const Real thr = end ? prev_t : prev_t + w * (t - prev_t);
      return {prev_frr + w * (frr - prev_frr), thr};
    }
    prev_frr = frr;
    prev_far = far;
    prev_t = t;
  }
  return {1.0, prev_t};  // unreachable: +inf always has d = -1
}

EerResult eer(const TrialScoreSet& scores) {
  std::vector<Real> tar, non;
  split_labels(scores, tar, non);
  return eer(tar, non);
}

Real min_dcf(std::span<const Real> target_scores, std::span<const Real> nontarget_scores,
             Real p_target, Real c_miss, Real c_fa) {
  if (!(p_target > 0.0 && p_target < 1.0) || !(c_miss > 0.0) || !(c_fa > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "need 0 < p_target < 1 and positive costs");
  }
  const Sweep s = prepare(target_scores, nontarget_scores);
  const Real nt = Real(s.tar.size()), nn = Real(s.non.size());
  auto cost = [&](Real p_miss, Real p_fa) {
    return c_miss * p_miss * p_target + c_fa * p_fa * (1.0 - p_target);
  };
  Real best = std::min(cost(0.0, 1.0), cost(1.0, 0.0));  // -inf and +inf
  for (Real t : s.thresholds) {
    const Real p_miss = Real(count_below(s.tar, t)) / nt;
    const Real p_fa = Real(s.non.size() - count_below(s.non, t)) / nn;
    best = std::min(best, cost(p_miss, p_fa));
  }
  return best / std::min(c_miss * p_target, c_fa * (1.0 - p_target));
}

Real min_dcf(const TrialScoreSet& scores, Real p_target, Real c_miss, Real c_fa) {
  std::vector<Real> tar, non;
  split_labels(scores, tar, non);
  return min_dcf(tar, non, p_target, c_miss, c_fa);
}

TrialScoreSet fuse(const TrialScoreSet& a, const TrialScoreSet& b, Real w_a, Real w_b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kTrialMismatch, "score sets have " + std::to_string(a.size()) +
                                               " and " + std::to_string(b.size()) + " trials");
  }
  std::map<Key, const ScoredTrial*> by_key;
  for (const auto& row : b) {
    if (!by_key.emplace(Key{row.enroll, row.test}, &row).second) {
      throw Error(ErrorCode::kTrialMismatch, "duplicate trial " + row.enroll + " " + row.test);
    }
  }
  TrialScoreSet out;
  out.reserve(a.size());
  for (const auto& row : a) {
    const auto it = by_key.find({row.enroll, row.test});
    if (it == by_key.end()) {
      throw Error(ErrorCode::kTrialMismatch, "trial " + row.enroll + " " + row.test +
                                                 " is missing from the second set");
    }
    if (it->second->label != row.label) {
      throw Error(ErrorCode::kTrialMismatch, "labels disagree for " + row.enroll + " " + row.test);
    }
    out.push_back({row.enroll, row.test, row.label, w_a * row.score + w_b * it->second->score});
  }
  return out;
}

}  // namespace gtfc::metrics
