// Copyright 2026 The smoothguard Authors. All Rights Reserved.
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

#include "smoothguard/aggregate.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

namespace smoothguard {

std::size_t ClusterAssignment::cluster_size(int cluster) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), cluster));
}

std::vector<std::size_t> ClusterAssignment::members(int cluster) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == cluster) out.push_back(i);
  }
  return out;
}

namespace {

// Row-major n x d copy of the input.
struct Points {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> data;

  std::span<const double> row(std::size_t i) const { return {data.data() + i * d, d}; }
};

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = a[k] - b[k];
    s += diff * diff;
  }
  return s;
}

std::array<std::vector<double>, 2> means(const Points& pts, std::span<const int> labels) {
  std::array<std::vector<double>, 2> c{std::vector<double>(pts.d, 0.0),
                                       std::vector<double>(pts.d, 0.0)};
  std::array<std::size_t, 2> count{0, 0};
  for (std::size_t i = 0; i < pts.n; ++i) {
    auto& dst = c[labels[i]];
    const auto src = pts.row(i);
    for (std::size_t k = 0; k < pts.d; ++k) dst[k] += src[k];
    ++count[labels[i]];
  }
  for (int j = 0; j < 2; ++j) {
    if (count[j] == 0) continue;
    for (double& v : c[j]) v /= static_cast<double>(count[j]);
  }
  return c;
}

double objective(const Points& pts, std::span<const int> labels,
                 const std::array<std::vector<double>, 2>& c) {
  double s = 0.0;
  for (std::size_t i = 0; i < pts.n; ++i) s += sq_dist(pts.row(i), c[labels[i]]);
  return s;
}

void check_monotone(double previous, double current) {
  if (current > previous + 1e-12 * std::max(1.0, previous)) {
    throw std::logic_error(fmt::format(
        "kmeans2: objective increased from {} to {}", previous, current));
  }
}

struct Run {
  std::vector<int> labels;
  std::array<std::vector<double>, 2> centroids;
  double objective = 0.0;
  std::size_t iterations = 0;
  std::size_t moves = 0;
  bool converged = false;
  std::vector<double> trace;
};

Run lloyd_run(const Points& pts, std::size_t first, std::size_t second) {
  Run run;
  run.labels.assign(pts.n, 0);
  std::array<std::vector<double>, 2> c{
      std::vector<double>(pts.row(first).begin(), pts.row(first).end()),
      std::vector<double>(pts.row(second).begin(), pts.row(second).end())};
  std::vector<double> own(pts.n, 0.0);
  double previous = std::numeric_limits<double>::infinity();

  for (std::size_t iter = 1; iter <= kMaxLloydIterations; ++iter) {
    std::array<std::size_t, 2> count{0, 0};
    for (std::size_t i = 0; i < pts.n; ++i) {
      const double d0 = sq_dist(pts.row(i), c[0]);
      const double d1 = sq_dist(pts.row(i), c[1]);
      run.labels[i] = d1 < d0 ? 1 : 0;
      own[i] = std::min(d0, d1);
      ++count[run.labels[i]];
    }
    for (int j = 0; j < 2; ++j) {
      if (count[j] != 0) continue;
      std::size_t far = 0;
      for (std::size_t i = 1; i < pts.n; ++i) {
        if (own[i] > own[far]) far = i;
      }
      run.labels[far] = j;
      own[far] = 0.0;
    }

    auto next = means(pts, run.labels);
    const double obj = objective(pts, run.labels, next);
    check_monotone(previous, obj);
    previous = obj;
    run.trace.push_back(obj);

    const double movement = std::max(std::sqrt(sq_dist(next[0], c[0])),
                                     std::sqrt(sq_dist(next[1], c[1])));
    c = std::move(next);
    run.iterations = iter;
    if (movement < kConvergenceTolerance) {
      run.converged = true;
      break;
    }
  }

  // Single-point transfers. Moving x from a (size na) to b (size nb)
  // changes the objective by nb/(nb+1)|x-cb|^2 - na/(na-1)|x-ca|^2.
  std::array<std::size_t, 2> count{0, 0};
  for (int l : run.labels) ++count[l];
  for (bool moved = true; moved;) {
    moved = false;
    for (std::size_t i = 0; i < pts.n; ++i) {
      const int a = run.labels[i];
      const int b = 1 - a;
      if (count[a] <= 1) continue;
      const auto na = static_cast<double>(count[a]);
      const auto nb = static_cast<double>(count[b]);
      const double gain = na / (na - 1.0) * sq_dist(pts.row(i), c[a]) -
                          nb / (nb + 1.0) * sq_dist(pts.row(i), c[b]);
      if (gain <= 1e-12) continue;
      run.labels[i] = b;
      --count[a];
      ++count[b];
      c = means(pts, run.labels);
      const double obj = objective(pts, run.labels, c);
      check_monotone(previous, obj);
      previous = obj;
      run.trace.push_back(obj);
      ++run.moves;
      moved = true;
    }
  }

  run.centroids = std::move(c);
  run.objective = objective(pts, run.labels, run.centroids);
  return run;
}

double best_partition_objective(const Points& pts) {
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> labels(pts.n, 0);
  // The last point stays in cluster 0; every other split is covered once.
  const std::size_t limit = std::size_t{1} << (pts.n - 1);
  for (std::size_t mask = 1; mask < limit; ++mask) {
    for (std::size_t i = 0; i < pts.n; ++i) labels[i] = static_cast<int>((mask >> i) & 1u);
    best = std::min(best, objective(pts, labels, means(pts, labels)));
  }
  return best;
}

}  // namespace

double within_cluster_ss(std::span<const EmbeddingVector> vectors,
                         std::span<const int> labels) {
  Points pts{vectors.size(), vectors.empty() ? 0 : vectors.front().dim(), {}};
  for (const auto& v : vectors) pts.data.insert(pts.data.end(), v.values().begin(), v.values().end());
  return objective(pts, labels, means(pts, labels));
}

ClusterAssignment kmeans2(std::span<const EmbeddingVector> vectors,
                          std::uint64_t seed) {
  if (vectors.size() < 2) throw InvalidArgument("kmeans2: need at least 2 vectors");
  Points pts{vectors.size(), vectors.front().dim(), {}};
  pts.data.reserve(pts.n * pts.d);
  for (const auto& v : vectors) {
    if (v.dim() != pts.d) throw DimensionMismatch("kmeans2: vectors differ in dimension");
    pts.data.insert(pts.data.end(), v.values().begin(), v.values().end());
  }

  std::pair<std::size_t, std::size_t> farthest{0, 1};
  double widest = -1.0;
  for (std::size_t i = 0; i < pts.n; ++i) {
    for (std::size_t j = i + 1; j < pts.n; ++j) {
      const double d = sq_dist(pts.row(i), pts.row(j));
      if (d > widest) {
        widest = d;
        farthest = {i, j};
      }
    }
  }
  if (widest == 0.0) throw DegenerateInput("kmeans2: all vectors are identical");

  Run best = lloyd_run(pts, farthest.first, farthest.second);
  auto best_pair = farthest;
  std::size_t restarts = 1;
  if (pts.n <= kExhaustiveInitLimit) {
    for (std::size_t i = 0; i < pts.n; ++i) {
      for (std::size_t j = i + 1; j < pts.n; ++j) {
        if (std::make_pair(i, j) == farthest) continue;
        if (sq_dist(pts.row(i), pts.row(j)) == 0.0) continue;
        Run run = lloyd_run(pts, i, j);
        ++restarts;
        if (run.objective < best.objective - 1e-12) {
          best = std::move(run);
          best_pair = {i, j};
        }
      }
    }
  }

  ClusterAssignment out;
  out.labels = std::move(best.labels);
  out.centroids = std::move(best.centroids);
  out.objective = best.objective;
  out.iterations = best.iterations;
  out.refinement_moves = best.moves;
  out.converged = best.converged;
  out.init_pair = best_pair;
  out.restarts = restarts;
  out.objective_trace = std::move(best.trace);
  out.seed = seed;
  out.distances.resize(pts.n);
  for (std::size_t i = 0; i < pts.n; ++i) {
    out.distances[i] = std::sqrt(sq_dist(pts.row(i), out.centroids[out.labels[i]]));
  }
  if (pts.n <= kOptimalityCheckLimit) {
    out.optimality_checked = true;
    out.local_optimum = best_partition_objective(pts) < out.objective - 1e-9;
  }
  return out;
}

std::string_view to_string(TieBreak t) {
  switch (t) {
    case TieBreak::kNone: return "none";
    case TieBreak::kContainsClean: return "contains_clean";
    case TieBreak::kTighterCluster: return "tighter_cluster";
    case TieBreak::kLowestIndex: return "lowest_index";
  }
  return "none";
}

MajorityChoice select_majority(const ClusterAssignment& assignment,
                               std::optional<std::size_t> clean_position) {
  const std::size_t s0 = assignment.cluster_size(0);
  const std::size_t s1 = assignment.cluster_size(1);
  if (s0 != s1) return {s0 > s1 ? 0 : 1, std::max(s0, s1), TieBreak::kNone};

  if (clean_position && *clean_position < assignment.labels.size()) {
    return {assignment.labels[*clean_position], s0, TieBreak::kContainsClean};
  }

  std::array<double, 2> spread{0.0, 0.0};
  for (std::size_t i = 0; i < assignment.labels.size(); ++i) {
    spread[assignment.labels[i]] += assignment.distances[i];
  }
  // Equal sizes, so comparing sums compares means.
  if (spread[0] != spread[1]) {
    return {spread[0] < spread[1] ? 0 : 1, s0, TieBreak::kTighterCluster};
  }
  return {assignment.labels.front(), s0, TieBreak::kLowestIndex};
}

std::size_t select_representative(std::span<const std::size_t> members,
                                  std::span<const EmbeddingVector> vectors,
                                  const EmbeddingVector& centroid) {
  if (members.empty()) throw InvalidArgument("select_representative: no members");
  if (centroid.norm() == 0.0) throw ZeroVector("select_representative: zero centroid");
  std::vector<std::size_t> order(members.begin(), members.end());
  std::sort(order.begin(), order.end());
  std::size_t best = order.front();
  double best_cos = cosine(vectors[best], centroid);
  for (std::size_t k = 1; k < order.size(); ++k) {
    const double c = cosine(vectors[order[k]], centroid);
    if (c > best_cos) {
      best_cos = c;
      best = order[k];
    }
  }
  return best;
}

std::string_view to_string(Polarity p) {
  switch (p) {
    case Polarity::kNeutral: return "neutral";
    case Polarity::kRefusal: return "refusal";
    case Polarity::kCompliance: return "compliance";
  }
  return "neutral";
}

Polarity polarity_tag(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  static constexpr std::string_view kRefusal[] = {
      "i cannot", "i can't", "i can not", "i won't", "i'm sorry", "i am sorry",
      "cannot help", "can't help", "unable to", "not able to", "i must decline"};
  static constexpr std::string_view kCompliance[] = {
      "sure", "here is", "here's", "certainly", "of course", "step 1", "step-by-step"};
  for (auto k : kRefusal) {
    if (lower.find(k) != std::string::npos) return Polarity::kRefusal;
  }
  for (auto k : kCompliance) {
    if (lower.find(k) != std::string::npos) return Polarity::kCompliance;
  }
  return Polarity::kNeutral;
}

AggregationResult aggregate_batch(std::span<const CandidateResponse> candidates,
                                  std::span<const EmbeddingVector> embeddings,
                                  std::size_t clean_index, std::uint64_t seed,
                                  const std::vector<bool>& empty) {
  if (candidates.empty()) throw InvalidArgument("aggregate: no candidates");
  if (candidates.size() != embeddings.size()) {
    throw InvalidArgument("aggregate: candidates and embeddings differ in length");
  }
  if (!empty.empty() && empty.size() != candidates.size()) {
    throw InvalidArgument("aggregate: empty flags differ in length");
  }
  const std::size_t n = candidates.size();

  AggregationResult out;
  out.empty.assign(n, false);
  if (!empty.empty()) out.empty = empty;
  std::optional<std::size_t> clean_position;
  for (std::size_t i = 0; i < n; ++i) {
    out.candidate_indices.push_back(candidates[i].candidate_index);
    out.polarity.push_back(polarity_tag(candidates[i].text));
    if (candidates[i].candidate_index == clean_index) clean_position = i;
  }

  auto short_circuit = [&] {
    const std::size_t pick = clean_position.value_or(0);
    out.degenerate = true;
    out.selected_index = candidates[pick].candidate_index;
    out.selected_text = candidates[pick].text;
    out.majority_cluster = 0;
    out.majority_size = n;
    out.tie_break_used = TieBreak::kNone;
    out.assignment = ClusterAssignment{};
    out.assignment.labels.assign(n, 0);
    out.assignment.converged = true;
    out.assignment.seed = seed;
    std::vector<double> mean(embeddings.front().dim(), 0.0);
    for (const auto& e : embeddings) {
      for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += e[k] / static_cast<double>(n);
    }
    out.assignment.centroids = {mean, mean};
    const EmbeddingVector centroid(mean);
    for (const auto& e : embeddings) {
      double d = 0.0;
      for (std::size_t k = 0; k < mean.size(); ++k) d += (e[k] - mean[k]) * (e[k] - mean[k]);
      out.assignment.distances.push_back(std::sqrt(d));
      out.centroid_cosines.push_back(centroid.norm() == 0.0 ? 0.0 : cosine(e, centroid));
    }
    return out;
  };

  const bool identical = std::all_of(candidates.begin(), candidates.end(),
                                     [&](const CandidateResponse& c) {
                                       return c.text == candidates.front().text;
                                     });
  if (identical || n == 1) return short_circuit();

  try {
    out.assignment = kmeans2(embeddings, seed);
  } catch (const DegenerateInput&) {
    return short_circuit();
  }

  std::optional<std::size_t> clean_for_ties = clean_position;
  if (clean_position && out.empty[*clean_position]) clean_for_ties.reset();
  const MajorityChoice choice = select_majority(out.assignment, clean_for_ties);
  out.majority_cluster = choice.cluster;
  out.majority_size = choice.size;
  out.tie_break_used = choice.tie_break;

  const auto members = out.assignment.members(choice.cluster);
  const EmbeddingVector centroid(out.assignment.centroids[choice.cluster]);
  const std::size_t pick = select_representative(members, embeddings, centroid);
  if (out.assignment.labels[pick] != choice.cluster) {
    throw std::logic_error("aggregate: representative outside the majority cluster");
  }
  out.selected_index = candidates[pick].candidate_index;
  out.selected_text = candidates[pick].text;

  for (std::size_t i = 0; i < n; ++i) {
    const EmbeddingVector own(out.assignment.centroids[out.assignment.labels[i]]);
    out.centroid_cosines.push_back(own.norm() == 0.0 ? 0.0 : cosine(embeddings[i], own));
  }
  return out;
}

nlohmann::json to_json(const AggregationResult& r) {
  const auto& a = r.assignment;
  nlohmann::json polarity = nlohmann::json::array();
  for (auto p : r.polarity) polarity.push_back(to_string(p));
  return {
      {"selected_text", r.selected_text},
      {"selected_index", r.selected_index},
      {"majority_cluster", r.majority_cluster},
      {"majority_size", r.majority_size},
      {"tie_break_used", to_string(r.tie_break_used)},
      {"degenerate", r.degenerate},
      {"candidate_indices", r.candidate_indices},
      {"labels", a.labels},
      {"centroid_distances", a.distances},
      {"centroid_cosines", r.centroid_cosines},
      {"empty", r.empty},
      {"polarity", polarity},
      {"kmeans",
       {{"objective", a.objective},
        {"iterations", a.iterations},
        {"refinement_moves", a.refinement_moves},
        {"converged", a.converged},
        {"init_pair", {a.init_pair.first, a.init_pair.second}},
        {"restarts", a.restarts},
        {"optimality_checked", a.optimality_checked},
        {"local_optimum", a.local_optimum},
        {"seed", a.seed}}},
  };
}

}  // namespace smoothguard
