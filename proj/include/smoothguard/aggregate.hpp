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

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "smoothguard/backends.hpp"
#include "smoothguard/embed.hpp"

namespace smoothguard {

/// Result of 2-means. Positions index the input vectors, not candidate ids.
struct ClusterAssignment {
  std::vector<int> labels;                        // 0 or 1 per point
  std::array<std::vector<double>, 2> centroids;   // member means
  std::vector<double> distances;                  // Euclidean, point to own centroid
  double objective = 0.0;                         // within-cluster sum of squares
  std::size_t iterations = 0;                     // Lloyd iterations, selected run
  std::size_t refinement_moves = 0;               // single-point transfers, selected run
  bool converged = false;
  std::pair<std::size_t, std::size_t> init_pair{0, 0};
  std::size_t restarts = 0;                       // init pairs tried
  std::vector<double> objective_trace;            // selected run, one entry per step
  bool optimality_checked = false;                // exhaustive check ran (n <= 8)
  bool local_optimum = false;                     // ...and found a better partition
  std::uint64_t seed = 0;

  std::size_t cluster_size(int cluster) const;
  std::vector<std::size_t> members(int cluster) const;
};

inline constexpr std::size_t kMaxLloydIterations = 100;
inline constexpr double kConvergenceTolerance = 1e-6;
/// Up to this many points every point pair is tried as an initialization
/// after the farthest pair.
inline constexpr std::size_t kExhaustiveInitLimit = 32;
inline constexpr std::size_t kOptimalityCheckLimit = 8;

/// Deterministic 2-means.
///
/// Each run seeds the centroids with a point pair and alternates Lloyd
/// steps (ties go to cluster 0; an emptied cluster takes the point farthest
/// from its centroid) until no centroid moves by kConvergenceTolerance or
/// kMaxLloydIterations pass, then applies single-point transfers while any
/// transfer lowers the objective. The first run uses the farthest pair
/// (lowest index pair on ties); for small inputs the remaining pairs follow
/// in lexicographic order and the lowest objective wins, earliest run on
/// ties. `seed` is recorded only; no step is random.
///
/// Throws InvalidArgument for fewer than 2 vectors, DimensionMismatch for
/// ragged input, DegenerateInput when every vector is identical.
ClusterAssignment kmeans2(std::span<const EmbeddingVector> vectors,
                          std::uint64_t seed = 0);

double within_cluster_ss(std::span<const EmbeddingVector> vectors,
                         std::span<const int> labels);

enum class TieBreak { kNone, kContainsClean, kTighterCluster, kLowestIndex };

std::string_view to_string(TieBreak t);

struct MajorityChoice {
  int cluster = 0;
  std::size_t size = 0;
  TieBreak tie_break = TieBreak::kNone;
};

/// Larger cluster; on equal sizes the cluster holding `clean_position`,
/// then the one with smaller mean distance to its centroid, then the one
/// holding position 0.
MajorityChoice select_majority(const ClusterAssignment& assignment,
                               std::optional<std::size_t> clean_position);

/// Member with the highest cosine to `centroid`; lowest position on ties.
std::size_t select_representative(std::span<const std::size_t> members,
                                  std::span<const EmbeddingVector> vectors,
                                  const EmbeddingVector& centroid);

/// Keyword heuristic recorded per candidate for experimentation. Not used
/// in selection.
enum class Polarity { kNeutral, kRefusal, kCompliance };

std::string_view to_string(Polarity p);
Polarity polarity_tag(std::string_view text);

struct AggregationResult {
  std::string selected_text;
  std::size_t selected_index = 0;  // candidate_index of the selected answer
  int majority_cluster = 0;
  std::size_t majority_size = 0;
  TieBreak tie_break_used = TieBreak::kNone;
  bool degenerate = false;  // all answers identical; clustering skipped
  ClusterAssignment assignment;
  std::vector<std::size_t> candidate_indices;  // position -> candidate_index
  std::vector<double> centroid_cosines;        // position -> cosine to own centroid
  std::vector<Polarity> polarity;
  std::vector<bool> empty;
};

/// kmeans2 -> select_majority -> select_representative. When every text is
/// identical the clean candidate is returned directly with majority_size
/// equal to the candidate count. `empty` marks candidates whose text was
/// blank; a blank clean candidate does not count for the clean tie-break.
AggregationResult aggregate_batch(std::span<const CandidateResponse> candidates,
                                  std::span<const EmbeddingVector> embeddings,
                                  std::size_t clean_index, std::uint64_t seed = 0,
                                  const std::vector<bool>& empty = {});

nlohmann::json to_json(const AggregationResult& result);

}  // namespace smoothguard
