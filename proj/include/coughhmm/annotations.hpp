// coughhmm/annotations.hpp
//
// Human-made state annotations and their alignment to feature bins.
// Annotation files are CSV `start_s,end_s,state` with half-open intervals;
// time not covered by any interval is the ambient non-coughing state E.

#pragma once

#include <filesystem>
#include <vector>

#include "coughhmm/features.hpp"
#include "coughhmm/state.hpp"

namespace cough {

struct LabelInterval {
  double start_s = 0.0;
  double end_s = 0.0;  // exclusive
  StateLabel state = StateLabel::E;
};

struct LabeledSeries {
  FeatureSeries features;
  std::vector<StateLabel> labels;  // one per bin
};

// Returns intervals sorted by start time.  Rejects malformed rows,
// overlapping intervals and unknown state tokens, naming the row.
std::vector<LabelInterval> load_labels(const std::filesystem::path& path);

void save_labels(const std::vector<LabelInterval>& intervals,
                 const std::filesystem::path& path);

// Each bin takes the state of the interval containing its mid-point
// (half-open containment); uncovered mid-points default to E.
LabeledSeries align_labels(const FeatureSeries& features,
                           const std::vector<LabelInterval>& intervals);

// Merges consecutive equal labels into intervals on the bin grid.
// E runs are omitted: alignment restores them via the default rule.
std::vector<LabelInterval> intervals_from_labels(
    const std::vector<StateLabel>& labels, double bin_duration_s);

// Indices i where labels[i] -> labels[i+1] is structurally forbidden.
// Empty result means the sequence is consistent with the topology.
std::vector<std::size_t> validate_labels(
    const std::vector<StateLabel>& labels,
    const Topology& topology = Topology::cough());

}  // namespace cough
