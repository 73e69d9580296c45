#include "coughhmm/annotations.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "coughhmm/numeric.hpp"
#include "csv_util.hpp"

namespace cough {

std::vector<LabelInterval> load_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open '" + path.string() + "' for reading");

  std::string line;
  if (!std::getline(in, line)) line.clear();
  csv::strip_cr(line);
  if (line != "start_s,end_s,state")
    throw std::runtime_error("'" + path.string() +
                             "': expected header start_s,end_s,state");

  std::vector<LabelInterval> intervals;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    csv::strip_cr(line);
    if (line.empty()) continue;
    const std::string ctx = path.string() + " row " + std::to_string(row);
    const auto cell = csv::split(line);
    if (cell.size() != 3)
      throw std::runtime_error(ctx + ": expected 3 comma-separated fields");
    LabelInterval iv;
    iv.start_s = parse_double(cell[0], ctx);
    iv.end_s = parse_double(cell[1], ctx);
    if (cell[2].size() != 1)
      throw std::runtime_error(ctx + ": unknown state token '" + cell[2] + "'");
    try {
      iv.state = state_from_char(cell[2][0]);
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(ctx + ": " + e.what());
    }
    if (!(iv.start_s < iv.end_s))
      throw std::runtime_error(ctx + ": interval start must precede its end");
    intervals.push_back(iv);
  }

  std::sort(intervals.begin(), intervals.end(),
            [](const LabelInterval& a, const LabelInterval& b) {
              return a.start_s < b.start_s;
            });
  for (std::size_t i = 0; i + 1 < intervals.size(); ++i)
    if (intervals[i].end_s > intervals[i + 1].start_s)
      throw std::runtime_error(
          "'" + path.string() + "': intervals [" +
          format_double(intervals[i].start_s) + ", " +
          format_double(intervals[i].end_s) + ") and [" +
          format_double(intervals[i + 1].start_s) + ", " +
          format_double(intervals[i + 1].end_s) + ") overlap");
  return intervals;
}

void save_labels(const std::vector<LabelInterval>& intervals,
                 const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << "start_s,end_s,state\n";
  for (const LabelInterval& iv : intervals)
    out << format_double(iv.start_s) << ',' << format_double(iv.end_s) << ','
        << to_char(iv.state) << '\n';
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

LabeledSeries align_labels(const FeatureSeries& features,
                           const std::vector<LabelInterval>& intervals) {
  LabeledSeries out;
  out.features = features;
  out.labels.reserve(features.vectors.size());
  // Intervals are sorted and disjoint, bins ascend: one linear sweep.
  std::size_t i = 0;
  for (const FeatureVector& v : features.vectors) {
    while (i < intervals.size() && intervals[i].end_s <= v.t_mid_s) ++i;
    const bool covered = i < intervals.size() &&
                         intervals[i].start_s <= v.t_mid_s &&
                         v.t_mid_s < intervals[i].end_s;
    out.labels.push_back(covered ? intervals[i].state : StateLabel::E);
  }
  return out;
}

std::vector<LabelInterval> intervals_from_labels(
    const std::vector<StateLabel>& labels, double bin_duration_s) {
  std::vector<LabelInterval> intervals;
  if (labels.empty()) return intervals;
  std::size_t run_start = 0;
  for (std::size_t k = 0; k <= labels.size(); ++k) {
    if (k < labels.size() && labels[k] == labels[run_start]) continue;
    if (labels[run_start] != StateLabel::E)
      intervals.push_back({static_cast<double>(run_start) * bin_duration_s,
                           static_cast<double>(k) * bin_duration_s,
                           labels[run_start]});
    run_start = k;
  }
  return intervals;
}

std::vector<std::size_t> validate_labels(const std::vector<StateLabel>& labels,
                                         const Topology& topology) {
  std::vector<std::size_t> violations;
  for (std::size_t i = 0; i + 1 < labels.size(); ++i)
    if (!topology.is_allowed(labels[i], labels[i + 1])) violations.push_back(i);
  return violations;
}

}  // namespace cough
