#include "coughhmm/eval.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "coughhmm/numeric.hpp"

namespace cough {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::size_t idx(StateLabel s) { return static_cast<std::size_t>(s); }

}  // namespace

long long ConfusionMatrix::total() const {
  long long t = 0;
  for (const auto& row : counts)
    for (long long c : row) t += c;
  return t;
}

long long ConfusionMatrix::trace() const {
  long long t = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) t += counts[i][i];
  return t;
}

long long ConfusionMatrix::row_sum(std::size_t r) const {
  return std::accumulate(counts[r].begin(), counts[r].end(), 0LL);
}

long long ConfusionMatrix::col_sum(std::size_t c) const {
  long long t = 0;
  for (const auto& row : counts) t += row[c];
  return t;
}

ConfusionMatrix confusion(const std::vector<StateLabel>& predicted,
                          const std::vector<StateLabel>& observed) {
  if (predicted.size() != observed.size())
    throw std::invalid_argument("predicted and observed label counts differ");
  if (predicted.empty())
    throw std::invalid_argument("cannot build a confusion matrix from zero bins");
  ConfusionMatrix m;
  m.counts.assign(kNumStates, std::vector<long long>(kNumStates, 0));
  for (StateLabel s : kAllStates) m.class_names.push_back(to_string(s));
  for (std::size_t i = 0; i < predicted.size(); ++i)
    ++m.counts[idx(predicted[i])][idx(observed[i])];
  return m;
}

ClassMetrics class_metrics(const ConfusionMatrix& m) {
  const std::size_t k = m.counts.size();
  if (k == 0 || m.total() == 0)
    throw std::invalid_argument("empty confusion matrix");
  const double total = static_cast<double>(m.total());

  ClassMetrics out;
  for (std::size_t c = 0; c < k; ++c) {
    const double col = static_cast<double>(m.col_sum(c));
    const double row = static_cast<double>(m.row_sum(c));
    const double hit = static_cast<double>(m.counts[c][c]);
    out.sensitivity.push_back(col > 0 ? hit / col : kNan);
    const double neg = total - col;  // observations not in class c
    out.specificity.push_back(neg > 0 ? (total - col - row + hit) / neg : kNan);
  }
  out.accuracy = static_cast<double>(m.trace()) / total;
  return out;
}

BinaryMetrics binary_metrics(long long tp, long long fp, long long fn,
                             long long tn) {
  const long long total = tp + fp + fn + tn;
  if (total <= 0) throw std::invalid_argument("empty binary confusion");
  BinaryMetrics b;
  b.sensitivity = tp + fn > 0
                      ? static_cast<double>(tp) / static_cast<double>(tp + fn)
                      : kNan;
  b.specificity = tn + fp > 0
                      ? static_cast<double>(tn) / static_cast<double>(tn + fp)
                      : kNan;
  b.accuracy = static_cast<double>(tp + tn) / static_cast<double>(total);
  return b;
}

RocCurve roc_binary(const std::vector<double>& scores,
                    const std::vector<bool>& truth,
                    const std::string& positive_label) {
  if (scores.size() != truth.size())
    throw std::invalid_argument("scores and truth lengths differ");
  long long n_pos = 0, n_neg = 0;
  for (bool t : truth) (t ? n_pos : n_neg) += 1;
  if (n_pos == 0 || n_neg == 0)
    throw std::invalid_argument(
        "ROC needs at least one positive and one negative example");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&scores](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  RocCurve curve;
  curve.positive_label = positive_label;
  curve.points.push_back(
      {0.0, 0.0, std::numeric_limits<double>::infinity()});

  long long tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    // consume the whole group of equal scores before emitting a point
    while (i < order.size() && scores[order[i]] == s) {
      (truth[order[i]] ? tp : fp) += 1;
      ++i;
    }
    curve.points.push_back({static_cast<double>(fp) / n_neg,
                            static_cast<double>(tp) / n_pos, s});
  }
  return curve;
}

double auc(const RocCurve& curve) {
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < curve.points.size(); ++i) {
    const RocPoint& a = curve.points[i];
    const RocPoint& b = curve.points[i + 1];
    area += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
  }
  return area;
}

YoudenPoint youden_best(const RocCurve& curve) {
  if (curve.points.empty()) throw std::invalid_argument("empty ROC curve");
  const RocPoint* best = &curve.points.front();
  for (const RocPoint& p : curve.points) {
    const double j = p.tpr - p.fpr;
    const double best_j = best->tpr - best->fpr;
    if (j > best_j ||
        (j == best_j && (p.tpr > best->tpr ||
                         (p.tpr == best->tpr && p.threshold < best->threshold))))
      best = &p;
  }
  YoudenPoint y;
  y.threshold = best->threshold;
  y.sensitivity = best->tpr;
  y.specificity = 1.0 - best->fpr;
  y.j = best->tpr - best->fpr;
  return y;
}

void export_roc_csv(const RocCurve& curve, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << "fpr,tpr,threshold\n";
  for (const RocPoint& p : curve.points)
    out << format_double(p.fpr) << ',' << format_double(p.tpr) << ','
        << format_double(p.threshold) << '\n';
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

OvoResult roc_multiclass_ovo(
    const std::vector<std::array<double, kNumStates>>& posteriors,
    const std::vector<StateLabel>& truth) {
  if (posteriors.size() != truth.size())
    throw std::invalid_argument("posterior and truth lengths differ");
  std::array<long long, kNumStates> present{};
  for (StateLabel s : truth) ++present[idx(s)];
  int n_classes = 0;
  for (long long c : present) n_classes += c > 0 ? 1 : 0;
  if (n_classes < 2)
    throw std::invalid_argument(
        "one-vs-one ROC needs at least two classes in the truth");

  OvoResult out;
  double sum = 0.0;
  for (StateLabel a : kAllStates) {
    for (StateLabel b : kAllStates) {
      if (idx(b) <= idx(a)) continue;
      if (present[idx(a)] == 0 || present[idx(b)] == 0) continue;

      std::vector<double> score_a, score_b;
      std::vector<bool> truth_a, truth_b;
      for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] != a && truth[i] != b) continue;
        const double pa = posteriors[i][idx(a)];
        const double pb = posteriors[i][idx(b)];
        const double denom = pa + pb;
        // Both posteriors can underflow to zero; score 1/2 keeps the bin
        // uninformative instead of undefined.
        const double sa = denom > 0.0 ? pa / denom : 0.5;
        score_a.push_back(sa);
        truth_a.push_back(truth[i] == a);
        score_b.push_back(denom > 0.0 ? pb / denom : 0.5);
        truth_b.push_back(truth[i] == b);
      }
      PairAuc pair;
      pair.first = a;
      pair.second = b;
      pair.curve = roc_binary(score_a, truth_a,
                              to_string(a) + "_vs_" + to_string(b));
      const double auc_ab = auc(pair.curve);
      const double auc_ba = auc(roc_binary(score_b, truth_b, "rev"));
      pair.auc = 0.5 * (auc_ab + auc_ba);
      sum += pair.auc;
      out.pairs.push_back(std::move(pair));
    }
  }
  out.macro_auc = sum / static_cast<double>(out.pairs.size());
  return out;
}

// --- Two-fold cross validation ----------------------------------------------

namespace {

// Greedy largest-first assignment of recordings to two folds, balancing
// total bin counts.  A single recording is cut into contiguous halves.
std::array<std::vector<LabeledSeries>, 2> split_dataset(
    const std::vector<LabeledSeries>& dataset) {
  if (dataset.empty())
    throw std::invalid_argument("dataset holds no recordings");

  if (dataset.size() == 1) {
    const LabeledSeries& rec = dataset.front();
    const std::size_t n = rec.labels.size();
    if (n < 2)
      throw std::invalid_argument(
          "dataset is indivisible: a single recording needs at least two bins");
    const std::size_t cut = n / 2;
    LabeledSeries first, second;
    first.features.bin_duration_s = second.features.bin_duration_s =
        rec.features.bin_duration_s;
    first.features.sample_rate_hz = second.features.sample_rate_hz =
        rec.features.sample_rate_hz;
    first.features.source_id = rec.features.source_id + "[first-half]";
    second.features.source_id = rec.features.source_id + "[second-half]";
    first.features.vectors.assign(rec.features.vectors.begin(),
                                  rec.features.vectors.begin() + cut);
    second.features.vectors.assign(rec.features.vectors.begin() + cut,
                                   rec.features.vectors.end());
    first.labels.assign(rec.labels.begin(), rec.labels.begin() + cut);
    second.labels.assign(rec.labels.begin() + cut, rec.labels.end());
    return {std::vector<LabeledSeries>{std::move(first)},
            std::vector<LabeledSeries>{std::move(second)}};
  }

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&dataset](std::size_t a, std::size_t b) {
                     return dataset[a].labels.size() > dataset[b].labels.size();
                   });
  std::array<std::vector<LabeledSeries>, 2> folds;
  std::array<std::size_t, 2> load{};
  for (std::size_t i : order) {
    const std::size_t f = load[1] < load[0] ? 1 : 0;
    folds[f].push_back(dataset[i]);
    load[f] += dataset[i].labels.size();
  }
  return folds;
}

double nan_excluded_mean(const std::vector<double>& vals, int& dropped) {
  double sum = 0.0;
  int n = 0;
  for (double v : vals) {
    if (std::isnan(v)) {
      ++dropped;
      continue;
    }
    sum += v;
    ++n;
  }
  return n > 0 ? sum / n : kNan;
}

}  // namespace

std::string grouping_name(Grouping g) {
  return g == Grouping::CoughVsNonCough ? "cough_vs_noncough"
                                        : "coughing_vs_noncoughing";
}

EvalReport two_fold_cv(const std::vector<LabeledSeries>& dataset,
                       FeatureMode mode, const std::vector<Grouping>& groupings,
                       double energy_floor, const Topology& topology) {
  const auto folds = split_dataset(dataset);

  EvalReport report;
  report.mode = mode;
  for (int test_fold = 0; test_fold < 2; ++test_fold) {
    const auto& train_set = folds[static_cast<std::size_t>(1 - test_fold)];
    const auto& test_set = folds[static_cast<std::size_t>(test_fold)];
    const HmmModel model = train(train_set, mode, energy_floor, topology);

    std::vector<std::array<double, kNumStates>> posteriors;
    std::vector<StateLabel> predicted, observed;
    FoldReport fr;
    fr.test_fold = test_fold;
    for (const LabeledSeries& rec : test_set) {
      fr.test_recordings.push_back(rec.features.source_id);
      const DecodeResult dec = forward_filter(model, rec.features);
      for (std::size_t t = 0; t < dec.posteriors.size(); ++t) {
        posteriors.push_back(dec.posteriors[t]);
        observed.push_back(rec.labels[t]);
        // argmax with ties toward the lower state
        int best = 0;
        for (int s = 1; s < kNumStates; ++s)
          if (dec.posteriors[t][static_cast<std::size_t>(s)] >
              dec.posteriors[t][static_cast<std::size_t>(best)])
            best = s;
        predicted.push_back(static_cast<StateLabel>(best));
      }
    }

    fr.n_bins = static_cast<long long>(observed.size());
    fr.confusion = confusion(predicted, observed);
    fr.multiclass = class_metrics(fr.confusion);

    for (Grouping g : groupings) {
      GroupEval ge;
      ge.grouping = g;
      const std::vector<double> scores = group_scores(posteriors, g);
      std::vector<bool> truth;
      truth.reserve(observed.size());
      for (StateLabel s : observed) truth.push_back(in_positive_group(g, s));
      ge.roc = roc_binary(scores, truth, grouping_name(g));
      ge.auc_value = auc(ge.roc);
      ge.youden = youden_best(ge.roc);
      for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool decide_pos = scores[i] >= ge.youden.threshold;
        if (decide_pos && truth[i]) ++ge.tp;
        else if (decide_pos && !truth[i]) ++ge.fp;
        else if (!decide_pos && truth[i]) ++ge.fn;
        else ++ge.tn;
      }
      ge.metrics_at_youden = binary_metrics(ge.tp, ge.fp, ge.fn, ge.tn);
      fr.groups.push_back(std::move(ge));
    }

    fr.ovo = roc_multiclass_ovo(posteriors, observed);
    report.folds.push_back(std::move(fr));
  }

  // Fold means; undefined per-class entries are dropped and counted.
  report.mean_accuracy = (report.folds[0].multiclass.accuracy +
                          report.folds[1].multiclass.accuracy) /
                         2.0;
  for (int c = 0; c < kNumStates; ++c) {
    const std::size_t cc = static_cast<std::size_t>(c);
    report.mean_sensitivity.push_back(nan_excluded_mean(
        {report.folds[0].multiclass.sensitivity[cc],
         report.folds[1].multiclass.sensitivity[cc]},
        report.undefined_class_metrics));
    report.mean_specificity.push_back(nan_excluded_mean(
        {report.folds[0].multiclass.specificity[cc],
         report.folds[1].multiclass.specificity[cc]},
        report.undefined_class_metrics));
  }
  for (std::size_t gi = 0; gi < groupings.size(); ++gi)
    report.mean_group_auc.push_back((report.folds[0].groups[gi].auc_value +
                                     report.folds[1].groups[gi].auc_value) /
                                    2.0);
  report.mean_ovo_macro_auc =
      (report.folds[0].ovo.macro_auc + report.folds[1].ovo.macro_auc) / 2.0;
  return report;
}

// --- Report output ------------------------------------------------------------

namespace {

using json = nlohmann::json;

json metrics_to_json(const ClassMetrics& m) {
  json j;
  j["sensitivity"] = m.sensitivity;  // NaN serializes as null
  j["specificity"] = m.specificity;
  j["accuracy"] = m.accuracy;
  return j;
}

json group_to_json(const GroupEval& g) {
  json j;
  j["grouping"] = grouping_name(g.grouping);
  j["auc"] = g.auc_value;
  j["youden"] = {{"threshold", g.youden.threshold},
                 {"sensitivity", g.youden.sensitivity},
                 {"specificity", g.youden.specificity},
                 {"j", g.youden.j}};
  j["counts_at_youden"] = {
      {"tp", g.tp}, {"fp", g.fp}, {"fn", g.fn}, {"tn", g.tn}};
  j["metrics_at_youden"] = {{"sensitivity", g.metrics_at_youden.sensitivity},
                            {"specificity", g.metrics_at_youden.specificity},
                            {"accuracy", g.metrics_at_youden.accuracy}};
  return j;
}

}  // namespace

void save_report_json(const EvalReport& report,
                      const std::filesystem::path& path) {
  json j;
  j["format_version"] = 1;
  j["mode"] = report.mode == FeatureMode::Univariate ? "univariate"
                                                     : "multivariate";
  j["folds"] = json::array();
  for (const FoldReport& fr : report.folds) {
    json f;
    f["test_fold"] = fr.test_fold;
    f["test_recordings"] = fr.test_recordings;
    f["n_bins"] = fr.n_bins;
    f["confusion"] = {{"class_names", fr.confusion.class_names},
                      {"counts", fr.confusion.counts}};
    f["multiclass"] = metrics_to_json(fr.multiclass);
    f["groups"] = json::array();
    for (const GroupEval& g : fr.groups) f["groups"].push_back(group_to_json(g));
    f["ovo"] = {{"macro_auc", fr.ovo.macro_auc}, {"pairs", json::array()}};
    for (const PairAuc& p : fr.ovo.pairs)
      f["ovo"]["pairs"].push_back({{"pair", to_string(p.first) + "_vs_" +
                                                to_string(p.second)},
                                   {"auc", p.auc}});
    j["folds"].push_back(std::move(f));
  }
  j["mean"] = {{"accuracy", report.mean_accuracy},
               {"sensitivity", report.mean_sensitivity},
               {"specificity", report.mean_specificity},
               {"undefined_class_metrics", report.undefined_class_metrics},
               {"ovo_macro_auc", report.mean_ovo_macro_auc}};
  for (std::size_t gi = 0; gi < report.mean_group_auc.size(); ++gi)
    j["mean"]["group_auc"][grouping_name(report.folds[0].groups[gi].grouping)] =
        report.mean_group_auc[gi];

  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

std::string format_report_text(const EvalReport& report) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "Two-fold cross validation ("
     << (report.mode == FeatureMode::Univariate ? "univariate" : "multivariate")
     << " emissions)\n";
  for (const FoldReport& fr : report.folds) {
    os << "\n=== Test fold " << fr.test_fold << " (" << fr.n_bins
       << " bins; recordings:";
    for (const std::string& r : fr.test_recordings) os << ' ' << r;
    os << ")\n";
    os << "  Confusion (rows predicted, columns observed):\n";
    os << "      ";
    for (const std::string& n : fr.confusion.class_names)
      os << std::setw(8) << n;
    os << '\n';
    for (std::size_t r = 0; r < fr.confusion.counts.size(); ++r) {
      os << "    " << fr.confusion.class_names[r] << ' ';
      for (long long c : fr.confusion.counts[r]) os << std::setw(8) << c;
      os << '\n';
    }
    os << "  sensitivity:";
    for (double v : fr.multiclass.sensitivity)
      if (std::isnan(v)) os << "     n/a";
      else os << ' ' << std::setw(7) << v;
    os << "\n  specificity:";
    for (double v : fr.multiclass.specificity)
      if (std::isnan(v)) os << "     n/a";
      else os << ' ' << std::setw(7) << v;
    os << "\n  accuracy: " << fr.multiclass.accuracy << '\n';
    for (const GroupEval& g : fr.groups) {
      os << "  [" << grouping_name(g.grouping) << "] AUC " << g.auc_value
         << "; Youden threshold " << g.youden.threshold << " (sens "
         << g.youden.sensitivity << ", spec " << g.youden.specificity
         << ", J " << g.youden.j << ")\n";
      os << "    at threshold: tp " << g.tp << " fp " << g.fp << " fn " << g.fn
         << " tn " << g.tn << "; accuracy " << g.metrics_at_youden.accuracy
         << '\n';
    }
    os << "  one-vs-one macro AUC: " << fr.ovo.macro_auc << '\n';
  }
  os << "\n=== Fold means\n  accuracy: " << report.mean_accuracy << '\n';
  os << "  sensitivity:";
  for (double v : report.mean_sensitivity)
    if (std::isnan(v)) os << "     n/a";
    else os << ' ' << std::setw(7) << v;
  os << "\n  specificity:";
  for (double v : report.mean_specificity)
    if (std::isnan(v)) os << "     n/a";
    else os << ' ' << std::setw(7) << v;
  os << '\n';
  if (report.undefined_class_metrics > 0)
    os << "  (" << report.undefined_class_metrics
       << " undefined per-class entries excluded from the means)\n";
  for (std::size_t gi = 0; gi < report.mean_group_auc.size(); ++gi)
    os << "  [" << grouping_name(report.folds[0].groups[gi].grouping)
       << "] mean AUC " << report.mean_group_auc[gi] << '\n';
  os << "  one-vs-one mean macro AUC: " << report.mean_ovo_macro_auc << '\n';
  return os.str();
}

}  // namespace cough
