// coughhmm/eval.hpp
//
// Evaluation machinery: confusion matrices, per-class sensitivity and
// specificity, binary and one-vs-one multiclass ROC, trapezoidal AUC,
// Youden operating points and the two-fold cross-validation harness.

#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "coughhmm/annotations.hpp"
#include "coughhmm/hmm.hpp"
#include "coughhmm/state.hpp"

namespace cough {

// Rows are the predicted class, columns the observed class.
struct ConfusionMatrix {
  std::vector<std::vector<long long>> counts;
  std::vector<std::string> class_names;

  long long total() const;
  long long trace() const;
  long long row_sum(std::size_t r) const;
  long long col_sum(std::size_t c) const;
};

ConfusionMatrix confusion(const std::vector<StateLabel>& predicted,
                          const std::vector<StateLabel>& observed);

// sensitivity(c) = counts[c][c] / column c total; specificity(c) is the
// share of non-c observations not predicted as c.  A class absent from
// the observations yields NaN, not an error.
struct ClassMetrics {
  std::vector<double> sensitivity;
  std::vector<double> specificity;
  double accuracy = 0.0;
};

ClassMetrics class_metrics(const ConfusionMatrix& m);

struct BinaryMetrics {
  double sensitivity = 0.0;
  double specificity = 0.0;
  double accuracy = 0.0;
};

BinaryMetrics binary_metrics(long long tp, long long fp, long long fn,
                             long long tn);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // classify positive when score >= threshold
};

struct RocCurve {
  std::vector<RocPoint> points;  // ordered by FPR, from (0,0) to (1,1)
  std::string positive_label;
};

// Threshold sweep over the distinct score values plus a sentinel above the
// maximum (the (0,0) endpoint).  Needs at least one positive and one
// negative example.
RocCurve roc_binary(const std::vector<double>& scores,
                    const std::vector<bool>& truth,
                    const std::string& positive_label = "positive");

// Trapezoidal area; equals the tie-adjusted pairwise ranking probability.
double auc(const RocCurve& curve);

struct YoudenPoint {
  double threshold = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double j = 0.0;  // sensitivity + specificity - 1
};

// Maximizes J = TPR - FPR; ties break toward higher sensitivity, then
// lower threshold.
YoudenPoint youden_best(const RocCurve& curve);

void export_roc_csv(const RocCurve& curve, const std::filesystem::path& path);

// One-vs-one multiclass ROC (Hand-Till): for each class pair present in
// the truth, score restricted bins by the renormalized posterior of one
// class and average the two directed AUCs.
struct PairAuc {
  StateLabel first = StateLabel::A;
  StateLabel second = StateLabel::B;
  double auc = 0.0;         // mean of the two directions
  RocCurve curve;           // direction with `first` positive
};

struct OvoResult {
  std::vector<PairAuc> pairs;
  double macro_auc = 0.0;  // mean over present pairs
};

OvoResult roc_multiclass_ovo(
    const std::vector<std::array<double, kNumStates>>& posteriors,
    const std::vector<StateLabel>& truth);

// --- Two-fold cross validation --------------------------------------------

struct GroupEval {
  Grouping grouping = Grouping::CoughVsNonCough;
  RocCurve roc;
  double auc_value = 0.0;
  YoudenPoint youden;
  long long tp = 0, fp = 0, fn = 0, tn = 0;  // at the Youden threshold
  BinaryMetrics metrics_at_youden;
};

struct FoldReport {
  int test_fold = 0;  // which half served as the test set
  std::vector<std::string> test_recordings;
  long long n_bins = 0;
  ConfusionMatrix confusion;  // posterior-argmax multiclass
  ClassMetrics multiclass;
  std::vector<GroupEval> groups;
  OvoResult ovo;
};

struct EvalReport {
  FeatureMode mode = FeatureMode::Multivariate;
  std::vector<FoldReport> folds;
  // Across folds; per-class entries exclude NaN folds.
  double mean_accuracy = 0.0;
  std::vector<double> mean_sensitivity;
  std::vector<double> mean_specificity;
  int undefined_class_metrics = 0;  // NaN entries excluded from the means
  std::vector<double> mean_group_auc;  // parallel to the grouping set
  double mean_ovo_macro_auc = 0.0;
};

// Splits the dataset into two folds (by recording when possible, balanced
// by bin count greedy largest-first; a single recording splits into two
// contiguous halves), trains on each fold and evaluates on the other.
EvalReport two_fold_cv(const std::vector<LabeledSeries>& dataset,
                       FeatureMode mode,
                       const std::vector<Grouping>& groupings =
                           {Grouping::CoughVsNonCough,
                            Grouping::CoughingVsNonCoughing},
                       double energy_floor = 1e-6,
                       const Topology& topology = Topology::cough());

std::string grouping_name(Grouping g);

// report.json / report.txt writers; ROC CSVs are written alongside via
// export_roc_csv by the CLI.
void save_report_json(const EvalReport& report,
                      const std::filesystem::path& path);
std::string format_report_text(const EvalReport& report);

}  // namespace cough
