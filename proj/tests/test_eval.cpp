#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <random>

#include "coughhmm/eval.hpp"
#include "support/oracles.hpp"
#include "support/tmpdir.hpp"

using namespace cough;
using coughtest::TmpDir;

namespace {

std::size_t idx(StateLabel s) { return static_cast<std::size_t>(s); }

// Published test-set confusion matrices (rows predicted, columns observed).
ConfusionMatrix univariate_table() {
  ConfusionMatrix m;
  m.class_names = {"A", "B", "C", "D", "E"};
  m.counts = {{31, 6, 1, 1, 7},
              {3, 45, 19, 6, 25},
              {3, 17, 29, 4, 5},
              {3, 2, 31, 21, 19},
              {13, 9, 65, 84, 714}};
  return m;
}

ConfusionMatrix multivariate_table() {
  ConfusionMatrix m;
  m.class_names = {"A", "B", "C", "D", "E"};
  m.counts = {{41, 12, 0, 1, 5},
              {4, 41, 6, 0, 8},
              {0, 21, 33, 2, 10},
              {2, 4, 43, 26, 3},
              {6, 1, 63, 87, 744}};
  return m;
}

void check_printed(double computed, double printed, int decimals) {
  // agreement within one unit in the last printed digit
  CHECK(std::abs(computed - printed) <= std::pow(10.0, -decimals) + 1e-12);
}

}  // namespace

TEST_CASE("confusion matrix bookkeeping") {
  std::vector<StateLabel> same(10, StateLabel::B);
  const ConfusionMatrix diag = confusion(same, same);
  CHECK(diag.total() == 10);
  CHECK(diag.trace() == 10);
  CHECK(diag.counts[idx(StateLabel::B)][idx(StateLabel::B)] == 10);

  const ConfusionMatrix single =
      confusion({StateLabel::A}, {StateLabel::E});
  CHECK(single.counts[idx(StateLabel::A)][idx(StateLabel::E)] == 1);
  CHECK(single.total() == 1);

  CHECK_THROWS_AS(confusion({StateLabel::A}, {}), std::invalid_argument);

  const ConfusionMatrix published = univariate_table();
  CHECK(published.total() == 1163);
  CHECK(published.trace() == 840);
}

TEST_CASE("published univariate table reproduces its printed statistics") {
  const ClassMetrics m = class_metrics(univariate_table());
  check_printed(m.sensitivity[0], 0.58491, 5);
  check_printed(m.sensitivity[1], 0.56962, 5);
  check_printed(m.sensitivity[2], 0.20000, 5);
  check_printed(m.sensitivity[3], 0.18103, 5);
  check_printed(m.sensitivity[4], 0.9273, 4);
  check_printed(m.specificity[0], 0.98649, 5);
  check_printed(m.specificity[1], 0.95111, 5);
  check_printed(m.specificity[2], 0.97151, 5);
  check_printed(m.specificity[3], 0.94747, 5);
  check_printed(m.specificity[4], 0.5649, 4);
  check_printed(m.accuracy, 0.7223, 4);
  // exact fractions behind the prints
  CHECK(m.sensitivity[0] == doctest::Approx(31.0 / 53.0).epsilon(1e-12));
  CHECK(m.accuracy == doctest::Approx(840.0 / 1163.0).epsilon(1e-12));
}

TEST_CASE("published multivariate table reproduces its printed statistics") {
  const ClassMetrics m = class_metrics(multivariate_table());
  check_printed(m.sensitivity[0], 0.77358, 5);
  check_printed(m.sensitivity[1], 0.51899, 5);
  check_printed(m.sensitivity[2], 0.22759, 5);
  check_printed(m.sensitivity[3], 0.22414, 5);
  check_printed(m.sensitivity[4], 0.9662, 4);
  check_printed(m.specificity[0], 0.98378, 5);
  check_printed(m.specificity[1], 0.98339, 5);
  check_printed(m.specificity[2], 0.96758, 5);
  check_printed(m.specificity[3], 0.95033, 5);
  check_printed(m.specificity[4], 0.6005, 4);
  check_printed(m.accuracy, 0.761, 3);
  CHECK(m.sensitivity[0] == doctest::Approx(41.0 / 53.0).epsilon(1e-12));
}

TEST_CASE("an identity matrix scores perfectly") {
  ConfusionMatrix m;
  m.class_names = {"pos", "neg"};
  m.counts = {{5, 0}, {0, 5}};
  const ClassMetrics cm = class_metrics(m);
  CHECK(cm.sensitivity[0] == 1.0);
  CHECK(cm.sensitivity[1] == 1.0);
  CHECK(cm.specificity[0] == 1.0);
  CHECK(cm.specificity[1] == 1.0);
  CHECK(cm.accuracy == 1.0);
}

TEST_CASE("a class absent from observations yields NaN, not an error") {
  ConfusionMatrix m;
  m.class_names = {"a", "b"};
  m.counts = {{3, 0}, {2, 0}};  // nothing observed in class b
  const ClassMetrics cm = class_metrics(m);
  CHECK(std::isnan(cm.sensitivity[1]));
  CHECK(std::isfinite(cm.sensitivity[0]));
}

TEST_CASE("binary metrics reproduce the published grouped tables") {
  struct Row {
    long long tp, fp, fn, tn;
    double sens, spec, acc;    // spec-quoted decimals
    int psens, pspec, pacc;    // printed integer percentages
  };
  // The multivariate bout row's printed 90/89 sit one integer step above
  // the values its own counts give (89.07%, 88.36%); everything is checked
  // to within one unit in the last printed place.
  const Row rows[] = {
      {247, 230, 30, 656, 0.8917, 0.7404, 0.7765, 89, 74, 78},
      {371, 214, 22, 556, 0.9440, 0.7221, 0.7971, 94, 72, 80},
      {243, 181, 34, 705, 0.8773, 0.7957, 0.8151, 88, 80, 82},
      {342, 82, 51, 668, 0.8702, 0.8907, 0.8837, 87, 90, 89},
  };
  for (const Row& r : rows) {
    const BinaryMetrics b = binary_metrics(r.tp, r.fp, r.fn, r.tn);
    CHECK(b.sensitivity == doctest::Approx(static_cast<double>(r.tp) /
                                           static_cast<double>(r.tp + r.fn))
                               .epsilon(1e-12));
    CHECK(b.specificity == doctest::Approx(static_cast<double>(r.tn) /
                                           static_cast<double>(r.tn + r.fp))
                               .epsilon(1e-12));
    check_printed(b.sensitivity, r.sens, 4);
    check_printed(b.specificity, r.spec, 4);
    check_printed(b.accuracy, r.acc, 4);
    CHECK(std::abs(b.sensitivity * 100.0 - r.psens) <= 1.0 + 1e-9);
    CHECK(std::abs(b.specificity * 100.0 - r.pspec) <= 1.0 + 1e-9);
    CHECK(std::abs(b.accuracy * 100.0 - r.pacc) <= 1.0 + 1e-9);
  }
  CHECK_THROWS_AS(binary_metrics(0, 0, 0, 0), std::invalid_argument);
}

TEST_CASE("ROC construction") {
  SUBCASE("perfect separation hits (0,1) and AUC 1") {
    const RocCurve c =
        roc_binary({0.9, 0.8, 0.2, 0.1}, {true, true, false, false});
    bool saw_corner = false;
    for (const RocPoint& p : c.points)
      saw_corner = saw_corner || (p.fpr == 0.0 && p.tpr == 1.0);
    CHECK(saw_corner);
    CHECK(auc(c) == 1.0);
    CHECK(c.points.front().fpr == 0.0);
    CHECK(c.points.front().tpr == 0.0);
    CHECK(c.points.back().fpr == 1.0);
    CHECK(c.points.back().tpr == 1.0);
  }

  SUBCASE("constant scores collapse to the diagonal") {
    const RocCurve c = roc_binary({0.5, 0.5, 0.5, 0.5},
                                  {true, false, true, false});
    CHECK(auc(c) == 0.5);
    REQUIRE(c.points.size() == 2);
    CHECK(c.points[1].fpr == 1.0);
    CHECK(c.points[1].tpr == 1.0);
  }

  SUBCASE("worked four-score example") {
    const RocCurve c =
        roc_binary({0.9, 0.8, 0.7, 0.6}, {true, false, true, false});
    CHECK(auc(c) == doctest::Approx(0.75).epsilon(1e-12));
  }

  SUBCASE("single-class truth is an error") {
    CHECK_THROWS_AS(roc_binary({0.2, 0.4}, {true, true}),
                    std::invalid_argument);
  }

  SUBCASE("monotone non-decreasing in both rates, Youden J is the max") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 50; ++rep) {
      std::vector<double> scores;
      std::vector<bool> truth;
      for (int i = 0; i < 30; ++i) {
        scores.push_back(std::round(u(rng) * 10.0) / 10.0);
        truth.push_back(u(rng) < 0.4);
      }
      if (std::count(truth.begin(), truth.end(), true) == 0 ||
          std::count(truth.begin(), truth.end(), false) == 0)
        continue;
      const RocCurve c = roc_binary(scores, truth);
      double max_j = -1.0;
      for (std::size_t i = 0; i < c.points.size(); ++i) {
        if (i + 1 < c.points.size()) {
          REQUIRE(c.points[i].fpr <= c.points[i + 1].fpr);
          REQUIRE(c.points[i].tpr <= c.points[i + 1].tpr);
        }
        max_j = std::max(max_j, c.points[i].tpr - c.points[i].fpr);
      }
      REQUIRE(youden_best(c).j == max_j);
    }
  }
}

TEST_CASE("trapezoidal AUC equals the pairwise ranking probability") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> size(2, 12);
  int done = 0;
  while (done < 150) {
    const int n = size(rng);
    std::vector<double> scores;
    std::vector<bool> truth;
    for (int i = 0; i < n; ++i) {
      // a coarse grid forces plenty of ties
      scores.push_back(std::round(u(rng) * 4.0) / 4.0);
      truth.push_back(u(rng) < 0.5);
    }
    if (std::count(truth.begin(), truth.end(), true) == 0 ||
        std::count(truth.begin(), truth.end(), false) == 0)
      continue;
    ++done;
    const double got = auc(roc_binary(scores, truth));
    const double expect = coughtest::pairwise_auc(scores, truth);
    REQUIRE(std::abs(got - expect) <= 1e-12);
  }
}

TEST_CASE("AUC is invariant under strictly increasing score transforms") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> scores;
  std::vector<bool> truth;
  for (int i = 0; i < 40; ++i) {
    scores.push_back(std::round(u(rng) * 8.0) / 8.0);
    truth.push_back(u(rng) < 0.5);
  }
  std::vector<double> warped;
  for (double s : scores) warped.push_back(std::exp(2.0 * s) + 1.0);
  CHECK(auc(roc_binary(scores, truth)) == auc(roc_binary(warped, truth)));
}

TEST_CASE("Youden point selection") {
  SUBCASE("perfect separation reaches J = 1") {
    const RocCurve c =
        roc_binary({0.9, 0.8, 0.2, 0.1}, {true, true, false, false});
    const YoudenPoint y = youden_best(c);
    CHECK(y.j == 1.0);
    CHECK(y.sensitivity == 1.0);
    CHECK(y.specificity == 1.0);
    CHECK(y.threshold == 0.8);
  }

  SUBCASE("diagonal curve ties resolve toward higher sensitivity") {
    const RocCurve c = roc_binary({0.5, 0.5}, {true, false});
    const YoudenPoint y = youden_best(c);
    CHECK(y.j == 0.0);
    CHECK(y.sensitivity == 1.0);
    CHECK(y.threshold == 0.5);
  }

  SUBCASE("worked four-point curve") {
    RocCurve c;
    c.points = {{0.0, 0.0, 0.9}, {0.2, 0.9, 0.6}, {0.5, 0.95, 0.4},
                {1.0, 1.0, 0.1}};
    const YoudenPoint y = youden_best(c);
    CHECK(y.j == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(y.sensitivity == 0.9);
    CHECK(y.specificity == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(y.threshold == 0.6);
  }
}

TEST_CASE("one-vs-one multiclass ROC") {
  SUBCASE("one-hot posteriors score every pair perfectly") {
    std::vector<std::array<double, kNumStates>> posts;
    std::vector<StateLabel> truth;
    for (int rep = 0; rep < 4; ++rep)
      for (StateLabel s : kAllStates) {
        std::array<double, kNumStates> p{};
        p[idx(s)] = 1.0;
        posts.push_back(p);
        truth.push_back(s);
      }
    const OvoResult r = roc_multiclass_ovo(posts, truth);
    CHECK(r.pairs.size() == 10);
    for (const PairAuc& p : r.pairs) CHECK(p.auc == 1.0);
    CHECK(r.macro_auc == 1.0);
  }

  SUBCASE("uniform posteriors are uninformative") {
    std::vector<std::array<double, kNumStates>> posts;
    std::vector<StateLabel> truth;
    for (int rep = 0; rep < 4; ++rep)
      for (StateLabel s : kAllStates) {
        posts.push_back({0.2, 0.2, 0.2, 0.2, 0.2});
        truth.push_back(s);
      }
    const OvoResult r = roc_multiclass_ovo(posts, truth);
    for (const PairAuc& p : r.pairs) CHECK(p.auc == 0.5);
    CHECK(r.macro_auc == 0.5);
  }

  SUBCASE("three-class toy set matches the pairwise oracle") {
    using S = StateLabel;
    std::vector<std::array<double, kNumStates>> posts = {
        {0.7, 0.2, 0.1, 0.0, 0.0}, {0.5, 0.4, 0.1, 0.0, 0.0},
        {0.3, 0.6, 0.1, 0.0, 0.0}, {0.25, 0.5, 0.25, 0.0, 0.0},
        {0.2, 0.3, 0.5, 0.0, 0.0}, {0.4, 0.2, 0.4, 0.0, 0.0}};
    std::vector<StateLabel> truth = {S::A, S::A, S::B, S::B, S::C, S::C};
    const OvoResult r = roc_multiclass_ovo(posts, truth);
    REQUIRE(r.pairs.size() == 3);

    double macro = 0.0;
    std::size_t pi = 0;
    for (StateLabel a : {S::A, S::A, S::B}) {
      const StateLabel b = r.pairs[pi].second;
      std::vector<double> sa, sb;
      std::vector<bool> ta, tb;
      for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] != a && truth[i] != b) continue;
        const double denom = posts[i][idx(a)] + posts[i][idx(b)];
        sa.push_back(posts[i][idx(a)] / denom);
        ta.push_back(truth[i] == a);
        sb.push_back(posts[i][idx(b)] / denom);
        tb.push_back(truth[i] == b);
      }
      const double expect = 0.5 * (coughtest::pairwise_auc(sa, ta) +
                                   coughtest::pairwise_auc(sb, tb));
      CHECK(r.pairs[pi].auc == doctest::Approx(expect).epsilon(1e-12));
      macro += expect;
      ++pi;
    }
    CHECK(r.macro_auc == doctest::Approx(macro / 3.0).epsilon(1e-12));
  }

  SUBCASE("fewer than two classes is an error") {
    std::vector<std::array<double, kNumStates>> posts(3,
                                                      {1, 0, 0, 0, 0});
    std::vector<StateLabel> truth(3, StateLabel::A);
    CHECK_THROWS_AS(roc_multiclass_ovo(posts, truth), std::invalid_argument);
  }
}

TEST_CASE("two-fold cross validation") {
  const HmmModel demo = demo_model();

  SUBCASE("identical recordings give identical folds") {
    const LabeledSeries rec = sample(demo, 2500, 7);
    const EvalReport r = two_fold_cv({rec, rec}, FeatureMode::Multivariate);
    REQUIRE(r.folds.size() == 2);
    CHECK(r.folds[0].multiclass.accuracy == r.folds[1].multiclass.accuracy);
    CHECK(r.folds[0].groups[0].auc_value == r.folds[1].groups[0].auc_value);
    CHECK(r.folds[0].groups[1].auc_value == r.folds[1].groups[1].auc_value);
    CHECK(r.folds[0].confusion.counts == r.folds[1].confusion.counts);
  }

  SUBCASE("confusion totals conserve the evaluated bins") {
    std::vector<LabeledSeries> data = {sample(demo, 1500, 1),
                                       sample(demo, 1300, 2),
                                       sample(demo, 900, 3),
                                       sample(demo, 700, 4)};
    const EvalReport r = two_fold_cv(data, FeatureMode::Multivariate);
    long long evaluated = 0;
    for (const FoldReport& f : r.folds) {
      CHECK(f.confusion.total() == f.n_bins);
      evaluated += f.n_bins;
    }
    CHECK(evaluated == 1500 + 1300 + 900 + 700);
  }

  SUBCASE("well-separated emissions give near-perfect grouped AUC") {
    std::vector<LabeledSeries> data = {sample(demo, 2500, 11),
                                       sample(demo, 2500, 12),
                                       sample(demo, 2500, 13),
                                       sample(demo, 2500, 14)};
    const EvalReport r = two_fold_cv(data, FeatureMode::Multivariate);
    REQUIRE(r.mean_group_auc.size() == 2);
    CHECK(r.mean_group_auc[0] > 0.95);
    CHECK(r.mean_group_auc[1] > 0.95);
  }

  SUBCASE("a single recording splits into halves") {
    const LabeledSeries rec = sample(demo, 5000, 21);
    const EvalReport r = two_fold_cv({rec}, FeatureMode::Multivariate);
    CHECK(r.folds[0].n_bins + r.folds[1].n_bins == 5000);
    CHECK(r.folds[0].n_bins == 2500);
  }

  SUBCASE("greedy split balances bin counts") {
    std::vector<LabeledSeries> data = {sample(demo, 1000, 31),
                                       sample(demo, 600, 32),
                                       sample(demo, 500, 33)};
    const EvalReport r = two_fold_cv(data, FeatureMode::Multivariate);
    // largest recording alone vs the two smaller ones
    const long long a = r.folds[0].n_bins;
    const long long b = r.folds[1].n_bins;
    CHECK(std::min(a, b) == 1000);
    CHECK(std::max(a, b) == 1100);
  }

  SUBCASE("empty dataset is rejected") {
    CHECK_THROWS_AS(two_fold_cv({}, FeatureMode::Multivariate),
                    std::invalid_argument);
  }

  SUBCASE("youden-threshold counts match the binary metrics") {
    std::vector<LabeledSeries> data = {sample(demo, 1200, 41),
                                       sample(demo, 1200, 42)};
    const EvalReport r = two_fold_cv(data, FeatureMode::Univariate);
    for (const FoldReport& f : r.folds)
      for (const GroupEval& g : f.groups) {
        CHECK(g.tp + g.fp + g.fn + g.tn == f.n_bins);
        const BinaryMetrics b = binary_metrics(g.tp, g.fp, g.fn, g.tn);
        CHECK(b.sensitivity == g.metrics_at_youden.sensitivity);
        CHECK(b.accuracy == g.metrics_at_youden.accuracy);
        // the youden point's rates come from the same sweep
        CHECK(g.youden.sensitivity ==
              doctest::Approx(b.sensitivity).epsilon(1e-12));
        CHECK(g.youden.specificity ==
              doctest::Approx(b.specificity).epsilon(1e-12));
      }
  }
}

TEST_CASE("report serialization") {
  TmpDir tmp("report");
  const HmmModel demo = demo_model();
  std::vector<LabeledSeries> data = {sample(demo, 800, 51),
                                     sample(demo, 800, 52)};
  const EvalReport r = two_fold_cv(data, FeatureMode::Multivariate);

  save_report_json(r, tmp.file("report.json"));
  nlohmann::json j;
  std::ifstream(tmp.file("report.json")) >> j;
  CHECK(j.at("format_version") == 1);
  CHECK(j.at("mode") == "multivariate");
  REQUIRE(j.at("folds").size() == 2);
  for (const auto& f : j.at("folds")) {
    CHECK(f.at("confusion").at("counts").size() == 5);
    CHECK(f.at("multiclass").at("sensitivity").size() == 5);
    CHECK(f.at("groups").size() == 2);
    for (const auto& g : f.at("groups")) {
      CHECK(g.contains("auc"));
      CHECK(g.at("youden").contains("threshold"));
      CHECK(g.at("counts_at_youden").contains("tp"));
    }
    CHECK(f.at("ovo").contains("macro_auc"));
  }
  CHECK(j.at("mean").at("group_auc").size() == 2);

  const std::string text = format_report_text(r);
  CHECK(text.find("Test fold 0") != std::string::npos);
  CHECK(text.find("cough_vs_noncough") != std::string::npos);
  CHECK(text.find("Fold means") != std::string::npos);

  const RocCurve& curve = r.folds[0].groups[0].roc;
  export_roc_csv(curve, tmp.file("roc.csv"));
  std::ifstream in(tmp.file("roc.csv"));
  std::string header;
  std::getline(in, header);
  CHECK(header == "fpr,tpr,threshold");
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == static_cast<int>(curve.points.size()));
}
