#include "coughhmm/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "coughhmm/annotations.hpp"
#include "coughhmm/audio.hpp"
#include "coughhmm/eval.hpp"
#include "coughhmm/features.hpp"
#include "coughhmm/hmm.hpp"
#include "coughhmm/numeric.hpp"
#include "csv_util.hpp"

namespace cough::cli {

namespace {

namespace fs = std::filesystem;

struct RunConfig {
  double bin_duration_s = 0.025;
  std::string band_edges = "0,2000,4000,22000";
  std::string mode = "multivariate";
  double energy_floor = 1e-6;
  std::uint64_t seed = 0;

  BandEdges bands() const {
    const auto cells = csv::split(band_edges);
    if (cells.size() != 4)
      throw std::runtime_error(
          "--band-edges expects four comma-separated frequencies");
    BandEdges b;
    b.lo_hz = parse_double(cells[0], "--band-edges");
    b.mid_lo_hz = parse_double(cells[1], "--band-edges");
    b.hi_lo_hz = parse_double(cells[2], "--band-edges");
    b.cap_hz = parse_double(cells[3], "--band-edges");
    return b;
  }

  FeatureMode feature_mode() const {
    if (mode == "univariate") return FeatureMode::Univariate;
    if (mode == "multivariate") return FeatureMode::Multivariate;
    throw std::runtime_error("--mode must be univariate or multivariate");
  }
};

void add_binning_flags(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--bin-duration", cfg.bin_duration_s,
                  "Bin duration in seconds")
      ->capture_default_str();
  cmd->add_option("--band-edges", cfg.band_edges,
                  "Band edges in Hz: low,mid,high,cap")
      ->capture_default_str();
}

void add_mode_flag(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--mode", cfg.mode,
                  "Emission mode: univariate (e_total) or multivariate "
                  "(three bands)")
      ->capture_default_str();
}

void add_floor_flag(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--energy-floor", cfg.energy_floor,
                  "Energy added before the log transform")
      ->capture_default_str();
}

FeatureSeries load_input_features(const fs::path& input, const RunConfig& cfg) {
  if (input.extension() == ".wav" || input.extension() == ".WAV")
    return extract_features(load_wav(input), cfg.bin_duration_s, cfg.bands());
  return import_features_csv(input);
}

struct ManifestEntry {
  fs::path input;
  fs::path labels;
};

std::vector<ManifestEntry> load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  std::string line;
  if (!std::getline(in, line)) line.clear();
  csv::strip_cr(line);
  if (line != "input,labels")
    throw std::runtime_error("'" + path.string() +
                             "': expected header input,labels");
  std::vector<ManifestEntry> entries;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    csv::strip_cr(line);
    if (line.empty()) continue;
    const auto cells = csv::split(line);
    if (cells.size() != 2)
      throw std::runtime_error(path.string() + " row " + std::to_string(row) +
                               ": expected 2 comma-separated fields");
    // relative paths resolve against the manifest's directory
    ManifestEntry e;
    e.input = fs::path(cells[0]).is_absolute()
                  ? fs::path(cells[0])
                  : path.parent_path() / cells[0];
    e.labels = fs::path(cells[1]).is_absolute()
                   ? fs::path(cells[1])
                   : path.parent_path() / cells[1];
    entries.push_back(std::move(e));
  }
  if (entries.empty())
    throw std::runtime_error("'" + path.string() + "': no dataset rows");
  return entries;
}

std::vector<LabeledSeries> load_dataset(const fs::path& manifest,
                                        const RunConfig& cfg) {
  std::vector<LabeledSeries> dataset;
  for (const ManifestEntry& e : load_manifest(manifest)) {
    const FeatureSeries features = load_input_features(e.input, cfg);
    const auto intervals = load_labels(e.labels);
    LabeledSeries labeled = align_labels(features, intervals);
    const auto violations = validate_labels(labeled.labels);
    if (!violations.empty())
      std::cerr << "warning: " << e.labels.string() << ": "
                << violations.size()
                << " label transition(s) violate the topology; structural "
                   "zeros will override them\n";
    dataset.push_back(std::move(labeled));
  }
  return dataset;
}

int cmd_extract(const std::vector<std::string>& inputs, const fs::path& out_dir,
                bool spectrogram, const RunConfig& cfg) {
  fs::create_directories(out_dir);
  int failures = 0;
  for (const std::string& input : inputs) {
    try {
      const AudioClip clip = load_wav(input);
      const FeatureSeries series =
          extract_features(clip, cfg.bin_duration_s, cfg.bands());
      const fs::path stem = fs::path(input).stem();
      export_features_csv(series,
                          out_dir / (stem.string() + ".features.csv"));
      if (spectrogram)
        export_spectrogram_csv(clip, cfg.bin_duration_s,
                               out_dir / (stem.string() + ".spectrogram.csv"));
    } catch (const std::exception& e) {
      std::cerr << "error: " << input << ": " << e.what() << '\n';
      ++failures;
      continue;  // keep processing the remaining files
    }
  }
  return failures == 0 ? 0 : 1;
}

int cmd_train(const fs::path& manifest, const fs::path& out_model,
              const RunConfig& cfg) {
  const auto dataset = load_dataset(manifest, cfg);
  const HmmModel model =
      train(dataset, cfg.feature_mode(), cfg.energy_floor);
  save_model(model, out_model);
  return 0;
}

int cmd_detect(const fs::path& model_path, const fs::path& input,
               const fs::path& out_csv, const std::string& grouping_flag,
               double threshold, const RunConfig& cfg, bool mode_given) {
  const HmmModel model = load_model(model_path);
  if (mode_given && cfg.feature_mode() != model.emissions.mode)
    throw std::runtime_error(
        "--mode conflicts with the model file: the model was trained in " +
        std::string(model.emissions.mode == FeatureMode::Univariate
                        ? "univariate"
                        : "multivariate") +
        " mode");
  Grouping grouping;
  if (grouping_flag == "cough") grouping = Grouping::CoughVsNonCough;
  else if (grouping_flag == "coughing") grouping = Grouping::CoughingVsNonCoughing;
  else throw std::runtime_error("--grouping must be cough or coughing");

  const FeatureSeries features = load_input_features(input, cfg);
  const DecodeResult dec = decode(model, features);
  const std::vector<double> cough_score =
      group_scores(dec.posteriors, Grouping::CoughVsNonCough);
  const std::vector<double> coughing_score =
      group_scores(dec.posteriors, Grouping::CoughingVsNonCoughing);

  std::ofstream out(out_csv);
  if (!out)
    throw std::runtime_error("cannot open '" + out_csv.string() +
                             "' for writing");
  out << "t_mid_s,posterior_A,posterior_B,posterior_C,posterior_D,"
         "posterior_E,viterbi_state,cough_score,coughing_score,decision\n";
  for (std::size_t t = 0; t < features.vectors.size(); ++t) {
    out << format_double(features.vectors[t].t_mid_s);
    for (double p : dec.posteriors[t]) out << ',' << format_double(p);
    const double chosen = grouping == Grouping::CoughVsNonCough
                              ? cough_score[t]
                              : coughing_score[t];
    out << ',' << to_char(dec.viterbi_path[t]) << ','
        << format_double(cough_score[t]) << ','
        << format_double(coughing_score[t]) << ','
        << (chosen >= threshold ? 1 : 0) << '\n';
  }
  if (!out)
    throw std::runtime_error("write failed for '" + out_csv.string() + "'");
  return 0;
}

int cmd_evaluate(const fs::path& manifest, const fs::path& out_dir,
                 const RunConfig& cfg) {
  const auto dataset = load_dataset(manifest, cfg);
  const EvalReport report = two_fold_cv(dataset, cfg.feature_mode(),
                                        {Grouping::CoughVsNonCough,
                                         Grouping::CoughingVsNonCoughing},
                                        cfg.energy_floor);
  fs::create_directories(out_dir);
  save_report_json(report, out_dir / "report.json");
  {
    std::ofstream txt(out_dir / "report.txt");
    if (!txt)
      throw std::runtime_error("cannot open '" +
                               (out_dir / "report.txt").string() +
                               "' for writing");
    txt << format_report_text(report);
  }
  for (const FoldReport& fr : report.folds)
    for (const GroupEval& g : fr.groups)
      export_roc_csv(g.roc,
                     out_dir / ("roc_fold" + std::to_string(fr.test_fold) +
                                "_" + grouping_name(g.grouping) + ".csv"));
  std::cout << format_report_text(report);
  return 0;
}

int cmd_synth(const std::string& model_path, long long n_bins,
              const fs::path& out_features, const fs::path& out_labels,
              const RunConfig& cfg) {
  if (n_bins < 1) throw std::runtime_error("--bins must be >= 1");
  const HmmModel model =
      model_path.empty() ? demo_model() : load_model(model_path);
  const LabeledSeries ls = sample(model, static_cast<std::size_t>(n_bins),
                                  cfg.seed, cfg.bin_duration_s);
  export_features_csv(ls.features, out_features);
  save_labels(intervals_from_labels(ls.labels, ls.features.bin_duration_s),
              out_labels);
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{
      "coughhmm: trains and runs a five-state HMM cough detector over "
      "25 ms band-energy features"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read option defaults from a config file");

  RunConfig cfg;

  auto* extract = app.add_subcommand(
      "extract", "Convert WAV audio into band-energy feature CSVs");
  std::vector<std::string> extract_inputs;
  std::string extract_out_dir = ".";
  bool extract_spectrogram = false;
  extract->add_option("audio", extract_inputs, "Input WAV files")
      ->required()
      ->expected(-1);
  extract->add_option("--out-dir", extract_out_dir,
                      "Directory for the output CSVs")
      ->capture_default_str();
  extract->add_flag("--spectrogram", extract_spectrogram,
                    "Also write a per-bin power spectrogram CSV");
  add_binning_flags(extract, cfg);

  auto* train_cmd = app.add_subcommand(
      "train", "Fit transitions and emissions from labeled recordings");
  std::string train_manifest, train_out;
  train_cmd->add_option("--manifest", train_manifest,
                        "CSV manifest with header input,labels")
      ->required();
  train_cmd->add_option("-o,--output", train_out, "Output model JSON path")
      ->required();
  add_binning_flags(train_cmd, cfg);
  add_mode_flag(train_cmd, cfg);
  add_floor_flag(train_cmd, cfg);

  auto* detect = app.add_subcommand(
      "detect", "Decode a recording with a trained model");
  std::string detect_model, detect_input, detect_out;
  std::string detect_grouping = "cough";
  double detect_threshold = 0.5;
  detect->add_option("--model", detect_model, "Trained model JSON")->required();
  detect->add_option("--input", detect_input,
                     "WAV audio or feature CSV to decode")
      ->required();
  detect->add_option("-o,--output", detect_out, "Per-bin detection CSV")
      ->required();
  detect->add_option("--grouping", detect_grouping,
                     "Score used for the decision column: cough (A+B+C) or "
                     "coughing (A+B+C+D)")
      ->capture_default_str();
  detect->add_option("--threshold", detect_threshold,
                     "Decision threshold on the grouped score")
      ->capture_default_str();
  add_binning_flags(detect, cfg);
  add_mode_flag(detect, cfg);

  auto* evaluate = app.add_subcommand(
      "evaluate", "Two-fold cross validation over a labeled dataset");
  std::string eval_manifest, eval_out_dir = ".";
  evaluate->add_option("--manifest", eval_manifest,
                       "CSV manifest with header input,labels")
      ->required();
  evaluate->add_option("--out-dir", eval_out_dir,
                       "Directory for report.json, report.txt and ROC CSVs")
      ->capture_default_str();
  add_binning_flags(evaluate, cfg);
  add_mode_flag(evaluate, cfg);
  add_floor_flag(evaluate, cfg);

  auto* synth = app.add_subcommand(
      "synth", "Sample a synthetic labeled recording from a model");
  std::string synth_model;
  long long synth_bins = 0;
  std::string synth_features, synth_labels;
  synth->add_option("--model", synth_model,
                    "Model JSON (defaults to the built-in demo model)");
  synth->add_option("--bins", synth_bins, "Number of bins to sample")
      ->required();
  synth->add_option("--out-features", synth_features, "Output feature CSV")
      ->required();
  synth->add_option("--out-labels", synth_labels, "Output label CSV")
      ->required();
  synth->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
  synth->add_option("--bin-duration", cfg.bin_duration_s,
                    "Bin duration in seconds")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exit 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (extract->parsed())
      return cmd_extract(extract_inputs, extract_out_dir, extract_spectrogram,
                         cfg);
    if (train_cmd->parsed()) return cmd_train(train_manifest, train_out, cfg);
    if (detect->parsed())
      return cmd_detect(detect_model, detect_input, detect_out,
                        detect_grouping, detect_threshold, cfg,
                        detect->count("--mode") > 0);
    if (evaluate->parsed()) return cmd_evaluate(eval_manifest, eval_out_dir, cfg);
    if (synth->parsed())
      return cmd_synth(synth_model, synth_bins, synth_features, synth_labels,
                       cfg);
  } catch (const std::invalid_argument& e) {
    // precondition violations surface as input errors
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::logic_error& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace cough::cli
