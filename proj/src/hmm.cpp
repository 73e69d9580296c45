#include "coughhmm/hmm.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

#include "coughhmm/numeric.hpp"

namespace cough {

namespace {

using json = nlohmann::json;

constexpr double kStdDevFloor = 1e-6;
constexpr double kExitSmoothing = 1.0;  // additive alpha for branching states
constexpr const char* kDensityFamily = "gaussian_log_energy";

std::size_t idx(StateLabel s) { return static_cast<std::size_t>(s); }

void require_emission_shape(const HmmModel& m) {
  const std::size_t want =
      static_cast<std::size_t>(channel_count(m.emissions.mode));
  for (StateLabel s : kAllStates)
    if (m.emissions.densities[idx(s)].size() != want)
      throw std::invalid_argument(
          "model has wrong density count for state " + to_string(s) +
          " (expected " + std::to_string(want) + ")");
  if (!(m.emissions.energy_floor > 0.0))
    throw std::invalid_argument("energy_floor must be positive");
}

// Per-channel ln(energy + floor) values of one observation.
void log_channels(const EmissionModel& e, const FeatureVector& v,
                  std::array<double, 3>& out) {
  if (e.mode == FeatureMode::Univariate) {
    out[0] = std::log(v.e_total() + e.energy_floor);
  } else {
    out[0] = std::log(v.e_low + e.energy_floor);
    out[1] = std::log(v.e_mid + e.energy_floor);
    out[2] = std::log(v.e_high + e.energy_floor);
  }
}

}  // namespace

double LogEnergyGaussian::log_pdf(double x) const {
  const double z = (x - mean) / stddev;
  return -0.5 * std::log(2.0 * std::numbers::pi) - std::log(stddev) -
         0.5 * z * z;
}

// --- Training --------------------------------------------------------------

TransitionMatrix estimate_transitions(
    const std::vector<std::vector<StateLabel>>& label_sequences,
    const Topology& topology) {
  std::array<long long, kNumStates> run_count{};
  std::array<long long, kNumStates> run_bins{};
  std::array<std::array<long long, kNumStates>, kNumStates> exits{};

  for (const auto& labels : label_sequences) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const std::size_t s = idx(labels[i]);
      if (i == 0 || labels[i - 1] != labels[i]) ++run_count[s];
      ++run_bins[s];
      if (i + 1 < labels.size() && labels[i + 1] != labels[i] &&
          topology.is_allowed(labels[i], labels[i + 1]))
        ++exits[s][idx(labels[i + 1])];
    }
  }

  TransitionMatrix tm;
  for (StateLabel from : kAllStates) {
    const std::size_t f = idx(from);
    const bool self_allowed = topology.is_allowed(from, from);
    if (self_allowed && run_count[f] == 0)
      throw std::invalid_argument("state " + to_string(from) +
                                  " is absent from the training labels");

    // Runs have length >= 1, so the mean residence is >= 1 and leave <= 1.
    const double leave =
        self_allowed ? static_cast<double>(run_count[f]) / run_bins[f] : 1.0;

    std::vector<StateLabel> successors;
    for (StateLabel to : kAllStates)
      if (to != from && topology.is_allowed(from, to)) successors.push_back(to);

    if (successors.empty()) {
      if (!self_allowed)
        throw std::invalid_argument("topology gives state " + to_string(from) +
                                    " no outgoing transition");
      tm.p[f][f] = 1.0;  // absorbing
      continue;
    }

    if (self_allowed) tm.p[f][f] = 1.0 - leave;
    if (successors.size() == 1) {
      tm.p[f][idx(successors.front())] = leave;
      continue;
    }
    long long exit_total = 0;
    for (StateLabel to : successors) exit_total += exits[f][idx(to)];
    const double denom = static_cast<double>(exit_total) +
                         kExitSmoothing * static_cast<double>(successors.size());
    for (StateLabel to : successors)
      tm.p[f][idx(to)] =
          leave * (static_cast<double>(exits[f][idx(to)]) + kExitSmoothing) /
          denom;
  }
  return tm;
}

std::array<double, kNumStates> estimate_initial(
    const std::vector<std::vector<StateLabel>>& label_sequences) {
  std::array<double, kNumStates> counts{};
  double total = 0.0;
  for (const auto& labels : label_sequences)
    for (StateLabel s : labels) {
      counts[idx(s)] += 1.0;
      total += 1.0;
    }
  if (total == 0.0) {
    counts.fill(1.0 / kNumStates);
    return counts;
  }
  for (double& c : counts) c /= total;
  return counts;
}

EmissionModel fit_emissions(const std::vector<LabeledSeries>& data,
                            FeatureMode mode, double energy_floor) {
  if (!(energy_floor > 0.0))
    throw std::invalid_argument("energy_floor must be positive");
  const int channels = channel_count(mode);

  EmissionModel shape;
  shape.mode = mode;
  shape.energy_floor = energy_floor;

  std::array<std::array<std::vector<double>, 3>, kNumStates> values;
  for (const LabeledSeries& series : data) {
    if (series.labels.size() != series.features.vectors.size())
      throw std::invalid_argument("labeled series '" +
                                  series.features.source_id +
                                  "' has a label/bin length mismatch");
    std::array<double, 3> ch{};
    for (std::size_t k = 0; k < series.labels.size(); ++k) {
      log_channels(shape, series.features.vectors[k], ch);
      for (int c = 0; c < channels; ++c)
        values[idx(series.labels[k])][static_cast<std::size_t>(c)].push_back(
            ch[static_cast<std::size_t>(c)]);
    }
  }

  EmissionModel em;
  em.mode = mode;
  em.energy_floor = energy_floor;
  for (StateLabel s : kAllStates) {
    const auto& per_channel = values[idx(s)];
    if (per_channel[0].size() < 2)
      throw std::invalid_argument(
          "state " + to_string(s) + " has " +
          std::to_string(per_channel[0].size()) +
          " labeled bin(s); at least 2 are required to fit a density");
    for (int c = 0; c < channels; ++c) {
      const auto& xs = per_channel[static_cast<std::size_t>(c)];
      const double n = static_cast<double>(xs.size());
      double mean = 0.0;
      for (double x : xs) mean += x;
      mean /= n;
      double var = 0.0;
      for (double x : xs) var += (x - mean) * (x - mean);
      var /= n;  // maximum-likelihood variance
      LogEnergyGaussian g;
      g.mean = mean;
      g.stddev = std::max(std::sqrt(var), kStdDevFloor);
      em.densities[idx(s)].push_back(g);
    }
  }
  return em;
}

HmmModel train(const std::vector<LabeledSeries>& data, FeatureMode mode,
               double energy_floor, const Topology& topology) {
  std::vector<std::vector<StateLabel>> label_sequences;
  label_sequences.reserve(data.size());
  for (const LabeledSeries& s : data) label_sequences.push_back(s.labels);

  HmmModel model;
  model.topology = topology;
  model.transitions = estimate_transitions(label_sequences, topology);
  model.emissions = fit_emissions(data, mode, energy_floor);
  model.initial = estimate_initial(label_sequences);
  return model;
}

// --- Decoding ----------------------------------------------------------------

double emission_loglik(const HmmModel& model, StateLabel state,
                       const FeatureVector& v) {
  const auto& densities = model.emissions.densities[idx(state)];
  std::array<double, 3> ch{};
  log_channels(model.emissions, v, ch);
  double ll = 0.0;
  for (std::size_t c = 0; c < densities.size(); ++c)
    ll += densities[c].log_pdf(ch[c]);
  return ll;
}

DecodeResult forward_filter(const HmmModel& model,
                            const FeatureSeries& features) {
  require_emission_shape(model);
  const std::size_t n = features.vectors.size();
  if (n == 0) throw std::invalid_argument("cannot decode an empty series");

  std::array<std::array<double, kNumStates>, kNumStates> lp;
  for (StateLabel r : kAllStates)
    for (StateLabel s : kAllStates)
      lp[idx(r)][idx(s)] = safe_log(model.transitions.at(r, s));

  DecodeResult out;
  out.posteriors.resize(n);
  std::array<double, kNumStates> alpha{};
  double ll = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    std::array<double, kNumStates> next;
    for (StateLabel s : kAllStates) {
      double prior;
      if (t == 0) {
        prior = safe_log(model.initial[idx(s)]);
      } else {
        std::array<double, kNumStates> terms;
        for (StateLabel r : kAllStates)
          terms[idx(r)] = alpha[idx(r)] + lp[idx(r)][idx(s)];
        prior = log_sum_exp(terms);
      }
      next[idx(s)] = prior + emission_loglik(model, s, features.vectors[t]);
    }
    const double z = log_sum_exp(next);
    if (z == kNegInf)
      throw std::logic_error("forward recursion reached an all-zero state");
    ll += z;
    for (StateLabel s : kAllStates) {
      next[idx(s)] -= z;
      out.posteriors[t][idx(s)] = std::exp(next[idx(s)]);
    }
    alpha = next;
  }
  out.log_likelihood = ll;
  return out;
}

DecodeResult viterbi(const HmmModel& model, const FeatureSeries& features) {
  require_emission_shape(model);
  const std::size_t n = features.vectors.size();
  if (n == 0) throw std::invalid_argument("cannot decode an empty series");

  std::array<std::array<double, kNumStates>, kNumStates> lp;
  for (StateLabel r : kAllStates)
    for (StateLabel s : kAllStates)
      lp[idx(r)][idx(s)] = safe_log(model.transitions.at(r, s));

  std::vector<std::array<int, kNumStates>> backptr(n);
  std::array<double, kNumStates> delta;
  for (StateLabel s : kAllStates)
    delta[idx(s)] = safe_log(model.initial[idx(s)]) +
                    emission_loglik(model, s, features.vectors[0]);

  for (std::size_t t = 1; t < n; ++t) {
    std::array<double, kNumStates> next;
    for (StateLabel s : kAllStates) {
      // Ascending scan with strict > keeps the lowest predecessor on ties.
      double best = kNegInf;
      int best_r = 0;
      for (StateLabel r : kAllStates) {
        const double v = delta[idx(r)] + lp[idx(r)][idx(s)];
        if (v > best) {
          best = v;
          best_r = static_cast<int>(r);
        }
      }
      next[idx(s)] = best + emission_loglik(model, s, features.vectors[t]);
      backptr[t][idx(s)] = best_r;
    }
    delta = next;
  }

  double best = kNegInf;
  int best_s = 0;
  for (StateLabel s : kAllStates)
    if (delta[idx(s)] > best) {
      best = delta[idx(s)];
      best_s = static_cast<int>(s);
    }
  if (best == kNegInf)
    throw std::logic_error("no state path has positive probability");

  DecodeResult out;
  out.viterbi_path.resize(n);
  out.viterbi_path[n - 1] = static_cast<StateLabel>(best_s);
  for (std::size_t t = n - 1; t > 0; --t)
    out.viterbi_path[t - 1] = static_cast<StateLabel>(
        backptr[t][idx(out.viterbi_path[t])]);
  out.log_likelihood = std::numeric_limits<double>::quiet_NaN();
  return out;
}

DecodeResult decode(const HmmModel& model, const FeatureSeries& features) {
  DecodeResult out = forward_filter(model, features);
  out.viterbi_path = viterbi(model, features).viterbi_path;
  return out;
}

std::vector<double> group_scores(
    const std::vector<std::array<double, kNumStates>>& posteriors, Grouping g) {
  std::vector<double> scores;
  scores.reserve(posteriors.size());
  for (const auto& post : posteriors) {
    double s = 0.0;
    for (StateLabel st : kAllStates)
      if (in_positive_group(g, st)) s += post[idx(st)];
    scores.push_back(s);
  }
  return scores;
}

// --- Sampling ----------------------------------------------------------------

LabeledSeries sample(const HmmModel& model, std::size_t n_bins,
                     std::uint64_t seed, double bin_duration_s) {
  require_emission_shape(model);
  if (n_bins < 1) throw std::invalid_argument("n_bins must be >= 1");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw_state = [&](const std::array<double, kNumStates>& probs) {
    const double u = unit(rng);
    double cum = 0.0;
    int last_positive = 0;
    for (StateLabel s : kAllStates) {
      if (probs[idx(s)] <= 0.0) continue;
      last_positive = static_cast<int>(s);
      cum += probs[idx(s)];
      if (u < cum) return s;
    }
    return static_cast<StateLabel>(last_positive);
  };

  LabeledSeries out;
  out.features.bin_duration_s = bin_duration_s;
  out.features.source_id = "synth-" + std::to_string(seed);
  out.features.sample_rate_hz = 0;
  out.features.vectors.reserve(n_bins);
  out.labels.reserve(n_bins);

  const double floor = model.emissions.energy_floor;
  StateLabel state = StateLabel::E;
  for (std::size_t k = 0; k < n_bins; ++k) {
    state = (k == 0) ? draw_state(model.initial)
                     : draw_state(model.transitions.p[idx(state)]);
    const auto& densities = model.emissions.densities[idx(state)];
    std::array<double, 3> energy{};
    for (std::size_t c = 0; c < densities.size(); ++c) {
      std::normal_distribution<double> normal(densities[c].mean,
                                              densities[c].stddev);
      energy[c] = std::max(0.0, std::exp(normal(rng)) - floor);
    }
    FeatureVector v;
    v.t_mid_s = (static_cast<double>(k) + 0.5) * bin_duration_s;
    v.e_low = energy[0];
    if (model.emissions.mode == FeatureMode::Multivariate) {
      v.e_mid = energy[1];
      v.e_high = energy[2];
    }
    out.features.vectors.push_back(v);
    out.labels.push_back(state);
  }
  return out;
}

HmmModel demo_model() {
  HmmModel m;
  m.topology = Topology::cough();

  auto set_row = [&m](StateLabel from, std::initializer_list<double> row) {
    std::size_t j = 0;
    for (double p : row) m.transitions.p[idx(from)][j++] = p;
  };
  // Residences of roughly 3, 4, 5, 8 and 40 bins; D returns to A for 60%
  // of its exits.
  using S = StateLabel;
  set_row(S::A, {2.0 / 3.0, 1.0 / 3.0, 0.0, 0.0, 0.0});
  set_row(S::B, {0.0, 0.75, 0.25, 0.0, 0.0});
  set_row(S::C, {0.0, 0.0, 0.8, 0.2, 0.0});
  set_row(S::D, {0.075, 0.0, 0.0, 0.875, 0.05});
  set_row(S::E, {0.025, 0.0, 0.0, 0.0, 0.975});

  m.initial = {0.05, 0.05, 0.05, 0.15, 0.70};

  m.emissions.mode = FeatureMode::Multivariate;
  m.emissions.energy_floor = 1e-6;
  const double means[kNumStates][3] = {{16.0, 15.0, 14.0},
                                       {12.0, 11.0, 10.0},
                                       {8.0, 7.0, 6.0},
                                       {4.0, 3.0, 2.0},
                                       {0.0, -1.0, -2.0}};
  for (StateLabel s : kAllStates)
    for (int c = 0; c < 3; ++c)
      m.emissions.densities[idx(s)].push_back(
          {means[idx(s)][static_cast<std::size_t>(c)], 0.5});
  return m;
}

// --- Persistence ---------------------------------------------------------------

namespace {

std::string mode_name(FeatureMode m) {
  return m == FeatureMode::Univariate ? "univariate" : "multivariate";
}

FeatureMode mode_from_name(const std::string& name) {
  if (name == "univariate") return FeatureMode::Univariate;
  if (name == "multivariate") return FeatureMode::Multivariate;
  throw std::runtime_error("unknown mode '" + name + "'");
}

void validate_model(const HmmModel& m) {
  constexpr double kSumTol = 1e-12;
  for (StateLabel from : kAllStates) {
    double sum = 0.0;
    bool any_out = false;
    for (StateLabel to : kAllStates) {
      const double p = m.transitions.at(from, to);
      if (p < 0.0 || p > 1.0)
        throw std::runtime_error("transition " + to_string(from) + "->" +
                                 to_string(to) + " is outside [0, 1]");
      if (!m.topology.is_allowed(from, to) && p != 0.0)
        throw std::runtime_error("transition " + to_string(from) + "->" +
                                 to_string(to) +
                                 " must be zero (forbidden by the topology)");
      any_out = any_out || m.topology.is_allowed(from, to);
      sum += p;
    }
    if (!any_out)
      throw std::runtime_error("topology gives state " + to_string(from) +
                               " no outgoing transition");
    if (std::abs(sum - 1.0) > kSumTol)
      throw std::runtime_error("transition row " + to_string(from) +
                               " sums to " + format_double(sum) +
                               ", expected 1");
  }
  double isum = 0.0;
  for (double p : m.initial) {
    if (p < 0.0 || p > 1.0)
      throw std::runtime_error("initial probabilities must lie in [0, 1]");
    isum += p;
  }
  if (std::abs(isum - 1.0) > kSumTol)
    throw std::runtime_error("initial distribution sums to " +
                             format_double(isum) + ", expected 1");
  if (!(m.emissions.energy_floor > 0.0))
    throw std::runtime_error("energy_floor must be positive");
  const std::size_t channels =
      static_cast<std::size_t>(channel_count(m.emissions.mode));
  for (StateLabel s : kAllStates) {
    if (m.emissions.densities[idx(s)].size() != channels)
      throw std::runtime_error("state " + to_string(s) + " must carry " +
                               std::to_string(channels) + " densities");
    for (const LogEnergyGaussian& g : m.emissions.densities[idx(s)])
      if (!(g.stddev > 0.0))
        throw std::runtime_error("state " + to_string(s) +
                                 " has a non-positive density std");
  }
}

}  // namespace

void save_model(const HmmModel& model, const std::filesystem::path& path) {
  validate_model(model);
  json j;
  j["format_version"] = 1;
  j["mode"] = mode_name(model.emissions.mode);
  j["energy_floor"] = model.emissions.energy_floor;
  for (StateLabel from : kAllStates) {
    json trow = json::array();
    json arow = json::array();
    for (StateLabel to : kAllStates) {
      trow.push_back(model.transitions.at(from, to));
      arow.push_back(model.topology.is_allowed(from, to));
    }
    j["transitions"].push_back(trow);
    j["topology"].push_back(arow);
  }
  for (double p : model.initial) j["initial"].push_back(p);
  for (StateLabel s : kAllStates) {
    json ds = json::array();
    for (const LogEnergyGaussian& g : model.emissions.densities[idx(s)])
      ds.push_back({{"family", kDensityFamily},
                    {"mean", g.mean},
                    {"std", g.stddev}});
    j["emissions"][to_string(s)] = ds;
  }

  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

HmmModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("'" + path.string() + "': " + e.what());
  }

  auto fail = [&path](const std::string& msg) -> std::runtime_error {
    return std::runtime_error("'" + path.string() + "': " + msg);
  };

  HmmModel m;
  try {
    if (j.at("format_version").get<int>() != 1)
      throw fail("unsupported format_version");
    m.emissions.mode = mode_from_name(j.at("mode").get<std::string>());
    m.emissions.energy_floor = j.at("energy_floor").get<double>();

    constexpr std::size_t kN = static_cast<std::size_t>(kNumStates);
    const auto& topo = j.at("topology");
    const auto& trans = j.at("transitions");
    if (topo.size() != kN || trans.size() != kN)
      throw fail("topology and transitions must be 5x5");
    for (std::size_t r = 0; r < kN; ++r) {
      if (topo[r].size() != kN || trans[r].size() != kN)
        throw fail("topology and transitions must be 5x5");
      for (std::size_t c = 0; c < kN; ++c) {
        m.topology.allowed[r][c] = topo[r][c].get<bool>();
        m.transitions.p[r][c] = trans[r][c].get<double>();
      }
    }

    const auto& init = j.at("initial");
    if (init.size() != kN)
      throw fail("initial must have 5 entries");
    for (std::size_t s = 0; s < kN; ++s) m.initial[s] = init[s].get<double>();

    const std::size_t channels =
        static_cast<std::size_t>(channel_count(m.emissions.mode));
    for (StateLabel s : kAllStates) {
      const auto& ds = j.at("emissions").at(to_string(s));
      if (ds.size() != channels)
        throw fail("state " + to_string(s) + " must carry " +
                     std::to_string(channels) + " densities");
      for (const auto& d : ds) {
        if (d.at("family").get<std::string>() != kDensityFamily)
          throw fail("unknown density family '" +
                     d.at("family").get<std::string>() + "'");
        LogEnergyGaussian g;
        g.mean = d.at("mean").get<double>();
        g.stddev = d.at("std").get<double>();
        m.emissions.densities[idx(s)].push_back(g);
      }
    }
  } catch (const json::exception& e) {
    throw std::runtime_error("'" + path.string() + "': " + e.what());
  }

  try {
    validate_model(m);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error("'" + path.string() + "': " + e.what());
  }
  return m;
}

}  // namespace cough
