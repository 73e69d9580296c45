// coughhmm/hmm.hpp
//
// The five-state cough HMM: supervised training, forward filtering,
// Viterbi decoding, posterior grouping, sampling and JSON persistence.
//
// Transitions are estimated from residence times: the probability of
// leaving a state is the reciprocal of its mean run length in the training
// labels, and D's exits split between A and E by the smoothed observed
// proportion.  Emissions are Gaussian densities over ln(energy + floor),
// one per feature channel per state; a multivariate observation scores as
// the product of its per-channel densities.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "coughhmm/annotations.hpp"
#include "coughhmm/features.hpp"
#include "coughhmm/state.hpp"

namespace cough {

enum class FeatureMode { Univariate, Multivariate };

inline int channel_count(FeatureMode mode) {
  return mode == FeatureMode::Univariate ? 1 : 3;
}

// Row-stochastic 5x5 matrix; entries forbidden by the topology are 0.
struct TransitionMatrix {
  std::array<std::array<double, kNumStates>, kNumStates> p{};

  double at(StateLabel from, StateLabel to) const {
    return p[static_cast<std::size_t>(from)][static_cast<std::size_t>(to)];
  }
};

// Gaussian over ln(energy + energy_floor).
struct LogEnergyGaussian {
  double mean = 0.0;
  double stddev = 1.0;  // > 0 (fitted values floored at 1e-6)

  double log_pdf(double x) const;
};

struct EmissionModel {
  FeatureMode mode = FeatureMode::Multivariate;
  double energy_floor = 1e-6;  // added before the log transform
  // Univariate: one density per state, over e_total.
  // Multivariate: three per state, over (e_low, e_mid, e_high).
  std::array<std::vector<LogEnergyGaussian>, kNumStates> densities{};
};

struct HmmModel {
  Topology topology = Topology::cough();
  TransitionMatrix transitions;
  EmissionModel emissions;
  std::array<double, kNumStates> initial{};
};

struct DecodeResult {
  // Filtering distribution P(state at t | observations up to t), per bin.
  std::vector<std::array<double, kNumStates>> posteriors;
  std::vector<StateLabel> viterbi_path;
  // Total log-probability of the observation sequence (set by
  // forward_filter / decode).
  double log_likelihood = 0.0;
};

// --- Supervised training -------------------------------------------------

// leave(x) = 1 / mean residence (in bins) over maximal runs of x; the
// self-probability is 1 - leave(x).  States with one allowed successor get
// the whole leave mass; states with several split it by additively
// smoothed observed exit proportions (alpha = 1).  Structural zeros hold
// regardless of stray illegal pairs in the labels.
TransitionMatrix estimate_transitions(
    const std::vector<std::vector<StateLabel>>& label_sequences,
    const Topology& topology = Topology::cough());

// Empirical occupancy frequency of each state; uniform if no labels.
std::array<double, kNumStates> estimate_initial(
    const std::vector<std::vector<StateLabel>>& label_sequences);

// Maximum-likelihood Gaussian fit of ln(energy + floor) per state and
// channel; fitted standard deviations are floored at 1e-6.  Every state
// needs at least two labeled bins.
EmissionModel fit_emissions(const std::vector<LabeledSeries>& data,
                            FeatureMode mode, double energy_floor = 1e-6);

// estimate_transitions + fit_emissions + estimate_initial in one call.
HmmModel train(const std::vector<LabeledSeries>& data, FeatureMode mode,
               double energy_floor = 1e-6,
               const Topology& topology = Topology::cough());

// --- Decoding ------------------------------------------------------------

double emission_loglik(const HmmModel& model, StateLabel state,
                       const FeatureVector& v);

// Forward recursion in log space with per-step normalization; fills
// posteriors and log_likelihood.
DecodeResult forward_filter(const HmmModel& model, const FeatureSeries& features);

// Maximum-probability state path; ties broken toward the lower state in
// A < B < C < D < E order at every backtrack step.  Fills viterbi_path.
DecodeResult viterbi(const HmmModel& model, const FeatureSeries& features);

// forward_filter and viterbi in one result.
DecodeResult decode(const HmmModel& model, const FeatureSeries& features);

// Grouped per-bin score in [0, 1]: the posterior mass of the grouping's
// positive states.
std::vector<double> group_scores(
    const std::vector<std::array<double, kNumStates>>& posteriors, Grouping g);

// --- Sampling ------------------------------------------------------------

// Draws a state path and per-bin energies from the model.  Deterministic
// given the seed.  Univariate models place the sampled total in e_low.
LabeledSeries sample(const HmmModel& model, std::size_t n_bins,
                     std::uint64_t seed, double bin_duration_s = 0.025);

// A hand-built multivariate model with widely separated state energies;
// default source for `synth` and the end-to-end tests.
HmmModel demo_model();

// --- Persistence ---------------------------------------------------------

// JSON schema (format_version 1): mode, energy_floor, topology mask,
// transitions, initial, per-state density arrays {family, mean, std}.
// Values round-trip exactly; load re-validates row sums, structural
// zeros and density parameters.
void save_model(const HmmModel& model, const std::filesystem::path& path);
HmmModel load_model(const std::filesystem::path& path);

}  // namespace cough
