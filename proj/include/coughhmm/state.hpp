// coughhmm/state.hpp
//
// The five-state alphabet of the cough model and the sparse transition
// topology over it.  A cough epoch passes through A (explosive onset),
// B (intermediate quiet stage) and C (voiced stage); D is the short gap
// between coughs inside a bout and E the long silence between bouts.

#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace cough {

inline constexpr int kNumStates = 5;

// Total order A < B < C < D < E is used only for deterministic tie-breaking.
enum class StateLabel : int { A = 0, B, C, D, E };

inline constexpr std::array<StateLabel, kNumStates> kAllStates = {
    StateLabel::A, StateLabel::B, StateLabel::C, StateLabel::D, StateLabel::E};

inline char to_char(StateLabel s) {
  return static_cast<char>('A' + static_cast<int>(s));
}

inline std::string to_string(StateLabel s) { return std::string(1, to_char(s)); }

inline StateLabel state_from_char(char c) {
  if (c < 'A' || c > 'E')
    throw std::invalid_argument("unknown state token '" + std::string(1, c) +
                                "' (expected one of A,B,C,D,E)");
  return static_cast<StateLabel>(c - 'A');
}

// Boolean mask of allowed (from, to) transitions.  Forbidden pairs are
// structural zeros: estimators and decoders keep them at exactly zero
// probability no matter what the training labels contain.
struct Topology {
  std::array<std::array<bool, kNumStates>, kNumStates> allowed{};

  bool is_allowed(StateLabel from, StateLabel to) const {
    return allowed[static_cast<std::size_t>(from)][static_cast<std::size_t>(to)];
  }

  // The cough topology: A->{A,B}, B->{B,C}, C->{C,D}, D->{A,D,E}, E->{A,E}.
  static Topology cough() {
    Topology t;
    auto allow = [&t](StateLabel f, StateLabel to) {
      t.allowed[static_cast<std::size_t>(f)][static_cast<std::size_t>(to)] = true;
    };
    using S = StateLabel;
    allow(S::A, S::A); allow(S::A, S::B);
    allow(S::B, S::B); allow(S::B, S::C);
    allow(S::C, S::C); allow(S::C, S::D);
    allow(S::D, S::A); allow(S::D, S::D); allow(S::D, S::E);
    allow(S::E, S::A); allow(S::E, S::E);
    return t;
  }

  // Every pair allowed; used by tests and generic decoding.
  static Topology fully_connected() {
    Topology t;
    for (auto& row : t.allowed) row.fill(true);
    return t;
  }
};

inline bool operator==(const Topology& a, const Topology& b) {
  return a.allowed == b.allowed;
}

// Dichotomous groupings of the five states (positive class listed first).
enum class Grouping {
  CoughVsNonCough,        // {A,B,C} vs {D,E}: one cough epoch inside a bout
  CoughingVsNonCoughing,  // {A,B,C,D} vs {E}: a bout of coughs
};

inline bool in_positive_group(Grouping g, StateLabel s) {
  if (g == Grouping::CoughVsNonCough)
    return s == StateLabel::A || s == StateLabel::B || s == StateLabel::C;
  return s != StateLabel::E;
}

}  // namespace cough
