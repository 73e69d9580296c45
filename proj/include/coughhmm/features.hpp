// coughhmm/features.hpp
//
// Binned band-energy features.  Audio is cut into consecutive
// non-overlapping bins (25 ms by default, trailing partial bin dropped),
// each bin is transformed with an unwindowed DFT, and per-band energy is
// the sum of |X_k|^2/N over the coefficients whose center frequency falls
// in the band, counting positive and negative frequencies (2|X_k|^2/N for
// 0 < k < N/2).  Bands: low [0, 2000) Hz including DC, mid [2000, 4000) Hz,
// high [4000, 22000] Hz, capped at min(22 kHz, Nyquist).

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "coughhmm/audio.hpp"

namespace cough {

struct FeatureVector {
  double t_mid_s = 0.0;  // bin mid-point, (k + 0.5) * bin_duration
  double e_low = 0.0;
  double e_mid = 0.0;
  double e_high = 0.0;

  double e_total() const { return e_low + e_mid + e_high; }
};

// Band boundaries in Hz: low [lo, mid_lo), mid [mid_lo, hi_lo),
// high [hi_lo, cap], cap applied as min(cap, Nyquist).
struct BandEdges {
  double lo_hz = 0.0;
  double mid_lo_hz = 2000.0;
  double hi_lo_hz = 4000.0;
  double cap_hz = 22000.0;
};

struct FeatureSeries {
  double bin_duration_s = 0.025;
  std::vector<FeatureVector> vectors;
  std::string source_id;
  int sample_rate_hz = 0;  // provenance only; 0 when unknown (imported CSV)
};

FeatureSeries extract_features(const AudioClip& clip,
                               double bin_duration_s = 0.025,
                               const BandEdges& bands = BandEdges{});

// CSV with header `t_mid_s,e_low,e_mid,e_high`, shortest round-trip decimals.
void export_features_csv(const FeatureSeries& series,
                         const std::filesystem::path& path);
FeatureSeries import_features_csv(const std::filesystem::path& path);

// One row per bin: t_mid_s then |X_k|^2/N for k = 0..N/2; the header row
// carries the DFT center frequencies in Hz.
void export_spectrogram_csv(const AudioClip& clip, double bin_duration_s,
                            const std::filesystem::path& path);

}  // namespace cough
