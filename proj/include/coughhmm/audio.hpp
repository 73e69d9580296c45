// coughhmm/audio.hpp
//
// WAV decoding into a normalized mono sample stream.

#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace cough {

// Mono audio, samples normalized to [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate_hz = 0;
  std::string source_id;
};

class WavError : public std::runtime_error {
 public:
  enum class Kind {
    Unreadable,           // file missing or not a RIFF/WAVE container
    UnsupportedEncoding,  // compressed or unknown sample format
    EmptyData,            // zero-length data chunk
    Malformed,            // structurally broken chunk layout
  };

  WavError(Kind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Loads a RIFF/WAVE file with PCM integer (8/16/24/32-bit) or 32-bit float
// samples.  Integer PCM is scaled by the type's maximum magnitude (e.g.
// 1/32768 for 16-bit); multi-channel audio is mixed down by the per-frame
// arithmetic mean of the channels.  source_id is the file name.
AudioClip load_wav(const std::filesystem::path& path);

inline double duration_seconds(const AudioClip& clip) {
  return static_cast<double>(clip.samples.size()) / clip.sample_rate_hz;
}

}  // namespace cough
