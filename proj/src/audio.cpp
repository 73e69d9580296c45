#include "coughhmm/audio.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace cough {

namespace {

constexpr std::uint16_t kFormatPcm = 0x0001;
constexpr std::uint16_t kFormatFloat = 0x0003;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

struct ByteReader {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t pos = 0;

  bool left(std::size_t n) const { return pos + n <= size; }

  std::uint32_t u32() {
    std::uint32_t v = static_cast<std::uint32_t>(data[pos]) |
                      static_cast<std::uint32_t>(data[pos + 1]) << 8 |
                      static_cast<std::uint32_t>(data[pos + 2]) << 16 |
                      static_cast<std::uint32_t>(data[pos + 3]) << 24;
    pos += 4;
    return v;
  }

  std::uint16_t u16() {
    std::uint16_t v = static_cast<std::uint16_t>(
        data[pos] | static_cast<std::uint16_t>(data[pos + 1]) << 8);
    pos += 2;
    return v;
  }
};

struct FmtChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits_per_sample = 0;
};

double decode_sample(const std::uint8_t* p, std::uint16_t format,
                     std::uint16_t bits) {
  if (format == kFormatFloat) {
    float f;
    std::memcpy(&f, p, 4);
    return std::clamp(static_cast<double>(f), -1.0, 1.0);
  }
  switch (bits) {
    case 8:
      // 8-bit WAV is unsigned, centered at 128.
      return (static_cast<int>(p[0]) - 128) / 128.0;
    case 16: {
      std::int16_t v = static_cast<std::int16_t>(p[0] | p[1] << 8);
      return v / 32768.0;
    }
    case 24: {
      std::int32_t v = p[0] | p[1] << 8 | p[2] << 16;
      if (v & 0x800000) v |= ~0xFFFFFF;  // sign-extend
      return v / 8388608.0;
    }
    case 32: {
      std::int32_t v;
      std::memcpy(&v, p, 4);
      return v / 2147483648.0;
    }
    default:
      return 0.0;  // rejected before decode
  }
}

}  // namespace

AudioClip load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw WavError(WavError::Kind::Unreadable,
                   "cannot open '" + path.string() + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad())
    throw WavError(WavError::Kind::Unreadable,
                   "I/O error while reading '" + path.string() + "'");

  ByteReader r{bytes.data(), bytes.size()};
  if (!r.left(12) || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw WavError(WavError::Kind::Unreadable,
                   "'" + path.string() + "' is not a RIFF/WAVE file");
  r.pos = 12;

  FmtChunk fmt;
  bool have_fmt = false;
  bool have_data = false;
  std::size_t data_pos = 0;
  std::uint32_t data_size = 0;

  while (r.left(8)) {
    char id[4];
    std::memcpy(id, r.data + r.pos, 4);
    r.pos += 4;
    std::uint32_t chunk_size = r.u32();
    if (!r.left(chunk_size))
      throw WavError(WavError::Kind::Malformed,
                     "truncated chunk '" + std::string(id, 4) + "' in '" +
                         path.string() + "'");
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (chunk_size < 16)
        throw WavError(WavError::Kind::Malformed,
                       "fmt chunk too small in '" + path.string() + "'");
      ByteReader f{r.data + r.pos, chunk_size};
      fmt.format = f.u16();
      fmt.channels = f.u16();
      fmt.sample_rate = f.u32();
      f.u32();  // byte rate
      f.u16();  // block align
      fmt.bits_per_sample = f.u16();
      if (fmt.format == kFormatExtensible) {
        // Actual format is the first two bytes of the subformat GUID.
        if (chunk_size >= 40) {
          f.pos = 24;
          fmt.format = f.u16();
        } else {
          throw WavError(WavError::Kind::Malformed,
                         "extensible fmt chunk too small in '" +
                             path.string() + "'");
        }
      }
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      have_data = true;
      data_pos = r.pos;
      data_size = chunk_size;
    }
    r.pos += chunk_size + (chunk_size & 1);  // chunks are word-aligned
  }

  if (!have_fmt)
    throw WavError(WavError::Kind::Malformed,
                   "no fmt chunk in '" + path.string() + "'");
  if (!have_data)
    throw WavError(WavError::Kind::Malformed,
                   "no data chunk in '" + path.string() + "'");

  const bool pcm_ok = fmt.format == kFormatPcm &&
                      (fmt.bits_per_sample == 8 || fmt.bits_per_sample == 16 ||
                       fmt.bits_per_sample == 24 || fmt.bits_per_sample == 32);
  const bool float_ok = fmt.format == kFormatFloat && fmt.bits_per_sample == 32;
  if (!pcm_ok && !float_ok)
    throw WavError(WavError::Kind::UnsupportedEncoding,
                   "unsupported encoding in '" + path.string() +
                       "' (format tag " + std::to_string(fmt.format) + ", " +
                       std::to_string(fmt.bits_per_sample) +
                       " bits); only PCM 8/16/24/32 and 32-bit float WAV are "
                       "supported");
  if (fmt.channels == 0 || fmt.sample_rate == 0)
    throw WavError(WavError::Kind::Malformed,
                   "fmt chunk declares zero channels or zero sample rate in '" +
                       path.string() + "'");
  if (data_size == 0)
    throw WavError(WavError::Kind::EmptyData,
                   "zero-length data chunk in '" + path.string() + "'");

  const std::size_t bytes_per_sample = fmt.bits_per_sample / 8;
  const std::size_t frame_size = bytes_per_sample * fmt.channels;
  const std::size_t n_frames = data_size / frame_size;
  if (n_frames == 0)
    throw WavError(WavError::Kind::EmptyData,
                   "data chunk holds no complete frame in '" + path.string() +
                       "'");

  AudioClip clip;
  clip.sample_rate_hz = static_cast<int>(fmt.sample_rate);
  clip.source_id = path.filename().string();
  clip.samples.resize(n_frames);
  const std::uint8_t* p = bytes.data() + data_pos;
  for (std::size_t i = 0; i < n_frames; ++i) {
    double acc = 0.0;
    for (std::uint16_t c = 0; c < fmt.channels; ++c)
      acc += decode_sample(p + i * frame_size + c * bytes_per_sample,
                           fmt.format, fmt.bits_per_sample);
    clip.samples[i] = acc / fmt.channels;
  }
  return clip;
}

}  // namespace cough
