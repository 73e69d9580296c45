#include "coughhmm/features.hpp"

#include <fftw3.h>

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "coughhmm/numeric.hpp"
#include "csv_util.hpp"

namespace cough {

namespace {

// One-shot r2c DFT plan of fixed size.  Plan creation is cheap with
// FFTW_ESTIMATE and the buffers are reused across bins.
class DftPlan {
 public:
  explicit DftPlan(int n)
      : n_(n),
        in_(fftw_alloc_real(static_cast<std::size_t>(n))),
        out_(fftw_alloc_complex(static_cast<std::size_t>(n) / 2 + 1)),
        plan_(fftw_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE)) {
    if (plan_ == nullptr) {
      fftw_free(in_);
      fftw_free(out_);
      throw std::runtime_error("fftw plan creation failed");
    }
  }

  DftPlan(const DftPlan&) = delete;
  DftPlan& operator=(const DftPlan&) = delete;

  ~DftPlan() {
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }

  // Power spectrum |X_k|^2 / N for k = 0..N/2.
  void power(const double* x, std::vector<double>& p) {
    std::copy(x, x + n_, in_);
    fftw_execute(plan_);
    const std::size_t half = static_cast<std::size_t>(n_) / 2;
    p.resize(half + 1);
    for (std::size_t k = 0; k <= half; ++k) {
      const double re = out_[k][0];
      const double im = out_[k][1];
      p[k] = (re * re + im * im) / n_;
    }
  }

 private:
  int n_;
  double* in_;
  fftw_complex* out_;
  fftw_plan plan_;
};

int samples_per_bin(const AudioClip& clip, double bin_duration_s) {
  if (!(bin_duration_s > 0.0))
    throw std::invalid_argument("bin duration must be positive");
  const double n = std::floor(bin_duration_s * clip.sample_rate_hz);
  if (n < 1.0)
    throw std::invalid_argument("bin duration shorter than one sample period");
  if (n > static_cast<double>(clip.samples.size()))
    throw std::invalid_argument("clip '" + clip.source_id +
                                "' is shorter than one bin");
  return static_cast<int>(n);
}

void check_bands(const BandEdges& b) {
  if (!(b.lo_hz >= 0.0 && b.lo_hz < b.mid_lo_hz && b.mid_lo_hz < b.hi_lo_hz &&
        b.hi_lo_hz < b.cap_hz))
    throw std::invalid_argument("band edges must be ascending and >= 0");
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot open '" + path.string() +
                             "' for writing");
  return out;
}

}  // namespace

FeatureSeries extract_features(const AudioClip& clip, double bin_duration_s,
                               const BandEdges& bands) {
  check_bands(bands);
  const int n = samples_per_bin(clip, bin_duration_s);
  const std::size_t n_bins = clip.samples.size() / static_cast<std::size_t>(n);
  const double nyquist = clip.sample_rate_hz / 2.0;
  const double cap = std::min(bands.cap_hz, nyquist);

  FeatureSeries series;
  series.bin_duration_s = bin_duration_s;
  series.source_id = clip.source_id;
  series.sample_rate_hz = clip.sample_rate_hz;
  series.vectors.reserve(n_bins);

  DftPlan dft(n);
  std::vector<double> p;
  const std::size_t half = static_cast<std::size_t>(n) / 2;
  for (std::size_t bin = 0; bin < n_bins; ++bin) {
    dft.power(clip.samples.data() + bin * static_cast<std::size_t>(n), p);
    FeatureVector v;
    v.t_mid_s = (static_cast<double>(bin) + 0.5) * bin_duration_s;
    for (std::size_t k = 0; k <= half; ++k) {
      const double f = static_cast<double>(k) * clip.sample_rate_hz / n;
      // DC and (even N) Nyquist coefficients have no mirror image.
      const double w = (k == 0 || (n % 2 == 0 && k == half)) ? 1.0 : 2.0;
      const double e = w * p[k];
      if (f >= bands.lo_hz && f < bands.mid_lo_hz)
        v.e_low += e;
      else if (f >= bands.mid_lo_hz && f < bands.hi_lo_hz)
        v.e_mid += e;
      else if (f >= bands.hi_lo_hz && f <= cap)
        v.e_high += e;
    }
    series.vectors.push_back(v);
  }
  return series;
}

void export_features_csv(const FeatureSeries& series,
                         const std::filesystem::path& path) {
  auto out = open_output(path);
  out << "t_mid_s,e_low,e_mid,e_high\n";
  for (const FeatureVector& v : series.vectors)
    out << format_double(v.t_mid_s) << ',' << format_double(v.e_low) << ','
        << format_double(v.e_mid) << ',' << format_double(v.e_high) << '\n';
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

FeatureSeries import_features_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  std::string line;
  if (!std::getline(in, line)) line.clear();
  csv::strip_cr(line);
  if (line != "t_mid_s,e_low,e_mid,e_high")
    throw std::runtime_error("'" + path.string() +
                             "': expected header t_mid_s,e_low,e_mid,e_high");

  FeatureSeries series;
  series.source_id = path.filename().string();
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    csv::strip_cr(line);
    if (line.empty()) continue;
    const std::string ctx = path.string() + " row " + std::to_string(row);
    const auto cell = csv::split(line);
    if (cell.size() != 4)
      throw std::runtime_error(ctx + ": expected 4 comma-separated fields");
    FeatureVector v;
    v.t_mid_s = parse_double(cell[0], ctx);
    v.e_low = parse_double(cell[1], ctx);
    v.e_mid = parse_double(cell[2], ctx);
    v.e_high = parse_double(cell[3], ctx);
    if (v.e_low < 0 || v.e_mid < 0 || v.e_high < 0)
      throw std::runtime_error(ctx + ": negative band energy");
    series.vectors.push_back(v);
  }
  if (series.vectors.empty())
    throw std::runtime_error("'" + path.string() + "': no data rows");

  // Bin duration is recoverable exactly: t_mid of bin 0 is bin_duration/2.
  series.bin_duration_s = 2.0 * series.vectors.front().t_mid_s;
  if (!(series.bin_duration_s > 0.0))
    throw std::runtime_error("'" + path.string() +
                             "': first bin mid-point must be positive");
  for (std::size_t k = 0; k < series.vectors.size(); ++k) {
    const double expected =
        (static_cast<double>(k) + 0.5) * series.bin_duration_s;
    const double got = series.vectors[k].t_mid_s;
    if (std::abs(got - expected) > 1e-9 * std::max(1.0, std::abs(expected)))
      throw std::runtime_error("'" + path.string() + "': bin " +
                               std::to_string(k) +
                               " mid-point off the uniform grid");
  }
  return series;
}

void export_spectrogram_csv(const AudioClip& clip, double bin_duration_s,
                            const std::filesystem::path& path) {
  const int n = samples_per_bin(clip, bin_duration_s);
  const std::size_t n_bins = clip.samples.size() / static_cast<std::size_t>(n);
  const std::size_t half = static_cast<std::size_t>(n) / 2;

  auto out = open_output(path);
  out << "t_mid_s";
  for (std::size_t k = 0; k <= half; ++k)
    out << ',' << format_double(static_cast<double>(k) * clip.sample_rate_hz / n);
  out << '\n';

  DftPlan dft(n);
  std::vector<double> p;
  for (std::size_t bin = 0; bin < n_bins; ++bin) {
    dft.power(clip.samples.data() + bin * static_cast<std::size_t>(n), p);
    out << format_double((static_cast<double>(bin) + 0.5) * bin_duration_s);
    for (std::size_t k = 0; k <= half; ++k) out << ',' << format_double(p[k]);
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

}  // namespace cough
