#include "ps2man/metrics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <vector>

namespace ps2man {

namespace {

// Phase congruency bank: 4 scales x 4 orientations of log-Gabor filters.
constexpr int kScales = 4;
constexpr int kOrients = 4;
constexpr double kMinWavelength = 6.0;
constexpr double kMult = 2.0;
constexpr double kSigmaOnf = 0.55;          // log-Gabor radial bandwidth
constexpr double kDThetaOnSigma = 1.2;      // angular spread ratio
constexpr double kNoiseK = 2.0;             // noise threshold multiplier
constexpr double kEps = 1e-4;
constexpr double kCutOff = 0.45;            // frequency-spread weighting
constexpr double kG = 10.0;

// FSIM similarity constants.
constexpr double kT1 = 0.85;   // phase congruency term
constexpr double kT2 = 160.0;  // gradient magnitude term

std::mutex g_fftw_mutex;  // FFTW planning is not thread-safe

struct Grid {
  std::vector<double> radius;  // normalized frequency, DC entry set to 1
  std::vector<double> theta;
};

// Frequency grids in FFT index order (DC at [0][0]).
Grid make_grid(int h, int w) {
  auto freqs = [](int n) {
    std::vector<double> f(n);
    const double denom = n % 2 ? double(n - 1) : double(n);
    const int half = n % 2 ? (n - 1) / 2 : n / 2 - 1;
    for (int i = 0; i < n; ++i)
      f[i] = (i <= half ? double(i) : double(i - n)) / denom;
    return f;
  };
  const auto fx = freqs(w);
  const auto fy = freqs(h);
  Grid g;
  g.radius.resize(size_t(h) * w);
  g.theta.resize(size_t(h) * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const size_t i = size_t(y) * w + x;
      g.radius[i] = std::hypot(fx[x], fy[y]);
      g.theta[i] = std::atan2(-fy[y], fx[x]);
    }
  g.radius[0] = 1.0;
  return g;
}

// Phase congruency map of one image.
std::vector<double> phase_congruency(const std::vector<double>& img, int h,
                                     int w) {
  const size_t np = size_t(h) * w;
  const Grid grid = make_grid(h, w);

  // image spectrum
  std::vector<std::complex<double>> spectrum(np), response(np);
  {
    std::vector<std::complex<double>> input(np);
    for (size_t i = 0; i < np; ++i) input[i] = img[i];
    std::lock_guard<std::mutex> lock(g_fftw_mutex);
    fftw_plan plan = fftw_plan_dft_2d(
        h, w, reinterpret_cast<fftw_complex*>(input.data()),
        reinterpret_cast<fftw_complex*>(spectrum.data()), FFTW_FORWARD,
        FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
  }

  // radial filters, shared across orientations
  std::vector<std::vector<double>> radial(kScales,
                                          std::vector<double>(np, 0.0));
  const double log_sigma = std::log(kSigmaOnf);
  for (int s = 0; s < kScales; ++s) {
    const double f0 = 1.0 / (kMinWavelength * std::pow(kMult, s));
    for (size_t i = 0; i < np; ++i) {
      const double r = grid.radius[i] / f0;
      const double lg =
          std::exp(-(std::log(r) * std::log(r)) / (2.0 * log_sigma * log_sigma));
      // butterworth lowpass keeps the corners of the spectrum quiet
      const double lp =
          1.0 / (1.0 + std::pow(grid.radius[i] / 0.45, 2.0 * 15.0));
      radial[s][i] = lg * lp;
    }
    radial[s][0] = 0.0;
  }

  const double sigma_theta = (M_PI / kOrients) / kDThetaOnSigma;
  std::vector<double> pc(np, 0.0);
  std::vector<std::vector<double>> even(kScales, std::vector<double>(np));
  std::vector<std::vector<double>> odd(kScales, std::vector<double>(np));
  std::vector<double> filter(np), sum_e(np), sum_o(np), sum_an(np), max_an(np);

  for (int o = 0; o < kOrients; ++o) {
    const double angle = o * M_PI / kOrients;
    for (size_t i = 0; i < np; ++i) {
      const double ds = std::sin(grid.theta[i] - angle);
      const double dc = std::cos(grid.theta[i] - angle);
      const double dtheta = std::abs(std::atan2(ds, dc));
      filter[i] = std::exp(-dtheta * dtheta / (2.0 * sigma_theta * sigma_theta));
    }

    std::fill(sum_e.begin(), sum_e.end(), 0.0);
    std::fill(sum_o.begin(), sum_o.end(), 0.0);
    std::fill(sum_an.begin(), sum_an.end(), 0.0);
    std::fill(max_an.begin(), max_an.end(), 0.0);
    double tau = 0.0;

    for (int s = 0; s < kScales; ++s) {
      std::vector<std::complex<double>> filtered(np);
      for (size_t i = 0; i < np; ++i)
        filtered[i] = spectrum[i] * (radial[s][i] * filter[i]);
      {
        std::lock_guard<std::mutex> lock(g_fftw_mutex);
        fftw_plan plan = fftw_plan_dft_2d(
            h, w, reinterpret_cast<fftw_complex*>(filtered.data()),
            reinterpret_cast<fftw_complex*>(response.data()), FFTW_BACKWARD,
            FFTW_ESTIMATE);
        fftw_execute(plan);
        fftw_destroy_plan(plan);
      }
      for (size_t i = 0; i < np; ++i) {
        const double e = response[i].real() / double(np);
        const double od = response[i].imag() / double(np);
        even[s][i] = e;
        odd[s][i] = od;
        const double an = std::hypot(e, od);
        sum_e[i] += e;
        sum_o[i] += od;
        sum_an[i] += an;
        max_an[i] = std::max(max_an[i], an);
      }
      if (s == 0) {
        std::vector<double> amps(np);
        for (size_t i = 0; i < np; ++i) amps[i] = std::hypot(even[0][i], odd[0][i]);
        std::nth_element(amps.begin(), amps.begin() + np / 2, amps.end());
        tau = amps[np / 2] / std::sqrt(std::log(4.0));
      }
    }

    // energy projected on the mean phase, minus the estimated noise floor
    const double total_tau =
        tau * (1.0 - std::pow(1.0 / kMult, kScales)) / (1.0 - 1.0 / kMult);
    const double noise_mean = total_tau * std::sqrt(M_PI / 2.0);
    const double noise_sigma = total_tau * std::sqrt((4.0 - M_PI) / 2.0);
    const double threshold = noise_mean + kNoiseK * noise_sigma;

    for (size_t i = 0; i < np; ++i) {
      const double x_energy = std::hypot(sum_e[i], sum_o[i]) + kEps;
      const double mean_e = sum_e[i] / x_energy;
      const double mean_o = sum_o[i] / x_energy;
      double energy = 0.0;
      for (int s = 0; s < kScales; ++s)
        energy += even[s][i] * mean_e + odd[s][i] * mean_o -
                  std::abs(even[s][i] * mean_o - odd[s][i] * mean_e);
      energy = std::max(energy - threshold, 0.0);

      const double width = (sum_an[i] / (max_an[i] + kEps)) / double(kScales);
      const double weight = 1.0 / (1.0 + std::exp(kG * (kCutOff - width)));
      pc[i] += weight * energy / (sum_an[i] + kEps);
    }
  }
  return pc;
}

// Scharr gradient magnitude (zero padding at the border).
std::vector<double> gradient_magnitude(const std::vector<double>& img, int h,
                                       int w) {
  static const double kx[9] = {3, 0, -3, 10, 0, -10, 3, 0, -3};
  static const double ky[9] = {3, 10, 3, 0, 0, 0, -3, -10, -3};
  std::vector<double> out(size_t(h) * w, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double gx = 0.0, gy = 0.0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
          const double v = img[size_t(yy) * w + xx];
          gx += kx[(dy + 1) * 3 + (dx + 1)] / 16.0 * v;
          gy += ky[(dy + 1) * 3 + (dx + 1)] / 16.0 * v;
        }
      out[size_t(y) * w + x] = std::hypot(gx, gy);
    }
  return out;
}

// 2x2...FxF box average followed by decimation, matching the customary
// preprocessing for large inputs. F = 1 leaves the image untouched.
std::vector<double> downsample(const std::vector<double>& img, int h, int w,
                               int factor, int& oh, int& ow) {
  if (factor <= 1) {
    oh = h;
    ow = w;
    return img;
  }
  oh = h / factor;
  ow = w / factor;
  std::vector<double> out(size_t(oh) * ow, 0.0);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int dy = 0; dy < factor; ++dy)
        for (int dx = 0; dx < factor; ++dx)
          acc += img[size_t(y * factor + dy) * w + (x * factor + dx)];
      out[size_t(y) * ow + x] = acc / double(factor * factor);
    }
  return out;
}

}  // namespace

double fsim(const Tensor& x, const Tensor& y) {
  check_same_shape(x, y, "fsim");
  if (x.c() != 1 || x.n() != 1)
    throw std::invalid_argument("fsim expects single-channel images");

  const int h0 = x.h(), w0 = x.w();
  std::vector<double> a(x.data(), x.data() + x.size());
  std::vector<double> b(y.data(), y.data() + y.size());

  const int factor = std::max(1, int(std::lround(std::min(h0, w0) / 256.0)));
  int h = 0, w = 0;
  a = downsample(a, h0, w0, factor, h, w);
  b = downsample(b, h0, w0, factor, h, w);

  const auto pc1 = phase_congruency(a, h, w);
  const auto pc2 = phase_congruency(b, h, w);
  const auto g1 = gradient_magnitude(a, h, w);
  const auto g2 = gradient_magnitude(b, h, w);

  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < pc1.size(); ++i) {
    const double s_pc = (2.0 * pc1[i] * pc2[i] + kT1) /
                        (pc1[i] * pc1[i] + pc2[i] * pc2[i] + kT1);
    const double s_g =
        (2.0 * g1[i] * g2[i] + kT2) / (g1[i] * g1[i] + g2[i] * g2[i] + kT2);
    const double pcm = std::max(pc1[i], pc2[i]);
    num += s_pc * s_g * pcm;
    den += pcm;
  }
  return den > 0.0 ? num / den : 1.0;
}

}  // namespace ps2man
