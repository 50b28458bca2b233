#include "hbci/filter.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "hbci/types.hpp"

namespace hbci {

using cplx = std::complex<double>;

SosCascade design_butterworth_bandpass(double sample_rate, double low,
                                       double high, int order) {
  if (order < 2 || order % 2 != 0) {
    throw Error(ErrorCode::InvalidArgument,
                "band-pass order must be a positive even integer");
  }
  if (!(low > 0.0 && low < high && high < sample_rate / 2.0)) {
    throw Error(ErrorCode::InvalidArgument,
                "band edges must satisfy 0 < low < high < fs/2");
  }
  const int n = order / 2;
  const double fs2 = 2.0 * sample_rate;
  const double w1 = fs2 * std::tan(std::numbers::pi * low / sample_rate);
  const double w2 = fs2 * std::tan(std::numbers::pi * high / sample_rate);
  const double bw = w2 - w1;
  const double w0 = std::sqrt(w1 * w2);

  // Analog prototype poles -> band-pass poles -> bilinear transform.
  std::vector<cplx> upper;  // digital poles with Im > 0
  std::vector<double> real_poles;
  for (int k = 0; k < n; ++k) {
    const cplx p = std::polar(1.0, std::numbers::pi * (2.0 * k + n + 1) / (2.0 * n));
    const cplx half = p * bw / 2.0;
    const cplx root = std::sqrt(half * half - w0 * w0);
    for (const cplx s : {half + root, half - root}) {
      const cplx z = (fs2 + s) / (fs2 - s);
      if (std::abs(z.imag()) < 1e-12) {
        real_poles.push_back(z.real());
      } else if (z.imag() > 0.0) {
        upper.push_back(z);
      }
    }
  }
  std::sort(real_poles.begin(), real_poles.end());

  SosCascade sos;
  for (const cplx& z : upper) {
    sos.push_back({1.0, 0.0, -1.0, -2.0 * z.real(), std::norm(z)});
  }
  for (std::size_t i = 0; i + 1 < real_poles.size(); i += 2) {
    const double p1 = real_poles[i], p2 = real_poles[i + 1];
    sos.push_back({1.0, 0.0, -1.0, -(p1 + p2), p1 * p2});
  }
  if (sos.size() != static_cast<std::size_t>(n)) {
    throw Error(ErrorCode::InvalidArgument, "unsupported band-pass geometry");
  }

  // Each section has zeros at z = +1 and z = -1; normalise at the centre.
  const double centre = std::atan(w0 / fs2) * sample_rate / std::numbers::pi;
  const double gain = magnitude_response(sos, centre, sample_rate);
  const double per_section = std::pow(gain, -1.0 / n);
  for (auto& s : sos) {
    s.b0 *= per_section;
    s.b1 *= per_section;
    s.b2 *= per_section;
  }
  return sos;
}

double magnitude_response(const SosCascade& sos, double frequency,
                          double sample_rate) {
  const cplx z1 = std::polar(1.0, -2.0 * std::numbers::pi * frequency / sample_rate);
  const cplx z2 = z1 * z1;
  cplx h = 1.0;
  for (const auto& s : sos) {
    h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
  }
  return std::abs(h);
}

std::vector<double> sosfilt(const SosCascade& sos, std::span<const double> x,
                            std::vector<double>* zi) {
  std::vector<double> state(2 * sos.size(), 0.0);
  if (zi && !zi->empty()) state = *zi;
  std::vector<double> y(x.begin(), x.end());
  for (std::size_t k = 0; k < sos.size(); ++k) {
    const Biquad& s = sos[k];
    double z1 = state[2 * k], z2 = state[2 * k + 1];
    for (double& v : y) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
    state[2 * k] = z1;
    state[2 * k + 1] = z2;
  }
  if (zi) *zi = state;
  return y;
}

std::vector<double> sosfilt_zi(const SosCascade& sos) {
  std::vector<double> zi;
  double scale = 1.0;
  for (const auto& s : sos) {
    // Solve (I - A^T) z = b[1:] - a[1:] * b0 for the DF-II-T companion A.
    const double m00 = 1.0 + s.a1, m01 = -1.0;
    const double m10 = s.a2, m11 = 1.0;
    const double r0 = s.b1 - s.a1 * s.b0;
    const double r1 = s.b2 - s.a2 * s.b0;
    const double det = m00 * m11 - m01 * m10;
    zi.push_back(scale * (r0 * m11 - m01 * r1) / det);
    zi.push_back(scale * (m00 * r1 - m10 * r0) / det);
    scale *= (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
  }
  return zi;
}

std::vector<double> sosfiltfilt(const SosCascade& sos,
                                std::span<const double> x) {
  if (x.empty()) return {};
  const std::size_t ntaps = 2 * sos.size() + 1;
  const std::size_t pad = std::min(3 * ntaps, x.size() - 1);
  const std::size_t n = x.size();

  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  const std::vector<double> zi = sosfilt_zi(sos);
  auto scaled = [&zi](double by) {
    std::vector<double> z(zi);
    for (double& v : z) v *= by;
    return z;
  };

  std::vector<double> state = scaled(ext.front());
  std::vector<double> y = sosfilt(sos, ext, &state);
  std::reverse(y.begin(), y.end());
  state = scaled(y.front());
  y = sosfilt(sos, y, &state);
  std::reverse(y.begin(), y.end());
  return std::vector<double>(y.begin() + static_cast<std::ptrdiff_t>(pad),
                             y.end() - static_cast<std::ptrdiff_t>(pad));
}

std::vector<double> bandpass(std::span<const double> x, double sample_rate,
                             double center, double halfwidth, int order) {
  const double low = center - halfwidth;
  const double high = center + halfwidth;
  if (!(halfwidth > 0.0) || !(low > 0.0) || !(high < sample_rate / 2.0)) {
    throw Error(ErrorCode::InvalidArgument,
                "band " + std::to_string(low) + ".." + std::to_string(high) +
                    " Hz outside (0, Nyquist)");
  }
  return sosfiltfilt(design_butterworth_bandpass(sample_rate, low, high, order), x);
}

}  // namespace hbci
