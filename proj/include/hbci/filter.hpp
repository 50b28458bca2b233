#pragma once

#include <span>
#include <vector>

namespace hbci {

// Direct-form II transposed second-order section, a0 normalised to 1.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
};

using SosCascade = std::vector<Biquad>;

// Digital Butterworth band-pass over [low, high] Hz by bilinear transform
// with prewarped edges. `order` is the total band-pass order (even); the
// analog low-pass prototype has order/2 poles. Unity gain at the geometric
// band centre.
SosCascade design_butterworth_bandpass(double sample_rate, double low,
                                       double high, int order);

// |H(e^{j 2 pi f / fs})| of the cascade.
double magnitude_response(const SosCascade& sos, double frequency,
                          double sample_rate);

// Causal filtering; zi holds two state words per section (may be empty).
std::vector<double> sosfilt(const SosCascade& sos, std::span<const double> x,
                            std::vector<double>* zi = nullptr);

// Steady-state initial conditions for a unit step input.
std::vector<double> sosfilt_zi(const SosCascade& sos);

// Forward-backward (zero-phase) filtering with odd-extension padding of
// 3 * (2 * sections + 1) samples, matching scipy.signal.sosfiltfilt.
std::vector<double> sosfiltfilt(const SosCascade& sos,
                                std::span<const double> x);

// Zero-phase Butterworth band-pass around `center` +/- `halfwidth`.
// Throws InvalidArgument when the band leaves (0, fs/2).
std::vector<double> bandpass(std::span<const double> x, double sample_rate,
                             double center, double halfwidth, int order = 4);

}  // namespace hbci
