"""Regenerates the frozen filter and SSVEP-score values used by tests/test_filter.cpp
and tests/test_decoder.cpp. Needs numpy and scipy; not part of the build."""
import numpy as np
import scipy.signal as sig

FS = 128


def probe_signal(n):
    i = np.arange(n)
    return np.sin(0.3 * i) + 0.5 * np.cos(1.7 * i + 0.2) + 0.01 * i


def score_signal(n):
    t = np.arange(n) / FS
    return (3 * np.sin(2 * np.pi * 8 * t) + 1.5 * np.sin(2 * np.pi * 16 * t + 0.3)
            + 0.7 * np.sin(2 * np.pi * 24 * t + 1.0) + 0.4 * np.sin(2 * np.pi * 13 * t)
            + np.fmod(0.05 * np.arange(n), 7.0))


def main():
    sos = sig.butter(2, [7, 9], btype="band", fs=FS, output="sos")
    w, h = sig.sosfreqz(sos, worN=[5.0, 7.0, 8.0, 9.0, 11.0, 12.0], fs=FS)
    print("single-pass gain (dB) of the 7-9 Hz design")
    for f, v in zip(w, h):
        print(f"  {f:5.1f} Hz  {20 * np.log10(abs(v)):.15g}")

    y = sig.sosfiltfilt(sos, probe_signal(384))
    print("sosfiltfilt of the probe signal")
    for k in (0, 1, 50, 191, 300, 383):
        print(f"  y[{k}] = {y[k]!r}")

    x = score_signal(384)
    print("SSVEP scores (harmonics 1..3, +-1 Hz, 0.5 s trim)")
    for f in (7, 8, 9, 10):
        e = 0.0
        for k in (1, 2, 3):
            s = sig.butter(2, [k * f - 1, k * f + 1], btype="band", fs=FS, output="sos")
            e += np.var(sig.sosfiltfilt(s, x)[64:-64])
        print(f"  {f} Hz  {e!r}")


if __name__ == "__main__":
    main()
