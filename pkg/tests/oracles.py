"""Independent reference computations written in plain Python loops.

Nothing here imports the package; the tests compare package output against
these slow but transparent versions.
"""

import math


def dft_coefficients(x):
    """rho_0..rho_{N/2} and psi_1..psi_{N/2-1} by the textbook double loop."""
    n = len(x)
    rho, psi = [], []
    for k in range(n // 2 + 1):
        re = 0.0
        im = 0.0
        for j, v in enumerate(x):
            theta = 2.0 * math.pi * k * j / n
            re += v * math.cos(theta)
            im += v * math.sin(theta)
        rho.append(2.0 * re / n)
        if 0 < k < n // 2:
            psi.append(-2.0 * im / n)
    return rho, psi


def trig_eval(rho, psi, n, s):
    """Trigonometric series with the half-weight DC and Nyquist terms."""
    total = 0.5 * rho[0] + 0.5 * rho[n // 2] * math.cos(math.pi * n * s)
    for k in range(1, n // 2):
        total += rho[k] * math.cos(2.0 * math.pi * k * s) - psi[k - 1] * math.sin(2.0 * math.pi * k * s)
    return total


def pearson_two_pass(x, y):
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


def lowpass_alpha(dt, cutoff_hz):
    tau = 1.0 / (2.0 * math.pi * cutoff_hz)
    return dt / (tau + dt)


def ramp_rate_estimate(slope, dt, cutoff_hz, k):
    """Filtered backward difference of a ramp after k samples (first sample primes at 0)."""
    a = lowpass_alpha(dt, cutoff_hz)
    # estimate_k = slope * (1 - (1 - a)^k) for k >= 1 differences
    return slope * (1.0 - (1.0 - a) ** k)


def spike_rate_peak(height, dt, cutoff_hz):
    """Largest filtered rate magnitude for a single-sample spike: the first difference height/dt, scaled by alpha."""
    return lowpass_alpha(dt, cutoff_hz) * height / dt


def first_order_lag(cmd, dt, tau):
    a = 1.0 - math.exp(-dt / tau)
    y = cmd[0]
    out = []
    for c in cmd:
        y = y + a * (c - y)
        out.append(y)
    return out
