"""Independent reference implementations used only to check the package.

Everything here is written straight-line from the defining formulas with its
own arithmetic (no imports from the package's numerical paths beyond raw
observables), so agreement is evidence rather than tautology.
"""

import math

import numpy as np
from scipy.optimize import brentq


def brentq_lower_deviation(x: float, xi: float) -> float:
    """Lower-envelope deviation solved with an unrelated root finder."""
    target = math.log(xi / 2.0)
    return brentq(
        lambda d: (d - (1 + d) * math.log1p(d)) * x / (1 + d) - target,
        1e-12,
        100.0,
        xtol=1e-15,
        rtol=8.882e-16,
    )


def brentq_upper_deviation(x: float, xi: float) -> float:
    target = math.log(xi / 2.0)
    return brentq(
        lambda d: (-d - (1 - d) * math.log1p(-d)) * x / (1 - d) - target,
        1e-12,
        1 - 1e-12,
        xtol=1e-15,
        rtol=8.882e-16,
    )


def grid_scan_coeff_extrema(mu_lo: float, mu_hi: float, k: int, points: int = 100_000):
    """Dense-grid min/max of exp(-mu) mu^k / k! over an intensity interval."""
    mus = np.linspace(mu_lo, mu_hi, points)
    with np.errstate(divide="ignore"):
        log_vals = np.where(mus > 0, k * np.log(np.where(mus > 0, mus, 1.0)) - mus, -np.inf if k else 0.0)
    vals = np.where((mus == 0) & (k == 0), 1.0, np.exp(log_vals - math.lgamma(k + 1)))
    if k > 0:
        vals = np.where(mus == 0, 0.0, vals)
    return float(vals.min()), float(vals.max())


def plugin_asymptotic_rate(observables, side, f_ec: float) -> float:
    """Straight-line infinite-data rate for exact sources and perfect vacuum.

    Uses the published bound formulas directly: the both-nonvacuum part of
    the x-x source through the error-side vacuum decomposition (vacuous
    counts are twice vacuous errors), the y-y part through the count-side
    decomposition, then the single-photon yield, phase-error ceiling, and
    rate formula, all at plug-in values.
    """
    ax = [math.exp(-side.mu_x) * side.mu_x**k / math.factorial(k) for k in range(3)]
    ay = [math.exp(-side.mu_y) * side.mu_y**k / math.factorial(k) for k in range(3)]
    az1 = math.exp(-side.mu_z) * side.mu_z

    S, T = {}, {}
    for l in "vxy":
        for r in "vxy":
            entry = observables.entry(l, r)
            S[l + r] = entry.counts / entry.emitted
            T[l + r] = entry.errors / entry.emitted

    vac_err = ax[0] * T["vx"] + ax[0] * T["xv"] - ax[0] * ax[0] * T["vv"]
    ntil_xx = S["xx"] - 2.0 * vac_err
    ntil_yy = S["yy"] - ay[0] * S["vy"] - ay[0] * S["yv"] + ay[0] * ay[0] * S["vv"]

    denominator = ax[1] * ay[1] * (ax[1] * ay[2] - ax[2] * ay[1])
    s11 = (ay[1] * ay[2] * ntil_xx - ax[1] * ax[2] * ntil_yy) / denominator
    e11 = (T["xx"] - vac_err) / (ax[1] * ax[1] * s11)

    def h2(p: float) -> float:
        if p <= 0.0 or p >= 1.0:
            return 0.0
        return -p * math.log2(p) - (1 - p) * math.log2(1 - p)

    zz = observables.entry("z", "z")
    s_zz = zz.counts / zz.emitted
    e_zz = zz.errors / zz.counts
    pz2 = zz.emitted / observables.n_pairs
    return pz2 * (az1 * az1 * s11 * (1.0 - h2(e11)) - f_ec * s_zz * h2(e_zz))
