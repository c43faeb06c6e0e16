"""Symmetric-channel detection model and simulated observables.

The untrusted relay sits midway between the two parties and interferes each
pulse pair on a 50:50 beam splitter, with one threshold detector per
polarization mode on each output port (four detectors total).  An event is
declared successful when exactly two detectors click in one of the four
accepted coincidence patterns:

* both detectors of the same output port  -> "correlated" announcement,
* the H detector of one port and the V detector of the other -> "anticorrelated".

In the X basis a correlated announcement means the encoded bits should agree
and an anticorrelated one that they should differ; in the Z basis every
successful pattern announces anticorrelated bits.  Misalignment flips the
correct/error classification of an event with probability ``e_d``; dark
counts fire each detector independently with probability ``p_d`` per gate.

The closed-form gains below are the standard linear-optics expressions for
this setup with phase-randomized weak coherent pulses.  They are not taken on
faith: :func:`monte_carlo_yield` simulates the identical physics photon by
photon, and the validation grid requires 3-sigma agreement before the model
is used.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.special import i0 as _bessel_i0

from .source_model import SOURCES, SourceEnsemble

# Pairs whose counts the security analysis consumes.
USED_PAIRS = frozenset(
    [("v", "v"), ("v", "x"), ("x", "v"), ("v", "y"), ("y", "v"), ("x", "x"), ("y", "y"), ("z", "z")]
)


@dataclass(frozen=True)
class ChannelParams:
    """Experiment-level parameters (symmetric channel, identical detectors)."""

    e0: float = 0.5  # error rate of vacuous counts
    e_d: float = 0.015  # misalignment probability
    p_d: float = 6.02e-6  # dark count rate per detector per gate
    eta_d: float = 0.145  # detector efficiency
    alpha_f: float = 0.2  # fiber loss, dB/km
    f_ec: float = 1.16  # error-correction inefficiency
    xi: float = 1e-7  # failure probability per statistical estimate
    n_pairs: float = 1e11  # total emitted pulse pairs
    distance_km: float = 0.0  # Alice-Bob distance

    def __post_init__(self) -> None:
        for name in ("e0", "e_d", "p_d", "eta_d"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if not (0.0 < self.xi < 1.0):
            raise ValueError(f"xi must lie in (0, 1), got {self.xi}")
        if self.alpha_f < 0.0:
            raise ValueError(f"alpha_f must be nonnegative, got {self.alpha_f}")
        if self.n_pairs < 1:
            raise ValueError(f"n_pairs must be at least 1, got {self.n_pairs}")
        if self.distance_km < 0.0:
            raise ValueError(f"distance_km must be nonnegative, got {self.distance_km}")
        if self.f_ec < 1.0:
            raise ValueError(f"f_ec must be at least 1, got {self.f_ec}")

    def at_distance(self, distance_km: float) -> "ChannelParams":
        return replace(self, distance_km=distance_km)


def side_transmittance(params: ChannelParams) -> float:
    """Efficiency from one party to a detector click at the midpoint relay."""
    return params.eta_d * 10.0 ** (-params.alpha_f * (params.distance_km / 2.0) / 10.0)


def _i0m1(z: float) -> float:
    """I0(z) - 1, accurate for small z where direct subtraction cancels."""
    if z < 0.5:
        term = z * z / 4.0
        total = 0.0
        m = 1
        while term > 1e-20 * (total or 1.0):
            total += term
            m += 1
            term *= z * z / (4.0 * m * m)
        return total
    return float(_bessel_i0(z)) - 1.0


def pair_yield(mu_a: float, mu_b: float, basis: str, params: ChannelParams) -> tuple[float, float]:
    """Gain and error-gain per emitted pulse pair at the given intensities.

    Returns ``(Q, EQ)`` clamped to ``0 <= EQ <= Q <= 1``.
    """
    if mu_a < 0 or mu_b < 0:
        raise ValueError("intensities must be nonnegative")
    eta = side_transmittance(params)
    ea, eb = eta * mu_a, eta * mu_b
    x = math.sqrt(ea * eb) / 2.0
    mu_p = (ea + eb) / 2.0
    p_d, e0, e_d = params.p_d, params.e0, params.e_d

    if basis == "X":
        y = (1.0 - p_d) * math.exp(-mu_p / 2.0)
        eps = p_d - (1.0 - p_d) * math.expm1(-mu_p / 2.0)  # = 1 - y, stably
        bracket = _i0m1(2.0 * x) - 4.0 * y * _i0m1(x) + 2.0 * eps * eps
        q = 2.0 * y * y * bracket
        eq = e0 * q - 2.0 * (e0 - e_d) * y * y * _i0m1(2.0 * x)
    elif basis == "Z":
        silent = (1.0 - p_d) * math.exp(-mu_p)  # both spectator detectors stay quiet
        click_a = -math.expm1(-ea / 2.0) + p_d * math.exp(-ea / 2.0)  # 1 - (1-p_d) e^{-ea/2}
        click_b = -math.expm1(-eb / 2.0) + p_d * math.exp(-eb / 2.0)
        q_correct = 2.0 * (1.0 - p_d) * silent * click_a * click_b
        q_dark = 2.0 * p_d * (1.0 - p_d) * silent * (_i0m1(2.0 * x) + p_d - (1.0 - p_d) * math.expm1(-mu_p))
        q = q_correct + q_dark
        eq = e_d * q_correct + (1.0 - e_d) * q_dark
    else:
        raise ValueError(f"basis must be 'X' or 'Z', got {basis!r}")

    q = min(max(q, 0.0), 1.0)
    eq = min(max(eq, 0.0), q)
    return q, eq


@dataclass(frozen=True)
class MonteCarloYield:
    gain: float
    error_gain: float
    gain_se: float
    error_se: float
    trials: int
    successes: int
    errors: int


def monte_carlo_yield(
    mu_a: float,
    mu_b: float,
    basis: str,
    params: ChannelParams,
    trials: int,
    seed: int,
    chunk_size: int = 1_000_000,
) -> MonteCarloYield:
    """Photon-level simulation of the relay measurement.

    Per trial: draw the relative phase between the two (independently
    phase-randomized) pulses and both encoded bits, propagate the coherent
    amplitudes through the beam splitter, draw Poisson photon numbers at each
    detector from the post-loss intensities, add dark counts, and classify the
    coincidence pattern.  Trials are partitioned into fixed-size chunks with
    seeds spawned per chunk, so results depend only on ``(seed, trials,
    chunk_size)`` and not on how chunks are scheduled.
    """
    if trials < 1:
        raise ValueError(f"trials must be at least 1, got {trials}")
    if basis not in ("X", "Z"):
        raise ValueError(f"basis must be 'X' or 'Z', got {basis!r}")

    eta = side_transmittance(params)
    ea, eb = eta * mu_a, eta * mu_b
    x = math.sqrt(ea * eb) / 2.0
    mu_p = (ea + eb) / 2.0
    p_d, e_d = params.p_d, params.e_d

    n_chunks = (trials + chunk_size - 1) // chunk_size
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    n_success = 0
    n_error = 0
    remaining = trials
    for child in children:
        m = min(chunk_size, remaining)
        remaining -= m
        rng = np.random.default_rng(child)
        cos_phi = np.cos(rng.uniform(0.0, 2.0 * np.pi, m))
        bit_a = rng.integers(0, 2, m)
        bit_b = rng.integers(0, 2, m)
        lam = np.zeros((m, 4))  # columns: 1H, 1V, 2H, 2V
        if basis == "X":
            sign = np.where(bit_a == bit_b, 1.0, -1.0)
            lam[:, 0] = mu_p / 2.0 + x * cos_phi
            lam[:, 1] = mu_p / 2.0 + sign * x * cos_phi
            lam[:, 2] = mu_p / 2.0 - x * cos_phi
            lam[:, 3] = mu_p / 2.0 - sign * x * cos_phi
        else:
            lam_plus = mu_p + 2.0 * x * cos_phi
            lam_minus = mu_p - 2.0 * x * cos_phi
            both_h = (bit_a == 0) & (bit_b == 0)
            both_v = (bit_a == 1) & (bit_b == 1)
            a_h_b_v = (bit_a == 0) & (bit_b == 1)
            a_v_b_h = (bit_a == 1) & (bit_b == 0)
            lam[both_h, 0] = lam_plus[both_h]
            lam[both_h, 2] = lam_minus[both_h]
            lam[both_v, 1] = lam_plus[both_v]
            lam[both_v, 3] = lam_minus[both_v]
            lam[a_h_b_v, 0] = ea / 2.0
            lam[a_h_b_v, 2] = ea / 2.0
            lam[a_h_b_v, 1] = eb / 2.0
            lam[a_h_b_v, 3] = eb / 2.0
            lam[a_v_b_h, 1] = ea / 2.0
            lam[a_v_b_h, 3] = ea / 2.0
            lam[a_v_b_h, 0] = eb / 2.0
            lam[a_v_b_h, 2] = eb / 2.0

        clicks = (rng.poisson(lam) > 0) | (rng.random((m, 4)) < p_d)
        two_clicks = clicks.sum(axis=1) == 2
        same_port = (clicks[:, 0] & clicks[:, 1]) | (clicks[:, 2] & clicks[:, 3])
        cross_port = (clicks[:, 0] & clicks[:, 3]) | (clicks[:, 1] & clicks[:, 2])
        success = two_clicks & (same_port | cross_port)

        if basis == "X":
            raw_error = np.where(same_port[success], bit_a[success] != bit_b[success], bit_a[success] == bit_b[success])
        else:
            raw_error = bit_a[success] == bit_b[success]
        flipped = rng.random(int(success.sum())) < e_d
        n_success += int(success.sum())
        n_error += int((raw_error ^ flipped).sum())

    q_hat = n_success / trials
    eq_hat = n_error / trials
    return MonteCarloYield(
        gain=q_hat,
        error_gain=eq_hat,
        gain_se=math.sqrt(q_hat * (1.0 - q_hat) / trials),
        error_se=math.sqrt(eq_hat * (1.0 - eq_hat) / trials),
        trials=trials,
        successes=n_success,
        errors=n_error,
    )


@dataclass(frozen=True)
class SourceCounts:
    """Counts recorded for one two-pulse source."""

    alice_source: str
    bob_source: str
    basis: str  # "X", "Z", or "mixed" (basis-mismatched, discarded by the analysis)
    emitted: float  # expected emitted pairs p_l p_r N_t
    counts: int
    errors: int
    used: bool

    @property
    def rate(self) -> float:
        return self.counts / self.emitted

    @property
    def error_rate(self) -> float:
        return self.errors / self.emitted


@dataclass(frozen=True)
class PairObservables:
    """Counts and error counts for all sixteen two-pulse sources."""

    pairs: dict[tuple[str, str], SourceCounts]
    n_pairs: float

    def entry(self, alice_source: str, bob_source: str) -> SourceCounts:
        return self.pairs[(alice_source, bob_source)]

    def emitted(self, alice_source: str, bob_source: str) -> float:
        return self.pairs[(alice_source, bob_source)].emitted

    def counts(self, alice_source: str, bob_source: str) -> int:
        return self.pairs[(alice_source, bob_source)].counts

    def errors(self, alice_source: str, bob_source: str) -> int:
        return self.pairs[(alice_source, bob_source)].errors

    @property
    def signal_rate(self) -> float:
        """Observed counting rate of the signal-signal source."""
        return self.entry("z", "z").rate

    @property
    def signal_error_rate(self) -> float:
        """Observed error fraction among signal-signal counts."""
        zz = self.entry("z", "z")
        return zz.errors / zz.counts if zz.counts else 0.0


def simulation_intensity(side_sources, source: str) -> float:
    """Intensity at which observables are generated for one source.

    Fluctuating sources emit at their nominal midpoint; the unstable vacuum
    source at half its cap.  The analysis side keeps using full worst-case
    intervals regardless.
    """
    if source == "v":
        return side_sources.vacuum_cap / 2.0
    return {"x": side_sources.mu_x, "y": side_sources.mu_y, "z": side_sources.mu_z}[source]


def build_observables(ensemble: SourceEnsemble, params: ChannelParams) -> PairObservables:
    """Expected observables for every two-pulse source at typical intensities.

    Counts are rounded to integers (round-half-even) since any real run
    records integers.  Basis-mismatched pairs are generated with the X-basis
    gain and a fully random error fraction; they are flagged unused.
    """
    pairs: dict[tuple[str, str], SourceCounts] = {}
    for l in SOURCES:
        for r in SOURCES:
            emitted = ensemble.alice.probability(l) * ensemble.bob.probability(r) * params.n_pairs
            mu_a = simulation_intensity(ensemble.alice, l)
            mu_b = simulation_intensity(ensemble.bob, r)
            if (l, r) == ("z", "z"):
                basis = "Z"
                q, eq = pair_yield(mu_a, mu_b, "Z", params)
            elif l != "z" and r != "z":
                basis = "X"
                q, eq = pair_yield(mu_a, mu_b, "X", params)
            else:
                basis = "mixed"
                q, _ = pair_yield(mu_a, mu_b, "X", params)
                eq = params.e0 * q
            counts = round(emitted * q)
            errors = min(round(emitted * eq), counts)
            pairs[(l, r)] = SourceCounts(
                alice_source=l,
                bob_source=r,
                basis=basis,
                emitted=emitted,
                counts=counts,
                errors=errors,
                used=(l, r) in USED_PAIRS,
            )
    return PairObservables(pairs=pairs, n_pairs=float(params.n_pairs))


def write_observables_csv(observables: PairObservables, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"# n_pairs={observables.n_pairs!r}\n")
        writer = csv.writer(fh)
        writer.writerow(["l", "r", "basis", "emitted", "counts", "errors"])
        for l in SOURCES:
            for r in SOURCES:
                e = observables.entry(l, r)
                writer.writerow([l, r, e.basis, repr(e.emitted), e.counts, e.errors])


def read_observables_csv(path: str | Path) -> PairObservables:
    path = Path(path)
    n_pairs = None
    pairs: dict[tuple[str, str], SourceCounts] = {}
    with path.open("r", newline="", encoding="utf-8") as fh:
        rows = []
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                if key.strip() == "n_pairs":
                    n_pairs = float(value)
                continue
            rows.append(line)
        for record in csv.DictReader(rows):
            l, r = record["l"], record["r"]
            pairs[(l, r)] = SourceCounts(
                alice_source=l,
                bob_source=r,
                basis=record["basis"],
                emitted=float(record["emitted"]),
                counts=int(record["counts"]),
                errors=int(record["errors"]),
                used=(l, r) in USED_PAIRS,
            )
    if n_pairs is None:
        raise ValueError(f"{path} is missing the n_pairs header comment")
    return PairObservables(pairs=pairs, n_pairs=n_pairs)


# ---------------------------------------------------------------------------
# Model-decomposition oracles.  Conditioned on emitted photon numbers the
# channel is intensity-independent, so the weak-coherent gain is the Poisson
# mixture of Fock-pair yields:  Q(a, b) = sum_jk P_j(a) P_k(b) Y_jk.  Both
# helpers below invert that mixture without touching the detector internals.
# ---------------------------------------------------------------------------


def vacuum_error_component(mu_a: float, mu_b: float, params: ChannelParams) -> float:
    """Error rate contributed by X-basis pairs where either side emitted vacuum.

    By inclusion-exclusion over the vacuum components of the two sources this
    is exactly ``b0 EQ(mu_a, 0) + a0 EQ(0, mu_b) - a0 b0 EQ(0, 0)`` with
    ``a0 = exp(-mu_a)``, ``b0 = exp(-mu_b)``.
    """
    a0 = math.exp(-mu_a)
    b0 = math.exp(-mu_b)
    _, eq_a_only = pair_yield(mu_a, 0.0, "X", params)
    _, eq_b_only = pair_yield(0.0, mu_b, "X", params)
    _, eq_none = pair_yield(0.0, 0.0, "X", params)
    return b0 * eq_a_only + a0 * eq_b_only - a0 * b0 * eq_none


def single_photon_pair_truth(basis: str, params: ChannelParams, step: float = 4e-3) -> tuple[float, float]:
    """True yield and error rate of emitted single-photon pairs.

    Extracts the (1,1) Fock coefficient of the gain's Poisson mixture via the
    mixed second difference of ``exp(a+b) Q(a, b)`` at the origin, Richardson
    extrapolated to kill the first- and second-order truncation terms.
    """

    def mixed(component: int, h: float) -> float:
        def f(a: float, b: float) -> float:
            return math.exp(a + b) * pair_yield(a, b, basis, params)[component]

        return (f(h, h) - f(h, 0.0) - f(0.0, h) + f(0.0, 0.0)) / (h * h)

    def richardson(component: int) -> float:
        d1, d2, d3 = (mixed(component, step / s) for s in (1.0, 2.0, 4.0))
        r1 = 2.0 * d2 - d1
        r2 = 2.0 * d3 - d2
        return (4.0 * r2 - r1) / 3.0

    y11 = richardson(0)
    ey11 = richardson(1)
    if y11 <= 0.0:
        raise ValueError("single-photon-pair yield is not positive; channel too lossy to extract")
    return y11, max(ey11, 0.0) / y11


# ---------------------------------------------------------------------------
# Analytic-model validation against the photon-level simulation.
# ---------------------------------------------------------------------------

DEFAULT_VALIDATION_GRID: tuple[tuple[float, float], ...] = (
    (0.1, 0.0),
    (0.3, 0.0),
    (0.5, 0.0),
    (0.1, 30.0),
    (0.3, 30.0),
    (0.5, 30.0),
    (0.1, 60.0),
    (0.3, 60.0),
    (0.5, 60.0),
    (0.7, 15.0),
)


def _z_score(observed: float, predicted: float, se_observed: float, trials: int) -> float:
    """Deviation in binomial standard errors.

    Uses the larger of the empirical and model-predicted standard error so a
    zero-count observation of a rare rate is judged against the prediction's
    own spread instead of a degenerate zero.
    """
    se_predicted = math.sqrt(max(predicted * (1.0 - predicted), 0.0) / trials)
    se = max(se_observed, se_predicted)
    if se == 0.0:
        return 0.0
    return (observed - predicted) / se


@dataclass(frozen=True)
class ValidationRow:
    mu: float
    distance_km: float
    basis: str
    analytic_gain: float
    mc_gain: float
    z_gain: float
    analytic_error_gain: float
    mc_error_gain: float
    z_error: float

    @property
    def ok(self) -> bool:
        return abs(self.z_gain) <= 3.0 and abs(self.z_error) <= 3.0


@dataclass(frozen=True)
class ValidationReport:
    rows: tuple[ValidationRow, ...]
    trials: int

    @property
    def passed(self) -> bool:
        return all(row.ok for row in self.rows)


def validate_model(
    params: ChannelParams,
    trials: int,
    seed: int,
    grid: tuple[tuple[float, float], ...] = DEFAULT_VALIDATION_GRID,
    analytic_params: ChannelParams | None = None,
) -> ValidationReport:
    """Compare closed-form gains against the photon-level simulation.

    ``analytic_params`` substitutes a different parameter set on the analytic
    side only; tests use it to confirm the comparison actually has teeth.
    """
    if trials < 1:
        raise ValueError(f"trials must be at least 1, got {trials}")
    analytic_side = analytic_params if analytic_params is not None else params
    rows = []
    for i, (mu, distance) in enumerate(grid):
        for j, basis in enumerate(("X", "Z")):
            run_params = params.at_distance(distance)
            q, eq = pair_yield(mu, mu, basis, analytic_side.at_distance(distance))
            mc = monte_carlo_yield(mu, mu, basis, run_params, trials, seed + 1000 * i + j)
            z_gain = _z_score(mc.gain, q, mc.gain_se, trials)
            z_err = _z_score(mc.error_gain, eq, mc.error_se, trials)
            rows.append(
                ValidationRow(
                    mu=mu,
                    distance_km=distance,
                    basis=basis,
                    analytic_gain=q,
                    mc_gain=mc.gain,
                    z_gain=z_gain,
                    analytic_error_gain=eq,
                    mc_error_gain=mc.error_gain,
                    z_error=z_err,
                )
            )
    return ValidationReport(rows=tuple(rows), trials=trials)
