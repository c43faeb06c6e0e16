"""Secure key rate from observables, coefficient bounds, and count envelopes.

The single-photon-pair yield cannot be isolated from aggregate counts without
knowing how many of the x-decoy error counts came from pairs in which at
least one side emitted vacuum.  That nuisance quantity, scaled to

    H = 2 <m_xx_vacuum> / (p_x^2 N_t),

is unknown but boundable.  For each admissible H the analysis yields a
single-photon-pair yield floor ``s11(H)``, a phase-error ceiling ``e11(H)``,
and a candidate rate ``R(H)``; the secure rate is the minimum of ``R(H)``
over the whole interval, so the true H can only do better.

Every expected counting rate entering those formulas is replaced by its
Chernoff envelope, with positively-combined groups bounded jointly through
the telescoping combination bounds rather than term by term.  The Z-basis
single-photon yield is estimated by its X-basis bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import stat_bounds
from .channel_sim import PairObservables, build_observables
from .source_model import DecoyConditionReport, PhotonCoeffBounds, check_decoy_conditions, coeff_bounds
from .stat_bounds import ChernoffConfig, Envelope, InvocationCounter

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class AnalysisInfeasible(ValueError):
    """Raised when the source configuration cannot support the bounds."""


@dataclass(frozen=True)
class SigmaFactors:
    """Vacuum-contamination factors of the imperfect vacuum source.

    Each factor measures how much of a decoy source's zero-photon statistics
    the unstable vacuum source's one-photon component could fake; the bounds
    built on them require each per-basis sum to stay below one.
    """

    x_alice: float
    x_bob: float
    y_alice: float
    y_bob: float

    @property
    def x_total(self) -> float:
        return self.x_alice + self.x_bob

    @property
    def y_total(self) -> float:
        return self.y_alice + self.y_bob


def sigma_factors(bounds: PhotonCoeffBounds) -> SigmaFactors:
    """Contamination factors from worst-case coefficient bounds."""
    a, b = bounds.alice, bounds.bob
    for side in (a, b):
        if side.lo("v", 0) <= 0.0 or side.lo("x", 1) <= 0.0 or side.lo("y", 1) <= 0.0:
            raise AnalysisInfeasible("zero denominator in contamination factors; coefficient bounds degenerate")
    factors = SigmaFactors(
        x_alice=a.hi("x", 0) * a.hi("v", 1) / (a.lo("v", 0) * a.lo("x", 1)),
        x_bob=b.hi("x", 0) * b.hi("v", 1) / (b.lo("v", 0) * b.lo("x", 1)),
        y_alice=a.hi("y", 0) * a.hi("v", 1) / (a.lo("v", 0) * a.lo("y", 1)),
        y_bob=b.hi("y", 0) * b.hi("v", 1) / (b.lo("v", 0) * b.lo("y", 1)),
    )
    if factors.x_total >= 1.0 or factors.y_total >= 1.0:
        raise AnalysisInfeasible(
            f"vacuum contamination too large (x: {factors.x_total:.3g}, y: {factors.y_total:.3g}); "
            "bounds require each sum below 1"
        )
    return factors


@dataclass(frozen=True)
class AnalysisInputs:
    """Everything the finite-data analysis consumes."""

    bounds: PhotonCoeffBounds
    observables: PairObservables
    chernoff: ChernoffConfig
    f_ec: float = 1.16

    @classmethod
    def from_simulation(cls, ensemble, params, observables=None, k_max: int = 20, disabled: bool = False):
        """Wire coefficient bounds and simulated observables together."""
        obs = observables if observables is not None else build_observables(ensemble, params)
        return cls(
            bounds=coeff_bounds(ensemble, k_max=k_max),
            observables=obs,
            chernoff=ChernoffConfig(xi=params.xi, disabled=disabled),
            f_ec=params.f_ec,
        )


@dataclass(frozen=True)
class ExpectationEnvelope:
    """Chernoff envelopes on expected counting rates and their joint groups.

    Per-source envelopes are in rate units (counts over emitted pairs).  The
    joint entries bound unit-coefficient sums of expected rates for the
    groupings the analysis relies on, computed through the telescoping
    combination bounds, so they are never looser than adding per-source
    envelopes.
    """

    count_rate: dict[tuple[str, str], Envelope]
    error_rate_upper: dict[tuple[str, str], float]
    joint_count_lower: dict[tuple[tuple[str, str], ...], float]
    joint_count_upper: dict[tuple[tuple[str, str], ...], float]
    joint_error_lower: dict[tuple[tuple[str, str], ...], float]
    joint_error_upper: dict[tuple[tuple[str, str], ...], float]
    chernoff_calls: int


_COUNT_SOURCES = (("v", "v"), ("v", "x"), ("x", "v"), ("v", "y"), ("y", "v"), ("x", "x"), ("y", "y"))
_ERROR_SOURCES = (("x", "x"), ("v", "x"), ("x", "v"), ("v", "v"))
_JOINT_COUNT_LOWER = (
    (("x", "x"), ("v", "y")),
    (("x", "x"), ("y", "v")),
    (("v", "y"), ("y", "v")),
    (("x", "x"), ("v", "y"), ("y", "v")),
)
_JOINT_COUNT_UPPER = ((("y", "y"), ("v", "v")),)
_JOINT_ERROR_LOWER = ((("v", "x"), ("x", "v")),)
_JOINT_ERROR_UPPER = ((("x", "x"), ("v", "v")),)


def expectation_envelopes(inputs: AnalysisInputs, counter: InvocationCounter | None = None) -> ExpectationEnvelope:
    """Envelopes on expected rates for every source group the analysis uses."""
    obs = inputs.observables
    cfg = inputs.chernoff
    own_counter = counter if counter is not None else InvocationCounter()

    count_rate = {}
    for pair in _COUNT_SOURCES:
        emitted = obs.emitted(*pair)
        env = stat_bounds.envelope(obs.counts(*pair), cfg, own_counter)
        count_rate[pair] = Envelope(lower=env.lower / emitted, upper=env.upper / emitted)

    error_rate_upper = {
        pair: stat_bounds.chernoff_upper(obs.errors(*pair), cfg, own_counter) / obs.emitted(*pair)
        for pair in _ERROR_SOURCES
    }

    def joint(groups, getter, bound_fn):
        out = {}
        for group in groups:
            terms = [(1.0 / obs.emitted(*pair), float(getter(*pair))) for pair in group]
            out[group] = bound_fn(terms, cfg, own_counter)
        return out

    return ExpectationEnvelope(
        count_rate=count_rate,
        error_rate_upper=error_rate_upper,
        joint_count_lower=joint(_JOINT_COUNT_LOWER, obs.counts, stat_bounds.combo_lower),
        joint_count_upper=joint(_JOINT_COUNT_UPPER, obs.counts, stat_bounds.combo_upper),
        joint_error_lower=joint(_JOINT_ERROR_LOWER, obs.errors, stat_bounds.combo_lower),
        joint_error_upper=joint(_JOINT_ERROR_UPPER, obs.errors, stat_bounds.combo_upper),
        chernoff_calls=own_counter.count,
    )


def s_plus_lower(
    inputs: AnalysisInputs,
    sigma: SigmaFactors,
    counter: InvocationCounter | None = None,
) -> float:
    """Lower bound on the positive yield combination feeding the s11 numerator.

    The combination is ``c_y <S_xx> + K (a0_ratio <S_vy> + b0_ratio <S_yv>)``
    with nonnegative coefficients, so the three sources are bounded jointly.
    """
    a, b = inputs.bounds.alice, inputs.bounds.bob
    obs = inputs.observables
    scale = a.hi("x", 1) * b.hi("x", 2) / (1.0 - sigma.y_total)
    terms = [
        (a.lo("y", 1) * b.lo("y", 2) / obs.emitted("x", "x"), float(obs.counts("x", "x"))),
        (scale * (a.lo("y", 0) / a.hi("v", 0)) / obs.emitted("v", "y"), float(obs.counts("v", "y"))),
        (scale * (b.lo("y", 0) / b.hi("v", 0)) / obs.emitted("y", "v"), float(obs.counts("y", "v"))),
    ]
    return stat_bounds.combo_lower(terms, inputs.chernoff, counter)


def s_minus_upper(
    inputs: AnalysisInputs,
    sigma: SigmaFactors,
    counter: InvocationCounter | None = None,
) -> float:
    """Upper bound on the subtracted yield combination (y-y and vacuum-vacuum)."""
    a, b = inputs.bounds.alice, inputs.bounds.bob
    obs = inputs.observables
    scale = a.hi("x", 1) * b.hi("x", 2) / (1.0 - sigma.y_total)
    terms = [
        (scale / obs.emitted("y", "y"), float(obs.counts("y", "y"))),
        (
            scale * (a.hi("y", 0) * b.hi("y", 0) / (a.lo("v", 0) * b.lo("v", 0))) / obs.emitted("v", "v"),
            float(obs.counts("v", "v")),
        ),
    ]
    return stat_bounds.combo_upper(terms, inputs.chernoff, counter)


def h_range(
    inputs: AnalysisInputs,
    sigma: SigmaFactors,
    counter: InvocationCounter | None = None,
) -> tuple[float, float]:
    """Admissible interval for the vacuum-error nuisance parameter H.

    The upper end is twice the error-rate envelope of the x-x source.  The
    lower end jointly lower-bounds the positive group (v-x, x-v) and jointly
    upper-bounds the subtracted group (x-x, v-v), then clamps at zero since H
    is a physical error fraction.
    """
    a, b = inputs.bounds.alice, inputs.bounds.bob
    obs = inputs.observables
    cfg = inputs.chernoff

    h_upper = 2.0 * stat_bounds.chernoff_upper(obs.errors("x", "x"), cfg, counter) / obs.emitted("x", "x")

    positive = stat_bounds.combo_lower(
        [
            ((a.lo("x", 0) / a.hi("v", 0)) / obs.emitted("v", "x"), float(obs.errors("v", "x"))),
            ((b.lo("x", 0) / b.hi("v", 0)) / obs.emitted("x", "v"), float(obs.errors("x", "v"))),
        ],
        cfg,
        counter,
    )
    negative = stat_bounds.combo_upper(
        [
            (
                (a.hi("x", 0) * b.hi("x", 0) / (a.lo("v", 0) * b.lo("v", 0))) / obs.emitted("v", "v"),
                float(obs.errors("v", "v")),
            ),
            (sigma.x_total / obs.emitted("x", "x"), float(obs.errors("x", "x"))),
        ],
        cfg,
        counter,
    )
    h_lower = max(0.0, 2.0 * (positive - negative) / (1.0 - sigma.x_total))
    return h_lower, h_upper


def _s11_denominator(bounds: PhotonCoeffBounds) -> float:
    a, b = bounds.alice, bounds.bob
    return a.hi("x", 1) * a.lo("y", 1) * (b.hi("x", 1) * b.lo("y", 2) - b.hi("x", 2) * b.lo("y", 1))


def s11_lower(h: float, s_plus: float, s_minus: float, bounds: PhotonCoeffBounds) -> float:
    """Single-photon-pair yield floor at nuisance value ``h``; affine, decreasing in h."""
    denominator = _s11_denominator(bounds)
    if denominator <= 0.0:
        raise AnalysisInfeasible(
            "single-photon denominator is not positive; decoy intensities too close for the bound"
        )
    a, b = bounds.alice, bounds.bob
    return max(0.0, (s_plus - s_minus - a.lo("y", 1) * b.lo("y", 2) * h) / denominator)


def e11_upper(h: float, txx_upper: float, s11: float, bounds: PhotonCoeffBounds) -> float | None:
    """Phase-error ceiling at nuisance value ``h``, or None when s11 vanishes.

    Clamped to [0, 1]; values at or above one half mean no key is extractable
    at this ``h``.
    """
    if s11 <= 0.0:
        return None
    a, b = bounds.alice, bounds.bob
    value = (txx_upper - h / 2.0) / (a.lo("x", 1) * b.lo("x", 1) * s11)
    return min(max(value, 0.0), 1.0)


def binary_entropy(x: float) -> float:
    """Binary Shannon entropy in bits, with H(0) = H(1) = 0 by continuity."""
    if not (0.0 <= x <= 1.0):
        raise ValueError(f"binary_entropy requires x in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def _binary_entropy_arr(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    inside = (x > 0.0) & (x < 1.0)
    xi = x[inside]
    out[inside] = -xi * np.log2(xi) - (1.0 - xi) * np.log2(1.0 - xi)
    return out


@dataclass(frozen=True)
class _RateCurve:
    """Precomputed H-independent pieces of the candidate rate function."""

    s_plus: float
    s_minus: float
    txx_upper: float
    c_y: float  # coefficient of h in the s11 numerator
    denominator: float
    beta: float  # a1_x^L * b1_x^L
    gamma: float  # a1_z^L * b1_z^L
    pz2: float
    correction: float  # f_ec * S_zz * H2(E_zz), from observed values

    def s11(self, h):
        return np.maximum((self.s_plus - self.s_minus - self.c_y * np.asarray(h, dtype=float)) / self.denominator, 0.0)

    def rate(self, h):
        h_arr = np.asarray(h, dtype=float)
        s11 = self.s11(h_arr)
        safe = np.where(s11 > 0.0, s11, 1.0)
        e11 = np.where(s11 > 0.0, (self.txx_upper - h_arr / 2.0) / (self.beta * safe), 1.0)
        e11 = np.clip(e11, 0.0, 1.0)
        # Phase error at or beyond one half leaves nothing to distill.
        privacy = np.where(e11 < 0.5, 1.0 - _binary_entropy_arr(e11), 0.0)
        return self.pz2 * (self.gamma * s11 * privacy - self.correction)


def _curve(inputs: AnalysisInputs, sigma: SigmaFactors, counter: InvocationCounter) -> _RateCurve:
    bounds = inputs.bounds
    a, b = bounds.alice, bounds.bob
    obs = inputs.observables
    denominator = _s11_denominator(bounds)
    if denominator <= 0.0:
        raise AnalysisInfeasible(
            "single-photon denominator is not positive; decoy intensities too close for the bound"
        )
    return _RateCurve(
        s_plus=s_plus_lower(inputs, sigma, counter),
        s_minus=s_minus_upper(inputs, sigma, counter),
        txx_upper=stat_bounds.chernoff_upper(obs.errors("x", "x"), inputs.chernoff, counter) / obs.emitted("x", "x"),
        c_y=a.lo("y", 1) * b.lo("y", 2),
        denominator=denominator,
        beta=a.lo("x", 1) * b.lo("x", 1),
        gamma=a.lo("z", 1) * b.lo("z", 1),
        pz2=obs.emitted("z", "z") / obs.n_pairs,
        correction=inputs.f_ec * obs.signal_rate * binary_entropy(obs.signal_error_rate),
    )


def key_rate_at(h: float, inputs: AnalysisInputs, counter: InvocationCounter | None = None) -> float:
    """Candidate rate at one nuisance value (raw; may be negative)."""
    own = counter if counter is not None else InvocationCounter()
    sigma = sigma_factors(inputs.bounds)
    return float(_curve(inputs, sigma, own).rate(h))


def rate_function(inputs: AnalysisInputs):
    """Vectorized candidate-rate callable and the admissible H interval.

    Returns ``(rate, h_lower, h_upper)`` where ``rate`` accepts scalars or
    arrays; for diagnostics and dense scans of the same curve
    :func:`secure_key_rate` minimizes.
    """
    counter = InvocationCounter()
    sigma = sigma_factors(inputs.bounds)
    curve = _curve(inputs, sigma, counter)
    h_lo, h_hi = h_range(inputs, sigma, counter)
    return curve.rate, h_lo, h_hi


@dataclass(frozen=True)
class KeyRateReport:
    """Result of the full analysis at one configuration."""

    rate: float
    h_lower: float
    h_upper: float
    h_star: float
    s11_at_min: float
    e11_at_min: float
    signal_rate: float
    signal_error_rate: float
    chernoff_invocations: int
    reason: str
    trace_h: tuple[float, ...] = field(repr=False, default=())
    trace_rate: tuple[float, ...] = field(repr=False, default=())

    RECORD_FIELDS = (
        "rate",
        "h_lower",
        "h_upper",
        "h_star",
        "s11_at_min",
        "e11_at_min",
        "signal_rate",
        "signal_error_rate",
        "chernoff_invocations",
        "reason",
        "trace_samples",
    )

    def to_record(self) -> str:
        lines = []
        for name in self.RECORD_FIELDS:
            value = len(self.trace_h) if name == "trace_samples" else getattr(self, name)
            if isinstance(value, float):
                lines.append(f"{name} = {value:.12e}")
            else:
                lines.append(f"{name} = {value}")
        return "\n".join(lines) + "\n"


def _zero_report(reason: str, obs: PairObservables, invocations: int = 0) -> KeyRateReport:
    return KeyRateReport(
        rate=0.0,
        h_lower=math.nan,
        h_upper=math.nan,
        h_star=math.nan,
        s11_at_min=0.0,
        e11_at_min=math.nan,
        signal_rate=obs.signal_rate,
        signal_error_rate=obs.signal_error_rate,
        chernoff_invocations=invocations,
        reason=reason,
    )


def _golden_refine(curve: _RateCurve, a: float, b: float, rel_tol: float) -> tuple[float, float]:
    """Golden-section minimum of the rate on [a, b]; tracks the best point seen."""
    best_h, best_r = a, float(curve.rate(a))
    rb = float(curve.rate(b))
    if rb < best_r:
        best_h, best_r = b, rb
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc = float(curve.rate(c))
    fd = float(curve.rate(d))
    scale = max(abs(a), abs(b), 1e-300)
    for _ in range(300):
        for h, r in ((c, fc), (d, fd)):
            if r < best_r:
                best_h, best_r = h, r
        if b - a <= rel_tol * scale:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = float(curve.rate(c))
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = float(curve.rate(d))
    return best_h, best_r


def secure_key_rate(
    inputs: AnalysisInputs,
    h_grid: int = 1001,
    refine_rel_tol: float = 1e-10,
) -> KeyRateReport:
    """Minimize the candidate rate over the admissible nuisance interval.

    Structural infeasibilities come back as zero-rate reports with a reason
    code rather than exceptions; a merely unprofitable configuration reports
    ``reason="ok"`` with the rate clamped at zero.
    """
    if h_grid < 1:
        raise ValueError(f"h_grid must be at least 1, got {h_grid}")
    obs = inputs.observables
    decoy_report: DecoyConditionReport = check_decoy_conditions(inputs.bounds)
    if not decoy_report.passed:
        return _zero_report("decoy-conditions-failed: " + decoy_report.summary(), obs)

    counter = InvocationCounter()
    try:
        sigma = sigma_factors(inputs.bounds)
        curve = _curve(inputs, sigma, counter)
    except AnalysisInfeasible as exc:
        return _zero_report(f"infeasible: {exc}", obs, counter.count)

    h_lo, h_hi = h_range(inputs, sigma, counter)
    if h_lo > h_hi:
        return _zero_report("h-range-empty", obs, counter.count)

    if h_hi == h_lo or h_grid == 1:
        hs = np.array([h_lo])
    else:
        hs = np.linspace(h_lo, h_hi, h_grid)
    rates = np.atleast_1d(np.asarray(curve.rate(hs), dtype=float))
    idx = int(rates.argmin())
    best_h, best_rate = float(hs[idx]), float(rates[idx])

    if hs.size > 1:
        lo = float(hs[max(idx - 1, 0)])
        hi = float(hs[min(idx + 1, hs.size - 1)])
        refined_h, refined_rate = _golden_refine(curve, lo, hi, refine_rel_tol)
        if refined_rate < best_rate:
            best_h, best_rate = refined_h, refined_rate

    s11_min = float(curve.s11(best_h))
    e11_min = e11_upper(best_h, curve.txx_upper, s11_min, inputs.bounds)
    return KeyRateReport(
        rate=max(0.0, best_rate),
        h_lower=h_lo,
        h_upper=h_hi,
        h_star=best_h,
        s11_at_min=s11_min,
        e11_at_min=math.nan if e11_min is None else e11_min,
        signal_rate=obs.signal_rate,
        signal_error_rate=obs.signal_error_rate,
        chernoff_invocations=counter.count,
        reason="ok",
        trace_h=tuple(float(v) for v in hs),
        trace_rate=tuple(float(v) for v in rates),
    )
