"""Weak-coherent-source model with bounded intensity errors.

Each side (Alice, Bob) runs four phase-randomized weak coherent sources: an
unstable vacuum source ``v`` whose per-pulse intensity can drift anywhere in
``[0, vacuum_cap]``, two decoy sources ``x`` and ``y``, and a signal source
``z``.  The decoy/signal intensities fluctuate multiplicatively: the i-th
pulse of source ``l`` has intensity ``mu_l * (1 + delta_i)`` with
``|delta_i| <= fluctuation``.

Per-pulse photon-number coefficients are Poissonian in the (unknowable)
per-pulse intensity, so worst-case coefficient bounds are interval extrema of
``exp(-mu) * mu**k / k!`` over the admissible intensity range.  Those bounds
are everything the downstream analysis is allowed to know about the sources.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

SOURCES = ("v", "x", "y", "z")

_PROB_TOL = 1e-12


def poisson_coeff(mu: float, k: int) -> float:
    """Probability that a phase-randomized WCS pulse of intensity ``mu`` carries ``k`` photons.

    Evaluated in log space so large ``k`` neither overflows the factorial nor
    underflows prematurely.
    """
    if k != int(k) or k < 0:
        raise ValueError(f"photon number must be a nonnegative integer, got {k!r}")
    if mu < 0:
        raise ValueError(f"intensity must be nonnegative, got {mu!r}")
    k = int(k)
    if mu == 0.0:
        return 1.0 if k == 0 else 0.0
    if k == 0:
        return math.exp(-mu)
    return math.exp(k * math.log(mu) - mu - math.lgamma(k + 1))


def coeff_interval(mu_lo: float, mu_hi: float, k: int) -> tuple[float, float]:
    """Exact min/max of the k-photon Poisson coefficient over ``mu in [mu_lo, mu_hi]``.

    The coefficient is unimodal in ``mu`` with its single maximum at ``mu = k``,
    so the extrema sit at the interval endpoints or at that interior point.
    """
    if mu_lo < 0 or mu_hi < mu_lo:
        raise ValueError(f"invalid intensity interval [{mu_lo}, {mu_hi}]")
    candidates = [poisson_coeff(mu_lo, k), poisson_coeff(mu_hi, k)]
    if mu_lo < k < mu_hi:
        candidates.append(poisson_coeff(float(k), k))
    return min(candidates), max(candidates)


@dataclass(frozen=True)
class SideSources:
    """One side's four-source configuration.

    ``vacuum_cap`` bounds the unstable vacuum source's intensity from above;
    ``fluctuation`` is the relative amplitude of the multiplicative intensity
    error on the x/y/z sources.
    """

    mu_x: float
    mu_y: float
    mu_z: float
    p_v: float
    p_x: float
    p_y: float
    p_z: float
    vacuum_cap: float = 0.0
    fluctuation: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 < self.mu_x < self.mu_y):
            raise ValueError(
                f"decoy intensities must satisfy 0 < mu_x < mu_y, got mu_x={self.mu_x}, mu_y={self.mu_y}"
            )
        if self.mu_z <= 0.0:
            raise ValueError(f"signal intensity mu_z must be positive, got {self.mu_z}")
        if self.vacuum_cap < 0.0:
            raise ValueError(f"vacuum_cap must be nonnegative, got {self.vacuum_cap}")
        if not (0.0 <= self.fluctuation < 1.0):
            raise ValueError(f"fluctuation must lie in [0, 1), got {self.fluctuation}")
        probs = {"p_v": self.p_v, "p_x": self.p_x, "p_y": self.p_y, "p_z": self.p_z}
        for name, p in probs.items():
            if p <= 0.0:
                raise ValueError(f"{name} must be positive, got {p}")
        total = self.p_v + self.p_x + self.p_y + self.p_z
        if abs(total - 1.0) > _PROB_TOL:
            raise ValueError(f"source probabilities must sum to 1, got {total!r}")

    def probability(self, source: str) -> float:
        return {"v": self.p_v, "x": self.p_x, "y": self.p_y, "z": self.p_z}[source]

    def intensity_interval(self, source: str) -> tuple[float, float]:
        """Admissible per-pulse intensity range of one source."""
        if source == "v":
            return 0.0, self.vacuum_cap
        mu = {"x": self.mu_x, "y": self.mu_y, "z": self.mu_z}[source]
        return mu * (1.0 - self.fluctuation), mu * (1.0 + self.fluctuation)


@dataclass(frozen=True)
class SourceEnsemble:
    """Source configurations of both sides."""

    alice: SideSources
    bob: SideSources

    @classmethod
    def symmetric(cls, side: SideSources) -> "SourceEnsemble":
        return cls(alice=side, bob=side)


@dataclass(frozen=True)
class SideCoeffBounds:
    """Worst-case photon-number coefficient bounds for one side.

    ``lower[l][k]`` / ``upper[l][k]`` bound the k-photon coefficient of source
    ``l`` over that source's intensity interval, for k = 0 .. k_max.
    """

    intervals: dict[str, tuple[float, float]]
    lower: dict[str, tuple[float, ...]]
    upper: dict[str, tuple[float, ...]]

    def lo(self, source: str, k: int) -> float:
        return self.lower[source][k]

    def hi(self, source: str, k: int) -> float:
        return self.upper[source][k]


@dataclass(frozen=True)
class PhotonCoeffBounds:
    """Coefficient bounds for both sides (Alice's are the a's, Bob's the b's)."""

    alice: SideCoeffBounds
    bob: SideCoeffBounds
    k_max: int

    @classmethod
    def from_intervals(
        cls,
        alice_intervals: dict[str, tuple[float, float]],
        bob_intervals: dict[str, tuple[float, float]],
        k_max: int = 20,
    ) -> "PhotonCoeffBounds":
        """Build bounds directly from per-source intensity intervals.

        Lets callers evaluate the decoy conditions for configurations that a
        validated :class:`SourceEnsemble` would refuse (e.g. swapped decoys).
        """
        if k_max < 2:
            raise ValueError(f"k_max must be at least 2, got {k_max}")
        return cls(
            alice=_side_bounds(alice_intervals, k_max),
            bob=_side_bounds(bob_intervals, k_max),
            k_max=k_max,
        )


def _side_bounds(intervals: dict[str, tuple[float, float]], k_max: int) -> SideCoeffBounds:
    lower: dict[str, tuple[float, ...]] = {}
    upper: dict[str, tuple[float, ...]] = {}
    for source, (mu_lo, mu_hi) in intervals.items():
        pairs = [coeff_interval(mu_lo, mu_hi, k) for k in range(k_max + 1)]
        lower[source] = tuple(p[0] for p in pairs)
        upper[source] = tuple(p[1] for p in pairs)
    return SideCoeffBounds(intervals=dict(intervals), lower=lower, upper=upper)


def coeff_bounds(ensemble: SourceEnsemble, k_max: int = 20) -> PhotonCoeffBounds:
    """Worst-case coefficient bounds for every source of both sides."""
    return PhotonCoeffBounds.from_intervals(
        {s: ensemble.alice.intensity_interval(s) for s in SOURCES},
        {s: ensemble.bob.intensity_interval(s) for s in SOURCES},
        k_max=k_max,
    )


@dataclass(frozen=True)
class ConditionCheck:
    name: str
    side: str
    passed: bool
    first_violation_k: int | None = None
    detail: str = ""


@dataclass(frozen=True)
class DecoyConditionReport:
    """Outcome of the decoy-state precondition checks.

    A failing report means the single-photon bounds below are not valid for
    these sources; the key-rate analysis must refuse to run on it.
    """

    checks: tuple[ConditionCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> tuple[ConditionCheck, ...]:
        return tuple(c for c in self.checks if not c.passed)

    def summary(self) -> str:
        if self.passed:
            return "decoy conditions satisfied"
        return "; ".join(f"{c.side}:{c.name}: {c.detail}" for c in self.failures())


def check_decoy_conditions(bounds: PhotonCoeffBounds, k_max: int | None = None) -> DecoyConditionReport:
    """Verify the ratio conditions the single-photon estimates rest on.

    Checked per side, for k = 2 .. k_max:

    * decoy ratio chain: ``a_k^{y,L}/a_k^{x,U} >= a_2^{y,L}/a_2^{x,U} >=
      a_1^{y,L}/a_1^{x,U}`` (evaluated in product form, so zero coefficients
      cannot divide).
    * vacuum ratio: ``a_k^{l,L}/a_1^{l,U} >= a_k^{v,U}/a_1^{v,U}`` for
      l = x, y.  When ``a_1^{v,U} = 0`` the vacuum source is exactly vacuum
      and the condition holds by convention (every downstream use enters
      through factors that vanish with it).
    * the x and y intensity intervals must be disjoint (x strictly below y);
      that disjointness makes the ratio chain monotone in k for Poissonian
      sources, so checking up to a finite k_max certifies all k.
    """
    if k_max is None:
        k_max = bounds.k_max
    if k_max < 2 or k_max > bounds.k_max:
        raise ValueError(f"k_max must lie in [2, {bounds.k_max}], got {k_max}")

    checks: list[ConditionCheck] = []
    for side_name, sb in (("alice", bounds.alice), ("bob", bounds.bob)):
        x_lo, x_hi = sb.intervals["x"]
        y_lo, y_hi = sb.intervals["y"]
        disjoint = x_hi < y_lo
        checks.append(
            ConditionCheck(
                name="intensity-intervals-disjoint",
                side=side_name,
                passed=disjoint,
                detail="" if disjoint else f"x interval [{x_lo:g}, {x_hi:g}] overlaps y interval [{y_lo:g}, {y_hi:g}]",
            )
        )

        # a_2^{y,L} a_1^{x,U} >= a_1^{y,L} a_2^{x,U}
        step_ok = sb.lo("y", 2) * sb.hi("x", 1) >= sb.lo("y", 1) * sb.hi("x", 2)
        checks.append(
            ConditionCheck(
                name="decoy-ratio-step",
                side=side_name,
                passed=step_ok,
                first_violation_k=None if step_ok else 2,
                detail="" if step_ok else "two-photon y/x ratio falls below the one-photon ratio",
            )
        )

        bad_k = None
        for k in range(2, k_max + 1):
            if sb.lo("y", k) * sb.hi("x", 2) < sb.lo("y", 2) * sb.hi("x", k):
                bad_k = k
                break
        checks.append(
            ConditionCheck(
                name="decoy-ratio-growth",
                side=side_name,
                passed=bad_k is None,
                first_violation_k=bad_k,
                detail="" if bad_k is None else f"y/x coefficient ratio decreases at k={bad_k}",
            )
        )

        a1v_hi = sb.hi("v", 1)
        if a1v_hi == 0.0:
            checks.append(
                ConditionCheck(
                    name="vacuum-ratio",
                    side=side_name,
                    passed=True,
                    detail="exact vacuum source; condition holds by convention",
                )
            )
        else:
            bad = None
            for source in ("x", "y"):
                for k in range(2, k_max + 1):
                    if sb.lo(source, k) * a1v_hi < sb.hi(source, 1) * sb.hi("v", k):
                        bad = (source, k)
                        break
                if bad:
                    break
            checks.append(
                ConditionCheck(
                    name="vacuum-ratio",
                    side=side_name,
                    passed=bad is None,
                    first_violation_k=None if bad is None else bad[1],
                    detail="" if bad is None else f"source {bad[0]} violates the vacuum ratio at k={bad[1]}",
                )
            )

    return DecoyConditionReport(checks=tuple(checks))
