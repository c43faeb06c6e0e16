"""Command-line front end.

Commands
--------
rate            Evaluate the secure key rate once at the configured distance.
scan            Sweep distances; one CSV row per distance, ascending.
optimize        Search source parameters per distance; CSV of best points.
validate-model  Compare the analytic detection model against the
                photon-level simulation; nonzero exit on disagreement.

Configuration is a flat ``key = value`` text file; every key has a documented
default and unknown keys are rejected so typos cannot silently change a run.
CSV outputs carry ``#`` provenance comments (config hash, seed, version) and
are byte-stable for identical config and seed.

Exit codes: 0 success (a zero rate is a result, not an error), 1 model
validation failure, 2 configuration or validation error, 3 internal solver
failure.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from . import __version__
from .channel_sim import ChannelParams, validate_model
from .keyrate_core import AnalysisInputs, KeyRateReport, secure_key_rate
from .optimizer import OptimizationProblem, optimize
from .source_model import SideSources, SourceEnsemble, check_decoy_conditions, coeff_bounds
from .stat_bounds import SolverError


class ConfigError(ValueError):
    """Invalid configuration file or option."""


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("on", "true", "yes", "1"):
        return True
    if lowered in ("off", "false", "no", "0"):
        return False
    raise ValueError(f"expected on/off, got {text!r}")


@dataclass(frozen=True)
class RunConfig:
    """Effective configuration of one invocation (defaults follow the
    reference experimental parameter set)."""

    # channel / detector
    e0: float = 0.5
    e_d: float = 0.015
    p_d: float = 6.02e-6
    eta_d: float = 0.145
    alpha_f: float = 0.2
    f: float = 1.16
    xi: float = 1e-7
    n_pairs: float = 1e11
    distance_km: float = 10.0
    # sources (symmetric across sides)
    mu_x: float = 0.1
    mu_y: float = 0.4
    mu_z: float = 0.5
    p_v: float = 0.1
    p_x: float = 0.1
    p_y: float = 0.1
    p_z: float = 0.7
    vacuum_cap: float = 1e-6
    fluctuation: float = 0.0
    # run options
    distances: str = ""
    optimize: bool = False
    budget: int = 800
    restarts: int = 8
    seed: int = 1
    h_grid: int = 1001
    mc_trials: int = 10_000_000
    k_max: int = 20

    def channel_params(self) -> ChannelParams:
        try:
            return ChannelParams(
                e0=self.e0,
                e_d=self.e_d,
                p_d=self.p_d,
                eta_d=self.eta_d,
                alpha_f=self.alpha_f,
                f_ec=self.f,
                xi=self.xi,
                n_pairs=self.n_pairs,
                distance_km=self.distance_km,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def ensemble(self) -> SourceEnsemble:
        try:
            side = SideSources(
                mu_x=self.mu_x,
                mu_y=self.mu_y,
                mu_z=self.mu_z,
                p_v=self.p_v,
                p_x=self.p_x,
                p_y=self.p_y,
                p_z=self.p_z,
                vacuum_cap=self.vacuum_cap,
                fluctuation=self.fluctuation,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return SourceEnsemble.symmetric(side)

    def canonical_text(self) -> str:
        parts = []
        for f_ in fields(self):
            parts.append(f"{f_.name}={getattr(self, f_.name)!r}")
        return "\n".join(parts)

    def content_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()[:16]


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
_INT_KEYS = {"budget", "restarts", "seed", "h_grid", "mc_trials", "k_max"}
_BOOL_KEYS = {"optimize"}
_STR_KEYS = {"distances"}


def parse_config_file(path: str | Path) -> dict[str, object]:
    """Read a flat key = value file; unknown keys and bad values are errors."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    overrides: dict[str, object] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if key in overrides:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        try:
            if key in _BOOL_KEYS:
                overrides[key] = _parse_bool(value)
            elif key in _INT_KEYS:
                overrides[key] = int(float(value))
            elif key in _STR_KEYS:
                overrides[key] = value
            else:
                overrides[key] = float(value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from exc
    return overrides


def load_config(args: argparse.Namespace) -> RunConfig:
    overrides = parse_config_file(args.config)
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "distances", None):
        overrides["distances"] = args.distances
    if getattr(args, "optimize", None):
        overrides["optimize"] = _parse_bool(args.optimize)
    try:
        return RunConfig(**overrides)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def parse_distances(spec: str) -> list[float]:
    """Parse 'A:B:STEP' (inclusive of B when it lands on the grid) or 'a,b,c'."""
    spec = spec.strip()
    if not spec:
        raise ConfigError("no distances given; set 'distances' in the config or pass --distances")
    try:
        if ":" in spec:
            parts = spec.split(":")
            if len(parts) != 3:
                raise ValueError("range form is A:B:STEP")
            start, stop, step = (float(p) for p in parts)
            if step <= 0:
                raise ValueError("STEP must be positive")
            if stop < start:
                raise ValueError("B must not be below A")
            n = int((stop - start) / step + 1e-9)
            values = [start + i * step for i in range(n + 1)]
        else:
            values = [float(p) for p in spec.split(",") if p.strip()]
        if not values:
            raise ValueError("empty distance list")
        if any(v < 0 for v in values):
            raise ValueError("distances must be nonnegative")
    except ValueError as exc:
        raise ConfigError(f"bad distances {spec!r}: {exc}") from exc
    return values


def _validated_inputs(config: RunConfig, params: ChannelParams) -> AnalysisInputs:
    ensemble = config.ensemble()
    bounds = coeff_bounds(ensemble, k_max=config.k_max)
    report = check_decoy_conditions(bounds)
    if not report.passed:
        raise ConfigError(f"decoy conditions fail for these sources: {report.summary()}")
    return AnalysisInputs.from_simulation(ensemble, params, k_max=config.k_max)


def _fmt(value: float) -> str:
    return f"{value:.12e}"


def _provenance_lines(config: RunConfig, command: str) -> list[str]:
    return [
        f"# command={command}",
        f"# config_hash={config.content_hash()}",
        f"# seed={config.seed}",
        f"# version={__version__}",
    ]


def _write_csv(path: Path, provenance: list[str], header: list[str], rows: list[list[str]]) -> None:
    lines = provenance + [",".join(header)] + [",".join(row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _run_report(config: RunConfig, distance: float) -> KeyRateReport:
    params = config.channel_params().at_distance(distance)
    inputs = _validated_inputs(config, params)
    return secure_key_rate(inputs, h_grid=config.h_grid)


def cmd_rate(config: RunConfig, out: str | None) -> int:
    report = _run_report(config, config.distance_km)
    record = report.to_record()
    sys.stdout.write(record)
    if out:
        Path(out).write_text(record, encoding="utf-8")
    return 0


def _scan_rows(config: RunConfig, distances: list[float]) -> list[list[str]]:
    rows = []
    mode = "optimized" if config.optimize else "fixed"
    for distance in distances:
        if config.optimize:
            problem = OptimizationProblem(
                channel=config.channel_params().at_distance(distance),
                vacuum_cap=config.vacuum_cap,
                fluctuation=config.fluctuation,
                k_max=config.k_max,
            )
            result = optimize(problem, seed=config.seed, budget=config.budget, restarts=config.restarts)
            mu_x, mu_y, mu_z, p_x, p_y, p_z = result.point
            best = RunConfig(
                **{
                    **{f_.name: getattr(config, f_.name) for f_ in fields(RunConfig)},
                    "mu_x": mu_x,
                    "mu_y": mu_y,
                    "mu_z": mu_z,
                    "p_x": p_x,
                    "p_y": p_y,
                    "p_z": p_z,
                    "p_v": 1.0 - p_x - p_y - p_z,
                }
            )
            report = _run_report(best, distance)
        else:
            report = _run_report(config, distance)
        rows.append(
            [
                f"{distance:g}",
                mode,
                _fmt(report.rate),
                _fmt(report.h_star),
                _fmt(report.s11_at_min),
                _fmt(report.e11_at_min),
            ]
        )
    return rows


def cmd_scan(config: RunConfig, out: str | None) -> int:
    distances = sorted(parse_distances(config.distances))
    rows = _scan_rows(config, distances)
    header = ["distance_km", "mode", "rate", "h_star", "s11_lower", "e11_upper"]
    lines = _provenance_lines(config, "scan") + [",".join(header)] + [",".join(r) for r in rows]
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if out:
        Path(out).write_text(text, encoding="utf-8")
    return 0


def cmd_optimize(config: RunConfig, out: str | None, eval_log: str | None) -> int:
    distances = sorted(parse_distances(config.distances or f"{config.distance_km:g}"))
    rows = []
    log_rows = []
    for distance in distances:
        problem = OptimizationProblem(
            channel=config.channel_params().at_distance(distance),
            vacuum_cap=config.vacuum_cap,
            fluctuation=config.fluctuation,
            k_max=config.k_max,
        )
        result = optimize(problem, seed=config.seed, budget=config.budget, restarts=config.restarts)
        rows.append(
            [f"{distance:g}", _fmt(result.rate)] + [_fmt(v) for v in result.point]
        )
        for point, rate in result.evaluations:
            log_rows.append([f"{distance:g}"] + [_fmt(v) for v in point] + [_fmt(rate)])
    header = ["distance_km", "rate", "mu_x", "mu_y", "mu_z", "p_x", "p_y", "p_z"]
    lines = _provenance_lines(config, "optimize") + [",".join(header)] + [",".join(r) for r in rows]
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if out:
        Path(out).write_text(text, encoding="utf-8")
    if eval_log:
        _write_csv(
            Path(eval_log),
            _provenance_lines(config, "optimize-eval-log"),
            ["distance_km", "mu_x", "mu_y", "mu_z", "p_x", "p_y", "p_z", "rate"],
            log_rows,
        )
    return 0


def cmd_validate_model(config: RunConfig, out: str | None) -> int:
    if config.mc_trials < 1:
        raise ConfigError(f"mc_trials must be at least 1, got {config.mc_trials}")
    params = config.channel_params()
    report = validate_model(params, trials=config.mc_trials, seed=config.seed)
    header = ["mu", "distance_km", "basis", "analytic_gain", "mc_gain", "z_gain", "analytic_error_gain", "mc_error_gain", "z_error", "ok"]
    rows = [
        [
            f"{r.mu:g}",
            f"{r.distance_km:g}",
            r.basis,
            _fmt(r.analytic_gain),
            _fmt(r.mc_gain),
            f"{r.z_gain:.3f}",
            _fmt(r.analytic_error_gain),
            _fmt(r.mc_error_gain),
            f"{r.z_error:.3f}",
            "1" if r.ok else "0",
        ]
        for r in report.rows
    ]
    lines = _provenance_lines(config, "validate-model") + [",".join(header)] + [",".join(r) for r in rows]
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if out:
        Path(out).write_text(text, encoding="utf-8")
    if report.passed:
        print(f"model validation PASSED ({len(report.rows)} checks, {config.mc_trials} trials each)")
        return 0
    bad = sum(1 for r in report.rows if not r.ok)
    print(f"model validation FAILED ({bad} of {len(report.rows)} checks outside 3 sigma)")
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mdiqkd", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("rate", "scan", "optimize", "validate-model"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the key = value configuration file")
        p.add_argument("--out", default=None, help="write the command's output to this path")
        p.add_argument("--seed", type=int, default=None, help="override the configured seed")
        if name in ("scan", "optimize"):
            p.add_argument("--distances", default=None, help="A:B:STEP or comma-separated list of km")
        if name == "scan":
            p.add_argument("--optimize", default=None, help="on/off: optimize source parameters per distance")
        if name == "optimize":
            p.add_argument("--eval-log", default=None, help="write every probed (point, rate) to this CSV")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args)
        if args.command == "rate":
            return cmd_rate(config, args.out)
        if args.command == "scan":
            return cmd_scan(config, args.out)
        if args.command == "optimize":
            return cmd_optimize(config, args.out, args.eval_log)
        if args.command == "validate-model":
            return cmd_validate_model(config, args.out)
        raise AssertionError(f"unhandled command {args.command}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
