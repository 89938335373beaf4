"""Experiment runner: long-time invariant errors, drift series and the check suite.

The error statistic for an invariant ``I`` sampled at ``I^0, I^1, ..., I^N``
is

    err(I) = sqrt(sum_{i=1}^N (I^i - I^0)^2) / N

where ``N`` counts the samples after the initial one. Note the ``1/N``
outside the square root: this is not an RMS value.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .exceptions import IntegrationError
from .integrators import StepMethod, Trajectory, integrate
from .lattice import (
    Invariant,
    LatticeState,
    StructureKind,
    initial_state,
)
from . import verify as sv

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "SummaryRow",
    "DriftReport",
    "CheckResult",
    "msr_error",
    "summarize",
    "write_series_csv",
    "run_experiment",
    "table1",
    "format_table",
    "drift",
    "run_verification",
    "format_report",
    "write_rows_csv",
    "REFERENCE_TABLE1",
]

CSV_HEADER = ("t", "H1", "H0", "Iq", "Ic")

# Reference average errors, keyed by (method, m, dt), columns H1, H0, Iq, Ic.
REFERENCE_TABLE1 = {
    ("se", 20, 0.2): (2.589e-16, 7.021e-08, 6.200e-08, 2.380e-07),
    ("se", 20, 0.1): (2.740e-16, 1.240e-08, 1.072e-08, 4.100e-08),
    ("se", 20, 0.05): (1.652e-16, 2.229e-09, 1.853e-09, 7.036e-09),
    ("se", 40, 0.2): (3.016e-16, 2.608e-10, 2.158e-10, 1.746e-09),
    ("se", 40, 0.1): (1.283e-16, 4.820e-11, 4.021e-11, 3.218e-10),
    ("se", 40, 0.05): (2.309e-16, 9.300e-12, 7.863e-12, 6.163e-11),
    ("se", 80, 0.2): (2.903e-16, 7.256e-12, 7.162e-12, 5.650e-11),
    ("se", 80, 0.1): (5.237e-16, 1.314e-12, 1.296e-12, 1.017e-11),
    ("se", 80, 0.05): (6.117e-16, 2.439e-13, 2.396e-13, 1.864e-12),
    ("lobatto2", 20, 0.2): (3.042e-16, 2.698e-11, 1.879e-10, 1.597e-09),
    ("lobatto2", 20, 0.1): (2.526e-16, 5.157e-12, 3.268e-11, 2.765e-10),
    ("lobatto2", 20, 0.05): (1.609e-16, 9.373e-13, 5.793e-12, 4.896e-11),
    ("lobatto2", 40, 0.2): (1.752e-16, 7.557e-13, 6.870e-12, 6.036e-11),
    ("lobatto2", 40, 0.1): (4.824e-16, 1.401e-13, 1.202e-12, 1.053e-11),
    ("lobatto2", 40, 0.05): (2.562e-16, 2.540e-14, 2.115e-13, 1.857e-12),
    ("lobatto2", 80, 0.2): (9.837e-16, 1.409e-14, 1.396e-13, 1.229e-12),
    ("lobatto2", 80, 0.1): (2.244e-16, 2.968e-15, 2.342e-14, 2.137e-13),
    ("lobatto2", 80, 0.05): (1.547e-16, 6.175e-16, 3.830e-15, 3.745e-14),
}


class ConfigError(ValueError):
    """Invalid experiment parameters or config file contents."""


@dataclass
class ExperimentConfig:
    m: int = 20
    dt: float = 0.1
    t_end: float = 2000.0
    method: StepMethod = StepMethod.SYMPLECTIC_EULER
    record_stride: int = 1
    output_path: Path = Path("run.csv")
    seed: int = sv.DEFAULT_SEED

    def __post_init__(self):
        try:
            self.m = int(self.m)
            self.dt = float(self.dt)
            self.t_end = float(self.t_end)
            self.method = StepMethod(self.method)
            self.record_stride = int(self.record_stride)
            self.seed = int(self.seed)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        self.output_path = Path(self.output_path)
        if self.m < 4 or self.m % 2:
            raise ConfigError(f"m must be even and >= 4, got {self.m}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if not (self.t_end > 0 and math.isfinite(self.t_end)):
            raise ConfigError(f"t_end must be positive, got {self.t_end}")
        if self.dt > self.t_end:
            raise ConfigError(f"dt={self.dt} exceeds t_end={self.t_end}")
        if self.record_stride < 1:
            raise ConfigError(f"stride must be >= 1, got {self.record_stride}")

    # config-file / flag key -> field name
    KEYS = {
        "m": "m",
        "dt": "dt",
        "tend": "t_end",
        "t_end": "t_end",
        "t-end": "t_end",
        "method": "method",
        "stride": "record_stride",
        "out": "output_path",
        "seed": "seed",
    }

    @classmethod
    def parse_file(cls, path) -> dict:
        """Read ``key=value`` lines (``#`` starts a comment) into field overrides."""
        out = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                key, sep, value = line.partition("=")
                key = key.strip().lower()
                if not sep or key not in cls.KEYS:
                    raise ConfigError(f"{path}:{lineno}: cannot parse {raw.rstrip()!r}")
                out[cls.KEYS[key]] = value.strip()
        return out


@dataclass
class SummaryRow:
    method: StepMethod
    m: int
    dt: float
    err_h1: float
    err_h0: float
    err_iq: float
    err_ic: float
    failure: str | None = field(default=None, compare=False)

    def errors(self):
        return (self.err_h1, self.err_h0, self.err_iq, self.err_ic)

    def error(self, which) -> float:
        return self.errors()[list(Invariant).index(Invariant(which))]


def _values(records, which):
    if isinstance(records, Trajectory):
        return np.asarray(records.series(which), dtype=float)
    which = Invariant(which)
    return np.array([r[which] for r in records], dtype=float)


def msr_error(records, which) -> float:
    """``sqrt(sum_{i>=1} (I^i - I^0)^2) / N`` over a trajectory or record list."""
    vals = _values(records, which)
    if vals.shape[0] < 2:
        raise ValueError("need the initial record and at least one more")
    dev = vals[1:] - vals[0]
    return float(math.sqrt(float(np.dot(dev, dev))) / dev.shape[0])


def summarize(traj: Trajectory) -> SummaryRow:
    return SummaryRow(traj.method, traj.m, traj.h, *(msr_error(traj, w) for w in Invariant))


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_series_csv(path, t, columns: Sequence[np.ndarray]):
    """Write ``t,H1,H0,Iq,Ic`` rows with 17 significant digits."""
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for row in zip(t, *columns):
            w.writerow([_fmt(float(x)) for x in row])


def run_experiment(config: ExperimentConfig, write: bool = True) -> SummaryRow:
    """Integrate from the benchmark initial state and summarise the invariant errors.

    Writes the invariant series to ``config.output_path`` unless
    ``write=False``.
    """
    traj = integrate(initial_state(config.m), config.method, config.dt, config.t_end,
                     config.record_stride)
    if write:
        write_series_csv(config.output_path, traj.t, (traj.h1, traj.h0, traj.iq, traj.ic))
    return summarize(traj)


def _cell(args):
    method, m, dt, t_end = args
    try:
        return run_experiment(ExperimentConfig(m=m, dt=dt, t_end=t_end, method=method), write=False)
    except IntegrationError as exc:
        nan = math.nan
        return SummaryRow(StepMethod(method), m, dt, nan, nan, nan, nan, failure=str(exc))


def table1(methods: Iterable = (StepMethod.SYMPLECTIC_EULER, StepMethod.LOBATTO3AB2),
           m_list: Iterable[int] = (20, 40, 80),
           dt_list: Iterable[float] = (0.2, 0.1, 0.05),
           t_end: float = 2000.0,
           out=None,
           workers: int = 1) -> list[SummaryRow]:
    """One summary row per (method, m, dt), method-major then m then dt.

    A cell whose integration fails is kept as a row of NaNs with its
    ``failure`` message. With ``out`` the aligned table goes to
    ``out.with_suffix('.txt')`` and the machine-readable twin to
    ``out.with_suffix('.csv')``.
    """
    cells = [(StepMethod(me), int(m), float(dt), float(t_end))
             for me, m, dt in itertools.product(methods, m_list, dt_list)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_cell, cells))
    else:
        rows = [_cell(c) for c in cells]
    if out is not None:
        out = Path(out)
        out.with_suffix(".txt").write_text(format_table(rows), encoding="utf-8")
        write_rows_csv(out.with_suffix(".csv"), rows)
    return rows


def _sci(x: float) -> str:
    return "FAILED" if math.isnan(x) else f"{x:.3e}"


def format_table(rows: Sequence[SummaryRow]) -> str:
    head = f"{'method':<10} {'m':>4} {'dt':>6} " + " ".join(f"{c:>10}" for c in CSV_HEADER[1:])
    lines = [head, "-" * len(head)]
    for r in rows:
        lines.append(
            f"{r.method.value:<10} {r.m:>4} {r.dt:>6g} " + " ".join(f"{_sci(e):>10}" for e in r.errors())
        )
        if r.failure:
            lines.append(f"    ! {r.failure}")
    return "\n".join(lines) + "\n"


def write_rows_csv(path, rows: Sequence[SummaryRow]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "m", "dt", "err_H1", "err_H0", "err_Iq", "err_Ic", "failure"])
        for r in rows:
            w.writerow([r.method.value, r.m, _fmt(r.dt), *(_fmt(e) for e in r.errors()), r.failure or ""])


@dataclass
class DriftReport:
    """Absolute invariant drift of a geometric method and a baseline on the same inputs."""

    t: dict
    drift: dict
    first_half_max: dict
    second_half_max: dict

    def ratio(self, method, which) -> float:
        a = self.first_half_max[StepMethod(method)][Invariant(which)]
        b = self.second_half_max[StepMethod(method)][Invariant(which)]
        if b == 0:
            return 0.0
        return b / a if a > 0 else math.inf


def _halves(traj: Trajectory, t_mid: float):
    first = traj.t <= t_mid
    fmax, smax, series = {}, {}, {}
    for w in Invariant:
        d = np.abs(traj.errors(w))
        series[w] = d
        fmax[w] = float(np.max(d[first]))
        smax[w] = float(np.max(d[~first])) if np.any(~first) else 0.0
    return series, fmax, smax


GNUPLOT_TEMPLATE = """\
set terminal pngcairo size 900,600
set output '{png}'
set logscale y
set format y '%.0e'
set xlabel 't'
set ylabel '|I(t) - I(0)|'
set key outside
set datafile separator ','
plot {plots}
"""


def drift(config: ExperimentConfig, baseline_method=StepMethod.RK4, state: LatticeState | None = None,
          write: bool = True) -> DriftReport:
    """Compare ``|I(t) - I(0)|`` of ``config.method`` against ``baseline_method``.

    With ``write`` the two series go to ``<out>_<method>.csv``, a gnuplot
    script to ``<out>.gp`` and the half-run maxima to ``<out>_summary.txt``.
    ``state`` defaults to the benchmark initial condition.
    """
    if state is None:
        state = initial_state(config.m)
    methods = [config.method, StepMethod(baseline_method)]
    t_mid = state.t + 0.5 * config.t_end
    report = DriftReport({}, {}, {}, {})
    for me in methods:
        traj = integrate(state, me, config.dt, config.t_end, config.record_stride)
        series, fmax, smax = _halves(traj, t_mid)
        report.t[me] = traj.t
        report.drift[me] = series
        report.first_half_max[me] = fmax
        report.second_half_max[me] = smax
    if write:
        _write_drift(config.output_path, methods, report)
    return report


def _write_drift(out, methods, report: DriftReport):
    out = Path(out)
    stem = out.with_suffix("")
    plots = []
    for me in methods:
        path = Path(f"{stem}_{me.value}.csv")
        write_series_csv(path, report.t[me], [report.drift[me][w] for w in Invariant])
        for col, w in enumerate(Invariant, start=2):
            if w is Invariant.H1:
                continue
            plots.append(f"'{path.name}' every ::1 using 1:{col} with lines title '{me.value} {w.value}'")
    Path(f"{stem}.gp").write_text(
        GNUPLOT_TEMPLATE.format(png=f"{stem.name}.png", plots=", \\\n     ".join(plots)), encoding="utf-8"
    )
    lines = [f"{'method':<10} {'invariant':<9} {'max 1st half':>12} {'max 2nd half':>12} {'ratio':>8}"]
    for me in methods:
        for w in Invariant:
            lines.append(
                f"{me.value:<10} {w.value:<9} {report.first_half_max[me][w]:>12.3e} "
                f"{report.second_half_max[me][w]:>12.3e} {report.ratio(me, w):>8.3f}"
            )
    Path(f"{stem}_summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass
class CheckResult:
    name: str
    value: float
    threshold: float
    passed: bool
    relation: str = "<="

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag}  {self.name:<60} {self.value:.3e} {self.relation} {self.threshold:.3e}"


# Frozen thresholds of the check suite.
POISSON_FLOOR = 1e-6
NON_POISSON_GAP = 100.0
JACOBI_FLOOR = {StructureKind.QUADRATIC_J0: 1e-8, StructureKind.CUBIC_J1: 1e-6, StructureKind.SUM_J0_J1: 1e-6}
CASIMIR_BOUND = {StepMethod.SYMPLECTIC_EULER: 1e-7, StepMethod.LOBATTO3AB2: 1e-10}
INVOLUTION_REL = 1e-12


def _leq(name, value, threshold):
    return CheckResult(name, value, threshold, bool(value <= threshold))


def run_verification(seed: int = sv.DEFAULT_SEED, m_list: Sequence[int] = (4, 6, 20),
                     n_states: int = 20, h_list: Sequence[float] = (0.2, 0.1, 0.05),
                     casimir_steps: int = 20000) -> list[CheckResult]:
    """Run the full structure check suite and return one result per check."""
    rng = np.random.default_rng(seed)
    results: list[CheckResult] = []
    preserving = (StepMethod.SYMPLECTIC_EULER, StepMethod.ADJOINT_SYMPLECTIC_EULER, StepMethod.LOBATTO3AB2)
    contrast = (StepMethod.RK4, StepMethod.IMPLICIT_MIDPOINT)

    for m in m_list:
        states = [sv.random_state(m, rng) for _ in range(n_states)]
        results.append(_leq(f"calibration: identity map (h=0) m={m}",
                            sv.poisson_map_residual(StepMethod.RK4, states[0], 0.0).residual, POISSON_FLOOR))
        results.append(_leq(f"calibration: reference flow (RK4, 20 substeps) m={m} h=0.1",
                            sv.reference_flow_residual(states[0], 0.1), POISSON_FLOOR))
        worst = {}
        for me in preserving + contrast:
            for h in h_list:
                worst[me, h] = max(sv.poisson_map_residual(me, s, h).residual for s in states)
        for me in preserving:
            for h in h_list:
                results.append(_leq(f"poisson-map {me.value} m={m} h={h:g} (max residual)", worst[me, h],
                                    POISSON_FLOOR))
        se_ref = {id(s): sv.poisson_map_residual(StepMethod.SYMPLECTIC_EULER, s, 0.1).residual for s in states}
        for me in contrast:
            gap = min(sv.poisson_map_residual(me, s, 0.1).residual / max(se_ref[id(s)], 1e-300) for s in states)
            results.append(CheckResult(f"non-preserving {me.value} m={m} h=0.1 (min residual / SE residual)",
                                       gap, NON_POISSON_GAP, bool(gap >= NON_POISSON_GAP), ">="))

        s = states[0]
        for kind in StructureKind:
            results.append(_leq(f"jacobi {kind.value} m={m}", sv.jacobi_identity_residual(kind, s, rng_seed=seed),
                                JACOBI_FLOOR[kind]))
        for r in sv.involution_report(s):
            rel = abs(r.value) / r.scale if r.scale > 0 else 0.0
            results.append(_leq(f"involution {{{r.pair[0].value},{r.pair[1].value}}}_{r.bracket_kind.value} m={m}"
                                " (relative)", rel, INVOLUTION_REL))
        worst_skew = 0.0
        for kind in StructureKind:
            for f, g in itertools.product(list(Invariant), repeat=2):
                worst_skew = max(worst_skew, abs(sv.bracket(f, g, kind, s).value + sv.bracket(g, f, kind, s).value))
        results.append(_leq(f"bracket antisymmetry m={m}", worst_skew, 0.0))

    y0 = initial_state(20)
    for me, bound in CASIMIR_BOUND.items():
        traj = integrate(y0, me, 0.1, casimir_steps * 0.1)
        d = np.abs(traj.h0 - traj.h0[0])
        half = d.shape[0] // 2
        results.append(_leq(f"casimir drift {me.value} m=20 h=0.1 n={casimir_steps}", float(np.max(d)), bound))
        results.append(_leq(f"casimir non-growth {me.value} (max 2nd half / max 1st half)",
                            float(np.max(d[half:]) / np.max(d[:half])), 2.0))
    return results


def format_report(results: Sequence[CheckResult], seed: int, m_list) -> str:
    buf = io.StringIO()
    buf.write(f"structure verification, seed={seed}, m={','.join(str(m) for m in m_list)}\n")
    for r in results:
        buf.write(r.line() + "\n")
    n_fail = sum(not r.passed for r in results)
    buf.write(f"{len(results) - n_fail}/{len(results)} checks passed\n")
    return buf.getvalue()
