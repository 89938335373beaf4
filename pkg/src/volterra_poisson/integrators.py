"""One-step maps for the Volterra lattice and a fixed-step trajectory driver.

The partitioned methods act on the odd/even split ``(u, v)``::

    du_i/dt = u_i (v_i - v_{i-1}) = f_i(u, v)
    dv_i/dt = v_i (u_{i+1} - u_i) = g_i(u, v)

Each right-hand side is linear in its own variable with a diagonal
coefficient, so every "implicit" equation below reduces to a componentwise
division and no iterative solver is needed:

* symplectic Euler (v implicit, u explicit)::

      v'_i = v_i + h v'_i (u_{i+1} - u_i)
      u'_i = u_i + h u_i (v'_i - v'_{i-1})

* its adjoint (u implicit, v explicit), the inverse of the step with ``-h``;
* second order Lobatto IIIA-B (Stormer-Verlet), which equals
  ``adjoint(h/2) o symplectic_euler(h/2)``.

Implicit midpoint and classical RK4 act on the unsplit state and serve as
non-partitioned baselines.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .exceptions import (
    IntegrationError,
    NonConvergenceError,
    PositivityLossWarning,
    SingularStepError,
)
from .lattice import (
    InvariantRecord,
    LatticeState,
    SplitState,
    Invariant,
    volterra_rhs,
)

__all__ = [
    "StepMethod",
    "Trajectory",
    "LobattoStages",
    "DELTA_SING",
    "symplectic_euler_step",
    "adjoint_symplectic_euler_step",
    "lobatto3ab2_step",
    "lobatto3ab2_stages",
    "lobatto3ab2_residuals",
    "implicit_midpoint_step",
    "rk4_step",
    "step",
    "integrate",
    "n_steps",
]

DELTA_SING = 1e-12

MIDPOINT_TOL = 1e-14
MIDPOINT_MAX_ITER = 100


class StepMethod(enum.Enum):
    SYMPLECTIC_EULER = "se"
    ADJOINT_SYMPLECTIC_EULER = "adjoint-se"
    LOBATTO3AB2 = "lobatto2"
    IMPLICIT_MIDPOINT = "midpoint"
    RK4 = "rk4"

    @property
    def partitioned(self) -> bool:
        return self in _SPLIT_RAW


def _divide(num, den, what):
    if np.any(np.abs(den) <= DELTA_SING):
        i = int(np.argmin(np.abs(den)))
        raise SingularStepError(f"{what}: denominator {den[i]!r} at component {i} is singular")
    return num / den


def _warn_if_nonpositive(*arrays):
    if any(np.any(a <= 0) for a in arrays):
        warnings.warn("step produced a non-positive component", PositivityLossWarning, stacklevel=3)


# Raw kernels on plain arrays; the public wrappers add types and warnings.

def _se(u, v, h):
    du = np.roll(u, -1) - u
    v_new = _divide(v, 1.0 - h * du, "symplectic Euler v-solve")
    u_new = u * (1.0 + h * (v_new - np.roll(v_new, 1)))
    return u_new, v_new


def _adjoint_se(u, v, h):
    dv = v - np.roll(v, 1)
    u_new = _divide(u, 1.0 - h * dv, "adjoint symplectic Euler u-solve")
    v_new = v * (1.0 + h * (np.roll(u_new, -1) - u_new))
    return u_new, v_new


class LobattoStages(NamedTuple):
    k1: np.ndarray
    k2: np.ndarray
    l1: np.ndarray
    l2: np.ndarray


def _lobatto_stages(u, v, h):
    hh = 0.5 * h
    du = np.roll(u, -1) - u
    l1 = _divide(v * du, 1.0 - hh * du, "Lobatto l1-solve")
    v_half = v + hh * l1
    dv_half = v_half - np.roll(v_half, 1)
    k1 = u * dv_half
    k2 = _divide((u + hh * k1) * dv_half, 1.0 - hh * dv_half, "Lobatto k2-solve")
    u_new = u + hh * (k1 + k2)
    l2 = v_half * (np.roll(u_new, -1) - u_new)
    return LobattoStages(k1, k2, l1, l2)


def _lobatto(u, v, h):
    k1, k2, l1, l2 = _lobatto_stages(u, v, h)
    return u + 0.5 * h * (k1 + k2), v + 0.5 * h * (l1 + l2)


_SPLIT_RAW = {
    StepMethod.SYMPLECTIC_EULER: _se,
    StepMethod.ADJOINT_SYMPLECTIC_EULER: _adjoint_se,
    StepMethod.LOBATTO3AB2: _lobatto,
}


def _split_step(kernel, s, h):
    u, v = kernel(s.u, s.v, h)
    _warn_if_nonpositive(u, v)
    return SplitState(u, v, s.t + h)


def symplectic_euler_step(s: SplitState, h: float) -> SplitState:
    """One symplectic Euler step, solved in closed form (v first, then u).

    Raises :class:`SingularStepError` when some ``|1 - h (u_{i+1} - u_i)|``
    is at most ``DELTA_SING``.
    """
    return _split_step(_se, s, h)


def adjoint_symplectic_euler_step(s: SplitState, h: float) -> SplitState:
    """Adjoint of :func:`symplectic_euler_step`, i.e. the inverse of its ``-h`` step.

    ``u'_i = u_i / (1 - h (v_i - v_{i-1}))``, then
    ``v'_i = v_i (1 + h (u'_{i+1} - u'_i))``.
    """
    return _split_step(_adjoint_se, s, h)


def lobatto3ab2_stages(s: SplitState, h: float) -> LobattoStages:
    """Stage vectors of the two-stage Lobatto IIIA-B pair.

    With ``V = v + h/2 l1`` (the IIIB stage, shared by both stages) and
    ``U2 = u + h/2 (k1 + k2)`` (the IIIA end stage) the stage equations are::

        l1_i = V_i (u_{i+1} - u_i)                 -> diagonal in l1
        k1_i = u_i (V_i - V_{i-1})                 -> explicit
        k2_i = U2_i (V_i - V_{i-1})                -> diagonal in k2
        l2_i = V_i (U2_{i+1} - U2_i)               -> explicit
    """
    return _lobatto_stages(s.u, s.v, h)


def lobatto3ab2_residuals(s: SplitState, h: float, stages: LobattoStages | None = None):
    """Relative residuals of the four stage equations, in the order (l1, k1, k2, l2)."""
    if stages is None:
        stages = lobatto3ab2_stages(s, h)
    k1, k2, l1, l2 = stages
    u, v = s.u, s.v
    hh = 0.5 * h
    V = v + hh * l1
    dV = V - np.roll(V, 1)
    U2 = u + hh * (k1 + k2)
    rhs = (
        V * (np.roll(u, -1) - u),
        u * dV,
        U2 * dV,
        V * (np.roll(U2, -1) - U2),
    )
    out = []
    for stage, r in zip((l1, k1, k2, l2), rhs):
        scale = max(np.max(np.abs(stage)), np.max(np.abs(r)))
        out.append(float(np.max(np.abs(stage - r)) / scale) if scale > 0 else 0.0)
    return tuple(out)


def lobatto3ab2_step(s: SplitState, h: float) -> SplitState:
    """One step of the second order Lobatto IIIA-B method (see :func:`lobatto3ab2_stages`).

    The stages are computed in the order l1, k1, k2, l2 and then
    ``u' = u + h/2 (k1 + k2)``, ``v' = v + h/2 (l1 + l2)``.
    """
    return _split_step(_lobatto, s, h)


def _rhs_jacobian(y):
    m = y.shape[0]
    jac = np.diag(np.roll(y, -1) - np.roll(y, 1))
    rows = np.arange(m)
    jac[rows, (rows + 1) % m] += y
    jac[rows, (rows - 1) % m] -= y
    return jac


def _f(y):
    return y * (np.roll(y, -1) - np.roll(y, 1))


def _midpoint(y, h, tol=MIDPOINT_TOL, max_iter=MIDPOINT_MAX_ITER):
    scale = max(1.0, float(np.max(np.abs(y))))
    z = y + h * _f(y)
    res_prev = np.inf
    for _ in range(max_iter):
        z_new = y + h * _f(0.5 * (y + z))
        res = float(np.max(np.abs(z_new - z)))
        z = z_new
        if res <= tol * scale:
            return z
        if res > res_prev:
            # not contracting; hand over to Newton
            break
        res_prev = res
    eye = np.eye(y.shape[0])
    for _ in range(max_iter):
        mid = 0.5 * (y + z)
        F = z - y - h * _f(mid)
        if float(np.max(np.abs(F))) <= tol * scale:
            return z
        try:
            dz = np.linalg.solve(eye - 0.5 * h * _rhs_jacobian(mid), F)
        except np.linalg.LinAlgError:
            raise SingularStepError("implicit midpoint: singular Newton matrix") from None
        z = z - dz
        if float(np.max(np.abs(dz))) <= tol * scale:
            return z
    raise NonConvergenceError(
        f"implicit midpoint did not reach residual {tol:g} in {max_iter} iterations"
    )


def implicit_midpoint_step(state: LatticeState, h: float) -> LatticeState:
    """Implicit midpoint step ``y' = y + h f((y + y')/2)``.

    Fixed-point iteration first; Newton with the analytic vector-field
    Jacobian if the iteration stalls or grows. Both stop at a max-norm
    update of ``1e-14 * max(1, |y|_inf)``, at most 100 iterations each.
    """
    z = _midpoint(state.y, h)
    _warn_if_nonpositive(z)
    return LatticeState.unchecked(z, state.t + h)


def _rk4(y, h):
    k1 = _f(y)
    k2 = _f(y + 0.5 * h * k1)
    k3 = _f(y + 0.5 * h * k2)
    k4 = _f(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_step(state: LatticeState, h: float) -> LatticeState:
    """Classical fourth order Runge-Kutta step applied to :func:`volterra_rhs`."""
    z = _rk4(state.y, h)
    _warn_if_nonpositive(z)
    return LatticeState.unchecked(z, state.t + h)


_FULL_RAW = {
    StepMethod.IMPLICIT_MIDPOINT: _midpoint,
    StepMethod.RK4: _rk4,
}


def _interleave(u, v):
    y = np.empty(2 * u.shape[0], dtype=np.result_type(u, v))
    y[0::2] = u
    y[1::2] = v
    return y


def _raw_step(method, y, h):
    """Advance a plain ``y`` array by one step of ``method``."""
    kernel = _SPLIT_RAW.get(method)
    if kernel is not None:
        u, v = kernel(y[0::2], y[1::2], h)
        return _interleave(u, v)
    return _FULL_RAW[method](y, h)


def step(method, state: LatticeState, h: float) -> LatticeState:
    """Advance a lattice state by one step of any method.

    Partitioned methods are conjugated through the odd/even split, so the
    result is always in the original ``y`` ordering.
    """
    method = StepMethod(method)
    z = _raw_step(method, state.y, h)
    _warn_if_nonpositive(z)
    return LatticeState.unchecked(z, state.t + h)


def n_steps(t_end: float, h: float) -> int:
    """``ceil(t_end / h)``, treating quotients within 1e-9 of an integer as that integer."""
    q = t_end / h
    r = round(q)
    if abs(q - r) <= 1e-9 * max(1.0, q):
        return int(r)
    return int(math.ceil(q))


@np.errstate(over="ignore", invalid="ignore")
def _record_values(y):
    y1 = np.roll(y, -1)
    y2 = np.roll(y, -2)
    h0 = 0.5 * float(np.sum(np.log(y))) if np.all(y > 0) else math.nan
    return (
        float(np.sum(y)),
        h0,
        float(np.sum(0.5 * y * y + y * y1)),
        float(np.sum(y ** 3 / 3.0 + y * y1 * (y + y1 + y2))),
    )


@dataclass(eq=False)
class Trajectory:
    """Invariant samples of a fixed-step run.

    The samples are stored column-wise (``t``, ``h1``, ``h0``, ``iq``, ``ic``
    arrays); :attr:`records` gives the row view as :class:`InvariantRecord`.
    """

    method: StepMethod
    h: float
    m: int
    t: np.ndarray
    h1: np.ndarray
    h0: np.ndarray
    iq: np.ndarray
    ic: np.ndarray
    final_state: LatticeState
    record_stride: int = 1
    positivity_lost_at: int | None = field(default=None)

    def __len__(self):
        return self.t.shape[0]

    @property
    def records(self) -> list[InvariantRecord]:
        return [
            InvariantRecord(float(t), float(a), float(b), float(c), float(d))
            for t, a, b, c, d in zip(self.t, self.h1, self.h0, self.iq, self.ic)
        ]

    def series(self, which) -> np.ndarray:
        return getattr(self, _SERIES[Invariant(which)])

    def errors(self, which) -> np.ndarray:
        """``I(t) - I(0)`` along the run."""
        s = self.series(which)
        return s - s[0]


_SERIES = {Invariant.H1: "h1", Invariant.H0: "h0", Invariant.IQ: "iq", Invariant.IC: "ic"}


def integrate(y0: LatticeState, method, h: float, t_end: float, record_stride: int = 1) -> Trajectory:
    """Run ``ceil(t_end/h)`` fixed steps from ``y0``.

    Invariants are recorded at ``t0`` and after every ``record_stride``-th
    step. A failing step re-raises its :class:`IntegrationError` with
    ``step_index`` set (1-based). A positivity loss does not stop the run:
    one :class:`PositivityLossWarning` is issued and H0 is recorded as NaN.
    """
    method = StepMethod(method)
    if not (h > 0 and math.isfinite(h)):
        raise ValueError(f"step size must be positive, got {h!r}")
    if not (t_end > 0 and math.isfinite(t_end)):
        raise ValueError(f"t_end must be positive, got {t_end!r}")
    record_stride = int(record_stride)
    if record_stride < 1:
        raise ValueError(f"record_stride must be >= 1, got {record_stride}")

    n = n_steps(t_end, h)
    n_rec = 1 + n // record_stride
    rec = np.empty((n_rec, 4))
    times = y0.t + h * record_stride * np.arange(n_rec)
    rec[0] = _record_values(y0.y)
    lost_at = None

    kernel = _SPLIT_RAW.get(method)
    full = _FULL_RAW.get(method)
    y = np.array(y0.y)
    u, v = y[0::2].copy(), y[1::2].copy()
    j = 1
    for k in range(1, n + 1):
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                if kernel is not None:
                    u, v = kernel(u, v, h)
                    finite = np.isfinite(u).all() and np.isfinite(v).all()
                else:
                    y = full(y, h)
                    finite = np.isfinite(y).all()
            if not finite:
                raise IntegrationError(f"{method.value}: state overflowed to a non-finite value")
        except IntegrationError as exc:
            exc.step_index = k
            raise
        if k % record_stride == 0 or k == n:
            if kernel is not None:
                y = _interleave(u, v)
            if k % record_stride == 0:
                rec[j] = _record_values(y)
                j += 1
                if lost_at is None and math.isnan(rec[j - 1, 1]):
                    lost_at = k
    if lost_at is None and not np.all(y > 0):
        lost_at = n
    if lost_at is not None:
        warnings.warn(
            f"{method.value}: positivity lost by step {lost_at}; H0 recorded as NaN",
            PositivityLossWarning,
            stacklevel=2,
        )

    final = LatticeState.unchecked(y, y0.t + n * h)
    return Trajectory(
        method=method,
        h=float(h),
        m=y0.m,
        t=times,
        h1=rec[:, 0].copy(),
        h0=rec[:, 1].copy(),
        iq=rec[:, 2].copy(),
        ic=rec[:, 3].copy(),
        final_state=final,
        record_stride=record_stride,
        positivity_lost_at=lost_at,
    )
