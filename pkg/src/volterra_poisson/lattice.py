"""Periodic Volterra lattice: state, vector field, brackets and invariants.

The lattice is

    dy_i/dt = y_i (y_{i+1} - y_{i-1}),    i = 1..m,   y_{m+i} = y_i,

for even ``m`` and positive ``y``.  Formulas in docstrings use the usual
1-based cyclic indices; storage is a 0-based numpy array and every neighbour
access goes through :func:`numpy.roll`.

It is bi-Hamiltonian, ``f = J0(y) grad H1 = J1(y) grad H0``, with

    H1 = sum y_i,                      H0 = 1/2 sum log y_i,
    {y_i, y_{i+1}}_0 = y_i y_{i+1},
    {y_i, y_{i+1}}_1 = y_i y_{i+1} (y_i + y_{i+1}),
    {y_i, y_{i+2}}_1 = y_i y_{i+1} y_{i+2},

and carries the further first integrals

    Iq = sum 1/2 y_i^2 + y_i y_{i+1},
    Ic = sum 1/3 y_i^3 + y_i y_{i+1} (y_i + y_{i+1} + y_{i+2}).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError

__all__ = [
    "Invariant",
    "StructureKind",
    "LatticeState",
    "SplitState",
    "StructureMatrix",
    "InvariantRecord",
    "TodaState",
    "initial_state",
    "initial_grid",
    "volterra_rhs",
    "invariants",
    "gradient",
    "structure_matrix",
    "apply_structure",
    "split",
    "merge",
    "split_rhs",
    "split_invariants",
    "toda_map",
    "toda_rhs",
    "rotate",
]


class Invariant(str, enum.Enum):
    H1 = "H1"
    H0 = "H0"
    IQ = "Iq"
    IC = "Ic"


class StructureKind(enum.Enum):
    QUADRATIC_J0 = "J0"
    CUBIC_J1 = "J1"
    SUM_J0_J1 = "J0+J1"


def _as_lattice_vector(y, name="y"):
    arr = np.array(y, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    m = arr.shape[0]
    if m < 4 or m % 2:
        raise ValueError(f"lattice dimension must be even and >= 4, got {m}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True, eq=False)
class LatticeState:
    """State ``y`` of the periodic lattice at time ``t``.

    The constructor copies ``y``, freezes the copy and rejects odd or too
    small dimensions and non-positive entries. Integrators that may leave the
    positive cone build their outputs with :meth:`unchecked` instead.
    """

    y: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        arr = _as_lattice_vector(self.y)
        if np.any(arr <= 0):
            raise DomainError("lattice states must be strictly positive")
        arr.setflags(write=False)
        object.__setattr__(self, "y", arr)
        object.__setattr__(self, "t", float(self.t))

    @classmethod
    def unchecked(cls, y, t=0.0):
        """Build a state without the positivity check (shape is still checked)."""
        arr = _as_lattice_vector(y)
        arr.setflags(write=False)
        obj = object.__new__(cls)
        object.__setattr__(obj, "y", arr)
        object.__setattr__(obj, "t", float(t))
        return obj

    @property
    def m(self) -> int:
        return self.y.shape[0]

    @property
    def positive(self) -> bool:
        return bool(np.all(self.y > 0))

    def __repr__(self):
        return f"LatticeState(m={self.m}, t={self.t!r}, y={np.array2string(self.y, precision=6)})"


@dataclass(frozen=True, eq=False)
class SplitState:
    """Odd/even partition ``u_i = y_{2i-1}``, ``v_i = y_{2i}`` of a lattice state."""

    u: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        u = np.array(self.u, dtype=float)
        v = np.array(self.v, dtype=float)
        if u.ndim != 1 or u.shape != v.shape:
            raise ValueError(f"u and v must be 1-D of equal length, got {u.shape} and {v.shape}")
        if u.shape[0] < 2:
            raise ValueError("split halves need at least two entries (m >= 4)")
        u.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "t", float(self.t))

    @property
    def m(self) -> int:
        return 2 * self.u.shape[0]

    @property
    def positive(self) -> bool:
        return bool(np.all(self.u > 0) and np.all(self.v > 0))


@dataclass(frozen=True, eq=False)
class StructureMatrix:
    entries: np.ndarray
    kind: StructureKind

    def __matmul__(self, other):
        return self.entries @ other


@dataclass(frozen=True)
class InvariantRecord:
    t: float
    h1: float
    h0: float
    iq: float
    ic: float

    def __getitem__(self, which):
        return getattr(self, _RECORD_FIELD[Invariant(which)])


_RECORD_FIELD = {
    Invariant.H1: "h1",
    Invariant.H0: "h0",
    Invariant.IQ: "iq",
    Invariant.IC: "ic",
}


@dataclass(frozen=True, eq=False)
class TodaState:
    """Toda variables ``(a, b)``, each of length ``m/2``; cyclic ``a_0 = a_{m/2}``."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if a.ndim != 1 or a.shape != b.shape:
            raise ValueError("a and b must be 1-D of equal length")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)


def _vector(state):
    return state.y if isinstance(state, LatticeState) else _as_lattice_vector(state)


def initial_grid(m: int) -> np.ndarray:
    """Grid ``x_i = -1 + (i-1)/(2m)``, exactly as used for the benchmark runs.

    Note that this covers only ``[-1, -1 + (m-1)/(2m)]``, i.e. roughly
    ``[-1, -0.5]``, not a symmetric interval.
    """
    if m < 4 or m % 2:
        raise ValueError(f"lattice dimension must be even and >= 4, got {m}")
    return -1.0 + np.arange(m) / (2.0 * m)


def initial_state(m: int) -> LatticeState:
    """Benchmark initial condition ``y_i = 1 + sech^2(x_i) / (2 m^2)``."""
    x = initial_grid(m)
    y = 1.0 + 1.0 / (2.0 * m * m) / np.cosh(x) ** 2
    return LatticeState(y, 0.0)


def volterra_rhs(state) -> np.ndarray:
    """Vector field ``f_i = y_i (y_{i+1} - y_{i-1})``."""
    y = _vector(state)
    return y * (np.roll(y, -1) - np.roll(y, 1))


def _require_positive(y):
    if np.any(y <= 0):
        raise DomainError("H0 = 1/2 sum log y_i needs a strictly positive state")


def _h0(y):
    _require_positive(y)
    return 0.5 * float(np.sum(np.log(y)))


def _iq(y):
    return float(np.sum(0.5 * y * y + y * np.roll(y, -1)))


def _ic(y):
    y1 = np.roll(y, -1)
    y2 = np.roll(y, -2)
    return float(np.sum(y ** 3 / 3.0 + y * y1 * (y + y1 + y2)))


def invariants(state, strict: bool = True) -> InvariantRecord:
    """Evaluate ``H1, H0, Iq, Ic`` at ``state``.

    With ``strict=False`` a non-positive state gets ``h0 = nan`` instead of
    raising :class:`DomainError`; the trajectory driver uses this to keep
    recording after a positivity loss.
    """
    y = _vector(state)
    t = state.t if isinstance(state, LatticeState) else 0.0
    if strict or np.all(y > 0):
        h0 = _h0(y)
    else:
        h0 = float("nan")
    return InvariantRecord(t, float(np.sum(y)), h0, _iq(y), _ic(y))


def gradient(which, state) -> np.ndarray:
    """Analytic gradient of one of the four invariants.

    ``grad Ic`` is

        y_k^2 + 2 y_k y_{k+1} + y_{k+1}^2 + y_{k+1} y_{k+2}
              + y_{k-1}^2 + 2 y_{k-1} y_k + y_{k-1} y_{k+1} + y_{k-2} y_{k-1},

    collected from the three cyclic terms of ``Ic`` that contain ``y_k``.
    """
    which = Invariant(which)
    y = _vector(state)
    if which is Invariant.H1:
        return np.ones_like(y)
    if which is Invariant.H0:
        _require_positive(y)
        return 0.5 / y
    yp1 = np.roll(y, -1)
    ym1 = np.roll(y, 1)
    if which is Invariant.IQ:
        return ym1 + y + yp1
    yp2 = np.roll(y, -2)
    ym2 = np.roll(y, 2)
    return (
        y * y
        + 2.0 * y * yp1 + yp1 * yp1 + yp1 * yp2
        + ym1 * ym1 + 2.0 * ym1 * y + ym1 * yp1
        + ym2 * ym1
    )


def _add_band(entries, offset, values):
    m = entries.shape[0]
    rows = np.arange(m)
    cols = (rows + offset) % m
    # Accumulate: for m == 4 the +2 and -2 bands hit the same entries.
    np.add.at(entries, (rows, cols), values)
    np.add.at(entries, (cols, rows), -values)


def structure_matrix(kind, state) -> StructureMatrix:
    """Dense skew-symmetric structure matrix of the quadratic or cubic bracket.

    ``J0`` has ``J0[i, i+1] = y_i y_{i+1}`` on the cyclic super-diagonal, so
    the corner entry is ``J0[1, m] = -y_1 y_m``. ``J1`` adds the offset-2
    band ``y_i y_{i+1} y_{i+2}``. Entries are written pairwise so the result
    is skew-symmetric bit for bit.
    """
    kind = StructureKind(kind)
    y = _vector(state)
    m = y.shape[0]
    entries = np.zeros((m, m))
    yp1 = np.roll(y, -1)
    if kind in (StructureKind.QUADRATIC_J0, StructureKind.SUM_J0_J1):
        _add_band(entries, 1, y * yp1)
    if kind in (StructureKind.CUBIC_J1, StructureKind.SUM_J0_J1):
        _add_band(entries, 1, y * yp1 * (y + yp1))
        _add_band(entries, 2, y * yp1 * np.roll(y, -2))
    return StructureMatrix(entries, kind)


def apply_structure(kind, state, w) -> np.ndarray:
    """Matrix-free product ``J(y) w`` in O(m) operations."""
    kind = StructureKind(kind)
    y = _vector(state)
    w = np.asarray(w, dtype=float)
    yp1 = np.roll(y, -1)
    out = np.zeros_like(y)

    def band(offset, c):
        # c_i couples i and i+offset: (Jw)_i += c_i w_{i+k}, (Jw)_{i+k} -= c_i w_i
        nonlocal out
        out = out + c * np.roll(w, -offset) - np.roll(c * w, offset)

    if kind in (StructureKind.QUADRATIC_J0, StructureKind.SUM_J0_J1):
        band(1, y * yp1)
    if kind in (StructureKind.CUBIC_J1, StructureKind.SUM_J0_J1):
        band(1, y * yp1 * (y + yp1))
        band(2, y * yp1 * np.roll(y, -2))
    return out


def split(state: LatticeState) -> SplitState:
    y = state.y
    return SplitState(y[0::2], y[1::2], state.t)


def merge(s: SplitState, check: bool = True) -> LatticeState:
    y = np.empty(s.m)
    y[0::2] = s.u
    y[1::2] = s.v
    if check:
        return LatticeState(y, s.t)
    return LatticeState.unchecked(y, s.t)


def split_rhs(s: SplitState):
    """``du_i = u_i (v_i - v_{i-1})``, ``dv_i = v_i (u_{i+1} - u_i)``."""
    u, v = s.u, s.v
    return u * (v - np.roll(v, 1)), v * (np.roll(u, -1) - u)


def split_invariants(s: SplitState) -> InvariantRecord:
    """The four invariants written directly in the ``(u, v)`` variables.

    Each cyclic sum over ``y`` splits into a term centred on an odd site
    (``u_i``) and one centred on the following even site (``v_i``)::

        Iq = sum 1/2 u_i^2 + u_i v_i + 1/2 v_i^2 + v_i u_{i+1}
        Ic = sum 1/3 u_i^3 + u_i v_i (u_i + v_i + u_{i+1})
               + 1/3 v_i^3 + v_i u_{i+1} (v_i + u_{i+1} + v_{i+1})
    """
    u, v = s.u, s.v
    up1 = np.roll(u, -1)
    vp1 = np.roll(v, -1)
    if np.any(u <= 0) or np.any(v <= 0):
        raise DomainError("H0 needs a strictly positive state")
    h1 = float(np.sum(u + v))
    h0 = 0.5 * float(np.sum(np.log(u) + np.log(v)))
    iq = float(np.sum(0.5 * u * u + u * v + 0.5 * v * v + v * up1))
    ic = float(np.sum(
        u ** 3 / 3.0 + u * v * (u + v + up1)
        + v ** 3 / 3.0 + v * up1 * (v + up1 + vp1)
    ))
    return InvariantRecord(s.t, h1, h0, iq, ic)


def toda_map(state) -> TodaState:
    """Map to Toda variables, ``a_i = y_{2i} y_{2i-1}``, ``b_i = y_{2i-1} + y_{2i-2}``.

    With these signs ``da_i = a_i (b_{i+1} - b_i)`` and ``db_i = a_i - a_{i-1}``
    hold exactly along the lattice flow (``y_0 = y_m``).
    """
    y = _vector(state)
    u = y[0::2]
    v = y[1::2]
    return TodaState(u * v, u + np.roll(v, 1))


def toda_rhs(ts: TodaState):
    a, b = ts.a, ts.b
    return a * (np.roll(b, -1) - b), a - np.roll(a, 1)


def rotate(state, k: int = 1):
    """Cyclic shift ``y_i -> y_{i+k}``; returns the same type it was given."""
    if isinstance(state, LatticeState):
        return LatticeState.unchecked(np.roll(state.y, -k), state.t)
    return np.roll(np.asarray(state), -k)
