"""Numerical checks of the geometric properties of brackets and one-step maps.

A map ``Phi`` is a Poisson map for ``J`` when its Jacobian ``M`` satisfies
``M J(y) M^T = J(Phi(y))``. :func:`poisson_map_residual` measures the
Frobenius norm of the defect with a finite-difference Jacobian. The
remaining checks cover brackets: Casimir drift, the Jacobi identity on
coordinate functions (which also certifies compatibility when applied to
``J0 + J1``), and pairwise involution of the known first integrals.
"""
from __future__ import annotations

import enum
import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import PositivityLossWarning
from .integrators import StepMethod, _raw_step, integrate
from .lattice import (
    Invariant,
    LatticeState,
    StructureKind,
    gradient,
    structure_matrix,
)

__all__ = [
    "JacobianScheme",
    "PoissonMapReport",
    "BracketReport",
    "DEFAULT_SEED",
    "random_state",
    "step_jacobian_fd",
    "poisson_map_residual",
    "reference_flow_residual",
    "casimir_respect",
    "bracket",
    "jacobi_identity_residual",
    "involution_report",
]

DEFAULT_SEED = 20061010

SQRT_EPS = math.sqrt(np.finfo(float).eps)
JACOBI_FD_EPS = 1e-5


class JacobianScheme(enum.Enum):
    CENTRAL_FD = "central-fd"
    COMPLEX_STEP = "complex-step"


@dataclass(frozen=True, eq=False)
class PoissonMapReport:
    method: StepMethod
    state: LatticeState
    h: float
    residual: float
    jacobian_scheme: JacobianScheme
    fd_epsilon: float


@dataclass(frozen=True, eq=False)
class BracketReport:
    pair: tuple
    bracket_kind: StructureKind
    value: float
    state: LatticeState
    # sum of |terms| of value; the natural round-off scale
    scale: float = 0.0


def random_state(m: int, rng) -> LatticeState:
    """Positive state with components log-uniform on ``[0.5, 2]``."""
    rng = np.random.default_rng(rng)
    return LatticeState(np.exp(rng.uniform(math.log(0.5), math.log(2.0), m)))


def _fd_jacobian(fn, y, fd_epsilon):
    m = y.shape[0]
    jac = np.empty((m, m))
    for j in range(m):
        e = fd_epsilon * max(1.0, abs(y[j]))
        yp = y.copy()
        ym = y.copy()
        yp[j] += e
        ym[j] -= e
        jac[:, j] = (fn(yp) - fn(ym)) / (2.0 * e)
    return jac


def _defect(fn, y, jac):
    J = structure_matrix(StructureKind.QUADRATIC_J0, y).entries
    J_new = structure_matrix(StructureKind.QUADRATIC_J0, fn(y)).entries
    return float(np.linalg.norm(jac @ J @ jac.T - J_new))


def step_jacobian_fd(method, state: LatticeState, h: float,
                     scheme=JacobianScheme.CENTRAL_FD, fd_epsilon: float = SQRT_EPS) -> np.ndarray:
    """Jacobian of the one-step map ``y -> Phi_h(y)`` in the original ``y`` ordering.

    Central differences use the per-column increment
    ``fd_epsilon * max(1, |y_j|)``. The complex-step scheme differentiates
    the (analytic) step kernels along ``y + i*eps*e_j`` and has no
    subtractive cancellation; it serves as an independent oracle.
    """
    method = StepMethod(method)
    scheme = JacobianScheme(scheme)
    y = np.array(state.y)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PositivityLossWarning)
        if scheme is JacobianScheme.COMPLEX_STEP:
            eps = 1e-30
            jac = np.empty((y.shape[0], y.shape[0]))
            for j in range(y.shape[0]):
                yc = y.astype(complex)
                yc[j] += 1j * eps
                jac[:, j] = _raw_step(method, yc, h).imag / eps
            return jac
        return _fd_jacobian(lambda z: _raw_step(method, z, h), y, fd_epsilon)


def poisson_map_residual(method, state: LatticeState, h: float,
                         scheme=JacobianScheme.CENTRAL_FD, fd_epsilon: float = SQRT_EPS) -> PoissonMapReport:
    """``|| M J0(y) M^T - J0(Phi_h(y)) ||_F`` for the quadratic bracket."""
    method = StepMethod(method)
    M = step_jacobian_fd(method, state, h, scheme=scheme, fd_epsilon=fd_epsilon)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PositivityLossWarning)
        residual = _defect(lambda z: _raw_step(method, z, h), np.array(state.y), M)
    return PoissonMapReport(method, state, float(h), residual, JacobianScheme(scheme), fd_epsilon)


def reference_flow_residual(state: LatticeState, h: float, substeps: int = 20,
                            fd_epsilon: float = SQRT_EPS) -> float:
    """Poisson-map defect of a near-exact flow (``substeps`` RK4 steps of ``h/substeps``).

    The exact flow is a Poisson map, so this measures the noise floor of the
    finite-difference check itself.
    """
    def flow(z):
        for _ in range(substeps):
            z = _raw_step(StepMethod.RK4, z, h / substeps)
        return z

    y = np.array(state.y)
    return _defect(flow, y, _fd_jacobian(flow, y, fd_epsilon))


def casimir_respect(method, state: LatticeState, h: float, n_steps: int) -> float:
    """Largest ``|H0(y_k) - H0(y_0)|`` over ``n_steps`` steps.

    If positivity is lost the drift up to the last positive sample is
    returned (the run itself still emits a :class:`PositivityLossWarning`).
    """
    traj = integrate(state, method, h, n_steps * h)
    drift = np.abs(traj.h0 - traj.h0[0])
    if traj.positivity_lost_at is not None:
        finite = np.isfinite(drift)
        stop = int(np.argmin(finite)) if not finite.all() else drift.shape[0]
        drift = drift[:stop]
    return float(np.max(drift))


def _pair_terms(J, a, b):
    # terms J_ij (a_i b_j - a_j b_i) over i<j: exactly 0 for a == b and
    # exactly antisymmetric under a <-> b.
    i, j = np.triu_indices(J.shape[0], 1)
    return J[i, j] * (a[i] * b[j] - a[j] * b[i])


def bracket(f, g, kind, state: LatticeState) -> BracketReport:
    """``{F, G}(y) = grad F^T J(y) grad G`` with analytic gradients."""
    f, g, kind = Invariant(f), Invariant(g), StructureKind(kind)
    J = structure_matrix(kind, state).entries
    terms = _pair_terms(J, gradient(f, state), gradient(g, state))
    return BracketReport((f, g), kind, float(np.sum(terms)), state, float(np.sum(np.abs(terms))))


def _entry_derivatives(kind, y, eps):
    m = y.shape[0]
    dJ = np.empty((m, m, m))
    for l in range(m):
        e = eps * max(1.0, abs(y[l]))
        yp = y.copy()
        ym = y.copy()
        yp[l] += e
        ym[l] -= e
        dJ[l] = (structure_matrix(kind, yp).entries - structure_matrix(kind, ym).entries) / (2.0 * e)
    return dJ


def jacobi_identity_residual(kind, state: LatticeState, trials: int = 50, rng_seed=DEFAULT_SEED,
                             triples: Sequence[tuple] | None = None, fd_epsilon: float = JACOBI_FD_EPS) -> float:
    """Largest Jacobi defect over coordinate triples.

    For coordinate functions
    ``{y_i, {y_j, y_k}} = sum_l J_il d_l J_jk``; the defect of a triple is
    the cyclic sum over ``(i, j, k)``. Entry derivatives ``d_l J`` come from
    central differences. ``triples`` overrides the random draw of ``trials``
    triples of distinct indices.
    """
    kind = StructureKind(kind)
    y = np.array(state.y)
    m = y.shape[0]
    J = structure_matrix(kind, y).entries
    dJ = _entry_derivatives(kind, y, fd_epsilon)
    if triples is None:
        rng = np.random.default_rng(rng_seed)
        triples = [tuple(rng.choice(m, 3, replace=False)) for _ in range(trials)]
    worst = 0.0
    for i, j, k in triples:
        t1 = J[i, :] * dJ[:, j, k]
        t2 = J[j, :] * dJ[:, k, i]
        t3 = J[k, :] * dJ[:, i, j]
        worst = max(worst, abs(float(np.sum(t1 + t2 + t3))))
    return worst


def involution_report(state: LatticeState) -> list[BracketReport]:
    """All pairwise brackets of ``H1, H0, Iq, Ic`` under ``J0`` and ``J1``."""
    out = []
    for kind in (StructureKind.QUADRATIC_J0, StructureKind.CUBIC_J1):
        for f, g in itertools.combinations(list(Invariant), 2):
            out.append(bracket(f, g, kind, state))
    return out
