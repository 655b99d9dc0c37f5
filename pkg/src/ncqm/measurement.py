"""Coherent states, state symbols, the position POVM, and measurement updates.

Position statistics come from the coherent-state POVM: with the symbol
f(z) = <z|psi|z>, the density at dimensionless z = (x1 + i x2)/sqrt(2 theta) is

    P(z) = (1 / 2 pi theta) sum_k (1/k!) |d^k f / dz^k|^2,

a manifestly nonnegative series.  Two independent evaluation paths are kept:
a derivative recurrence chain (series path, used for pointwise densities and
grids) and a closed-form kernel for the k-th derivative functionals (matrix
path, used to materialize the POVM element itself); they cross-validate each
other to machine precision.

Everything is evaluated in the scaled basis g_a(z) = z^a e^{-|z|^2/2}/sqrt(a!),
generated by a stable recurrence with |g_a| <= 1, so no factorials are ever
formed explicitly and cutoffs of several hundred levels stay finite.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammainc

from .core import (
    ConvergenceError,
    FockContext,
    MeasurementImpossibleError,
    QuantumState,
    TruncationError,
    UsageError,
    unvec,
    vec,
)

__all__ = [
    "TruncationWarning",
    "coherent_vector",
    "coherent_tail",
    "coherent_state_op",
    "StateSymbol",
    "symbol",
    "deriv_z",
    "deriv_zbar",
    "position_probability",
    "GridSpec",
    "ProbabilityGrid",
    "probability_grid",
    "povm_matrix",
    "post_measurement",
    "povm_identity_residual",
]

_EPS = float(np.finfo(float).eps)


class TruncationWarning(UserWarning):
    """The requested point lies outside the cutoff's trustworthy phase-space region."""


def coherent_vector(cutoff: int, z: complex) -> np.ndarray:
    """Fock components <n|z> = e^{-|z|^2/2} z^n / sqrt(n!), by stable recurrence."""
    z = complex(z)
    out = np.empty(cutoff, dtype=complex)
    out[0] = math.exp(-0.5 * abs(z) ** 2)
    for n in range(1, cutoff):
        out[n] = out[n - 1] * z / math.sqrt(n)
    return out


def coherent_tail(cutoff: int, z: complex, level: int) -> float:
    """Weight of |z> on Fock levels >= level: the Poisson(|z|^2) upper tail."""
    if level <= 0:
        return 1.0
    mu = abs(complex(z)) ** 2
    if mu == 0.0:
        return 0.0
    # P(Poisson(mu) >= k) equals the regularized lower incomplete gamma P(k, mu)
    return float(gammainc(level, mu))


def coherent_state_op(ctx: FockContext, z: complex) -> QuantumState:
    """The rank-one state |z)(= |z><z|), normalized to hs_inner = 1 exactly.

    Raises TruncationError when |z> leaks weight above level N-3 beyond 1e-8
    (the |z|^2 <~ N/3 safety region).
    """
    n = ctx.cutoff
    tail = coherent_tail(n, z, n - 3)
    if tail >= 1e-8:
        raise TruncationError(
            f"coherent state at z = {z} has weight {tail:.2e} above level {n - 3}; "
            f"raise the cutoff (|z|^2 = {abs(complex(z))**2:.2f} wants N >~ {3 * abs(complex(z))**2:.0f})"
        )
    v = coherent_vector(n, z)
    op = np.outer(v, v.conj())
    return QuantumState(op / np.vdot(v, v).real)


@dataclass
class StateSymbol:
    """Coefficient table of a symbol f(z) = sum_ab table_ab conj(g_a(z)) g_b(z).

    For the symbol of a state psi the table is the matrix itself:
    f = e^{-|z|^2} sum_ab c_ab zbar^a z^b with c_ab = table_ab / sqrt(a! b!),
    i.e. f(z) = <z|psi|z>.  Derivatives grow the table by one row (d/dz raises
    the zbar degree) or one column (d/dzbar), staying exact polynomials times
    the Gaussian.
    """

    table: np.ndarray

    def eval(self, z: complex) -> complex:
        a_dim, b_dim = self.table.shape
        ga = coherent_vector(a_dim, z)
        gb = coherent_vector(b_dim, z)
        return complex(ga.conj() @ self.table @ gb)

    __call__ = eval


def symbol(psi: QuantumState) -> StateSymbol:
    return StateSymbol(np.array(psi.op, dtype=complex))


def _deriv_z_table(table: np.ndarray) -> np.ndarray:
    a_dim, b_dim = table.shape
    out = np.zeros((a_dim + 1, b_dim), dtype=complex)
    if b_dim > 1:
        out[:a_dim, : b_dim - 1] += table[:, 1:] * np.sqrt(np.arange(1, b_dim))[None, :]
    out[1 : a_dim + 1, :] -= np.sqrt(np.arange(1, a_dim + 1))[:, None] * table
    return out


def deriv_z(sym: StateSymbol) -> StateSymbol:
    """d/dz of the symbol: lowers the z degree and, through the Gaussian, raises zbar."""
    return StateSymbol(_deriv_z_table(sym.table))


def deriv_zbar(sym: StateSymbol) -> StateSymbol:
    """d/dzbar of the symbol; the mirror image of deriv_z."""
    return StateSymbol(_deriv_z_table(sym.table.T).T)


def _coherent_basis(zs: np.ndarray, count: int) -> np.ndarray:
    """Rows of g_a(z_p) for a = 0..count-1, one row per point."""
    out = np.empty((len(zs), count), dtype=complex)
    out[:, 0] = np.exp(-0.5 * np.abs(zs) ** 2)
    for a in range(1, count):
        out[:, a] = out[:, a - 1] * zs / math.sqrt(a)
    return out


def _chain_densities(psi_op: np.ndarray, zs: np.ndarray, max_terms: int) -> np.ndarray:
    """sum_k (1/k!)|d^k f/dz^k|^2 at each point, with a roundoff-aware stop rule.

    Terms are the scaled derivative chain d_k = D(d_{k-1})/sqrt(k) evaluated in
    the bounded basis.  A term joins the sum only when it clears the point's
    roundoff floor, eps times the absolute-value contraction sum |g_a||d||g_b|:
    the chain coefficients grow combinatorially while the evaluated values
    cancel, and once a value cancels down to the floor it is pure noise whose
    square would fabricate density in empty regions.  Stops after three
    consecutive negligible terms per point; raises ConvergenceError at the
    term cap.
    """
    n = psi_op.shape[0]
    npts = len(zs)
    gb = _coherent_basis(zs, n)
    abs_gb = np.abs(gb)
    ga = _coherent_basis(zs, n)  # grows along with the table's first axis

    table = np.array(psi_op, dtype=complex)
    total = np.zeros(npts)
    below = np.zeros(npts, dtype=int)

    for k in range(max_terms + 1):
        a_dim = table.shape[0]
        if ga.shape[1] < a_dim:
            new = ga[:, a_dim - 2] * zs / math.sqrt(a_dim - 1)
            ga = np.concatenate([ga, new[:, None]], axis=1)
        m = ga[:, :a_dim].conj() @ table
        val = np.einsum("pb,pb->p", m, gb)
        term = np.abs(val) ** 2

        # per-point roundoff floor of the contraction: the evaluated value is
        # meaningless once it cancels down to eps times the absolute-value sum
        abs_m = np.abs(ga[:, :a_dim]) @ np.abs(table)
        absval = np.einsum("pb,pb->p", abs_m, abs_gb)
        floor = (16.0 * _EPS * absval) ** 2
        total += np.where(term > floor, term, 0.0)
        negligible = term <= np.maximum(1e-14 * total, floor)
        below = np.where(negligible, below + 1, 0)
        if np.all(below >= 3):
            return total
        table = _deriv_z_table(table) / math.sqrt(k + 1)

    stuck = int(np.sum(below < 3))
    raise ConvergenceError(
        f"density series hit the {max_terms}-term cap with {stuck} of {npts} points "
        f"unconverged (last max term {float(np.max(term)):.3e}); the points likely sit "
        "far outside the cutoff's safe region"
    )


def _warn_if_unsafe(cutoff: int, z: complex) -> str | None:
    tail = coherent_tail(cutoff, z, cutoff - 3)
    if tail >= 1e-8:
        return (
            f"point z = {z} is truncation-unsafe at cutoff {cutoff} "
            f"(coherent tail {tail:.2e} above level {cutoff - 3}; guideline |z|^2 <= N/3)"
        )
    return None


def position_probability(ctx: FockContext, psi: QuantumState, z: complex, max_terms: int = 200) -> float:
    """Position probability density of a normalized state at dimensionless z.

    Nonnegative by construction (sum of squared derivative magnitudes).  Points
    outside the cutoff's safe region emit TruncationWarning; a cap overrun
    raises ConvergenceError.
    """
    z = complex(z)
    msg = _warn_if_unsafe(ctx.cutoff, z)
    if msg is not None:
        warnings.warn(msg, TruncationWarning, stacklevel=2)
    total = _chain_densities(np.asarray(psi.op), np.array([z]), max_terms)
    return float(total[0] / (2.0 * math.pi * ctx.params.theta))


@dataclass(frozen=True)
class GridSpec:
    """Uniform rectangular grid in the dimensionful coordinates (x1, x2)."""

    x1_range: tuple[float, float]
    x2_range: tuple[float, float]
    points: tuple[int, int] = (61, 61)

    def __post_init__(self):
        if self.points[0] < 2 or self.points[1] < 2:
            raise UsageError(f"grid needs at least 2 points per axis, got {self.points}")
        if not (self.x1_range[0] < self.x1_range[1] and self.x2_range[0] < self.x2_range[1]):
            raise UsageError("grid ranges must be increasing (lo, hi) pairs")

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            np.linspace(self.x1_range[0], self.x1_range[1], self.points[0]),
            np.linspace(self.x2_range[0], self.x2_range[1], self.points[1]),
        )


@dataclass(frozen=True)
class ProbabilityGrid:
    """Evaluated density grid; values[i, j] = P(x1[i], x2[j]), all >= 0.

    normalization_estimate is the trapezoid quadrature of the grid, near 1 for
    a normalized state when the grid covers it; warnings records grid points
    outside the truncation-safe region (data is still emitted for them).
    """

    x1: np.ndarray
    x2: np.ndarray
    values: np.ndarray
    normalization_estimate: float
    warnings: tuple[str, ...] = ()


def probability_grid(
    ctx: FockContext, psi: QuantumState, grid: GridSpec, max_terms: int = 200
) -> ProbabilityGrid:
    """Evaluate the position density over a grid; embarrassingly parallel over points.

    z = (x1 + i x2)/sqrt(2 theta) per point; one shared derivative chain serves
    every point (the chain tables depend only on the state), so the whole grid
    costs a few matrix products per series term.
    """
    x1, x2 = grid.axes()
    theta = ctx.params.theta
    zs = ((x1[:, None] + 1j * x2[None, :]) / math.sqrt(2.0 * theta)).reshape(-1)

    notes = []
    radii = np.abs(zs)
    worst = zs[np.argmax(radii)]
    msg = _warn_if_unsafe(ctx.cutoff, worst)
    if msg is not None:
        # same criterion as the trigger: coherent tail above level N-3
        tails = gammainc(ctx.cutoff - 3, radii**2)
        unsafe = int(np.sum(tails >= 1e-8))
        notes.append(f"{unsafe} of {len(zs)} grid points truncation-unsafe; worst: {msg}")

    total = _chain_densities(np.asarray(psi.op), zs, max_terms)
    values = (total / (2.0 * math.pi * theta)).reshape(grid.points)
    norm_est = float(np.trapezoid(np.trapezoid(values, x2, axis=1), x1))
    return ProbabilityGrid(
        x1=x1,
        x2=x2,
        values=values,
        normalization_estimate=norm_est,
        warnings=tuple(notes),
    )


def _kernel_rows(z: complex, a_dim: int, b_dim: int, max_terms: int) -> np.ndarray:
    """Closed-form rows of the scaled derivative functionals at z.

    Row k holds (1/sqrt(k!)) d^k/dz^k of the symbol of the matrix unit |a><b|,
    evaluated at z, for every (a, b); the Leibniz sum over how many derivatives
    hit the g_b factor versus the Gaussian of conj(g_a).  Rows are emitted until
    their norm falls below 1e-16 of the running total (three in a row), giving
    the factored POVM kernel pi_z = W^dag W / (2 pi theta).
    """
    z = complex(z)
    gz = coherent_vector(b_dim, z)
    ga = coherent_vector(a_dim, z)

    # p_n(-zbar) = (-zbar)^n / sqrt(n!)
    pm = np.empty(max_terms + 1, dtype=complex)
    pm[0] = 1.0
    for k in range(1, max_terms + 1):
        pm[k] = pm[k - 1] * (-np.conj(z)) / math.sqrt(k)

    rows = []
    total = 0.0
    below = 0
    bs = np.arange(b_dim, dtype=float)
    for k in range(max_terms + 1):
        t_row = np.zeros(b_dim, dtype=complex)
        c = np.ones(b_dim)  # c[b] = sqrt(falling(k, j) * falling(b, j)) / j!
        for j in range(0, min(k, b_dim - 1) + 1):
            if j > 0:
                c = c * np.sqrt((k - j + 1) * np.maximum(bs - j + 1, 0.0)) / j
            t_row[j:] += c[j:] * pm[k - j] * gz[: b_dim - j]
        w_row = (ga.conj()[:, None] * t_row[None, :]).reshape(-1)
        rows.append(w_row)
        size = float(np.vdot(w_row, w_row).real)
        total += size
        below = below + 1 if size <= 1e-16 * total else 0
        if below >= 3:
            break
    else:
        raise ConvergenceError(f"POVM kernel rows did not decay within {max_terms} terms at z = {z}")
    return np.array(rows)


def povm_matrix(ctx: FockContext, z: complex, max_terms: int = 200) -> np.ndarray:
    """The POVM element pi_z as a dense Hermitian PSD matrix on the state space.

    Built as W^dag W / (2 pi theta) from the derivative-functional rows, so
    positivity is structural, and the quadratic form (psi| pi_z |psi) agrees
    with the independent series path of position_probability.
    """
    n = ctx.cutoff
    w = _kernel_rows(z, n, n, max_terms)
    return (w.conj().T @ w) / (2.0 * math.pi * ctx.params.theta)


def post_measurement(ctx: FockContext, psi: QuantumState, z: complex) -> QuantumState:
    """State after detecting the particle at z: sqrt(pi_z) psi, renormalized.

    Uses the unique PSD square root (the detection operator is fixed only up to
    a unitary; identity is the canonical choice).  Raises
    MeasurementImpossibleError when the detection probability is below 1e-14.
    """
    pi_z = povm_matrix(ctx, z)
    evals, evecs = np.linalg.eigh(pi_z)
    root = (evecs * np.sqrt(np.clip(evals, 0.0, None))[None, :]) @ evecs.conj().T
    phi = root @ vec(psi.op)
    prob = float(np.vdot(phi, phi).real)
    if prob < 1e-14:
        raise MeasurementImpossibleError(
            f"detection probability {prob:.3e} at z = {z} is numerically zero"
        )
    return QuantumState(unvec(phi / math.sqrt(prob), ctx.cutoff))


def povm_identity_residual(
    ctx: FockContext, extent: float, points: int = 61, span: int = 5
) -> float:
    """Operator residual of the resolution of identity on a low-level subspace.

    Quadrature of pi_z dx1 dx2 over the square [-extent, extent]^2, restricted
    to the span of matrix units |m><n| with m, n < span, compared to the
    identity there.  Limited by quadrature extent/step, not by the POVM itself.
    """
    if span > ctx.cutoff:
        raise UsageError(f"span {span} exceeds cutoff {ctx.cutoff}")
    xs = np.linspace(-extent, extent, points)
    w1 = np.full(points, xs[1] - xs[0])
    w1[0] *= 0.5
    w1[-1] *= 0.5
    theta = ctx.params.theta

    dim = span * span
    acc = np.zeros((dim, dim), dtype=complex)
    for i, x1 in enumerate(xs):
        for j, x2 in enumerate(xs):
            z = (x1 + 1j * x2) / math.sqrt(2.0 * theta)
            w = _kernel_rows(z, span, span, 200)
            acc += (w1[i] * w1[j]) * (w.conj().T @ w)
    acc /= 2.0 * math.pi * theta
    return float(np.linalg.norm(acc - np.eye(dim), 2))
