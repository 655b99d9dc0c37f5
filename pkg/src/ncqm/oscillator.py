"""Exact solution of the non-commutative harmonic oscillator.

Everything here is closed-form: the Bogoliubov frequencies lambda_1 >= lambda_2,
the ground-state decay exponent alpha, the 4x4 symplectic diagonalization, the
ladder superoperators, the spectrum E(n1, n2), and the ground-state position
density.  The truncated numerical modules are validated against this layer.

Closed forms are written in cancellation-free shape: with R = sqrt(4 hbar^2 +
m^2 w^2 th^2),

    lambda_1 = m w (R + m w th) / 2
    lambda_2 = 2 hbar^2 m w / (R + m w th)          (= lambda_1 - m^2 w^2 th)
    e^alpha  = (R - m w th) / (R + m w th)          (= 1 - th lambda_2 / hbar^2)

The naive difference forms lose every digit by w ~ 1e6; these do not.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    ConsistencyError,
    DegenerateOscillatorError,
    FockContext,
    ModelParams,
    NumericalError,
    QuantumState,
    SuperOperator,
    TruncationError,
    UsageError,
    build_fock,
)
from .observables import momentum_ops, position_ops

__all__ = [
    "lambdas",
    "alpha",
    "k_norms",
    "energy",
    "ground_probability",
    "BogoliubovResult",
    "bogoliubov_transform",
    "ladder_ops",
    "OscillatorSolution",
    "oscillator_solution",
    "ground_state",
    "excited_state",
    "ground_tail_weight",
]


def _radical(params: ModelParams) -> float:
    # sqrt(4 hbar^2 + m^2 w^2 theta^2) without overflow
    return math.hypot(2.0 * params.hbar, params.mass * params.omega * params.theta)


def lambdas(params: ModelParams) -> tuple[float, float]:
    """The two Bogoliubov frequencies, lambda_1 >= lambda_2 > 0.

    Satisfy lambda_1 - lambda_2 = m^2 w^2 theta and lambda_1 lambda_2 = hbar^2 m^2 w^2
    exactly.  Raises DegenerateOscillatorError at omega = 0.
    """
    if params.omega <= 0.0:
        raise DegenerateOscillatorError("lambdas need omega > 0; omega = 0 is the free particle")
    mw = params.mass * params.omega
    big = _radical(params) + mw * params.theta
    lam1 = 0.5 * mw * big
    lam2 = 2.0 * params.hbar**2 * mw / big
    return lam1, lam2


def alpha(params: ModelParams) -> float:
    """Ground-state exponent: psi_0 = e^{alpha b^dag b} with e^alpha = 1 - theta lambda_2 / hbar^2.

    The same alpha must solve e^{-alpha} = 1 + theta lambda_1 / hbar^2, and the
    value returned is -log1p(theta lambda_1 / hbar^2): lambda_1 is built without
    cancellation, so this form keeps full relative accuracy from alpha ~ -theta
    (commutative regime) out to alpha ~ -2 ln(m w theta / hbar) (confining
    regime).  It is cross-checked against 2(ln 2 hbar - ln(R + m w theta)),
    which is the e^{alpha} form with the catastrophic R - m w theta subtraction
    rewritten away via (R - m w theta)(R + m w theta) = 4 hbar^2; that form
    still loses relative precision as alpha -> 0 (difference of two O(1) logs),
    so agreement is required to 1e-12 with an absolute floor, not purely
    relative.  Disagreement raises ConsistencyError.  alpha <= 0, with equality
    only at theta = 0.
    """
    lam1, _ = lambdas(params)
    mwt = params.mass * params.omega * params.theta
    rad = _radical(params)
    a = -math.log1p(params.theta * lam1 / params.hbar**2)
    a_check = 2.0 * (math.log(2.0 * params.hbar) - math.log(rad + mwt))
    # absolute floor at the roundoff of the individual logs, relative beyond
    floor = 1e-13 * max(1.0, abs(math.log(2.0 * params.hbar)), abs(math.log(rad + mwt)))
    if abs(a - a_check) > max(1e-12 * abs(a), floor):
        raise ConsistencyError(f"alpha closed forms disagree: {a_check!r} vs {a!r}")
    return a


def k_norms(params: ModelParams) -> tuple[float, float]:
    """Ladder normalizers K_1 = lambda_1(2 lambda_1 theta/hbar^2 + 4), K_2 = lambda_2(4 - 2 lambda_2 theta/hbar^2)."""
    lam1, lam2 = lambdas(params)
    h2 = params.hbar**2
    k1 = lam1 * (2.0 * lam1 * params.theta / h2 + 4.0)
    k2 = lam2 * (4.0 - 2.0 * lam2 * params.theta / h2)
    return k1, k2


def energy(params: ModelParams, n1: int, n2: int) -> float:
    """E(n1, n2) = (lambda_1 (2 n1 + 1) + lambda_2 (2 n2 + 1)) / 2m."""
    if n1 < 0 or n2 < 0 or int(n1) != n1 or int(n2) != n2:
        raise UsageError(f"quantum numbers must be non-negative integers, got ({n1}, {n2})")
    lam1, lam2 = lambdas(params)
    return (lam1 * (2 * n1 + 1) + lam2 * (2 * n2 + 1)) / (2.0 * params.mass)


def ground_probability(params: ModelParams, z: complex) -> float:
    """Closed-form ground-state position density at dimensionless z = (x1 + i x2)/sqrt(2 theta).

    P(z) = ((2s - s^2) / 2 pi theta) exp((s^2 - 2s)|z|^2) with s = theta lambda_2 / hbar^2.
    The prefactor comes from the Gaussian integral with measure dx1 dx2 = 2 theta d^2z,
    so the density integrates to exactly one over the plane.
    """
    if params.theta <= 0.0:
        raise UsageError(
            "ground_probability needs theta > 0 (z is dimensionless in sqrt(2 theta) units); "
            "the commutative limit is the ordinary Gaussian exp(-m w r^2 / hbar) m w / pi hbar"
        )
    _, lam2 = lambdas(params)
    s = params.theta * lam2 / params.hbar**2
    width = 2.0 * s - s * s
    return width / (2.0 * math.pi * params.theta) * math.exp(-width * abs(z) ** 2)


@dataclass(frozen=True)
class BogoliubovResult:
    """The 4x4 symplectic data diagonalizing the quadratic Hamiltonian.

    g is the commutator Gram matrix of Z = (m w X1, m w X2, P1, P2); S satisfies
    S g S^dag = D = diag(1, -1, 1, -1); eigenvalues are the eigh eigenvalues of g
    ascending, (-l1, -l2, l2, l1).  residual is max |S g S^dag - D|.
    """

    g: np.ndarray
    S: np.ndarray
    D: np.ndarray
    eigenvalues: np.ndarray
    lambda1: float
    lambda2: float
    residual: float


def bogoliubov_transform(params: ModelParams) -> BogoliubovResult:
    """Build g, diagonalize, and assemble the transformation S.

    S^dag columns are the eigenvectors of g scaled by 1/sqrt(eigenvalue); they
    are taken in closed form from the ladder coefficient rows, which stays
    deterministic through the degenerate commutative limit (a numerical
    eigensolver can mix the lambda_1 = lambda_2 pair there).  The eigensolver
    runs anyway as a cross-check on the eigenvalues; disagreement beyond 1e-12
    relative raises NumericalError.
    """
    if params.omega <= 0.0:
        raise DegenerateOscillatorError("bogoliubov_transform needs omega > 0")
    hbar, m, w, th = params.hbar, params.mass, params.omega, params.theta
    lam1, lam2 = lambdas(params)
    k1, k2 = k_norms(params)

    hmw = hbar * m * w
    m2w2t = m * m * w * w * th
    g = np.array(
        [
            [0.0, 1j * m2w2t, 1j * hmw, 0.0],
            [-1j * m2w2t, 0.0, 0.0, 1j * hmw],
            [-1j * hmw, 0.0, 0.0, 0.0],
            [0.0, -1j * hmw, 0.0, 0.0],
        ],
        dtype=complex,
    )

    # ladder coefficient rows in the Z = (m w X1, m w X2, P1, P2) basis
    r1 = np.array([-lam1 / hmw, -1j * lam1 / hmw, -1j, 1.0], dtype=complex) / math.sqrt(k1)
    r2 = np.array([lam2 / hmw, -1j * lam2 / hmw, 1j, 1.0], dtype=complex) / math.sqrt(k2)
    s_mat = np.vstack([r1, r1.conj(), r2, r2.conj()])
    d_mat = np.diag([1.0, -1.0, 1.0, -1.0]).astype(complex)

    residual = float(np.max(np.abs(s_mat @ g @ s_mat.conj().T - d_mat)))
    scale = max(1.0, float(np.max(np.abs(g))))
    if residual > 1e-12 * scale:
        raise NumericalError(f"S g S^dag misses D by {residual:.3e}")

    # closed-form columns must be eigenvectors of g with eigenvalues +-lambda
    sdag = s_mat.conj().T
    expected = np.array([lam1, -lam1, lam2, -lam2])
    eig_defect = float(np.max(np.abs(g @ sdag - sdag * expected[None, :])))
    if eig_defect > 1e-12 * scale:
        raise NumericalError(f"transformation columns miss the eigenvector property by {eig_defect:.3e}")

    eigenvalues = np.linalg.eigvalsh(g)
    target = np.sort(np.array([-lam1, -lam2, lam2, lam1]))
    if np.max(np.abs(eigenvalues - target)) > 1e-12 * max(lam1, 1.0):
        raise NumericalError(
            f"eigensolver eigenvalues {eigenvalues} disagree with closed forms {target}"
        )

    return BogoliubovResult(
        g=g,
        S=s_mat,
        D=d_mat,
        eigenvalues=eigenvalues,
        lambda1=lam1,
        lambda2=lam2,
        residual=residual,
    )


def ladder_ops(ctx: FockContext) -> tuple[SuperOperator, SuperOperator, SuperOperator, SuperOperator]:
    """The oscillator ladder superoperators (A1, A1dag, A2, A2dag).

    A1 = (-(l1/hbar) X1 - i(l1/hbar) X2 - i P1 + P2) / sqrt(K1)
    A2 = ( (l2/hbar) X1 - i(l2/hbar) X2 + i P1 + P2) / sqrt(K2)

    and the daggered pair with conjugated coefficients.  Signs are the ones for
    which A1 psi_0 = A2 psi_0 = 0 holds exactly for psi_0 = e^{alpha b^dag b}
    (checked in the tests), and [A_i, A_j^dag] = delta_ij on supported states.
    """
    params = ctx.params
    lam1, lam2 = lambdas(params)
    k1, k2 = k_norms(params)
    x1, x2 = position_ops(ctx)
    p1, p2 = momentum_ops(ctx)

    c1 = lam1 / params.hbar
    c2 = lam2 / params.hbar
    inv_k1 = 1.0 / math.sqrt(k1)
    inv_k2 = 1.0 / math.sqrt(k2)

    a1 = inv_k1 * ((-c1) * x1 + (-1j * c1) * x2 + (-1j) * p1 + p2)
    a1d = inv_k1 * ((-c1) * x1 + (1j * c1) * x2 + 1j * p1 + p2)
    a2 = inv_k2 * (c2 * x1 + (-1j * c2) * x2 + 1j * p1 + p2)
    a2d = inv_k2 * (c2 * x1 + (1j * c2) * x2 + (-1j) * p1 + p2)
    return a1, a1d, a2, a2d


@dataclass(frozen=True)
class OscillatorSolution:
    """Bundle of the closed-form constants and ladder maps for one context."""

    params: ModelParams
    lambda1: float
    lambda2: float
    alpha: float
    K1: float
    K2: float
    A1: SuperOperator
    A1dag: SuperOperator
    A2: SuperOperator
    A2dag: SuperOperator


def oscillator_solution(ctx: FockContext) -> OscillatorSolution:
    lam1, lam2 = lambdas(ctx.params)
    k1, k2 = k_norms(ctx.params)
    a1, a1d, a2, a2d = ladder_ops(ctx)
    return OscillatorSolution(
        params=ctx.params,
        lambda1=lam1,
        lambda2=lam2,
        alpha=alpha(ctx.params),
        K1=k1,
        K2=k2,
        A1=a1,
        A1dag=a1d,
        A2=a2,
        A2dag=a2d,
    )


def ground_tail_weight(params: ModelParams) -> float:
    """Normalized weight of the ground state on the top retained Fock level.

    w = e^{2 alpha (N-1)} (1 - e^{2 alpha}) / (1 - e^{2 alpha N}); the
    truncation-adequacy gauge for ground_state/excited_state.
    """
    a = alpha(params)
    n = params.cutoff
    if a == 0.0:
        return 1.0 / n
    q = math.exp(2.0 * a)
    return math.exp(2.0 * a * (n - 1)) * (1.0 - q) / (1.0 - q**n)


def _ground_matrix(a: float, n: int) -> np.ndarray:
    diag = np.exp(a * np.arange(n))
    diag /= np.linalg.norm(diag)
    return np.diag(diag).astype(complex)


def ground_state(ctx: FockContext, tail_tol: float = 1e-3) -> QuantumState:
    """The normalized ground state psi_0 = e^{alpha b^dag b} as a diagonal matrix.

    Raises TruncationError when the top-level weight exceeds tail_tol (default
    1e-3; at theta = 0.1 this admits cutoffs N >= 28).  The message reports the
    cutoff that would reach the requested tolerance.
    """
    a = alpha(ctx.params)
    w = ground_tail_weight(ctx.params)
    if w > tail_tol:
        needed = 1
        if a < 0.0:
            needed = math.ceil(math.log(tail_tol / (1.0 - math.exp(2.0 * a))) / (2.0 * a)) + 1
        raise TruncationError(
            f"ground-state tail weight {w:.3e} exceeds {tail_tol:.1e} at cutoff "
            f"{ctx.params.cutoff}; need roughly N >= {needed}"
        )
    return QuantumState(_ground_matrix(a, ctx.params.cutoff))


def excited_state(ctx: FockContext, n1: int, n2: int, tail_tol: float = 1e-3) -> QuantumState:
    """Normalized (A1dag)^n1 (A2dag)^n2 psi_0, built at an enlarged internal cutoff.

    Applying the ladders at the target cutoff directly contaminates the result
    with O(0.1) boundary artifacts (the truncated [b, b^dag] defect hits the
    psi_0 tail and the momenta amplify it by 1/theta).  Instead the state is
    constructed at N' = N + ceil(28/|alpha|) + 2(n1+n2), so the discarded tail
    sits below double precision, then projected back to N x N and renormalized.
    """
    if n1 < 0 or n2 < 0 or int(n1) != n1 or int(n2) != n2:
        raise UsageError(f"quantum numbers must be non-negative integers, got ({n1}, {n2})")
    w = ground_tail_weight(ctx.params)
    if w > tail_tol:
        raise TruncationError(
            f"state tail weight {w:.3e} exceeds {tail_tol:.1e} at cutoff {ctx.params.cutoff}"
        )
    if n1 == 0 and n2 == 0:
        return ground_state(ctx, tail_tol=tail_tol)

    a = alpha(ctx.params)
    n = ctx.params.cutoff
    pad = math.ceil(28.0 / abs(a)) + 2 * (n1 + n2)
    n_big = n + pad
    if n_big > 2000:
        raise TruncationError(
            f"ground-state decay |alpha| = {abs(a):.3e} needs internal cutoff {n_big} > 2000; "
            "state not representable at feasible size"
        )
    big_params = ModelParams(
        theta=ctx.params.theta,
        hbar=ctx.params.hbar,
        mass=ctx.params.mass,
        omega=ctx.params.omega,
        cutoff=n_big,
    )
    big_ctx = build_fock(big_params)
    _, a1d, _, a2d = ladder_ops(big_ctx)
    state = QuantumState(_ground_matrix(a, n_big))
    for _ in range(n1):
        state = a1d.apply(state)
    for _ in range(n2):
        state = a2d.apply(state)
    return QuantumState(state.op[:n, :n]).normalized()
