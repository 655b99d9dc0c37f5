"""Truncated Fock configuration space and the Hilbert-Schmidt state space built on it.

The configuration space is the boson Fock space carrying [x1, x2] = i*theta,
truncated to the lowest N levels.  Physical states are N x N complex matrices
(Hilbert-Schmidt operators on configuration space) with inner product
tr(phi^dag psi).  Observables act on states as superoperators held in term-list
form, psi -> sum_t L_t psi R_t, materialized to an N^2 x N^2 matrix on demand.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "NcqmError",
    "ConfigurationError",
    "UsageError",
    "ValidationError",
    "TruncationError",
    "ConvergenceError",
    "ConsistencyError",
    "DegenerateOscillatorError",
    "MeasurementImpossibleError",
    "NumericalError",
    "ModelParams",
    "FockContext",
    "QuantumState",
    "SuperOperator",
    "build_fock",
    "hs_inner",
    "superop_from_terms",
    "apply",
    "materialize",
    "support_weight",
    "vec",
    "unvec",
]


class NcqmError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(NcqmError):
    """Invalid model parameters."""


class UsageError(NcqmError):
    """Arguments outside an operation's contract (mismatched cutoffs, bad ranges)."""


class ValidationError(NcqmError):
    """Structurally invalid input data (non-Hermitian potential table, etc.)."""


class TruncationError(NcqmError):
    """The requested object is not representable at the current cutoff."""


class ConvergenceError(NcqmError):
    """An iterative evaluation hit its cap before converging."""


class ConsistencyError(NcqmError):
    """Two internal closed forms that must agree did not."""


class DegenerateOscillatorError(NcqmError):
    """Oscillator quantities requested at omega = 0 (free particle handled elsewhere)."""


class MeasurementImpossibleError(NcqmError):
    """Post-measurement state undefined: detection probability is numerically zero."""


class NumericalError(NcqmError):
    """A numerical routine failed (eigensolver breakdown, verification miss)."""


@dataclass(frozen=True)
class ModelParams:
    """Physical constants and the truncation cutoff; the single source of units.

    theta:  non-commutativity parameter, dimension length^2.  theta >= 0; the
            Fock-space representation itself additionally needs theta > 0
            (enforced by build_fock), while the closed-form oscillator layer
            accepts theta = 0 as the commutative limit.
    hbar:   action quantum, > 0.
    mass:   particle mass, > 0.
    omega:  oscillator frequency, >= 0 (0 means free particle).
    cutoff: number of retained Fock levels N >= 2 (levels 0 .. N-1).
    """

    theta: float
    hbar: float = 1.0
    mass: float = 1.0
    omega: float = 1.0
    cutoff: int = 30

    def __post_init__(self):
        if not (self.theta >= 0.0) or not np.isfinite(self.theta):
            raise ConfigurationError(f"theta must be >= 0 and finite, got {self.theta}")
        if not (self.hbar > 0.0) or not np.isfinite(self.hbar):
            raise ConfigurationError(f"hbar must be > 0, got {self.hbar}")
        if not (self.mass > 0.0) or not np.isfinite(self.mass):
            raise ConfigurationError(f"mass must be > 0, got {self.mass}")
        if not (self.omega >= 0.0) or not np.isfinite(self.omega):
            raise ConfigurationError(f"omega must be >= 0, got {self.omega}")
        if int(self.cutoff) != self.cutoff or self.cutoff < 2:
            raise ConfigurationError(f"cutoff must be an integer >= 2, got {self.cutoff}")
        object.__setattr__(self, "cutoff", int(self.cutoff))


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=complex, order="C")
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class FockContext:
    """Truncated configuration-space operators shared by every module.

    b is the annihilator, b[n-1, n] = sqrt(n); bdag its conjugate transpose;
    x1 = sqrt(theta/2)(b + bdag) and x2 = i sqrt(theta/2)(bdag - b) the
    non-commuting coordinates.  All arrays are read-only.
    """

    params: ModelParams
    b: np.ndarray
    bdag: np.ndarray
    x1: np.ndarray
    x2: np.ndarray

    @property
    def cutoff(self) -> int:
        return self.params.cutoff


def build_fock(params: ModelParams) -> FockContext:
    """Build the truncated Fock operators for the given parameters.

    Raises ConfigurationError when theta = 0: the representation has
    x_i = 0 and momenta carry 1/theta factors, so the commutative point is
    served by the closed-form layer instead.
    """
    if params.theta <= 0.0:
        raise ConfigurationError(
            "the Fock representation needs theta > 0; "
            "use the closed-form oscillator layer for the commutative limit"
        )
    n = params.cutoff
    b = np.zeros((n, n), dtype=complex)
    levels = np.arange(1, n)
    b[levels - 1, levels] = np.sqrt(levels)
    bdag = b.conj().T
    scale = np.sqrt(params.theta / 2.0)
    x1 = scale * (b + bdag)
    x2 = 1j * scale * (bdag - b)
    return FockContext(
        params=params,
        b=_readonly(b),
        bdag=_readonly(bdag),
        x1=_readonly(x1),
        x2=_readonly(x2),
    )


class QuantumState:
    """An element of the quantum Hilbert space: an N x N matrix with tr(psi^dag psi) norm.

    The matrix is copied and frozen at construction; norm_sq is cached.
    """

    __slots__ = ("op", "norm_sq")

    def __init__(self, op: np.ndarray):
        op = np.asarray(op, dtype=complex)
        if op.ndim != 2 or op.shape[0] != op.shape[1]:
            raise UsageError(f"state matrix must be square, got shape {op.shape}")
        self.op = _readonly(op)
        self.norm_sq = float(np.vdot(self.op, self.op).real)

    @property
    def cutoff(self) -> int:
        return self.op.shape[0]

    @property
    def norm(self) -> float:
        return np.sqrt(self.norm_sq)

    def is_normalized(self, tol: float = 1e-12) -> bool:
        return abs(self.norm_sq - 1.0) <= tol

    def normalized(self) -> "QuantumState":
        if self.norm_sq == 0.0:
            raise UsageError("cannot normalize the zero state")
        return QuantumState(self.op / self.norm)

    def dagger(self) -> "QuantumState":
        return QuantumState(self.op.conj().T)

    def __repr__(self):
        return f"QuantumState(cutoff={self.cutoff}, norm_sq={self.norm_sq:.6g})"


def hs_inner(phi: QuantumState, psi: QuantumState) -> complex:
    """Hilbert-Schmidt inner product tr(phi^dag psi); conjugate-linear in phi."""
    if phi.cutoff != psi.cutoff:
        raise UsageError(f"cutoff mismatch: {phi.cutoff} vs {psi.cutoff}")
    return complex(np.vdot(phi.op, psi.op))


def vec(op: np.ndarray) -> np.ndarray:
    """Flatten a matrix with the fixed convention index(m, n) = m*N + n."""
    return np.asarray(op).reshape(-1)


def unvec(v: np.ndarray, cutoff: int) -> np.ndarray:
    """Inverse of vec; exact round trip."""
    return np.asarray(v).reshape(cutoff, cutoff)


class SuperOperator:
    """A linear map on quantum states stored as terms psi -> sum_t L_t psi R_t.

    Application is matrix-free; `matrix` materializes sum_t kron(L_t, R_t^T)
    under the vec convention above and caches it (lock-guarded, so concurrent
    readers see one consistent array).  Operators compose with @, add with +,
    and scale with *.
    """

    __slots__ = ("terms", "hermitian_on_Hq", "_matrix", "_eig", "_lock")

    def __init__(self, terms, hermitian_on_Hq: bool = False):
        terms = [(np.asarray(left, dtype=complex), np.asarray(right, dtype=complex)) for left, right in terms]
        if not terms:
            raise UsageError("a superoperator needs at least one (left, right) term")
        n = terms[0][0].shape[0]
        for left, right in terms:
            if left.shape != (n, n) or right.shape != (n, n):
                raise UsageError("all terms must be square matrices of one common cutoff")
        self.terms = tuple((_readonly(left), _readonly(right)) for left, right in terms)
        self.hermitian_on_Hq = bool(hermitian_on_Hq)
        self._matrix = None
        self._eig = None
        self._lock = threading.Lock()

    @property
    def cutoff(self) -> int:
        return self.terms[0][0].shape[0]

    @classmethod
    def identity(cls, cutoff: int) -> "SuperOperator":
        eye = np.eye(cutoff, dtype=complex)
        return cls([(eye, eye)], hermitian_on_Hq=True)

    def apply(self, psi: QuantumState) -> QuantumState:
        if psi.cutoff != self.cutoff:
            raise UsageError(f"cutoff mismatch: operator {self.cutoff}, state {psi.cutoff}")
        out = np.zeros((self.cutoff, self.cutoff), dtype=complex)
        for left, right in self.terms:
            out += left @ psi.op @ right
        return QuantumState(out)

    @property
    def matrix(self) -> np.ndarray:
        with self._lock:
            if self._matrix is None:
                n = self.cutoff
                mat = np.zeros((n * n, n * n), dtype=complex)
                for left, right in self.terms:
                    mat += np.kron(left, right.T)
                if self.hermitian_on_Hq:
                    defect = np.max(np.abs(mat - mat.conj().T))
                    scale = max(1.0, np.max(np.abs(mat)))
                    if defect > 1e-12 * scale:
                        raise ConsistencyError(
                            f"operator flagged Hermitian has defect {defect:.3e} (scale {scale:.3e})"
                        )
                self._matrix = _readonly(mat)
            return self._matrix

    def dagger(self) -> "SuperOperator":
        """Adjoint with respect to the Hilbert-Schmidt inner product: terms (L^dag, R^dag)."""
        return SuperOperator(
            [(left.conj().T, right.conj().T) for left, right in self.terms],
            hermitian_on_Hq=self.hermitian_on_Hq,
        )

    def __matmul__(self, other: "SuperOperator") -> "SuperOperator":
        if not isinstance(other, SuperOperator):
            return NotImplemented
        if other.cutoff != self.cutoff:
            raise UsageError("cannot compose superoperators of different cutoffs")
        terms = [
            (ls @ lo, ro @ rs)
            for ls, rs in self.terms
            for lo, ro in other.terms
        ]
        return SuperOperator(terms)

    def __add__(self, other: "SuperOperator") -> "SuperOperator":
        if not isinstance(other, SuperOperator):
            return NotImplemented
        if other.cutoff != self.cutoff:
            raise UsageError("cannot add superoperators of different cutoffs")
        return SuperOperator(list(self.terms) + list(other.terms))

    def __sub__(self, other: "SuperOperator") -> "SuperOperator":
        return self + (-1.0) * other

    def __mul__(self, scalar) -> "SuperOperator":
        scalar = complex(scalar)
        return SuperOperator([(scalar * left, right) for left, right in self.terms])

    __rmul__ = __mul__

    def __repr__(self):
        return f"SuperOperator(cutoff={self.cutoff}, terms={len(self.terms)}, hermitian={self.hermitian_on_Hq})"


def superop_from_terms(terms, hermitian_on_Hq: bool = False) -> SuperOperator:
    return SuperOperator(terms, hermitian_on_Hq=hermitian_on_Hq)


def apply(s: SuperOperator, psi: QuantumState) -> QuantumState:
    return s.apply(psi)


def materialize(s: SuperOperator) -> np.ndarray:
    return s.matrix


def support_weight(psi: QuantumState, m: int) -> float:
    """Fraction of the state's weight on Fock levels >= m (row or column index).

    0 means the state is fully supported below level m; the truncation-safety
    gauge used by every algebraic-identity precondition.
    """
    n = psi.cutoff
    if not (0 <= m <= n):
        raise UsageError(f"level index must satisfy 0 <= m <= {n}, got {m}")
    if psi.norm_sq == 0.0:
        raise UsageError("support_weight of the zero state is undefined")
    if m == n:
        return 0.0
    abs_sq = np.abs(psi.op) ** 2
    tail = abs_sq[m:, :].sum() + abs_sq[:m, m:].sum()
    return float(tail / psi.norm_sq)
