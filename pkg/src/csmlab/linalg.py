"""Dense complex linear algebra: kets, operators, projectors, partial traces.

State vectors are 1-D complex arrays and operators are 2-D square complex
arrays. Multi-site layouts follow the left-fold convention: in
``tensor_all(a, b, c)`` site 0 (``a``) is the slowest-varying index, exactly
as ``np.kron`` orders a two-factor product.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, reduce
from typing import Iterable, Sequence

import numpy as np

from .errors import CapacityError, NumericError, ShapeError, ValidationError

TOL_ALG = 1e-10
MAX_VECTOR_DIM = 2**20
MAX_OPERATOR_DIM = 2**12

SQRT1_2 = 1 / math.sqrt(2)
IDENTITY2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) * SQRT1_2
# control = first (slowest) qubit
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def ket(amplitudes, normalize: bool = True, tol: float = TOL_ALG) -> np.ndarray:
    """Build a state vector from amplitudes.

    With ``normalize=False`` the amplitudes must already have unit norm.
    """
    v = np.array(amplitudes, dtype=complex).reshape(-1)
    if v.size == 0:
        raise ShapeError("a state vector needs dim >= 1")
    if v.size > MAX_VECTOR_DIM:
        raise CapacityError(f"vector dim {v.size} exceeds max_dim {MAX_VECTOR_DIM}")
    if not np.all(np.isfinite(v)):
        raise ValidationError("non-finite amplitude")
    n = np.linalg.norm(v)
    if normalize:
        if n == 0:
            raise ValidationError("cannot normalize the zero vector")
        v = v / n
    elif abs(n - 1) > tol:
        raise ValidationError(f"state norm {n!r} differs from 1 by more than {tol}")
    return _frozen(v)


def basis_state(dim: int, index: int) -> np.ndarray:
    if not 0 <= index < dim:
        raise ShapeError(f"basis index {index} out of range for dim {dim}")
    v = np.zeros(dim, dtype=complex)
    v[index] = 1
    return _frozen(v)


def check_state(psi, tol: float = TOL_ALG) -> np.ndarray:
    """Return ``psi`` as a complex vector, rejecting unnormalized input."""
    v = np.asarray(psi, dtype=complex)
    if v.ndim != 1:
        raise ShapeError(f"expected a 1-D state vector, got shape {v.shape}")
    n = np.linalg.norm(v)
    if abs(n - 1) > tol:
        raise ValidationError(f"state is not normalized (norm {n!r})")
    return v


def check_operator(op, dim: int | None = None) -> np.ndarray:
    a = np.asarray(op, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"operator must be square, got shape {a.shape}")
    if dim is not None and a.shape[0] != dim:
        raise ShapeError(f"operator dim {a.shape[0]} != expected {dim}")
    if not np.all(np.isfinite(a)):
        raise ValidationError("operator has non-finite entries")
    return a


def tensor(a, b) -> np.ndarray:
    """Kronecker product of two vectors or two operators."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.ndim != b.ndim or a.ndim not in (1, 2):
        raise ShapeError(f"cannot tensor shapes {a.shape} and {b.shape}")
    if a.ndim == 1:
        if a.size * b.size > MAX_VECTOR_DIM:
            raise CapacityError(f"vector dim {a.size * b.size} exceeds max_dim {MAX_VECTOR_DIM}")
    else:
        check_operator(a)
        check_operator(b)
        if a.shape[0] * b.shape[0] > MAX_OPERATOR_DIM:
            raise CapacityError(
                f"operator dim {a.shape[0] * b.shape[0]} exceeds max_dim {MAX_OPERATOR_DIM}"
            )
    return np.kron(a, b)


def tensor_all(factors: Iterable) -> np.ndarray:
    """Left fold of :func:`tensor`: ``((f0 ⊗ f1) ⊗ f2) ⊗ ...``."""
    factors = list(factors)
    if not factors:
        raise ShapeError("tensor_all needs at least one factor")
    return reduce(tensor, factors[1:], np.asarray(factors[0], dtype=complex))


def dagger(a) -> np.ndarray:
    return np.asarray(a).conj().T


def unitarity_error(u) -> float:
    """``max |U†U - I|`` entrywise."""
    u = check_operator(u)
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


def is_unitary(u, tol: float = TOL_ALG) -> bool:
    return unitarity_error(u) <= tol


def require_unitary(u, tol: float = TOL_ALG) -> np.ndarray:
    u = check_operator(u)
    err = unitarity_error(u)
    if err > tol:
        raise ValidationError(f"operator is not unitary: max|U†U - I| = {err:.3e} > {tol}")
    return u


def is_hermitian(a, tol: float = TOL_ALG) -> bool:
    a = np.asarray(a)
    return bool(np.max(np.abs(a - a.conj().T)) <= tol)


def fidelity(psi, phi) -> float:
    """``|<psi|phi>|^2`` for pure states."""
    return float(abs(np.vdot(psi, phi)) ** 2)


def random_unitary(dim: int, gen: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    z = (gen.standard_normal((dim, dim)) + 1j * gen.standard_normal((dim, dim))) * SQRT1_2
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def random_state(dim: int, gen: np.random.Generator) -> np.ndarray:
    v = gen.standard_normal(dim) + 1j * gen.standard_normal(dim)
    return ket(v)


@dataclass(frozen=True, eq=False)
class Projector:
    """Orthogonal projector ``P = P² = P†``, validated on construction."""

    matrix: np.ndarray
    tol: float = field(default=TOL_ALG, repr=False)

    def __post_init__(self):
        p = check_operator(self.matrix).copy()
        if p.shape[0] > MAX_OPERATOR_DIM:
            raise CapacityError(f"projector dim {p.shape[0]} exceeds {MAX_OPERATOR_DIM}")
        if not is_hermitian(p, self.tol):
            raise ValidationError("projector is not Hermitian")
        if np.max(np.abs(p @ p - p)) > self.tol:
            raise ValidationError("projector is not idempotent")
        object.__setattr__(self, "matrix", _frozen(p))

    @classmethod
    def from_vector(cls, v, tol: float = TOL_ALG) -> "Projector":
        v = ket(v)
        return cls(np.outer(v, v.conj()), tol)

    @classmethod
    def from_vectors(cls, vectors, tol: float = TOL_ALG) -> "Projector":
        """Projector onto the span of orthonormal ``vectors`` (rows)."""
        b = np.atleast_2d(np.asarray(vectors, dtype=complex))
        return cls(b.T @ b.conj(), tol)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def rank(self) -> int:
        return int(round(np.trace(self.matrix).real))

    def expectation(self, psi) -> float:
        psi = np.asarray(psi)
        return float(np.vdot(psi, self.matrix @ psi).real)


def density_matrix(rho, tol: float = TOL_ALG) -> np.ndarray:
    """Validate a density operator: Hermitian, PSD and unit trace."""
    r = check_operator(rho)
    if r.shape[0] > MAX_OPERATOR_DIM:
        raise CapacityError(f"density matrix dim {r.shape[0]} exceeds {MAX_OPERATOR_DIM}")
    if not is_hermitian(r, tol):
        raise ValidationError("density matrix is not Hermitian")
    tr = np.trace(r).real
    if abs(tr - 1) > tol:
        raise ValidationError(f"density matrix trace {tr!r} != 1")
    lo = np.linalg.eigvalsh((r + r.conj().T) / 2).min()
    if lo < -tol:
        raise ValidationError(f"density matrix has negative eigenvalue {lo:.3e}")
    return r


def pure_density(psi) -> np.ndarray:
    psi = check_state(psi)
    return density_matrix(np.outer(psi, psi.conj()))


def _check_sites(dim: int, site_dims: Sequence[int], keep) -> tuple[list[int], list[int]]:
    site_dims = [int(d) for d in site_dims]
    if any(d < 1 for d in site_dims):
        raise ShapeError(f"site dims must be positive: {site_dims}")
    if math.prod(site_dims) != dim:
        raise ShapeError(f"site dims {site_dims} do not multiply to {dim}")
    keep = sorted(set(int(k) for k in keep))
    if any(not 0 <= k < len(site_dims) for k in keep):
        raise ShapeError(f"keep {keep} not a subset of sites 0..{len(site_dims) - 1}")
    return site_dims, keep


def partial_trace(rho, site_dims: Sequence[int], keep) -> np.ndarray:
    """Trace out every site not in ``keep``; kept sites stay in ascending order."""
    rho = check_operator(rho)
    site_dims, keep = _check_sites(rho.shape[0], site_dims, keep)
    n = len(site_dims)
    if len(keep) == n:
        return rho
    t = rho.reshape(site_dims + site_dims)
    traced = [i for i in range(n) if i not in keep]
    # einsum labels: row index i, column index n+i; traced sites share a label
    letters = [chr(ord("a") + i) for i in range(2 * n)]
    for i in traced:
        letters[n + i] = letters[i]
    out = [letters[i] for i in keep] + [letters[n + i] for i in keep]
    kept_dim = math.prod(site_dims[i] for i in keep)
    red = np.einsum("".join(letters) + "->" + "".join(out), t)
    return red.reshape(kept_dim, kept_dim)


def reduced_density_from_state(psi, site_dims: Sequence[int], keep) -> np.ndarray:
    """Partial trace of ``|psi><psi|`` without forming the full density matrix."""
    psi = np.asarray(psi, dtype=complex)
    site_dims, keep = _check_sites(psi.size, site_dims, keep)
    traced = [i for i in range(len(site_dims)) if i not in keep]
    kept_dim = math.prod(site_dims[i] for i in keep)
    m = np.transpose(psi.reshape(site_dims), keep + traced).reshape(kept_dim, -1)
    return m @ m.conj().T


def matrix_exponential(a, theta: float = 0.5, max_terms: int = 40) -> np.ndarray:
    """``exp(A)`` by scaling and squaring around a Taylor series.

    ``A`` is scaled by ``2**-s`` until its 1-norm is at most ``theta``; the
    series is summed until the next term no longer changes the sum in double
    precision, and a :class:`NumericError` is raised if that needs more than
    ``max_terms`` terms.
    """
    a = check_operator(a)
    dim = a.shape[0]
    norm = np.linalg.norm(a, 1)
    s = max(0, math.ceil(math.log2(norm / theta))) if norm > 0 else 0
    b = a / 2**s
    result = np.eye(dim, dtype=complex)
    term = np.eye(dim, dtype=complex)
    for k in range(1, max_terms + 1):
        term = term @ b / k
        result = result + term
        if np.linalg.norm(term, 1) <= np.finfo(float).eps * np.linalg.norm(result, 1):
            break
    else:
        raise NumericError(f"Taylor series did not converge within {max_terms} terms")
    for _ in range(s):
        result = result @ result
    if not np.all(np.isfinite(result)):
        raise NumericError("matrix exponential overflowed")
    return result


@dataclass
class FamilyReport:
    """Outcome of :func:`validate_projector_family`; ``failures`` is itemized."""

    dim: int
    size: int
    max_orthogonality_error: float
    completeness_error: float
    failures: list[str]

    @property
    def ok(self) -> bool:
        return not self.failures

    def __bool__(self):
        return self.ok


def validate_projector_family(projectors: Sequence, dim: int, tol: float = TOL_ALG) -> FamilyReport:
    """Check ``P_i P_j = δ_ij P_i`` and ``Σ P_i = I`` to within ``tol`` entrywise."""
    mats = [np.asarray(getattr(p, "matrix", p), dtype=complex) for p in projectors]
    failures = []
    for i, m in enumerate(mats):
        if m.shape != (dim, dim):
            failures.append(f"projector {i} has shape {m.shape}, expected {(dim, dim)}")
    if failures or not mats:
        if not mats:
            failures.append("empty projector family")
        return FamilyReport(dim, len(mats), math.inf, math.inf, failures)
    worst = 0.0
    for i, pi in enumerate(mats):
        for j in range(i, len(mats)):
            target = pi if i == j else 0
            err = float(np.max(np.abs(pi @ mats[j] - target)))
            worst = max(worst, err)
            if err > tol:
                kind = "idempotence" if i == j else "orthogonality"
                failures.append(f"{kind} failure for ({i}, {j}): error {err:.3e}")
    comp = float(np.max(np.abs(sum(mats) - np.eye(dim))))
    if comp > tol:
        failures.append(f"completeness failure: max|ΣP - I| = {comp:.3e}")
    return FamilyReport(dim, len(mats), worst, comp, failures)


def spectral_observable(values: Sequence[float], projectors: Sequence, tol: float = TOL_ALG) -> np.ndarray:
    """Hermitian operator ``Σ m_i P_i`` from a valid complete projector family."""
    if len(values) != len(projectors):
        raise ShapeError(f"{len(values)} values for {len(projectors)} projectors")
    mats = [np.asarray(getattr(p, "matrix", p), dtype=complex) for p in projectors]
    if not mats:
        raise ValidationError("empty projector family")
    report = validate_projector_family(mats, mats[0].shape[0], tol)
    if not report.ok:
        raise ValidationError("invalid projector family: " + "; ".join(report.failures))
    values = np.asarray(values, dtype=float)
    return sum(m * p for m, p in zip(values, mats))
