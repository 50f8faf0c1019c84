"""Certain-and-repeatable measurements built as ``U† · check · U`` sandwiches.

Three instances: a displaced photon counter for coherent states, a
CNOT + Hadamard Bell analyser, and an all-zeros check on a qubit register.
Fock spaces are truncated at ``n_max``; every routine that depends on the
truncation first verifies that the Poisson tail beyond ``n_max`` is below
``trunc_tol``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import stats

from . import linalg as la
from .csm import Context, MeasurementRecord, measure, measure_projective
from .errors import ShapeError, TruncationError, ValidationError
from .rng import as_stream

TRUNC_TOL = 1e-12


@dataclass(frozen=True)
class FockSpace:
    n_max: int

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValidationError(f"n_max must be an integer >= 1, got {self.n_max!r}")

    @property
    def dim(self) -> int:
        return self.n_max + 1

    def annihilation(self) -> np.ndarray:
        return np.diag(np.sqrt(np.arange(1, self.dim)), k=1).astype(complex)

    def creation(self) -> np.ndarray:
        return self.annihilation().conj().T

    def number_context(self) -> Context:
        return Context.computational(self.dim, labels=[(float(n),) for n in range(self.dim)], name="photon-number")


def poisson_tail(mean: float, n_max: int) -> float:
    """``P(n > n_max)`` for a Poisson law of the given mean."""
    if mean == 0:
        return 0.0
    return float(stats.poisson.sf(n_max, mean))


def required_n_max(alpha: complex, trunc_tol: float = TRUNC_TOL) -> int:
    mean = abs(alpha) ** 2
    n = max(1, math.ceil(mean))
    while poisson_tail(mean, n) > trunc_tol:
        n += 1
    return n


def check_truncation(alpha: complex, space: FockSpace, trunc_tol: float = TRUNC_TOL) -> float:
    """Return the tail mass beyond ``n_max``; raise TruncationError if over budget."""
    tail = poisson_tail(abs(alpha) ** 2, space.n_max)
    if tail > trunc_tol:
        need = required_n_max(alpha, trunc_tol)
        raise TruncationError(
            f"|alpha|={abs(alpha):.4g} needs n_max >= {need} for tail <= {trunc_tol:g} "
            f"(n_max={space.n_max} leaves {tail:.3e})",
            required_n_max=need,
        )
    return tail


def coherent_state(alpha: complex, space: FockSpace, trunc_tol: float = TRUNC_TOL) -> np.ndarray:
    check_truncation(alpha, space, trunc_tol)
    c = np.zeros(space.dim, dtype=complex)
    c[0] = math.exp(-abs(alpha) ** 2 / 2)
    for n in range(1, space.dim):
        c[n] = c[n - 1] * alpha / math.sqrt(n)
    return la.ket(c)


def photon_number_distribution(state) -> np.ndarray:
    return np.abs(np.asarray(state)) ** 2


def mean_photon_number(state) -> float:
    p = photon_number_distribution(state)
    return float(np.dot(np.arange(p.size), p))


def displacement(alpha: complex, space: FockSpace, trunc_tol: float = TRUNC_TOL) -> np.ndarray:
    """``exp(α a† − α* a)`` on the truncated space.

    The truncated generator is anti-Hermitian, so the result is unitary to
    rounding; its action on low-lying states is exact up to the Poisson tail
    bound returned by :func:`check_truncation`.
    """
    check_truncation(alpha, space, trunc_tol)
    a = space.annihilation()
    return la.matrix_exponential(alpha * a.conj().T - np.conj(alpha) * a)


@dataclass
class SandwichReport:
    protocol: str
    certainty_probability: float
    recovery_fidelity: float
    record: MeasurementRecord
    output_state: np.ndarray
    passed: bool
    truncation_error: float | None = None
    label: str = ""


def sandwich_measure_coherent(
    alpha: complex, space: FockSpace, rng, state=None, trunc_tol: float = TRUNC_TOL
) -> SandwichReport:
    """Displace by ``-α``, count photons, displace back by ``+α``.

    ``state`` defaults to ``|α⟩``. A nonzero count is projected onto its
    number state and flagged ``"nonzero-count"`` on the record.
    """
    tail = check_truncation(alpha, space, trunc_tol)
    psi = coherent_state(alpha, space, trunc_tol) if state is None else la.check_state(state)
    d_minus = displacement(-alpha, space, trunc_tol)
    d_plus = displacement(alpha, space, trunc_tol)
    shifted = d_minus @ psi
    shifted = shifted / np.linalg.norm(shifted)
    ctx = space.number_context()
    rec = measure(shifted, ctx, rng)
    if rec.index != 0:
        rec.flags = rec.flags + ("nonzero-count",)
    out = d_plus @ rec.post_state
    p_zero = float(ctx.probabilities(shifted)[0])
    return SandwichReport(
        protocol="coherent",
        certainty_probability=min(1.0, p_zero),
        recovery_fidelity=min(1.0, la.fidelity(psi, out)),
        record=rec,
        output_state=out,
        passed=rec.index == 0,
        truncation_error=tail,
        label=f"count={rec.index}",
    )


# Z-context outcome index (bits b0 b1) -> Bell state decoded by (H ⊗ I)·CNOT.
BELL_LABELS = ("Phi+", "Psi+", "Phi-", "Psi-")
BELL_ANALYSER = la.tensor(la.HADAMARD, la.IDENTITY2) @ la.CNOT


def two_qubit_z_context() -> Context:
    return Context.computational(4, labels=[(0, 0), (0, 1), (1, 0), (1, 1)], name="ZZ")


def bell_states() -> dict[str, np.ndarray]:
    """Bell vectors in the order Φ+, Φ−, Ψ+, Ψ−.

    In the ± basis: Φ+ ∝ |++⟩+|−−⟩, Ψ+ ∝ |++⟩−|−−⟩, Φ− ∝ |+−⟩+|−+⟩,
    Ψ− ∝ |−+⟩−|+−⟩.
    """
    s = la.SQRT1_2
    return {
        "Phi+": la.ket([s, 0, 0, s]),
        "Phi-": la.ket([s, 0, 0, -s]),
        "Psi+": la.ket([0, s, s, 0]),
        "Psi-": la.ket([0, s, -s, 0]),
    }


def bell_context() -> Context:
    """The context whose modalities are the four Bell states."""
    z = two_qubit_z_context()
    return Context(BELL_ANALYSER.conj().T @ z.basis, z.labels, name="Bell")


def bell_measure_sandwich(state, rng) -> SandwichReport:
    """CNOT (control = first qubit), Hadamard on the first qubit, Z readout, undo.

    ``passed`` means the realized outcome was certain, i.e. the input was a
    Bell state.
    """
    psi = la.check_state(state)
    if psi.size != 4:
        raise ShapeError(f"Bell measurement needs a two-qubit state, got dim {psi.size}")
    rec = measure(BELL_ANALYSER @ psi, two_qubit_z_context(), rng)
    out = BELL_ANALYSER.conj().T @ rec.post_state
    return SandwichReport(
        protocol="bell",
        certainty_probability=rec.probability,
        recovery_fidelity=min(1.0, la.fidelity(psi, out)),
        record=rec,
        output_state=out,
        passed=rec.probability >= 1 - la.TOL_ALG,
        label=BELL_LABELS[rec.index],
    )


@lru_cache(maxsize=8)
def _zero_check_family(dim: int) -> tuple[la.Projector, la.Projector]:
    p0 = np.zeros((dim, dim), dtype=complex)
    p0[0, 0] = 1
    rest = np.eye(dim, dtype=complex)
    rest[0, 0] = 0
    return la.Projector(p0), la.Projector(rest)


def register_check_sandwich(psi, u, rng) -> SandwichReport:
    """Apply U†, check for ``|0…0⟩`` (two-outcome projective check), apply U."""
    psi = la.check_state(psi)
    u = la.require_unitary(u)
    dim = psi.size
    if u.shape[0] != dim:
        raise ShapeError(f"unitary dim {u.shape[0]} != state dim {dim}")
    if dim < 2 or dim & (dim - 1):
        raise ShapeError(f"register dim {dim} is not a power of two")
    shifted = u.conj().T @ psi
    shifted = shifted / np.linalg.norm(shifted)
    rec = measure_projective(shifted, _zero_check_family(dim), rng, labels=[(1.0,), (0.0,)])
    out = u @ rec.post_state
    p_pass = float(abs(shifted[0]) ** 2)
    return SandwichReport(
        protocol="register",
        certainty_probability=min(1.0, p_pass),
        recovery_fidelity=min(1.0, la.fidelity(psi, out)),
        record=rec,
        output_state=out,
        passed=rec.index == 0,
        label="back-to-zero" if rec.index == 0 else "not-zero",
    )


def _apply_1q(m: np.ndarray, gate: np.ndarray, qubit: int, k: int) -> np.ndarray:
    t = m.reshape(2**qubit, 2, -1)
    return np.matmul(gate, t).reshape(m.shape)


def _cnot_permutation(control: int, target: int, k: int) -> np.ndarray:
    idx = np.arange(2**k)
    cbit = (idx >> (k - 1 - control)) & 1
    return idx ^ (cbit << (k - 1 - target))


def random_layered_unitary(k: int, depth: int, rng) -> np.ndarray:
    """Random brickwork circuit on ``k`` qubits as a dense ``2^k × 2^k`` matrix.

    Each layer applies Haar-random single-qubit gates to every qubit and then
    CNOTs on neighbouring pairs, alternating between even and odd pairs.
    """
    gen = as_stream(rng).generator
    dim = 2**k
    if dim > la.MAX_OPERATOR_DIM:
        raise ShapeError(f"register of {k} qubits exceeds operator max_dim")
    m = np.eye(dim, dtype=complex)
    for layer in range(depth):
        for q in range(k):
            m = _apply_1q(m, la.random_unitary(2, gen), q, k)
        for c in range(layer % 2, k - 1, 2):
            m = m[_cnot_permutation(c, c + 1, k)]
    return m


def register_basis_state(k: int, bits) -> np.ndarray:
    """``|b_0 b_1 … b_{k-1}⟩`` with qubit 0 the most significant bit."""
    bits = list(bits)
    if len(bits) != k:
        raise ShapeError(f"{len(bits)} bits for a {k}-qubit register")
    index = int("".join(str(int(b)) for b in bits), 2)
    return la.basis_state(2**k, index)
