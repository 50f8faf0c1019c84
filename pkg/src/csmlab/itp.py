"""Finite-N product-state experiments on the way to an infinite tensor product.

Two product states ``⊗ψ_α`` and ``⊗φ_α`` drift into orthogonal sectors as
sites accumulate: their overlap on a growing set of sites tends to zero and
so does any matrix element of an operator with finite support. Sector
membership is judged from the partial sums ``S_M = Σ_{α≤M} (1 − |⟨ψ_α|φ_α⟩|)``,
which stay bounded exactly when the infinite product lies in one sector.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import linalg as la
from .errors import ShapeError, ValidationError

THRESHOLD_CONVERGED = 1e-6
THRESHOLD_DIVERGED = 10.0
RATIO_CONVERGED = 0.75
DENSE_MAX_SITES = 16


@dataclass(frozen=True, eq=False)
class ProductState:
    sites: tuple

    def __post_init__(self):
        sites = tuple(la.ket(s, normalize=False) for s in self.sites)
        if not sites:
            raise ShapeError("a product state needs at least one site")
        object.__setattr__(self, "sites", sites)

    @property
    def n(self) -> int:
        return len(self.sites)

    @property
    def site_dims(self) -> tuple[int, ...]:
        return tuple(s.size for s in self.sites)

    def vector(self, subset: Iterable[int] | None = None) -> np.ndarray:
        """Dense ``⊗_{α∈subset} ψ_α`` (all sites by default)."""
        idx = range(self.n) if subset is None else sorted(subset)
        return la.tensor_all(self.sites[i] for i in idx)


def product_pair(overlaps: Sequence[complex]) -> tuple[ProductState, ProductState]:
    """Qubit product states with ``⟨ψ_α|φ_α⟩ = overlaps[α]`` exactly.

    ``ψ_α = |0⟩`` and ``φ_α = c|0⟩ + sqrt(1 − |c|²)|1⟩``.
    """
    psi, phi = [], []
    zero = la.basis_state(2, 0)
    for c in overlaps:
        c = complex(c)
        if abs(c) > 1 + la.TOL_ALG:
            raise ValidationError(f"overlap modulus {abs(c)} > 1")
        psi.append(zero)
        phi.append(np.array([c, math.sqrt(max(0.0, 1 - abs(c) ** 2))], dtype=complex))
    return ProductState(psi), ProductState(phi)


def uniform_pair(overlap: float, n: int) -> tuple[ProductState, ProductState]:
    return product_pair([overlap] * n)


def _check_pair(psi: ProductState, phi: ProductState):
    if psi.site_dims != phi.site_dims:
        raise ShapeError(f"site dims differ: {psi.site_dims} vs {phi.site_dims}")


def _check_subset(j, n: int) -> list[int]:
    j = sorted(set(int(a) for a in j))
    if any(not 0 <= a < n for a in j):
        raise ShapeError(f"index set {j} not within sites 0..{n - 1}")
    return j


def site_overlaps(psi: ProductState, phi: ProductState) -> np.ndarray:
    _check_pair(psi, phi)
    return np.array([np.vdot(a, b) for a, b in zip(psi.sites, phi.sites)])


def site_moduli(psi: ProductState, phi: ProductState) -> np.ndarray:
    """``|⟨ψ_α|φ_α⟩|`` clipped to ``[0, 1]`` against rounding."""
    return np.minimum(np.abs(site_overlaps(psi, phi)), 1.0)


def partial_overlap(psi: ProductState, phi: ProductState, j: Iterable[int]) -> complex:
    """``∏_{α∈J} ⟨ψ_α|φ_α⟩``, multiplied in ascending site order."""
    j = _check_subset(j, psi.n)
    ov = site_overlaps(psi, phi)
    out = 1 + 0j
    for a in j:
        out *= ov[a]
    return out


@dataclass
class PrefixSearch:
    """Result of :func:`minimal_m_for_epsilon`; ``m`` is None when not reached."""

    m: int | None
    epsilon: float
    final_modulus: float

    @property
    def reached(self) -> bool:
        return self.m is not None


def prefix_moduli(psi: ProductState, phi: ProductState) -> np.ndarray:
    """``|o_M|`` for ``M = 0..N`` (index 0 is the empty product, 1)."""
    return np.concatenate([[1.0], np.cumprod(site_moduli(psi, phi))])


def minimal_m_for_epsilon(psi: ProductState, phi: ProductState, epsilon: float) -> PrefixSearch:
    """Smallest prefix length ``M`` with ``|o_M| < epsilon`` (strict).

    Sites are taken in their given order. Since ``o_0 = 1``, ``M >= 1`` for
    every ``epsilon <= 1``; an orthogonal site at position ``i`` (0-based)
    gives at most ``M = i + 1``.
    """
    if not 0 < epsilon <= 1:
        raise ValidationError(f"epsilon must lie in (0, 1], got {epsilon!r}")
    mods = prefix_moduli(psi, phi)
    hits = np.flatnonzero(mods < epsilon)
    m = int(hits[0]) if hits.size else None
    return PrefixSearch(m, epsilon, float(mods[-1]))


def restricted_matrix_element(a, support: Sequence[int], psi: ProductState, phi: ProductState, j: Iterable[int]) -> complex:
    """``⟨ψ_K|A|φ_K⟩ · ∏_{α∈J\\K} ⟨ψ_α|φ_α⟩`` for ``A`` acting on sites ``K ⊆ J``.

    ``A`` is ordered like ``tensor_all`` over ``sorted(support)``.
    """
    _check_pair(psi, phi)
    k = _check_subset(support, psi.n)
    j = _check_subset(j, psi.n)
    if not set(k) <= set(j):
        raise ShapeError(f"support {k} is not contained in J")
    dim = math.prod(psi.site_dims[i] for i in k)
    a = la.check_operator(a, dim)
    local = complex(np.vdot(psi.vector(k), a @ phi.vector(k)))
    return local * partial_overlap(psi, phi, [i for i in j if i not in k])


def opnorm(a) -> float:
    return float(np.linalg.norm(np.asarray(a), 2))


def suppression_sequence(a, support: Sequence[int], psi: ProductState, phi: ProductState, sizes: Sequence[int]) -> np.ndarray:
    """``|⟨Ψ_M|A_M|Φ_M⟩|`` for ``J`` = the support plus the first other sites, ``|J|`` in sizes."""
    k = sorted(support)
    others = [i for i in range(psi.n) if i not in k]
    out = []
    for size in sizes:
        if size < len(k) or size - len(k) > len(others):
            raise ShapeError(f"|J| = {size} incompatible with support {k} and N = {psi.n}")
        j = k + others[: size - len(k)]
        out.append(abs(restricted_matrix_element(a, k, psi, phi, j)))
    return np.array(out)


@dataclass
class SectorReport:
    overlaps: np.ndarray  # complex prefix products o_1..o_N
    moduli: np.ndarray  # |o_M| for M = 1..N
    partial_sums: np.ndarray  # S_M for M = 1..N
    minimal_m: int | None
    classification: str
    tail_increment: float
    dyadic_ratio: float
    params: dict = field(default_factory=dict)

    @property
    def s_n(self) -> float:
        return float(self.partial_sums[-1])


def sector_classify(
    psi: ProductState,
    phi: ProductState,
    threshold_converged: float = THRESHOLD_CONVERGED,
    threshold_diverged: float = THRESHOLD_DIVERGED,
    ratio_converged: float = RATIO_CONVERGED,
    epsilon: float = 1e-6,
) -> SectorReport:
    """Finite-N sector verdict from the partial sums ``S_M``.

    ``same-sector`` when the tail has stabilized: either the increment of S
    over the last half of the sites is below ``threshold_converged``, or that
    increment is at most ``ratio_converged`` times the increment over the
    preceding quarter (terms decaying faster than ``1/α``, hence summable).
    Otherwise ``different-sector`` if ``S_N > threshold_diverged``, else
    ``inconclusive``. Only moduli enter the verdict.
    """
    mods = site_moduli(psi, phi)
    n = mods.size
    s = np.cumsum(1 - mods)
    s0 = np.concatenate([[0.0], s])
    half, quarter = n // 2, n // 4
    tail = float(s0[n] - s0[half])
    prev = float(s0[half] - s0[quarter])
    if tail == 0:
        ratio = 0.0
    elif prev == 0:
        ratio = math.inf
    else:
        ratio = tail / prev
    if tail < threshold_converged or (n >= 4 and ratio <= ratio_converged):
        verdict = "same-sector"
    elif s[-1] > threshold_diverged:
        verdict = "different-sector"
    else:
        verdict = "inconclusive"
    ov = np.cumprod(site_overlaps(psi, phi))
    return SectorReport(
        overlaps=ov,
        moduli=np.cumprod(mods),
        partial_sums=s,
        minimal_m=minimal_m_for_epsilon(psi, phi, epsilon).m,
        classification=verdict,
        tail_increment=tail,
        dyadic_ratio=ratio,
        params={
            "threshold_converged": threshold_converged,
            "threshold_diverged": threshold_diverged,
            "ratio_converged": ratio_converged,
            "epsilon": epsilon,
            "n_sites": n,
        },
    )


@dataclass
class DecoherenceReport:
    theta: float
    n_values: list[int]
    coherence: np.ndarray  # |ρ_01| of the reduced system state
    predicted: np.ndarray  # ½ |cos θ|^N
    relative_coherence: np.ndarray  # coherence / ½
    repetitions: np.ndarray  # estimate: 1 / relative_coherence²
    method: list[str]  # "dense" or "formula" per N
    diagonal_dominant: np.ndarray


def environment_states(theta: float) -> tuple[np.ndarray, np.ndarray]:
    """Conditional environment states with ``⟨E0|E1⟩ = cos θ``."""
    return la.basis_state(2, 0), la.ket([math.cos(theta), math.sin(theta)], normalize=False)


def system_environment_state(theta: float, n: int) -> np.ndarray:
    """``(|0⟩|E0⟩^⊗N + |1⟩|E1⟩^⊗N)/√2`` with the system qubit as site 0."""
    e0, e1 = environment_states(theta)
    branch0 = la.tensor_all([la.basis_state(2, 0)] + [e0] * n)
    branch1 = la.tensor_all([la.basis_state(2, 1)] + [e1] * n)
    return (branch0 + branch1) * la.SQRT1_2


def reduced_system_state(theta: float, n: int, dense_density: bool = False) -> np.ndarray:
    """Reduced 2×2 system density matrix by explicit partial trace.

    ``dense_density=True`` forms the full ``|Ψ⟩⟨Ψ|`` first, which the operator
    capacity allows only for small N.
    """
    psi = system_environment_state(theta, n)
    dims = [2] * (n + 1)
    if dense_density:
        return la.partial_trace(la.pure_density(psi), dims, [0])
    return la.reduced_density_from_state(psi, dims, [0])


def coherence_formula(theta: float, n: int) -> float:
    return 0.5 * abs(math.cos(theta)) ** n


def decoherence_sweep(theta: float, n_values: Sequence[int], dense_max_sites: int = DENSE_MAX_SITES) -> DecoherenceReport:
    """Off-diagonal coherence of the system qubit after coupling to N sites.

    N up to ``dense_max_sites`` is simulated by building the full state and
    tracing out the environment; larger N use the exact closed form
    ``½|cos θ|^N`` and are marked ``"formula"``.
    """
    n_values = [int(n) for n in n_values]
    if any(n < 1 for n in n_values):
        raise ValidationError("N values must be positive")
    coh, pred, method, dom = [], [], [], []
    for n in n_values:
        p = coherence_formula(theta, n)
        if n <= dense_max_sites:
            rho = reduced_system_state(theta, n)
            c = float(abs(rho[0, 1]))
            dom.append(bool(c <= min(rho[0, 0].real, rho[1, 1].real) + la.TOL_ALG))
            method.append("dense")
        else:
            c = p
            dom.append(True)
            method.append("formula")
        coh.append(c)
        pred.append(p)
    coh = np.array(coh)
    rel = coh / 0.5
    with np.errstate(divide="ignore"):
        reps = np.where(rel > 0, 1.0 / rel**2, np.inf)
    return DecoherenceReport(theta, n_values, coh, np.array(pred), rel, reps, method, np.array(dom))
