"""Contexts, modalities and single-outcome measurement.

A :class:`Context` is a complete orthonormal basis of a ``D``-dimensional
space with one value tuple per basis vector. A :class:`Modality` picks one
element of a context. Two modalities from different contexts are extravalent
when they share the same rank-1 projector; rays are compared through a
canonical form so that extravalence is a genuine equivalence relation.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from . import linalg as la
from .errors import ShapeError, ValidationError
from .rng import RngStream, as_stream


def _default_labels(dim: int) -> tuple[tuple[float, ...], ...]:
    return tuple((float(i),) for i in range(dim))


@dataclass(frozen=True, eq=False)
class Context:
    """Orthonormal basis (columns of ``basis``) plus value labels.

    ``name`` is cosmetic. Labels default to ``(0.,), (1.,), ...``.
    """

    basis: np.ndarray
    labels: tuple = None
    name: str = ""
    tol: float = field(default=la.TOL_ALG, repr=False)

    def __post_init__(self):
        b = la.check_operator(self.basis).copy()
        err = float(np.max(np.abs(b.conj().T @ b - np.eye(b.shape[0]))))
        if err > self.tol:
            raise ValidationError(f"context basis is not orthonormal (error {err:.3e})")
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)
        labels = self.labels if self.labels is not None else _default_labels(b.shape[0])
        labels = tuple(tuple(float(x) for x in np.atleast_1d(lab)) for lab in labels)
        if len(labels) != b.shape[0]:
            raise ValidationError(f"{len(labels)} labels for a context of dimension {b.shape[0]}")
        if len(set(labels)) != len(labels):
            raise ValidationError("context labels must be distinct")
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_vectors(cls, vectors: Sequence, labels=None, name: str = "", tol: float = la.TOL_ALG):
        """Context whose basis vectors are the given rows (normalized first)."""
        cols = [la.ket(v) for v in vectors]
        return cls(np.column_stack(cols), labels, name, tol)

    @classmethod
    def computational(cls, dim: int, labels=None, name: str = "Z") -> "Context":
        return cls(np.eye(dim, dtype=complex), labels, name)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def vector(self, index: int) -> np.ndarray:
        return self.basis[:, index]

    @cached_property
    def projectors(self) -> tuple[la.Projector, ...]:
        return tuple(la.Projector.from_vector(self.basis[:, i]) for i in range(self.dim))

    def modality(self, index: int) -> "Modality":
        return Modality(self, index)

    @property
    def modalities(self) -> tuple["Modality", ...]:
        return tuple(Modality(self, i) for i in range(self.dim))

    def probabilities(self, state) -> np.ndarray:
        """Born distribution of ``state`` over this context's outcomes."""
        state = np.asarray(state, dtype=complex)
        if state.shape != (self.dim,):
            raise ShapeError(f"state of shape {state.shape} in a context of dim {self.dim}")
        return np.abs(self.basis.conj().T @ state) ** 2

    def observable(self, component: int = 0) -> np.ndarray:
        """Spectral operator built from one component of the label tuples."""
        return la.spectral_observable([lab[component] for lab in self.labels], self.projectors)


@dataclass(frozen=True, eq=False)
class Modality:
    context: Context
    index: int

    def __post_init__(self):
        if not 0 <= self.index < self.context.dim:
            raise ShapeError(f"modality index {self.index} outside 0..{self.context.dim - 1}")

    @property
    def value(self) -> tuple[float, ...]:
        return self.context.labels[self.index]

    @property
    def vector(self) -> np.ndarray:
        return self.context.vector(self.index)

    @property
    def projector(self) -> la.Projector:
        return self.context.projectors[self.index]

    @property
    def dim(self) -> int:
        return self.context.dim

    def __repr__(self):
        name = self.context.name or "ctx"
        return f"Modality({name}[{self.index}], value={self.value})"


@dataclass
class MeasurementRecord:
    """One realized outcome. ``context`` is a Context or a projector family."""

    input_state: np.ndarray
    context: object
    index: int
    value: tuple
    post_state: np.ndarray
    probability: float
    rng_state: dict
    flags: tuple[str, ...] = ()

    @property
    def modality(self) -> Modality:
        if not isinstance(self.context, Context):
            raise TypeError("record was not produced in a rank-1 context")
        return Modality(self.context, self.index)


def canonical_ray(v, tol: float = la.TOL_ALG) -> tuple:
    """Hashable canonical form of the ray through ``v``.

    The first amplitude whose modulus is within ``tol`` of the maximum is
    rotated to the positive real axis, then every real and imaginary part is
    snapped to the grid ``tol * Z``.
    """
    v = np.asarray(v, dtype=complex)
    v = v / np.linalg.norm(v)
    mags = np.abs(v)
    pivot = int(np.argmax(mags >= mags.max() - tol))
    v = v * (np.conj(v[pivot]) / mags[pivot])
    snapped = np.rint(np.concatenate([v.real, v.imag]) / tol).astype(np.int64)
    return (v.size,) + tuple(int(x) for x in snapped)


def canonical_vector(v, tol: float = la.TOL_ALG) -> np.ndarray:
    """Unit representative of the ray: the un-snapped phase-fixed vector."""
    v = np.asarray(v, dtype=complex)
    v = v / np.linalg.norm(v)
    mags = np.abs(v)
    pivot = int(np.argmax(mags >= mags.max() - tol))
    return v * (np.conj(v[pivot]) / mags[pivot])


def born_probability(prepared: Modality, target: Modality) -> float:
    if prepared.dim != target.dim:
        raise ShapeError(f"dimension mismatch: {prepared.dim} vs {target.dim}")
    return float(abs(np.vdot(target.vector, prepared.vector)) ** 2)


def _sample_index(probs: np.ndarray, u) -> np.ndarray:
    cdf = np.cumsum(probs)
    idx = np.searchsorted(cdf, np.asarray(u) * cdf[-1], side="right")
    return np.minimum(idx, probs.size - 1)


def measure(state, context: Context, rng) -> MeasurementRecord:
    """Sample a single outcome and replace the state by the realized basis vector."""
    state = la.check_state(state)
    if state.shape != (context.dim,):
        raise ShapeError(f"state dim {state.size} != context dim {context.dim}")
    rng = as_stream(rng)
    before = rng.state()
    probs = context.probabilities(state)
    i = int(_sample_index(probs, rng.uniform()))
    rng_state = {**before, "position_after": rng.position}
    return MeasurementRecord(
        input_state=state,
        context=context,
        index=i,
        value=context.labels[i],
        post_state=context.vector(i),
        probability=float(probs[i]),
        rng_state=rng_state,
    )


def sample_outcomes(state, context: Context, n: int, rng) -> np.ndarray:
    """``n`` independent outcome indices; consumes the stream like ``n`` calls to measure."""
    state = la.check_state(state)
    probs = context.probabilities(state)
    return _sample_index(probs, as_stream(rng).uniform(n))


def measure_projective(state, projectors: Sequence[la.Projector], rng, labels=None) -> MeasurementRecord:
    """Lüders measurement with a complete family of (possibly degenerate) projectors."""
    state = la.check_state(state)
    rng = as_stream(rng)
    mats = [p.matrix for p in projectors]
    if any(m.shape[0] != state.size for m in mats):
        raise ShapeError("projector and state dimensions differ")
    images = [m @ state for m in mats]
    probs = np.array([np.vdot(v, v).real for v in images])
    if abs(probs.sum() - 1) > la.TOL_ALG:
        raise ValidationError(f"projector family is not complete (Σp = {probs.sum()!r})")
    before = rng.state()
    i = int(_sample_index(probs, rng.uniform()))
    labels = labels if labels is not None else _default_labels(len(mats))
    post = images[i] / np.sqrt(probs[i])
    return MeasurementRecord(
        input_state=state,
        context=tuple(projectors),
        index=i,
        value=tuple(labels[i]),
        post_state=post,
        probability=float(probs[i]),
        rng_state={**before, "position_after": rng.position},
    )


def transform_context(ctx: Context, u, name: str | None = None) -> Context:
    u = la.require_unitary(u)
    if u.shape[0] != ctx.dim:
        raise ShapeError(f"unitary dim {u.shape[0]} != context dim {ctx.dim}")
    return Context(u @ ctx.basis, ctx.labels, ctx.name if name is None else name, ctx.tol)


def extravalent(m1: Modality, m2: Modality, tol: float = la.TOL_ALG) -> bool:
    if m1.dim != m2.dim:
        return False
    return canonical_ray(m1.vector, tol) == canonical_ray(m2.vector, tol)


@dataclass
class ExtravalenceClass:
    representative: la.Projector
    members: list[Modality]


def extravalence_classes(modalities: Sequence[Modality], tol: float = la.TOL_ALG) -> list[ExtravalenceClass]:
    """Partition modalities by their canonical ray, preserving first-seen order."""
    groups: dict[tuple, ExtravalenceClass] = {}
    for m in modalities:
        key = canonical_ray(m.vector, tol)
        if key not in groups:
            groups[key] = ExtravalenceClass(la.Projector.from_vector(canonical_vector(m.vector, tol)), [])
        groups[key].members.append(m)
    return list(groups.values())


def certainty_transfer(m: Modality, ctx2: Context, tol: float = la.TOL_ALG) -> Modality | None:
    """The modality of ``ctx2`` reached from ``m`` with probability 1, if any."""
    if m.dim != ctx2.dim:
        raise ShapeError(f"dimension mismatch: {m.dim} vs {ctx2.dim}")
    probs = ctx2.probabilities(m.vector)
    i = int(np.argmax(probs))
    return Modality(ctx2, i) if probs[i] >= 1 - tol else None


def gram_schmidt_residual(basis_vectors, candidate) -> np.ndarray:
    """Component of ``candidate`` orthogonal to the span of ``basis_vectors``.

    Modified Gram-Schmidt applied twice; the basis rows must be orthonormal.
    """
    r = np.array(candidate, dtype=complex)
    for _ in range(2):
        for b in basis_vectors:
            r = r - np.vdot(b, r) * b
    return r


def orthogonal_completion(vectors, rng=None, tries: int = 16, tol: float = la.TOL_ALG) -> np.ndarray | None:
    """A unit vector orthogonal to the orthonormal rows ``vectors``, or None if they span."""
    vectors = np.atleast_2d(np.asarray(vectors, dtype=complex))
    gen = as_stream(rng).generator
    d = vectors.shape[1]
    for _ in range(tries):
        c = gen.standard_normal(d) + 1j * gen.standard_normal(d)
        r = gram_schmidt_residual(vectors, c / np.linalg.norm(c))
        n = np.linalg.norm(r)
        if n > tol:
            return r / n
    return None


@dataclass
class ExclusivityReport:
    dim: int
    n_candidates: int
    max_residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tol


def assert_exclusivity_bound(ctx: Context, rng=None, n_candidates: int = 100, tol: float = la.TOL_ALG) -> ExclusivityReport:
    """Show that no unit vector survives projection off a full context.

    Random unit candidates are reduced against all ``D`` basis vectors; the
    largest residual norm is reported.
    """
    gen = as_stream(rng).generator
    rows = ctx.basis.T
    worst = 0.0
    for _ in range(n_candidates):
        c = gen.standard_normal(ctx.dim) + 1j * gen.standard_normal(ctx.dim)
        r = gram_schmidt_residual(rows, c / np.linalg.norm(c))
        worst = max(worst, float(np.linalg.norm(r)))
    return ExclusivityReport(ctx.dim, n_candidates, worst, tol)


def random_context(dim: int, rng, labels=None) -> Context:
    gen = as_stream(rng).generator
    return Context(la.random_unitary(dim, gen), labels, name=f"random{dim}")


__all__ = [
    "Context",
    "Modality",
    "MeasurementRecord",
    "ExtravalenceClass",
    "ExclusivityReport",
    "RngStream",
    "canonical_ray",
    "canonical_vector",
    "born_probability",
    "measure",
    "sample_outcomes",
    "measure_projective",
    "transform_context",
    "extravalent",
    "extravalence_classes",
    "certainty_transfer",
    "gram_schmidt_residual",
    "orthogonal_completion",
    "assert_exclusivity_bound",
    "random_context",
]
