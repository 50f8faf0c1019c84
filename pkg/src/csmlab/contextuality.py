"""Kochen-Specker obstruction: no 0/1 valuation of rays fits every context.

A valuation assigns 0 or 1 to each ray so that every context (a complete
orthogonal group of rays) contains exactly one ray valued 1. Rays shared by
several contexts get a single value. :func:`assignment_search` decides by
exhaustive backtracking whether such a valuation exists.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import linalg as la
from .csm import canonical_ray
from .errors import CSMError, ValidationError
from .rng import as_stream


class KSMismatchError(CSMError):
    """verify_ks was given a ray set that does admit a valuation."""

    def __init__(self, message, assignment):
        super().__init__(message)
        self.assignment = assignment


@dataclass(frozen=True, eq=False)
class RaySet:
    dim: int
    rays: np.ndarray  # (n_rays, dim), unit rows
    contexts: tuple[tuple[int, ...], ...]
    tol: float = field(default=la.TOL_ALG, repr=False)

    def __post_init__(self):
        rays = np.array(self.rays, dtype=complex)
        if rays.ndim != 2 or rays.shape[1] != self.dim:
            raise ValidationError(f"rays must have shape (n, {self.dim}), got {rays.shape}")
        norms = np.linalg.norm(rays, axis=1)
        if np.any(np.abs(norms - 1) > self.tol):
            raise ValidationError("rays must be unit vectors")
        keys = [canonical_ray(r, self.tol) for r in rays]
        if len(set(keys)) != len(keys):
            raise ValidationError("duplicate rays (equal up to phase)")
        contexts = tuple(tuple(int(i) for i in c) for c in self.contexts)
        for ci, c in enumerate(contexts):
            if len(c) != self.dim or len(set(c)) != self.dim:
                raise ValidationError(f"context {ci} must hold {self.dim} distinct rays")
            if any(not 0 <= i < len(rays) for i in c):
                raise ValidationError(f"context {ci} references a missing ray")
            report = la.validate_projector_family([np.outer(rays[i], rays[i].conj()) for i in c], self.dim, self.tol)
            if not report.ok:
                raise ValidationError(f"context {ci} is not a complete orthogonal family: {report.failures}")
        rays.setflags(write=False)
        object.__setattr__(self, "rays", rays)
        object.__setattr__(self, "contexts", contexts)

    @classmethod
    def from_vectors(cls, dim: int, groups: Sequence[Sequence], tol: float = la.TOL_ALG) -> "RaySet":
        """Build from contexts given as lists of (unnormalized) vectors; shared rays are merged."""
        rays, index, contexts = [], {}, []
        for group in groups:
            ids = []
            for v in group:
                v = la.ket(v)
                key = canonical_ray(v, tol)
                if key not in index:
                    index[key] = len(rays)
                    rays.append(v)
                ids.append(index[key])
            contexts.append(tuple(ids))
        return cls(dim, np.array(rays), tuple(contexts), tol)

    @property
    def n_rays(self) -> int:
        return self.rays.shape[0]

    def subset(self, context_ids: Sequence[int]) -> "RaySet":
        """Keep only the listed contexts (rays are renumbered, unused ones dropped)."""
        chosen = [self.contexts[i] for i in context_ids]
        used = sorted({r for c in chosen for r in c})
        remap = {old: new for new, old in enumerate(used)}
        return RaySet(self.dim, self.rays[used], tuple(tuple(remap[r] for r in c) for c in chosen), self.tol)

    def max_orthogonality_error(self) -> float:
        worst = 0.0
        for c in self.contexts:
            g = self.rays[list(c)].conj() @ self.rays[list(c)].T
            worst = max(worst, float(np.max(np.abs(g - np.eye(self.dim)))))
        return worst

    def to_json(self) -> str:
        rays = [[[float(z.real), float(z.imag)] for z in r] for r in self.rays]
        return json.dumps({"dim": self.dim, "rays": rays, "contexts": [list(c) for c in self.contexts]})

    @classmethod
    def from_json(cls, text: str) -> "RaySet":
        data = json.loads(text)
        try:
            rays = np.array([[complex(re, im) for re, im in r] for r in data["rays"]], dtype=complex)
            return cls(int(data["dim"]), rays, tuple(tuple(c) for c in data["contexts"]))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"malformed RaySet JSON: {exc}") from exc

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "RaySet":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def cabello_18() -> RaySet:
    """The 18-ray, 9-context set in dimension 4; every ray lies in two contexts."""
    groups = [
        ["0001", "0010", "1100", "1m00"],
        ["0001", "0100", "1010", "10m0"],
        ["1m1m", "1mm1", "1100", "0011"],
        ["1m1m", "1111", "10m0", "010m"],
        ["0010", "0100", "1001", "100m"],
        ["1mm1", "1111", "100m", "01m0"],
        ["11m1", "111m", "1m00", "0011"],
        ["11m1", "m111", "1010", "010m"],
        ["111m", "m111", "1001", "01m0"],
    ]
    digit = {"0": 0.0, "1": 1.0, "m": -1.0}
    vecs = [[[digit[ch] for ch in code] for code in g] for g in groups]
    return RaySet.from_vectors(4, vecs)


@dataclass
class AssignmentResult:
    status: str  # "found" or "none-exists"
    assignment: dict[int, int] | None
    nodes: int
    complete: bool
    trace_hash: str


def _search(n_rays: int, contexts, order: Sequence[int]):
    ray_ctx = [[] for _ in range(n_rays)]
    for ci, c in enumerate(contexts):
        for r in c:
            ray_ctx[r].append(ci)
    ones = [0] * len(contexts)
    unset = [len(c) for c in contexts]
    values = [-1] * n_rays
    h = hashlib.sha256()
    nodes = 0

    def consistent(r):
        for ci in ray_ctx[r]:
            if ones[ci] > 1 or (unset[ci] == 0 and ones[ci] == 0):
                return False
        return True

    def assign(r, v, delta):
        for ci in ray_ctx[r]:
            ones[ci] += v * delta
            unset[ci] -= delta

    def rec(depth):
        nonlocal nodes
        if depth == len(order):
            return True
        r = order[depth]
        if not ray_ctx[r]:
            values[r] = 0
            if rec(depth + 1):
                return True
            values[r] = -1
            return False
        for v in (0, 1):
            nodes += 1
            values[r] = v
            assign(r, v, 1)
            ok = consistent(r)
            h.update(f"{r}={v}{'+' if ok else '-'};".encode())
            if ok and rec(depth + 1):
                return True
            assign(r, v, -1)
            values[r] = -1
        return False

    found = rec(0)
    return found, values, nodes, h.hexdigest()


def assignment_search(rayset: RaySet, order: Sequence[int] | None = None) -> AssignmentResult:
    """Complete backtracking over 0/1 ray values with exactly-one-per-context.

    Rays are branched in ``order`` (ascending index by default), value 0
    before 1, so the default returns the lexicographically first valuation.
    """
    order = list(range(rayset.n_rays)) if order is None else [int(i) for i in order]
    if sorted(order) != list(range(rayset.n_rays)):
        raise ValidationError("order must be a permutation of the ray indices")
    found, values, nodes, digest = _search(rayset.n_rays, rayset.contexts, order)
    if found:
        return AssignmentResult("found", dict(enumerate(values)), nodes, True, digest)
    return AssignmentResult("none-exists", None, nodes, True, digest)


def check_assignment(rayset: RaySet, assignment: dict[int, int]) -> list[str]:
    """Independent post-hoc check; returns a list of violations (empty if valid)."""
    problems = []
    for r in range(rayset.n_rays):
        if assignment.get(r) not in (0, 1):
            problems.append(f"ray {r} has no 0/1 value")
    for ci, c in enumerate(rayset.contexts):
        total = sum(assignment.get(r, 0) for r in c)
        if total != 1:
            problems.append(f"context {ci} has {total} rays valued 1")
    return problems


def randomized_search(rayset: RaySet, rng) -> AssignmentResult:
    order = as_stream(rng).generator.permutation(rayset.n_rays)
    return assignment_search(rayset, order)


@dataclass
class KSCertificate:
    dim: int
    contexts: tuple[tuple[int, ...], ...]
    rays: np.ndarray
    nodes: int
    trace_hash: str

    @property
    def text(self) -> str:
        lines = [
            f"Kochen-Specker certificate: {len(self.rays)} rays, {len(self.contexts)} contexts, dim {self.dim}",
            "Each context below must contain exactly one ray valued 1:",
        ]
        for ci, c in enumerate(self.contexts):
            lines.append(f"  C{ci}: rays {list(c)}")
        lines.append("Rays:")
        for ri, r in enumerate(self.rays):
            comps = " ".join(_fmt(z) for z in r)
            lines.append(f"  r{ri}: ({comps})")
        lines.append(f"Exhaustive search: no valuation exists; {self.nodes} nodes explored.")
        lines.append(f"Search trace sha256: {self.trace_hash}")
        return "\n".join(lines)

    def __str__(self):
        return self.text


def _fmt(z: complex) -> str:
    if abs(z.imag) < 1e-15:
        return f"{z.real:+.6f}"
    return f"{z.real:+.6f}{z.imag:+.6f}j"


def verify_ks(rayset: RaySet) -> KSCertificate:
    """Certificate that ``rayset`` admits no valuation; raises KSMismatchError otherwise.

    The search is run twice and both traces must hash identically.
    """
    first = assignment_search(rayset)
    if first.status == "found":
        raise KSMismatchError(
            f"ray set admits a valuation: {first.assignment}", first.assignment
        )
    replay = assignment_search(rayset)
    if replay.status != "none-exists" or replay.trace_hash != first.trace_hash:
        raise CSMError("search replay did not reproduce the first run")
    return KSCertificate(rayset.dim, rayset.contexts, rayset.rays, first.nodes, first.trace_hash)
