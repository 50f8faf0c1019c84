"""Seedable, splittable random streams with a visible position counter."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class RngStream:
    """A PCG64 stream identified by ``(seed, spawn_key)``.

    Every uniform variate drawn through :meth:`uniform` advances ``position`` by
    one, so a measurement record can state exactly where in the stream it
    sampled. Children obtained with :meth:`spawn` are statistically independent
    and deterministic given the parent identity.
    """

    seed: int
    spawn_key: tuple[int, ...] = ()
    position: int = 0
    _gen: np.random.Generator = field(init=False, repr=False)
    _n_children: int = field(default=0, init=False, repr=False)

    def __post_init__(self):
        ss = np.random.SeedSequence(self.seed, spawn_key=self.spawn_key)
        self._gen = np.random.Generator(np.random.PCG64(ss))
        if self.position:
            # fast-forward so that a stream can be rebuilt from a record
            n = self.position
            self.position = 0
            self.uniform(n)

    def uniform(self, size: int | None = None):
        n = 1 if size is None else int(size)
        out = self._gen.random(n)
        self.position += n
        return float(out[0]) if size is None else out

    @property
    def generator(self) -> np.random.Generator:
        """Raw generator for non-uniform draws (random unitaries, candidates).

        Draws taken here are not counted in ``position``.
        """
        return self._gen

    def spawn(self, n: int) -> list["RngStream"]:
        start = self._n_children
        self._n_children += n
        return [RngStream(self.seed, self.spawn_key + (start + i,)) for i in range(n)]

    def state(self) -> dict:
        return {"seed": self.seed, "spawn_key": list(self.spawn_key), "position": self.position}


def as_stream(rng) -> RngStream:
    """Accept an RngStream, an integer seed, or None (seed 0)."""
    if isinstance(rng, RngStream):
        return rng
    if rng is None:
        return RngStream(0)
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng))
    raise TypeError(f"expected RngStream or int seed, got {type(rng).__name__}")
