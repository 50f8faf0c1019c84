"""
Many small changes and vanishing overlaps
=========================================

Two product states that differ a little on every site have an overlap that
decays geometrically. A bounded number of changes (or changes that shrink
fast enough) keeps the states comparable; changes on every site do not.
The same product of overlaps sets how fast a system's coherence leaks into
an environment of qubits.
"""

import math

import numpy as np

from csmlab import itp

# uniform overlap 0.9 per site: how many sites until the overlap is below 1e-6?
psi, phi = itp.uniform_pair(0.9, 500)
res = itp.minimal_m_for_epsilon(psi, phi, 1e-6)
print("sites needed:", res.m, "| log estimate:", math.ceil(math.log(1e-6) / math.log(0.9)))

# any local operator is squeezed by the same factor
a = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
seq = itp.suppression_sequence(a, [0], *itp.uniform_pair(0.9, 200), [1, 10, 50, 200])
print("|<psi|A|phi>| restricted to 1, 10, 50, 200 sites:", np.array2string(seq, precision=3))

# three profiles of per-site change
profiles = {
    "constant 0.9": [0.9] * 500,
    "1 - 1/a^2": [1 - 1 / k**2 for k in range(1, 501)],
    "1 - 1/a": [1 - 1 / k for k in range(1, 501)],
}
for name, overlaps in profiles.items():
    rep = itp.sector_classify(*itp.product_pair(overlaps))
    print(f"{name:14s} S_N = {rep.s_n:8.3f}  -> {rep.classification}")

# decoherence: a system qubit imprints itself on N environment qubits
theta = math.acos(0.9)
sweep = itp.decoherence_sweep(theta, [1, 4, 16, 100, 400])
for n, rel, reps, how in zip(sweep.n_values, sweep.relative_coherence, sweep.repetitions, sweep.method):
    print(f"N={n:4d}  relative coherence {rel:.3e}  repetitions to resolve {reps:.1e}  ({how})")
