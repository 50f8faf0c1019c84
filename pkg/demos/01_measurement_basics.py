"""
Contexts, modalities and the Born rule
======================================

A context is an orthonormal basis; measuring in it realizes exactly one
modality. Repeating the measurement reproduces that modality with certainty,
and a basis change is all that separates two contexts.
"""

import numpy as np

from csmlab import csm
from csmlab import linalg as la
from csmlab.rng import RngStream

rng = RngStream(2024)

# a qubit prepared along +x, measured in the z basis
z = csm.Context.computational(2, labels=(1, -1), name="z")
plus = la.ket([1, 1])
print("P(z outcomes | +x):", z.probabilities(plus))

# sample many times: frequencies approach 1/2 each
idx = csm.sample_outcomes(plus, z, 20_000, rng)
print("observed frequencies:", np.bincount(idx, minlength=2) / idx.size)

# one measurement, then immediate repeats of the same context
rec = csm.measure(plus, z, rng)
print("first outcome:", rec.value, "with probability", rec.probability)
repeats = [csm.measure(rec.post_state, z, rng).value for _ in range(10)]
print("ten repeats:", repeats)

# the x basis is a different context; +x is certain there
x = csm.Context.from_vectors([[1, 1], [1, -1]], labels=(1, -1), name="x")
print("P(x outcomes | +x):", x.probabilities(plus))

# no third ray fits into a qubit context
rep = csm.assert_exclusivity_bound(z, rng)
print(f"largest residual of a candidate third ray: {rep.max_residual:.1e}")

# modalities linked with certainty across contexts share one ray; a phase
# rotation changes the basis vectors but not the rays
zphase = csm.transform_context(z, np.diag([1, 1j]), name="z-phase")
classes = csm.extravalence_classes(z.modalities + x.modalities + zphase.modalities)
for c in classes:
    print("class:", [f"{m.context.name}[{m.index}]" for m in c.members])
