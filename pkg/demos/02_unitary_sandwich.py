"""
Turning a prepared state into a certain outcome
===============================================

Undo the preparation, make an irreversible check, redo the preparation.
The check then succeeds with certainty and the state is restored. Three
examples: a displaced oscillator, a Bell pair, and a small qubit register.
"""

import numpy as np

from csmlab import protocols as proto
from csmlab.rng import RngStream

rng = RngStream(7)

# coherent state |alpha=2>: shift back to vacuum and count photons
space = proto.FockSpace(40)
rep = proto.sandwich_measure_coherent(2.0, space, rng)
print(f"coherent: P(zero photons) = {rep.certainty_probability:.12f}, "
      f"recovery fidelity = {rep.recovery_fidelity:.12f}")
print("cutoff needed for alpha=3:", proto.required_n_max(3.0))

# Bell pairs: CNOT then Hadamard maps each onto a computational basis state
for name, state in proto.bell_states().items():
    rep = proto.bell_measure_sandwich(state, rng)
    print(f"{name:5s} -> outcome {rep.record.index:02b}  P = {rep.certainty_probability:.3f}")

# a product input is not a Bell state: two outcomes, each with probability 1/2
rep = proto.bell_measure_sandwich(np.array([0, 1, 0, 0], dtype=complex), rng)
print("|01> gives", rep.label, "with P =", round(rep.certainty_probability, 3))

# an 8-qubit register prepared by a random brickwork circuit
k = 8
u = proto.random_layered_unitary(k, 4, rng)
good = proto.register_check_sandwich(u[:, 0], u, rng)
bad = proto.register_check_sandwich(u @ proto.register_basis_state(k, [1] + [0] * (k - 1)), u, rng)
print(f"register: pass probability {good.certainty_probability:.3f} on the prepared state, "
      f"{bad.certainty_probability:.1e} with the first qubit flipped")
