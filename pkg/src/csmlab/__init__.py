"""Numerical laboratory for contexts, systems and modalities.

Submodules: :mod:`linalg` (dense complex algebra), :mod:`csm` (contexts,
modalities, measurement), :mod:`protocols` (sandwich measurements),
:mod:`itp` (finite-N product-state sectors and decoherence),
:mod:`contextuality` (Kochen-Specker search) and :mod:`experiments`
(config-driven runs, also exposed as the ``csmlab`` command).
"""

__version__ = "0.1.0"
