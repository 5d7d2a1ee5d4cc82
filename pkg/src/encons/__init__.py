"""Privacy-preserving average consensus for double-integrator agents.

The package splits into a cryptographic layer (:mod:`encons.paillier`), the
network and closed-loop dynamics (:mod:`encons.graph`, :mod:`encons.dynamics`),
the encrypted exchange protocol (:mod:`encons.protocol`), observers that try
to reconstruct private initial states from message transcripts
(:mod:`encons.adversary`), and a scenario harness with CSV/figure reporting
(:mod:`encons.harness`, :mod:`encons.report`, :mod:`encons.cli`).
"""

__version__ = "0.1.0"
