"""Transient entanglement of driven emitters on chiral channels.

Engines: Born-Markov master equation (:mod:`.markov`, :mod:`.analytic`),
time-convolutionless dynamics over a spin-chain bath (:mod:`.bath`,
:mod:`.tcl2`), Liouville-space tensor networks (:mod:`.mps`) and disorder
studies (:mod:`.robustness`).
"""

__version__ = "0.1.0"
