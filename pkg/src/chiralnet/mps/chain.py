"""Linear-chain layout of the two plaquette emitters for tensor-network runs.

Emitter ``n`` sits between chain sites ``n-1`` and ``n+1`` (its plaquette
feet); a next-nearest-neighbour bypass of strength ``J_B`` joins the feet.
Sites 0 and N-1 absorb outgoing magnons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError


@dataclass(frozen=True)
class ChainModel:
    detunings: np.ndarray
    drives: np.ndarray
    nn: np.ndarray  # bond i couples sites i and i+1
    nnn: np.ndarray  # bond i couples sites i and i+2
    losses: np.ndarray
    emitters: tuple[int, int]

    @property
    def n_sites(self) -> int:
        return len(self.detunings)

    def separation(self) -> int:
        """Plaquette separation in bath-site units (1 when the two plaquettes share a foot)."""
        return self.emitters[1] - self.emitters[0] - 1


def build_chain_model(
    n_sites: int = 16,
    emitters: tuple[int, int] = (3, 13),
    hopping: float = 1.0,
    g: tuple[float, float] = (0.14, 0.30),
    phi: tuple[float, float] = (math.pi / 4, math.pi / 4),
    edge_loss: float | None = None,
    drives: tuple[complex, complex] = (0.063, 0.0),
    detunings: tuple[float, float] = (0.0, 0.0),
) -> ChainModel:
    """Chain with two plaquettes; ``edge_loss`` defaults to ``2 * hopping``."""
    n1, n2 = emitters
    if not (1 <= n1 and n1 + 2 <= n2 and n2 <= n_sites - 2):
        raise ParameterError(
            "emitters need a foot on each side inside the chain and n1 + 2 <= n2",
            n_sites=n_sites, emitters=emitters,
        )
    if hopping <= 0 or min(g) < 0:
        raise ParameterError("hopping must be positive and couplings non-negative", hopping=hopping, g=g)
    edge_loss = 2 * hopping if edge_loss is None else edge_loss
    nn = np.full(n_sites - 1, hopping, dtype=complex)
    nnn = np.zeros(n_sites - 2, dtype=complex)
    for n, gk, pk in zip(emitters, g, phi):
        nn[n - 1] = nn[n] = gk * np.exp(-1j * pk)
        nnn[n - 1] = hopping
    losses = np.zeros(n_sites)
    losses[0] = losses[-1] = edge_loss
    det = np.zeros(n_sites)
    drv = np.zeros(n_sites, dtype=complex)
    for n, w, delta in zip(emitters, drives, detunings):
        drv[n] = w
        det[n] = delta
    return ChainModel(det, drv, nn, nnn, losses, (n1, n2))
