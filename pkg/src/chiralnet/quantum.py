"""Density-matrix utilities and two-qubit entanglement/correlation metrics.

Conventions fixed for the whole package:

* single-qubit basis is ``(g, e)``, so ``SIGMA_MINUS |e> = |g>``;
* two-qubit basis is ``|gg>, |ge>, |eg>, |ee>`` with qubit 1 (the upstream
  emitter) as the slower index;
* vectorization is column stacking, ``vec(A rho B^dag) = (B^* kron A) vec(rho)``;
* entropies use the natural logarithm.

All functions accept arrays with leading batch axes where noted.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import DimensionError, StateValidationError

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-8
PSD_TOL = 1e-8
ENTROPY_CUTOFF = 1e-14

SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_PLUS = SIGMA_MINUS.T.copy()
SIGMA_X = SIGMA_MINUS + SIGMA_PLUS
SIGMA_Y = 1j * (SIGMA_MINUS - SIGMA_PLUS)  # physical sigma_y in the (g, e) ordering
SIGMA_Z = np.diag([-1.0, 1.0]).astype(complex)  # +1 on |e>
NUMBER = SIGMA_PLUS @ SIGMA_MINUS
IDENTITY_2 = np.eye(2, dtype=complex)

_YY = np.kron(SIGMA_Y, SIGMA_Y)


def basis_ket(label: str) -> np.ndarray:
    """Product ket from a string of 'g'/'e' characters, e.g. ``'eg'``."""
    local = {"g": np.array([1, 0], complex), "e": np.array([0, 1], complex)}
    try:
        return reduce(np.kron, (local[c] for c in label))
    except KeyError as exc:
        raise ValueError(f"unknown level {exc.args[0]!r} in {label!r}") from None


KET_GG, KET_GE, KET_EG, KET_EE = (basis_ket(s) for s in ("gg", "ge", "eg", "ee"))
BELL_SINGLET = (KET_EG - KET_GE) / np.sqrt(2)
CHI_MINUS = (KET_EG - 1j * KET_GE) / np.sqrt(2)
CHI_PLUS = (KET_EG + 1j * KET_GE) / np.sqrt(2)  # CHI_MINUS with the emitter labels swapped


def projector(ket) -> np.ndarray:
    ket = np.asarray(ket, dtype=complex)
    return np.outer(ket, ket.conj())


def embed(op: np.ndarray, site: int, n_sites: int) -> np.ndarray:
    """Place a 2x2 operator on ``site`` of an ``n_sites`` qubit register."""
    ops = [IDENTITY_2] * n_sites
    ops[site] = op
    return reduce(np.kron, ops)


@dataclass(frozen=True)
class SubsystemSplit:
    """Local dimensions of a composite system and the factors to keep."""

    dims: tuple[int, ...]
    keep: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        keep = tuple(int(k) for k in self.keep)
        if not dims or any(d < 1 for d in dims):
            raise DimensionError("local dimensions must be positive", dims=dims)
        if len(set(keep)) != len(keep) or any(not 0 <= k < len(dims) for k in keep):
            raise DimensionError("keep indices must be distinct and in range", keep=keep)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "keep", tuple(sorted(keep)))

    @property
    def joint_dim(self) -> int:
        return int(np.prod(self.dims))

    @property
    def kept_dim(self) -> int:
        return int(np.prod([self.dims[k] for k in self.keep]))

    def complement(self) -> "SubsystemSplit":
        rest = tuple(k for k in range(len(self.dims)) if k not in self.keep)
        return SubsystemSplit(self.dims, rest)


def pure_state(amplitudes, tol: float = 1e-12) -> np.ndarray:
    psi = np.asarray(amplitudes, dtype=complex).ravel()
    if psi.size == 0 or abs(np.linalg.norm(psi) - 1) > tol:
        raise StateValidationError("pure state must have unit norm", norm=float(np.linalg.norm(psi)))
    return psi


def _check_square(rho: np.ndarray) -> None:
    if rho.ndim < 2 or rho.shape[-1] != rho.shape[-2]:
        raise DimensionError("density matrix must be square", shape=rho.shape)


def validate_density_matrix(
    rho,
    *,
    normalized: bool = True,
    herm_tol: float = HERMITICITY_TOL,
    trace_tol: float = TRACE_TOL,
    psd_tol: float = PSD_TOL,
) -> np.ndarray:
    """Return ``rho`` as a complex array after checking the state invariants.

    ``normalized=False`` skips the unit-trace check (lossy or drifting states).
    """
    rho = np.asarray(rho, dtype=complex)
    _check_square(rho)
    herm_err = np.max(np.abs(rho - np.swapaxes(rho, -1, -2).conj()), initial=0.0)
    if herm_err > herm_tol:
        raise StateValidationError("state is not Hermitian", max_deviation=float(herm_err))
    if normalized:
        tr_err = np.max(np.abs(np.trace(rho, axis1=-2, axis2=-1) - 1), initial=0.0)
        if tr_err > trace_tol:
            raise StateValidationError("state trace differs from 1", max_deviation=float(tr_err))
    lowest = np.min(np.linalg.eigvalsh(_hermitian_part(rho)), initial=np.inf)
    if lowest < -psd_tol:
        raise StateValidationError("state has a negative eigenvalue", min_eigenvalue=float(lowest))
    return rho


def _hermitian_part(rho: np.ndarray) -> np.ndarray:
    return 0.5 * (rho + np.swapaxes(rho, -1, -2).conj())


def clipped_eigh(rho, psd_tol: float = PSD_TOL):
    """Eigen-decomposition with small negative eigenvalues clipped to zero.

    Eigenvalues below ``-psd_tol`` raise; they indicate an integrator problem
    rather than round-off.
    """
    evals, evecs = np.linalg.eigh(_hermitian_part(np.asarray(rho, dtype=complex)))
    lowest = np.min(evals, initial=np.inf)
    if lowest < -psd_tol:
        raise StateValidationError("state has a negative eigenvalue", min_eigenvalue=float(lowest))
    return np.clip(evals, 0.0, None), evecs


def partial_trace(rho, split: SubsystemSplit) -> np.ndarray:
    """Reduced state on ``split.keep`` (kept factors stay in ascending order)."""
    rho = np.asarray(rho, dtype=complex)
    _check_square(rho)
    if rho.shape[-1] != split.joint_dim:
        raise DimensionError(
            "split does not match state dimension", state_dim=rho.shape[-1], split_dim=split.joint_dim
        )
    n = len(split.dims)
    batch = rho.shape[:-2]
    t = rho.reshape(batch + split.dims + split.dims)
    nb = len(batch)
    ket = list(range(nb, nb + n))
    bra = list(range(nb + n, nb + 2 * n))
    for k in range(n):
        if k not in split.keep:
            bra[k] = ket[k]  # shared label contracts the factor
    out = list(range(nb)) + [ket[k] for k in split.keep] + [bra[k] for k in split.keep]
    reduced = np.einsum(t, list(range(nb)) + ket + bra, out)
    return reduced.reshape(batch + (split.kept_dim, split.kept_dim))


def concurrence(rho, psd_tol: float = PSD_TOL):
    """Wootters concurrence of a two-qubit state (batched over leading axes).

    The square-rooted eigenvalues of ``rho (YY) rho^* (YY)`` are obtained as
    singular values of ``sqrt(rho) (YY) sqrt(rho)^*``, which is better
    conditioned near rank-deficient states.
    """
    rho = validate_density_matrix(rho, normalized=False, psd_tol=psd_tol)
    if rho.shape[-1] != 4:
        raise DimensionError("concurrence needs a 4x4 state", shape=rho.shape)
    evals, evecs = clipped_eigh(rho, psd_tol)
    root = (evecs * np.sqrt(evals)[..., None, :]) @ np.swapaxes(evecs, -1, -2).conj()
    lam = np.linalg.svd(root @ _YY @ root.conj(), compute_uv=False)
    value = np.maximum(0.0, lam[..., 0] - lam[..., 1] - lam[..., 2] - lam[..., 3])
    return float(value) if np.ndim(value) == 0 else value


def state_fidelity(rho, target):
    """Overlap ``<target|rho|target>`` with a pure target (batched over rho)."""
    rho = np.asarray(rho, dtype=complex)
    psi = pure_state(target)
    if rho.shape[-1] != psi.size:
        raise DimensionError("target and state dimensions differ", state_dim=rho.shape[-1], target_dim=psi.size)
    value = np.einsum("i,...ij,j->...", psi.conj(), rho, psi).real
    return float(value) if np.ndim(value) == 0 else value


def von_neumann_entropy(rho, psd_tol: float = PSD_TOL) -> float:
    evals, _ = clipped_eigh(rho, psd_tol)
    evals = evals[evals > ENTROPY_CUTOFF]
    return float(-np.sum(evals * np.log(evals)))


def mutual_information(rho, split: SubsystemSplit) -> float:
    """``S(A) + S(B) - S(AB)`` with A the kept factors and B the rest."""
    rho = validate_density_matrix(rho)
    if rho.shape[-1] != split.joint_dim:
        raise DimensionError("split does not match state dimension")
    rho_a = partial_trace(rho, split)
    rho_b = partial_trace(rho, split.complement())
    return von_neumann_entropy(rho_a) + von_neumann_entropy(rho_b) - von_neumann_entropy(rho)


def trace_distance(rho1, rho2):
    """Half the trace norm of the difference (batched)."""
    a, b = np.asarray(rho1, dtype=complex), np.asarray(rho2, dtype=complex)
    if a.shape[-2:] != b.shape[-2:]:
        raise DimensionError("states have different dimensions", shapes=(a.shape, b.shape))
    value = 0.5 * np.linalg.svd(a - b, compute_uv=False).sum(axis=-1)
    return float(value) if np.ndim(value) == 0 else value


def trace_distance_correlation(rho, split: SubsystemSplit) -> float:
    """Distance between a bipartite state and the product of its marginals.

    The product is assembled in the original factor ordering, so any subset
    ``keep`` is allowed.
    """
    rho = validate_density_matrix(rho, normalized=False)
    if rho.shape[-1] != split.joint_dim:
        raise DimensionError("split does not match state dimension")
    rest = split.complement()
    prod = np.kron(partial_trace(rho, split), partial_trace(rho, rest))
    # kron above orders factors as keep+rest; permute back to the native order
    order = list(split.keep) + list(rest.keep)
    dims = [split.dims[k] for k in order]
    n = len(dims)
    inverse = np.argsort(order)
    prod = prod.reshape(dims + dims).transpose(list(inverse) + [n + i for i in inverse])
    return trace_distance(rho, prod.reshape(rho.shape))


def vectorize(rho) -> np.ndarray:
    """Column-stacked vector of a matrix (batched over leading axes)."""
    rho = np.asarray(rho, dtype=complex)
    return np.swapaxes(rho, -1, -2).reshape(rho.shape[:-2] + (-1,))


def devectorize(vec) -> np.ndarray:
    vec = np.asarray(vec, dtype=complex)
    dim = int(round(np.sqrt(vec.shape[-1])))
    if dim * dim != vec.shape[-1]:
        raise DimensionError("vector length is not a perfect square", length=vec.shape[-1])
    return np.swapaxes(vec.reshape(vec.shape[:-1] + (dim, dim)), -1, -2)


def superop_sandwich(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Matrix of ``rho -> left @ rho @ right`` acting on column-stacked vectors."""
    return np.kron(np.asarray(right).T, np.asarray(left))
