"""Truncated-Fock-space operator algebra.

Ladder operators, coherent states and expectation values on a Hilbert
space truncated at ``n_max`` Fock levels, plus the column-stacking
vectorization helpers used by the superoperator solvers.

Conventions:
    a |n> = sqrt(n) |n-1>,   coherent components c_n = e^{-|mu|^2/2} mu^n / sqrt(n!).

All factorials are evaluated through cumulative log-gamma so coherent
amplitudes stay finite well past n = 170.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import gammaln

from .errors import DimensionError, StateValidationError, TruncationError

# Operators at or below this dimension are stored dense, above it sparse.
DENSE_DIM_LIMIT = 64

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-10
POSITIVITY_TOL = 1e-8

# Default truncation-adequacy guard for coherent states: |mu|^2 <= ratio * n_max.
COHERENT_FILL_RATIO = 0.5


def _materialize(m: sp.spmatrix, dim: int):
    """Apply the dense/sparse storage rule."""
    return m.toarray() if dim <= DENSE_DIM_LIMIT else m.tocsr()


@dataclass(frozen=True)
class FockOperator:
    """A single-mode operator on the truncated Fock basis.

    ``entries`` is a dense complex array for small dimensions and a CSR
    matrix above ``DENSE_DIM_LIMIT``; both paths expose the same API.
    """

    dim: int
    entries: object  # np.ndarray or scipy sparse matrix

    def __post_init__(self):
        if self.dim < 2:
            raise DimensionError(f"Fock dimension must be >= 2, got {self.dim}")
        if self.entries.shape != (self.dim, self.dim):
            raise DimensionError(
                f"entries shape {self.entries.shape} does not match dim {self.dim}"
            )
        data = np.asarray(
            self.entries.data if sp.issparse(self.entries) else self.entries
        )
        if not (np.all(np.isfinite(data.real)) and np.all(np.isfinite(data.imag))):
            raise StateValidationError("operator entries must be finite")

    def dense(self) -> np.ndarray:
        if sp.issparse(self.entries):
            return self.entries.toarray()
        return self.entries

    def sparse(self) -> sp.csr_matrix:
        if sp.issparse(self.entries):
            return self.entries.tocsr()
        return sp.csr_matrix(self.entries)

    def dag(self) -> "FockOperator":
        return FockOperator(self.dim, self.entries.conj().T)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        diff = self.entries - self.entries.conj().T
        if sp.issparse(diff):
            return diff.count_nonzero() == 0 or abs(diff).max() < tol
        return np.max(np.abs(diff)) < tol


def annihilation(n_max: int) -> FockOperator:
    """Ladder operator a with entry (n-1, n) = sqrt(n)."""
    if n_max < 2:
        raise DimensionError(f"n_max must be >= 2, got {n_max}")
    m = sp.diags(np.sqrt(np.arange(1, n_max)), 1, format="csr", dtype=complex)
    return FockOperator(n_max, _materialize(m, n_max))


def creation(n_max: int) -> FockOperator:
    return annihilation(n_max).dag()


def number_operator(n_max: int) -> FockOperator:
    if n_max < 2:
        raise DimensionError(f"n_max must be >= 2, got {n_max}")
    m = sp.diags(np.arange(n_max, dtype=float).astype(complex), 0, format="csr")
    return FockOperator(n_max, _materialize(m, n_max))


# ---------------------------------------------------------------------------
# Coherent states
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoherentStateVector:
    """Truncated coherent state |mu> with components c_n = e^{-|mu|^2/2} mu^n/sqrt(n!)."""

    amplitude: complex
    dim: int
    components: np.ndarray = field(repr=False)

    @property
    def leakage(self) -> float:
        """Probability weight lost to the truncated Fock tail, 1 - ||c||^2."""
        return 1.0 - float(np.vdot(self.components, self.components).real)


def coherent_components(mu: complex, dim: int) -> np.ndarray:
    """Truncated coherent-state amplitudes, no adequacy guard.

    Stable for arbitrary |mu|: magnitudes go through logs, so components
    simply underflow to zero far from the Poisson peak.
    """
    if dim < 2:
        raise DimensionError(f"dim must be >= 2, got {dim}")
    mu = complex(mu)
    if mu == 0:
        c = np.zeros(dim, dtype=complex)
        c[0] = 1.0
        return c
    n = np.arange(dim)
    log_mag = -0.5 * abs(mu) ** 2 + n * math.log(abs(mu)) - 0.5 * gammaln(n + 1.0)
    phase = np.angle(mu)
    return np.exp(log_mag) * np.exp(1j * n * phase)


def coherent_state(
    mu: complex, n_max: int, fill_ratio: float = COHERENT_FILL_RATIO
) -> CoherentStateVector:
    """Guarded coherent-state constructor.

    Rejects amplitudes with |mu|^2 > fill_ratio * n_max, since the Poisson
    photon distribution then presses against the cutoff.
    """
    mu = complex(mu)
    if abs(mu) ** 2 > fill_ratio * n_max:
        required = int(math.ceil(abs(mu) ** 2 / fill_ratio)) + 1
        raise TruncationError(
            f"|mu|^2 = {abs(mu)**2:.3g} exceeds {fill_ratio} * n_max = "
            f"{fill_ratio * n_max:.3g}; need n_max >= {required}",
            required_n_max=required,
        )
    return CoherentStateVector(mu, n_max, coherent_components(mu, n_max))


# ---------------------------------------------------------------------------
# Density matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DensityMatrix:
    """Validated density matrix on the truncated Fock basis."""

    dim: int
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        rho = self.entries
        if rho.shape != (self.dim, self.dim):
            raise DimensionError(
                f"entries shape {rho.shape} does not match dim {self.dim}"
            )
        if not (np.all(np.isfinite(rho.real)) and np.all(np.isfinite(rho.imag))):
            raise StateValidationError("density matrix entries must be finite")
        herm = np.max(np.abs(rho - rho.conj().T))
        if herm > HERMITICITY_TOL:
            raise StateValidationError(f"hermiticity violation {herm:.3e}")
        tr = np.trace(rho)
        if abs(tr - 1.0) > TRACE_TOL:
            raise StateValidationError(f"trace deviates from 1 by {abs(tr-1.0):.3e}")
        lam_min = float(np.linalg.eigvalsh((rho + rho.conj().T) / 2).min())
        if lam_min < -POSITIVITY_TOL:
            raise StateValidationError(f"negative eigenvalue {lam_min:.3e}")

    @staticmethod
    def vacuum(dim: int) -> "DensityMatrix":
        rho = np.zeros((dim, dim), dtype=complex)
        rho[0, 0] = 1.0
        return DensityMatrix(dim, rho)

    @staticmethod
    def fock(dim: int, n: int) -> "DensityMatrix":
        if not 0 <= n < dim:
            raise DimensionError(f"Fock level {n} outside [0, {dim})")
        rho = np.zeros((dim, dim), dtype=complex)
        rho[n, n] = 1.0
        return DensityMatrix(dim, rho)

    @staticmethod
    def coherent(mu: complex, dim: int) -> "DensityMatrix":
        c = coherent_components(mu, dim)
        c = c / np.linalg.norm(c)
        return DensityMatrix(dim, np.outer(c, c.conj()))

    @staticmethod
    def thermal(nbar: float, dim: int) -> "DensityMatrix":
        if nbar < 0:
            raise StateValidationError("mean occupation must be >= 0")
        n = np.arange(dim)
        p = (nbar / (1.0 + nbar)) ** n / (1.0 + nbar) if nbar > 0 else (n == 0) * 1.0
        p = p / p.sum()
        return DensityMatrix(dim, np.diag(p.astype(complex)))

    @staticmethod
    def maximally_mixed(dim: int) -> "DensityMatrix":
        return DensityMatrix(dim, np.eye(dim, dtype=complex) / dim)


def expectation(rho: DensityMatrix, op: FockOperator) -> complex:
    """tr(rho O).  For Hermitian O the imaginary part must stay below 1e-10."""
    if rho.dim != op.dim:
        raise DimensionError(f"dimension mismatch: state {rho.dim}, operator {op.dim}")
    if sp.issparse(op.entries):
        val = complex(np.trace(op.entries @ rho.entries))
    else:
        val = complex(np.einsum("ij,ji->", rho.entries, op.entries))
    if op.is_hermitian() and abs(val.imag) > 1e-10:
        raise StateValidationError(
            f"expectation of Hermitian operator has imaginary part {val.imag:.3e}"
        )
    return val


def mean_photon_number(rho: DensityMatrix) -> float:
    return expectation(rho, number_operator(rho.dim)).real


def mean_amplitude(rho: DensityMatrix) -> complex:
    return expectation(rho, annihilation(rho.dim))


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """-tr(rho ln rho) in nats, truncation noise clipped at zero."""
    lam = np.linalg.eigvalsh((rho.entries + rho.entries.conj().T) / 2)
    lam = np.clip(lam.real, 0.0, None)
    lam = lam[lam > 0]
    return float(-(lam * np.log(lam)).sum())


def trace_distance(rho1: DensityMatrix, rho2: DensityMatrix) -> float:
    """(1/2) ||rho1 - rho2||_1."""
    if rho1.dim != rho2.dim:
        raise DimensionError("dimension mismatch")
    diff = rho1.entries - rho2.entries
    lam = np.linalg.eigvalsh((diff + diff.conj().T) / 2)
    return 0.5 * float(np.abs(lam).sum())


# ---------------------------------------------------------------------------
# Vectorization (column stacking: vec(A X B) = (B^T kron A) vec(X))
# ---------------------------------------------------------------------------

def vectorize(mat: np.ndarray) -> np.ndarray:
    return np.asarray(mat, dtype=complex).reshape(-1, order="F")

def unvectorize(vec: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(vec, dtype=complex).reshape((dim, dim), order="F")
