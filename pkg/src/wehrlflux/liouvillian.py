"""Lindblad generator of the driven Kerr mode and its steady-state solvers.

The generator acts on column-stacked density matrices,
vec(A X B) = (B^T kron A) vec(X), so

    L = -i (I kron H - H^T kron I)
        + 2 kappa ( conj(a) kron a - 1/2 I kron a^dag a - 1/2 (a^dag a)^T kron I )

with the rotating-frame Hamiltonian

    H = Delta a^dag a + (u / 2N) a^dag a^dag a a + i eps sqrt(N) (a^dag - a).

The steady state is the null eigenvector of L, extracted by shift-invert
Arnoldi around sigma = 1e-8 (sparse LU of L - sigma I), hermitized and
normalized afterwards.  A fixed-step RK4 propagator provides an
independent oracle: the null space of L is exactly a fixed point of the
RK4 map, so long-time propagation converges to the same state without a
step-size bias.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, eigs

from .errors import (
    CutoffError,
    DegenerateSteadyStateError,
    SolverConvergenceError,
    StateValidationError,
    StepSizeError,
)
from .fock_algebra import (
    DensityMatrix,
    annihilation,
    number_operator,
    unvectorize,
    vectorize,
)

log = logging.getLogger(__name__)

NULL_RESIDUAL_TOL = 1e-10
DEGENERACY_TOL = 1e-12
# Dense fallback ceiling for eigensolves (vectorized dimension).
DENSE_EIG_LIMIT = 1100


@dataclass(frozen=True)
class KerrParams:
    """Parameters of the driven Kerr mode.

    delta: detuning; u > 0: nonlinearity; kappa > 0: loss rate;
    eps >= 0: intensive pump amplitude (physical pump is eps * sqrt(N));
    N >= 1: thermodynamic scale parameter.
    """

    delta: float
    u: float
    kappa: float
    eps: float
    N: int

    def __post_init__(self):
        vals = (self.delta, self.u, self.kappa, self.eps)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("Kerr parameters must be finite")
        if self.kappa <= 0:
            raise ValueError(f"kappa must be > 0, got {self.kappa}")
        if self.u <= 0:
            raise ValueError(f"u must be > 0, got {self.u}")
        if self.eps < 0:
            raise ValueError(f"eps must be >= 0, got {self.eps}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N}")

    def with_drive(self, eps: float, N: int | None = None) -> "KerrParams":
        return replace(self, eps=eps, N=self.N if N is None else N)

    @property
    def pump(self) -> float:
        """Extensive pump amplitude eps * sqrt(N)."""
        return self.eps * math.sqrt(self.N)


@dataclass(frozen=True)
class Superoperator:
    """Sparse generator on the vectorized space of dimension n_max^2."""

    n_max: int
    matrix: sp.csr_matrix

    @property
    def dim(self) -> int:
        return self.n_max ** 2

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """Action on a density matrix, returned as a matrix."""
        return unvectorize(self.matrix @ vectorize(rho), self.n_max)

    def residual(self, rho: DensityMatrix) -> float:
        """Frobenius norm of L(rho)."""
        return float(np.linalg.norm(self.matrix @ vectorize(rho.entries)))


def build_kerr_liouvillian(
    p: KerrParams, n_max: int, enforce_cutoff: bool = True
) -> Superoperator:
    """Assemble the sparse Lindblad generator for the driven Kerr mode."""
    if n_max < 2:
        raise CutoffError(f"n_max must be >= 2, got {n_max}")
    if enforce_cutoff:
        from .kerr_model import recommended_cutoff  # deferred: avoids module cycle

        rec = recommended_cutoff(p)
        if n_max < rec:
            raise CutoffError(
                f"n_max = {n_max} below recommended cutoff {rec} for {p}",
                recommended=rec,
            )
    a = annihilation(n_max).sparse()
    ad = a.conj().T.tocsr()
    n_op = (ad @ a).tocsr()
    kerr = (ad @ ad @ a @ a).tocsr()
    H = (p.delta * n_op + (p.u / (2.0 * p.N)) * kerr + 1j * p.pump * (ad - a)).tocsr()
    eye = sp.identity(n_max, format="csr", dtype=complex)
    commutator = -1j * (sp.kron(eye, H) - sp.kron(H.T, eye))
    dissipator = 2.0 * p.kappa * (
        sp.kron(a.conj(), a)
        - 0.5 * sp.kron(eye, n_op)
        - 0.5 * sp.kron(n_op.T, eye)
    )
    L = (commutator + dissipator).tocsr()
    L.sort_indices()
    return Superoperator(n_max, L)


# ---------------------------------------------------------------------------
# Steady state via shift-invert
# ---------------------------------------------------------------------------

def _start_vector(dim: int) -> np.ndarray:
    # Deterministic Arnoldi start so repeated runs are bit-identical.
    return np.ones(dim) / math.sqrt(dim)


def _null_eigenpairs(L: Superoperator, k: int):
    """Eigenvalues of smallest magnitude with eigenvectors, several strategies."""
    mat = L.matrix.tocsc()
    dim = L.dim
    k = min(k, dim - 2)
    attempts = (
        dict(sigma=1e-8, which="LM"),
        dict(sigma=1e-6, which="LM"),
        dict(which="SM", maxiter=10000, tol=1e-12),
    )
    last_exc = None
    for kw in attempts:
        try:
            vals, vecs = eigs(mat, k=k, v0=_start_vector(dim), **kw)
            return vals, vecs
        except (ArpackError, ArpackNoConvergence, RuntimeError) as exc:
            last_exc = exc
            log.debug("null-space attempt %s failed: %s", kw, exc)
    if dim <= 4096:  # dense rescue for small problems only
        vals, vecs = sla.eig(mat.toarray())
        order = np.argsort(np.abs(vals))[:k]
        return vals[order], vecs[:, order]
    raise SolverConvergenceError(f"steady-state eigensolve failed: {last_exc}")


def steady_state(L: Superoperator) -> DensityMatrix:
    """Null eigenvector of L, hermitized and normalized to unit trace.

    Raises if the residual ||L(rho)||_F exceeds 1e-10 or if a second
    eigenvalue sits at zero (degenerate null space).
    """
    vals, vecs = _null_eigenpairs(L, k=2)
    order = np.argsort(np.abs(vals))
    vals, vecs = vals[order], vecs[:, order]
    if len(vals) > 1 and abs(vals[1]) < DEGENERACY_TOL:
        raise DegenerateSteadyStateError(
            f"two eigenvalues inside the null tolerance: {vals[0]:.3e}, {vals[1]:.3e}"
        )
    rho = unvectorize(vecs[:, 0], L.n_max)
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho).real
    if abs(tr) < 1e-14:
        raise SolverConvergenceError("null eigenvector has vanishing trace")
    rho = rho / tr
    state = DensityMatrix(L.n_max, rho)
    res = L.residual(state)
    if res > NULL_RESIDUAL_TOL:
        raise SolverConvergenceError(
            f"steady-state residual {res:.3e} above {NULL_RESIDUAL_TOL}"
        )
    log.debug("steady state: residual %.3e", res)
    return state


# ---------------------------------------------------------------------------
# Fixed-step RK4 oracle
# ---------------------------------------------------------------------------

def spectral_extent(L: Superoperator, iterations: int = 30) -> float:
    """Power-iteration estimate of max |eigenvalue|, with a safety factor."""
    v = _start_vector(L.dim).astype(complex)
    est = 0.0
    for _ in range(iterations):
        w = L.matrix @ v
        nrm = np.linalg.norm(w)
        if nrm == 0:
            return 1.0
        est = nrm
        v = w / nrm
    return 1.2 * float(est)


def max_stable_dt(L: Superoperator) -> float:
    """Conservative RK4 step bound, 0.1 / max|eigenvalue estimate|."""
    return 0.1 / spectral_extent(L)


def evolve(
    rho0: DensityMatrix,
    L: Superoperator,
    t_final: float,
    dt: float,
    trace_drift_tol: float = 1e-9,
) -> DensityMatrix:
    """Propagate rho0 for t_final with fixed-step RK4.

    dt must satisfy dt <= 0.1 / max|eig(L)| (estimated); trace drift beyond
    ``trace_drift_tol`` aborts with a step-size error.
    """
    if rho0.dim != L.n_max:
        raise StateValidationError("state and generator dimensions differ")
    bound = max_stable_dt(L)
    if dt > bound:
        raise StepSizeError(f"dt = {dt:.3e} exceeds stability bound {bound:.3e}")
    n_steps = max(1, int(math.ceil(t_final / dt)))
    dt = t_final / n_steps  # land exactly on t_final, never above the bound
    v = vectorize(rho0.entries)
    v = _rk4_steps(L.matrix, v, dt, n_steps, trace_drift_tol, L.n_max)
    rho = unvectorize(v, L.n_max)
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    return DensityMatrix(L.n_max, rho)


def _rk4_steps(mat, v, dt, n_steps, drift_tol, n_max, check_every=2000):
    trace_idx = np.arange(n_max) * (n_max + 1)
    for step in range(n_steps):
        k1 = mat @ v
        k2 = mat @ (v + (0.5 * dt) * k1)
        k3 = mat @ (v + (0.5 * dt) * k2)
        k4 = mat @ (v + dt * k3)
        v = v + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if (step + 1) % check_every == 0 or step == n_steps - 1:
            drift = abs(v[trace_idx].sum() - 1.0)
            if drift > drift_tol:
                raise StepSizeError(
                    f"trace drift {drift:.3e} beyond {drift_tol} after "
                    f"{step + 1} steps; reduce dt"
                )
    return v


def evolve_to_stationarity(
    rho0: DensityMatrix,
    L: Superoperator,
    dt: float | None = None,
    block_time: float = 10.0,
    tol: float = 1e-10,
    t_max: float = 1e5,
) -> tuple[DensityMatrix, float]:
    """Propagate until consecutive checkpoints agree in trace distance.

    Fixed-step RK4 throughout; only the total propagation time adapts, so
    the end state is reproducible.  Returns (state, total time propagated).
    """
    from .fock_algebra import trace_distance

    if dt is None:
        dt = max_stable_dt(L)
    steps_per_block = max(1, int(math.ceil(block_time / dt)))
    v = vectorize(rho0.entries)
    t = 0.0
    prev = None
    while t < t_max:
        v = _rk4_steps(L.matrix, v, dt, steps_per_block, 1e-9, L.n_max)
        t += steps_per_block * dt
        rho = unvectorize(v, L.n_max)
        rho = 0.5 * (rho + rho.conj().T)
        rho = rho / np.trace(rho).real
        state = DensityMatrix(L.n_max, rho)
        if prev is not None and trace_distance(prev, state) < tol:
            return state, t
        prev = state
    raise SolverConvergenceError(
        f"propagation did not stabilize within t_max = {t_max}"
    )


# ---------------------------------------------------------------------------
# Spectral gap
# ---------------------------------------------------------------------------

def liouvillian_gap(L: Superoperator, k: int = 12) -> float:
    """-Re(lambda_1), the nonzero eigenvalue of largest real part.

    Combines shift-invert around zero (catches the slow mode near a
    transition) with a largest-real-part Arnoldi pass; small problems go
    through a dense solve.
    """
    dim = L.dim
    if dim <= DENSE_EIG_LIMIT:
        vals = sla.eigvals(L.matrix.toarray())
        _check_unique_null(vals)
        return _gap_from_eigenvalues(vals)

    mat = L.matrix.tocsc()
    k = min(k, dim - 2)
    collected = []
    try:
        vals, _ = eigs(mat, k=k, sigma=1e-8, which="LM", v0=_start_vector(dim))
        _check_unique_null(vals)
        collected.append(vals)
    except (ArpackError, ArpackNoConvergence, RuntimeError) as exc:
        log.debug("gap shift-invert pass failed: %s", exc)
    # The largest-real-part pass guards against a slow mode of large
    # modulus that shift-invert around zero would miss; it converges
    # poorly at large dimension, so it is skipped there unless needed.
    if not collected or dim <= 4000:
        try:
            vals, _ = eigs(
                mat, k=min(6, dim - 2), which="LR", v0=_start_vector(dim),
                maxiter=5000, tol=1e-10,
            )
            collected.append(vals)
        except (ArpackError, ArpackNoConvergence, RuntimeError) as exc:
            log.debug("gap largest-real pass failed: %s", exc)
    if not collected:
        raise SolverConvergenceError("gap eigensolves all failed")
    return _gap_from_eigenvalues(np.concatenate(collected))


def _check_unique_null(vals: np.ndarray):
    """Within one solver pass, at most one eigenvalue may sit at zero."""
    if int(np.sum(np.abs(vals) < DEGENERACY_TOL)) > 1:
        small = np.sort(np.abs(vals))[:2]
        raise DegenerateSteadyStateError(
            f"two eigenvalues inside the null tolerance: |lambda| = {small}"
        )


def _gap_from_eigenvalues(vals: np.ndarray, null_tol: float = 1e-11) -> float:
    vals = np.asarray(vals)
    nonzero = vals[np.abs(vals) > null_tol]
    if len(nonzero) == 0:
        raise SolverConvergenceError("no nonzero eigenvalues found for the gap")
    return max(0.0, -float(np.max(nonzero.real)))
