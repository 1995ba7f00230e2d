import numpy as np
import pytest

from wehrlflux.fock_algebra import DensityMatrix
from wehrlflux.kerr_model import recommended_cutoff
from wehrlflux.liouvillian import KerrParams, build_kerr_liouvillian, steady_state

FIG2 = dict(delta=-2.0, u=1.0, kappa=0.5)


def kerr_params(eps, N, **overrides):
    base = dict(FIG2)
    base.update(overrides)
    return KerrParams(base["delta"], base["u"], base["kappa"], eps, N)


@pytest.fixture(scope="session")
def ness_cache():
    """Session cache of Kerr steady states keyed by (delta, u, kappa, eps, N)."""
    cache = {}

    def get(p: KerrParams, n_max=None):
        key = (p.delta, p.u, p.kappa, p.eps, p.N, n_max)
        if key not in cache:
            n = recommended_cutoff(p) if n_max is None else n_max
            L = build_kerr_liouvillian(p, n, enforce_cutoff=n_max is None)
            cache[key] = (steady_state(L), L)
        return cache[key]

    return get


def random_density_matrix(dim: int, rng) -> DensityMatrix:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    rho /= np.trace(rho).real
    return DensityMatrix(dim, rho)
