import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "suite",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("suite")


# Independent reference constructions: built by explicit index arithmetic so
# the library's reshuffling code is never on both sides of an assertion.

def ref_swap(n: int) -> np.ndarray:
    """Swap operator by permutation action on basis vectors."""
    s = np.zeros((n * n, n * n), dtype=complex)
    for i in range(n):
        for j in range(n):
            s[j * n + i, i * n + j] = 1.0
    return s


def ref_rho_max(n: int) -> np.ndarray:
    """|xi><xi| with xi the sum of doubled basis vectors, via outer product."""
    xi = np.zeros(n * n, dtype=complex)
    for i in range(n):
        xi[i * n + i] = 1.0
    return np.outer(xi, xi)


def e_unit(d: int, i: int, j: int) -> np.ndarray:
    m = np.zeros((d, d), dtype=complex)
    m[i, j] = 1.0
    return m


def random_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return (g + g.conj().T) / 2


@pytest.fixture(scope="session")
def base_rng():
    return np.random.default_rng(20260810)
