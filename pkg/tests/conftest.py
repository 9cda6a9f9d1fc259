import numpy as np
import pytest

from ncbase import sampling


@pytest.fixture
def rng():
    return np.random.default_rng(20240901)


@pytest.fixture(scope="session")
def m2():
    return sampling.full_matrix_system(2, "C")


@pytest.fixture(scope="session")
def diag3():
    return sampling.diag_system(3, "R")


def random_hermitian(rng, n, field="C"):
    a = rng.normal(size=(n, n))
    if field == "C":
        a = a + 1j * rng.normal(size=(n, n))
    return (a + a.conj().T) / 2
