import pytest

from anisokde.densities import smooth_product_density
from anisokde.kernels import build_base, build_composite


@pytest.fixture(scope="session")
def composites():
    """Order-1..3 composite kernels, built once for the whole run."""
    return {ell: build_composite(build_base(ell)) for ell in (1, 2, 3)}


@pytest.fixture(scope="session")
def rc1():
    return smooth_product_density("raised_cosine", 1)


@pytest.fixture(scope="session")
def rc2():
    return smooth_product_density("raised_cosine", 2)
