import functools

import pytest
from hypothesis import HealthCheck, settings

from tpcluster.kernels import KernelSpec, build

settings.register_profile("default", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@functools.lru_cache(maxsize=None)
def cached_build(kind, variant="scalar", n_cores=1, size="small"):
    return build(KernelSpec(kind, variant, n_cores, size))


@pytest.fixture
def kb():
    return cached_build
