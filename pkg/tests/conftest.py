"""Shared fixtures: model spaces and semigroup contexts reused across tests.

Everything expensive (eigendecompositions) is session-scoped; contexts are
cheap views onto those caches.
"""
import numpy as np
import pytest

from cdbench.generator import assemble_generator
from cdbench.inequalities import EvalContext
from cdbench.model_space import PotentialSpec, SpaceSpec, build_model_space
from cdbench.semigroup import spectral_decompose


def make_context(space, backend, K, n, tol=1e-6, l_max=None):
    gen = assemble_generator(space, backend, l_max)
    cache = spectral_decompose(gen)
    return EvalContext(space=space, gen=gen, cache=cache, K=K, n=n, tol=tol)


@pytest.fixture(scope="session")
def circle_space():
    return build_model_space(SpaceSpec(kind="circle", nodes=256))


@pytest.fixture(scope="session")
def circle_ctx(circle_space):
    return make_context(circle_space, "spectral", K=0.0, n=1.0)


@pytest.fixture(scope="session")
def ou_space():
    return build_model_space(
        SpaceSpec(
            kind="interval",
            nodes=400,
            bounds=(-1.0, 1.0),
            potential=PotentialSpec(family="quadratic", coefficient=-0.5),
            normalize_measure=True,
        )
    )


@pytest.fixture(scope="session")
def ou_ctx(ou_space):
    return make_context(ou_space, "fd", K=-0.5, n=3.0, tol=1e-4)


@pytest.fixture(scope="session")
def sphere3_space():
    return build_model_space(SpaceSpec(kind="sphere2", level=3, normalize_measure=True))


@pytest.fixture(scope="session")
def sphere3_ctx(sphere3_space):
    return make_context(sphere3_space, "fd", K=-1.0, n=2.0, tol=1e-4)


@pytest.fixture(scope="session")
def sphere3_spectral_ctx(sphere3_space):
    return make_context(sphere3_space, "spectral", K=-1.0, n=2.0, l_max=8)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(99)
