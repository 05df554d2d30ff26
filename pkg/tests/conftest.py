import pytest
from hypothesis import HealthCheck, settings

from fedldp.tradeoff import LossRegularity

settings.register_profile(
    "deterministic",
    derandomize=True,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("deterministic")

# The homogeneous evaluation study used throughout: delta=1e-4, q=1e-3,
# K=100 users, d=1e4, mu=lambda=C=1, G=5, T in {7e4, 7e5}.
STUDY = {
    "delta": 1e-4,
    "q": 1e-3,
    "users": 100,
    "t_list": (70_000, 700_000),
}


@pytest.fixture
def study_reg() -> LossRegularity:
    return LossRegularity(mu=1.0, lam=1.0, grad_bound=5.0, clip=1.0, dim=10_000)
