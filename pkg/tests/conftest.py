"""Shared test configuration.

Hypothesis runs derandomized so the suite is reproducible in CI; the
numeric checks inside property bodies are deterministic anyway.
"""

from hypothesis import HealthCheck, settings

settings.register_profile(
    "deterministic",
    derandomize=True,
    deadline=None,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("deterministic")
