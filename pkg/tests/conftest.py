from functools import lru_cache

from hypothesis import HealthCheck, settings

from erlang_diffusion import build_density, params_for, stationary_distribution

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@lru_cache(maxsize=None)
def cached(n, R, kind="state_dependent"):
    d = params_for(n, R)
    return d, stationary_distribution(d), build_density(d, kind)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
