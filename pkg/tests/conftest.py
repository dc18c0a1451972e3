import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cranesafe.dynamics import NQ, NX, BaseMotionSample, CraneParameters

settings.register_profile("cranesafe", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("cranesafe")


def random_state(rng, spread=1.0):
    """A state well inside the default bounds with moderate rates."""
    q = np.array([rng.uniform(-np.pi, np.pi), rng.uniform(-0.2, 1.3), rng.uniform(0.4, 2.4),
                  *rng.uniform(-0.6, 0.6, 4) * spread])
    qd = rng.uniform(-0.5, 0.5, NQ) * spread
    return np.concatenate([q, qd])


def random_base(rng, scale=1.0):
    return BaseMotionSample(angles=tuple(rng.uniform(-0.2, 0.2, 3) * scale),
                            angle_rates=tuple(rng.uniform(-0.5, 0.5, 3) * scale),
                            angle_accels=tuple(rng.uniform(-2, 2, 3) * scale),
                            translation=tuple(rng.uniform(-0.1, 0.1, 3) * scale),
                            translation_vel=tuple(rng.uniform(-0.3, 0.3, 3) * scale),
                            translation_accel=tuple(rng.uniform(-2, 2, 3) * scale))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def params():
    return CraneParameters()


@pytest.fixture
def hover_x():
    """Equilibrium hang with the payload 0.5 m above the default target."""
    x = np.zeros(NX)
    x[1] = np.arccos(2.0 / 2.44)
    x[2] = 1.0 + 2.44 * np.sin(x[1]) - 0.6 - 0.5
    return x


@pytest.fixture
def criterion(request):
    """Record one acceptance verdict line; printed in the terminal summary."""
    store = request.config.stash.setdefault(_VERDICTS, [])

    def record(number, title, ok, detail=""):
        store.append((number, title, bool(ok), detail))
        return bool(ok)

    return record


_VERDICTS = pytest.StashKey[list]()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = config.stash.get(_VERDICTS, [])
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(rows, key=lambda r: r[0]):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
