from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from oqt import channels as ch
from oqt.gateset import GateSet

settings.register_profile("oqt", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("oqt")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_gateset(rng, labels=("Gx", "Gy", "Gi")) -> GateSet:
    """Physical gate set: Ginibre state and effect, BCSZ gates."""
    rho = ch.to_superket(ch.sample_ginibre_density(2, rng))
    effect = ch.to_superket(ch.sample_ginibre_density(2, rng)) * np.sqrt(2)
    # scale so that E is a valid effect (eigenvalues in [0, 1])
    effect = effect / np.max(np.linalg.eigvalsh(ch.from_superket(effect)).real)
    return GateSet(rho, effect, {k: ch.sample_bcsz(2, rng) for k in labels})


def random_sequence(rng, labels, max_len: int) -> tuple:
    n = int(rng.integers(0, max_len + 1))
    return tuple(labels[i] for i in rng.integers(0, len(labels), size=n))


def random_gauge(rng, n: int = 4) -> np.ndarray:
    while True:
        b = rng.normal(size=(n, n))
        if np.linalg.cond(b) < 1e3:
            return b


def noisy_gateset(rng, eps_max: float = 0.2) -> GateSet:
    """Ideal {Gi, Gx, Gy} with random CPTP noise of random strength mixed into each button."""
    from oqt.protocols import lsgst

    ideal = lsgst.ideal_gateset()
    eps = rng.uniform(0, eps_max, size=5)
    rho = ch.convex_mix(ideal.rho, ch.to_superket(ch.sample_ginibre_density(2, rng)).real, eps[0])
    effect = ch.convex_mix(ideal.effect, ch.to_superket(ch.sample_ginibre_density(2, rng)).real, eps[1])
    gates = {k: ch.convex_mix(g, ch.sample_bcsz(2, rng), e) for (k, g), e in zip(ideal.gates.items(), eps[2:])}
    return GateSet(rho, effect, gates)


ACCEPTANCE_LINES: list[str] = []


def record(criterion: int, ok: bool, detail: str) -> None:
    line = f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
