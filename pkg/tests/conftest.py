import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from surfwave.model import layered_isotropic, model_from_dict, ti_voigt  # noqa: E402

MODELS = Path(__file__).resolve().parents[1] / "demos" / "models"

# acceptance lines collected by test_acceptance.record and printed at the end
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)


def step_profile(mu_layer, mu_half=4.0, H=1.0):
    return {"knots": [{"Z": 0.0, "c": {"lambda": mu_layer, "mu": mu_layer}},
                      {"Z": -H, "c": {"lambda": mu_half, "mu": mu_half}},
                      {"Z": -2 * H, "c": {"lambda": mu_half, "mu": mu_half}}]}


def lateral_model(mus, x1):
    """Soft layer whose stiffness varies along ``x1`` (constant in ``x2``)."""
    names = [f"p{i}" for i in range(len(mus))]
    return model_from_dict({"symmetry": "isotropic", "Z_I": -2.0, "interpolation": "step",
                            "profiles": {n: step_profile(m) for n, m in zip(names, mus)},
                            "lateral": {"x1": list(x1), "x2": [0.0], "profiles": [[n] for n in names]}})


@pytest.fixture(scope="session")
def halfspace():
    return layered_isotropic([], (1.0, 1.0), Z_I=-1.0)


@pytest.fixture(scope="session")
def love_layer():
    return layered_isotropic([(1.0, 1.0, 1.0)], (4.0, 4.0))


@pytest.fixture(scope="session")
def gradient():
    return model_from_dict({"symmetry": "isotropic", "Z_I": -3.0, "interpolation": "linear",
                            "knots": [{"Z": 0.0, "c": {"lambda": 1.0, "mu": 1.0}},
                                      {"Z": -3.0, "c": {"lambda": 9.0, "mu": 9.0}}]})


@pytest.fixture(scope="session")
def ti_anomalous():
    V = ti_voigt(3.0, 1.2, 1.0, 1.2, 1.2)
    return model_from_dict({"symmetry": "transversely_isotropic", "Z_I": -1.0, "interpolation": "step",
                            "knots": [{"Z": 0.0, "c": V.tolist()}, {"Z": -1.0, "c": V.tolist()}]})


@pytest.fixture(scope="session")
def lateral_love():
    return lateral_model([1.0, 1.5], [0.0, 10.0])


def random_stiffness(rng, margin=0.3):
    """Random strongly convex Voigt matrix (Mandel form ``A A^T + margin I``)."""
    A = rng.standard_normal((6, 6))
    M = A @ A.T / 6 + margin * np.eye(6)
    s = np.array([1, 1, 1, np.sqrt(2), np.sqrt(2), np.sqrt(2)])
    return M / np.outer(s, s)
