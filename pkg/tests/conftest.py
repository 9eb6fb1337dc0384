import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hpscale import OptimumObservation, load_surface_file

settings.register_profile(
    "det",
    derandomize=True,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("det")

DATA_DIR = Path(__file__).parent / "data"
FIG3_PATH = DATA_DIR / "fig3_style.csv"

# Reference coefficients shared by many tests: learning-rate law
# (c, alpha, beta) and batch-size law (d, gamma).
LAW_COEFFS = {"c": 1.79, "alpha": -0.713, "beta": 0.307, "d": 0.58, "gamma": 0.571}

# 4x4 lattice used by the fitter round-trip tests.
LATTICE_N = (6e7, 2e8, 6.3e8, 2e9)
LATTICE_D = (2e9, 1e10, 4e10, 2e11)


@pytest.fixture(scope="session")
def fig3_surface():
    return load_surface_file(FIG3_PATH)


def independent_n_observations(seed: int, n: int = 40, sigma: float = 0.1):
    """Observations with log bs = 0.58 log D + noise and N drawn independently.

    The batch size is independent of N by construction, mimicking grids
    where only D drives the optimal batch size.
    """
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        n_params = math.exp(rng.uniform(math.log(6e7), math.log(1e9)))
        d_tokens = math.exp(rng.uniform(math.log(2e9), math.log(1e11)))
        bs = math.exp(0.58 * math.log(d_tokens) + sigma * rng.standard_normal())
        out.append(OptimumObservation(n_params, d_tokens, 1e-3, bs))
    return out
