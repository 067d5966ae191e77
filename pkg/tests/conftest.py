import numpy as np
import pytest

from dfrcrx.filterdesign import (
    design_coherent_circular,
    design_coherent_linear,
    design_uncoherent_ls_baseline,
)
from dfrcrx.waveform import ModulationParams, make_alphabet


@pytest.fixture(scope="session")
def paper_params():
    """Reference operating point: 30 chips of 1 ms sampled at 3 kHz."""
    return ModulationParams(n_chips=30, chip_duration=1e-3, sample_rate=3000.0)


@pytest.fixture(scope="session")
def paper_alphabet(paper_params):
    return make_alphabet(4, paper_params, seed=7)


@pytest.fixture(scope="session")
def paper_banks(paper_alphabet):
    """The three designs at the reference point (default 356-tap filters)."""
    return {
        "coherent-linear": design_coherent_linear(paper_alphabet),
        "coherent-circular": design_coherent_circular(paper_alphabet),
        "baseline-LS": design_uncoherent_ls_baseline(paper_alphabet),
    }


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def random_unit_modulus(rng, k, length):
    """K random constant-modulus sample vectors (raw arrays)."""
    return [np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, length)) for _ in range(k)]
