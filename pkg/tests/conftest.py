"""Shared test fixtures for the strataquad test suite."""

from pathlib import Path

import pytest

from strataquad.design.densities import UniformDensity
from strataquad.design.grids import allocate_uniform, build_design
from strataquad.fields import (
    Decomposition,
    SmoothnessSpec,
    inverse_shift,
    make_amplitude_modulated,
    make_exp_field,
    make_fbf,
    make_warped_fbm,
)

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture
def configs_dir() -> Path:
    """Directory holding the bundled experiment configs."""
    return CONFIG_DIR


@pytest.fixture
def fbm_1d():
    """Fractional Brownian motion with alpha = 1 (Brownian motion increments)."""
    dec = Decomposition.single(1)
    return make_fbf(dec, SmoothnessSpec.for_decomposition((1.0,), dec))


@pytest.fixture
def fbf_3d():
    """Anisotropic fractional Brownian field on [0,1]^3, l = (2, 1)."""
    dec = Decomposition(l=(2, 1))
    return make_fbf(dec, SmoothnessSpec.for_decomposition((1.5, 0.5), dec))


@pytest.fixture
def modulated_exp():
    """Exponential-covariance field divided by (t + 0.1)."""
    return make_amplitude_modulated(make_exp_field(1.0, 1), inverse_shift(1.0, 0.1))


@pytest.fixture
def warped_fbm():
    """Singular warped fBm, lambda = 0.5."""
    return make_warped_fbm(0.5, 1.5, 5.0)


@pytest.fixture
def uniform_design_1d():
    """Factory for a 1-d uniform design with N strata."""

    def build(N: int):
        dec = Decomposition.single(1)
        return build_design(dec, [UniformDensity()], allocate_uniform(N, dec))

    return build


@pytest.fixture
def ex4_config_text() -> str:
    """A small experiment config for the modulated exponential field."""
    return """
name = "small_ex4"

[model]
kind = "amplitude_modulated"
base = { kind = "exp", alpha = 1.0, dim = 1 }
amplitude = { profile = "inverse_shift", scale = 1.0, shift = 0.1 }

[design]
densities = ["uniform"]
allocation = "uniform"

[run]
N = [8, 16, 32, 64, 128]
order = 8

[fit]
kind = "single"
"""


@pytest.fixture
def ex4_config_file(tmp_path: Path, ex4_config_text: str) -> Path:
    """The small config written to disk, with outputs under tmp_path."""
    path = tmp_path / "small.cfg"
    path.write_text(ex4_config_text.replace('order = 8', f'order = 8\nout = "{(tmp_path / "out").as_posix()}"'))
    return path
