import os

os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=10,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def coarse():
    """Numerics for small, fast structure runs."""
    from nwcavity.fdtd.numerics import Numerics
    return Numerics(resolution_nm=40.0, padding_nm=320.0, sample_nm=2.0, farfield=False,
                    absorber_layers=6)


@pytest.fixture(scope="session")
def small_scene():
    from nwcavity.scene import SceneSpec
    return SceneSpec(diameter_nm=320.0, height_nm=400.0, oxide_thickness_nm=0.0,
                     mirror_kind="pec", dipole_offset_from_top_nm=80.0)
