import numpy as np
import pytest

from ipop_dispatch.profile import fleet_from_profiles, quadratic_loss_profile
from ipop_dispatch.synth import dab_pair_fleet
from ipop_dispatch.utils.export_utils import write_profile


def quadratic(module_id, a0, a2, p_min=1.0, p_max=400.0, a1=0.0):
    """Quadratic-loss module with P_out = I, so current and output power coincide"""
    return quadratic_loss_profile(module_id, a0, a1, a2, p_min, p_max)


# demand positions inside a feasible range, as fractions of its width
FRACTIONS = (0.02, 0.25, 0.5, 0.75, 0.98)


def random_fleet(rng, size, p_max_range):
    profiles = []
    for index in range(size):
        profiles.append(quadratic(
            f"M{index}",
            a0=rng.uniform(1.0, 20.0),
            a1=rng.uniform(0.0, 0.05),
            a2=rng.uniform(1e-4, 2e-3),
            p_min=rng.uniform(1.0, 10.0),
            p_max=rng.uniform(*p_max_range),
        ))
    return fleet_from_profiles(profiles)


@pytest.fixture
def identical_pair():
    """Two modules with P_in = P + 0.001 P^2 + 5"""
    return fleet_from_profiles([quadratic("A", 5.0, 0.001), quadratic("A2", 5.0, 0.001)])


@pytest.fixture
def ab_fleet():
    """A: P + 0.002 P^2 + 3, B: P + 0.001 P^2 + 6"""
    return fleet_from_profiles([quadratic("A", 3.0, 0.002), quadratic("B", 6.0, 0.001)])


@pytest.fixture
def ab_fleet_capped():
    return fleet_from_profiles([quadratic("A", 3.0, 0.002), quadratic("B", 6.0, 0.001, p_max=150.0)])


@pytest.fixture
def synth_fleet():
    return dab_pair_fleet()


@pytest.fixture
def rng():
    return np.random.default_rng(20240521)


@pytest.fixture
def profile_files(tmp_path):
    """Write a fleet to <tmp>/profiles/<module_id>.json and return the paths"""
    def write(fleet):
        return [str(write_profile(profile, tmp_path / "profiles" / f"{module_id}.json"))
                for module_id, profile in fleet.items()]
    return write
