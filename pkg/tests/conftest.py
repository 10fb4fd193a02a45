"""Shared fixtures: desk-scale scene, arrays, radio, and noiseless observations."""

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from rispos.channel import (ArraySet, FadingConfig, ObservationSet, draw_gains,
                            mean_effective_channel, path_specs_from_scene)
from rispos.config import build_config
from rispos.geometry import Scene, direction_and_angles
from rispos.phasedesign import random_phases

# Fading switched off entirely: infinite Rician factors keep the exact same
# pathloss scaling but remove the random NLOS component.
NOFADE = FadingConfig(k_bu=np.inf, k_ru=np.inf, exponent_bu=4.5, exponent_ris=2.0)


@pytest.fixture(scope="session")
def desk_cfg():
    return build_config({"experiment": {"trials": 4}}, profile="desk")


@pytest.fixture(scope="session")
def scene(desk_cfg):
    return desk_cfg.scene


@pytest.fixture(scope="session")
def arrays(desk_cfg):
    return desk_cfg.arrays


@pytest.fixture(scope="session")
def radio(desk_cfg):
    return desk_cfg.radio


def make_noiseless_obs(scene: Scene, arrays: ArraySet, radio, seed: int = 7,
                       phases=None):
    """Exact (zero-noise, zero-fading) observation plus its ground truth."""
    rng = np.random.default_rng(seed)
    gains = draw_gains(scene, radio, arrays, NOFADE, rng)
    if phases is None:
        phases = np.vstack([random_phases(arrays.ris.size, rng).phases
                            for _ in range(scene.num_ris)]) \
            if scene.num_ris else np.zeros((0, arrays.ris.size), dtype=complex)
    paths = path_specs_from_scene(scene, gains, arrays, phases)
    h = mean_effective_channel(paths, arrays, radio)
    obs = ObservationSet(r_eff=h, sigma_eff=1e-9, arrays=arrays, radio=radio)
    return obs, paths, gains, phases


def random_desk_scene(rng: np.random.Generator, base_scene: Scene, radio) -> Scene:
    """A random valid UE placement/orientation around the desk deployment."""
    window = radio.unambiguous_delay
    for _ in range(200):
        p_ue = np.array([rng.uniform(35.0, 60.0), rng.uniform(-15.0, 15.0),
                         rng.uniform(-25.0, 5.0)])
        rot = Rotation.from_euler(
            "zyx", rng.uniform(-20.0, 20.0, size=3), degrees=True).as_matrix()
        clock = rng.uniform(-40e-9, 80e-9)
        try:
            cand = Scene(ris_positions=base_scene.ris_positions, p_ue=p_ue,
                         rotation=rot, clock_bias=clock)
        except Exception:
            continue
        delays = [direction_and_angles(cand.p_bs, p_ue, clock).tau]
        for p_r in cand.ris_positions:
            delays.append(direction_and_angles(cand.p_bs, p_r).tau
                          + direction_and_angles(p_r, p_ue, clock).tau)
        gaps = np.abs(np.subtract.outer(delays, delays))
        spacing = np.min(gaps + np.diag(np.full(len(delays), np.inf)))
        ue_cos = [cand.rotation_rows @ direction_and_angles(p, p_ue).r
                  for p in [cand.p_bs] + list(cand.ris_positions)]
        cos_sep = min(np.max(np.abs(a - b))
                      for i, a in enumerate(ue_cos) for b in ue_cos[:i])
        # resolvable paths: delays and UE cosines a few grid cells apart
        if min(delays) > 0.02 * window and max(delays) < 0.9 * window \
                and spacing > 0.5 / radio.bandwidth and cos_sep > 0.05:
            return cand
    raise RuntimeError("could not sample a valid random scene")
