"""Geometry oracles: directions, anchors, parameter vectors, scene validation."""

import numpy as np
import pytest

from rispos.errors import DegenerateGeometry
from rispos.geometry import (SPEED_OF_LIGHT, ChannelParams, PositionParams,
                             Scene, biased_anchor, clock_shifted_anchor,
                             direction_and_angles, forward_map, rotated_aoa,
                             scene_position_params)


def test_direction_cosines_are_the_unit_vector():
    rng = np.random.default_rng(0)
    for _ in range(50):
        a, b = rng.normal(size=3) * 10, rng.normal(size=3) * 10
        if np.linalg.norm(b - a) < 1e-6:
            continue
        geo = direction_and_angles(a, b)
        u = (b - a) / np.linalg.norm(b - a)
        assert np.allclose(geo.r, u, atol=1e-12)
        # (f, g, s) parameterization reproduces the same unit vector
        triple = [np.cos(geo.theta) * np.cos(geo.phi),
                  np.cos(geo.theta) * np.sin(geo.phi), np.sin(geo.theta)]
        assert np.allclose(triple, u, atol=1e-12)
        assert geo.f ** 2 + geo.g ** 2 + geo.s ** 2 == pytest.approx(1.0)


def test_delay_is_distance_over_c_plus_bias():
    geo = direction_and_angles([0, 0, 0], [30, 0, 0], clock_bias=5e-9)
    assert geo.tau == pytest.approx(30 / SPEED_OF_LIGHT + 5e-9, rel=1e-12)


def test_coincident_points_raise():
    with pytest.raises(DegenerateGeometry):
        direction_and_angles([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])


def test_biased_anchor_matches_measured_delay_ray():
    """p_ref + c*tau_measured*r must land exactly on the biased anchor."""
    p_ref, p_ue, bias = np.array([2.0, -1.0, 4.0]), np.array([40.0, 9.0, -12.0]), 30e-9
    geo = direction_and_angles(p_ref, p_ue, clock_bias=bias)
    ray_point = p_ref + SPEED_OF_LIGHT * geo.tau * geo.r
    assert np.allclose(ray_point, biased_anchor(p_ref, p_ue, bias), atol=1e-9)


def test_clock_shifted_anchor_is_the_mirror_of_biased():
    p_ref, p_ue, bias = np.zeros(3), np.array([10.0, 5.0, 1.0]), 12e-9
    assert np.allclose(clock_shifted_anchor(p_ref, p_ue, bias),
                       biased_anchor(p_ref, p_ue, -bias))


def test_rotated_aoa_matches_rotation_rows(scene):
    geo = direction_and_angles(scene.p_bs, scene.p_ue)
    g_u, s_u = rotated_aoa(geo.theta, geo.phi, scene.rotation)
    expect = scene.rotation_rows @ geo.r
    assert np.allclose([g_u, s_u], expect, atol=1e-12)


def test_forward_map_matches_per_path_geometry(scene):
    xi = scene_position_params(scene, h_bu=1 + 2j, h_ris=[3 - 1j, 0.5j])
    eta = forward_map(xi, scene)
    los = direction_and_angles(scene.p_bs, scene.p_ue, scene.clock_bias)
    assert eta.eta_b[2] == pytest.approx(los.tau, rel=1e-12)
    assert eta.eta_b[5:7] == pytest.approx([los.g, los.s])
    assert eta.h_bu == 1 + 2j
    for q in range(scene.num_ris):
        leg = direction_and_angles(scene.ris_positions[q], scene.p_ue,
                                   scene.clock_bias)
        assert eta.eta_r[q, 2] == pytest.approx(leg.tau, rel=1e-12)
        assert np.allclose(eta.eta_r[q, 3:5], scene.rotation_rows @ leg.r)


def test_position_params_round_trip():
    xi = PositionParams(p_ue=[1.0, 2.0, 3.0], clock_bias=4e-9,
                        h_bu=5 + 6j, h_ris=[7 - 8j])
    again = PositionParams.from_vector(xi.flatten())
    assert np.allclose(again.flatten(), xi.flatten())
    assert again.h_bu == xi.h_bu and again.h_ris[0] == xi.h_ris[0]


def test_channel_params_round_trip():
    eta = ChannelParams(eta_b=np.arange(7.0),
                        eta_r=np.arange(10.0).reshape(2, 5))
    assert np.allclose(ChannelParams.from_vector(eta.flatten()).flatten(),
                       eta.flatten())
    assert eta.h_bu == 0 + 1j and eta.h_r(1) == 5 + 6j


def test_scene_rejects_improper_rotation(scene):
    bad = np.diag([1.0, 1.0, -1.0])  # det -1
    with pytest.raises(ValueError):
        Scene(ris_positions=scene.ris_positions, p_ue=scene.p_ue, rotation=bad)


def test_scene_rejects_offset_bs(scene):
    with pytest.raises(ValueError):
        Scene(ris_positions=scene.ris_positions, p_ue=scene.p_ue,
              rotation=np.eye(3), p_bs=[1.0, 0.0, 0.0])


def test_scene_rejects_coincident_ris(scene):
    with pytest.raises(DegenerateGeometry):
        Scene(ris_positions=[[5.0, 1.0, 2.0], [5.0, 1.0, 2.0]],
              p_ue=scene.p_ue, rotation=np.eye(3))


def test_scene_rejects_equal_bs_side_cosines():
    # both RISs on the same ray from the BS share the g cosine
    with pytest.raises(ValueError):
        Scene(ris_positions=[[10.0, 2.0, 3.0], [20.0, 4.0, 6.0]],
              p_ue=[50.0, 0.0, 0.0], rotation=np.eye(3))
