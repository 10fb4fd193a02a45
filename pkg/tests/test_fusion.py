"""Fusion oracles: anchor geometry, WLS exactness, ExIP, multi-BS combining."""

import numpy as np
import pytest

from rispos.bounds import fim_eta
from rispos.errors import FusionImpossible, InvalidCosines
from rispos.estimation import KnownGeometry
from rispos.fusion import (PathAnchor, build_anchors, exip_objective,
                           exip_refine, fuse_from_eta, multi_fuse, wls_fuse,
                           wls_position_given_bias, _constrained_direction,
                           _reflection_direction)
from rispos.geometry import (SPEED_OF_LIGHT, biased_anchor, forward_map,
                             direction_and_angles, scene_position_params)

from conftest import make_noiseless_obs


def _true_eta(scene, paths):
    xi = scene_position_params(scene, paths[0].gain, [p.gain for p in paths[1:]])
    return forward_map(xi, scene), xi


def test_constrained_direction_recovers_los(scene):
    geo = direction_and_angles(scene.p_bs, scene.p_ue)
    g_u, s_u = scene.rotation_rows @ geo.r
    measured = np.array([g_u, s_u, geo.g, geo.s])
    z = _constrained_direction(measured, np.eye(4), scene.rotation)
    assert np.allclose(z, geo.r, atol=1e-9)


def test_constrained_direction_rank_deficient_completion():
    """With identity rotation no measurement senses x; the unit norm fills it."""
    r = np.array([0.8, 0.36, 0.48])
    measured = np.array([-r[1], -r[2], r[1], r[2]])  # ue rows are -O[1:3] @ r
    z = _constrained_direction(measured, np.eye(4), np.eye(3))
    assert np.allclose(z, r, atol=1e-9)  # positive-x completion picks the truth


def test_reflection_direction_recovers_geometry(scene):
    for q in range(scene.num_ris):
        geo = direction_and_angles(scene.ris_positions[q], scene.p_ue)
        g_u, s_u = scene.rotation_rows @ geo.r
        r = _reflection_direction(g_u, s_u, scene.rotation)
        assert np.allclose(r, geo.r, atol=1e-9)
    with pytest.raises(InvalidCosines):
        _reflection_direction(0.9, 0.9, scene.rotation)


def test_wls_fuse_exact_on_synthetic_anchors():
    rng = np.random.default_rng(21)
    p_true = np.array([12.0, -3.0, 7.0])
    c_bias = SPEED_OF_LIGHT * 25e-9
    anchors = []
    for _ in range(4):
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        a = rng.normal(size=(3, 3))
        w = a @ a.T + np.eye(3)
        anchors.append(PathAnchor(position=p_true + c_bias * d, direction=d,
                                  weight=w, is_los=False))
    res = wls_fuse(anchors)
    assert np.allclose(res.p_ue, p_true, atol=1e-9)
    assert res.clock_bias == pytest.approx(25e-9, rel=1e-9)
    assert not res.clock_fixed
    assert res.objective == pytest.approx(0.0, abs=1e-12)
    assert res.covariance.shape == (4, 4)


def test_wls_fuse_single_anchor_fixes_clock():
    a = PathAnchor(position=[5.0, 1.0, 2.0], direction=[1.0, 0.0, 0.0],
                   weight=np.eye(3), is_los=True)
    res = wls_fuse([a])
    assert res.clock_fixed and res.clock_bias == 0.0
    assert np.allclose(res.p_ue, a.position)
    assert np.all(np.isinf(res.covariance[3, :]))
    with pytest.raises(FusionImpossible):
        wls_fuse([])


def test_wls_position_given_bias_matches_truth():
    p_true = np.array([1.0, 2.0, 3.0])
    anchors = [PathAnchor(position=p_true, direction=[0.0, 1.0, 0.0],
                          weight=np.eye(3), is_los=False)]
    assert np.allclose(wls_position_given_bias(anchors, 0.0), p_true)


def test_build_anchors_land_on_biased_positions(scene, arrays, radio):
    _, paths, _, _ = make_noiseless_obs(scene, arrays, radio, seed=17)
    eta, _ = _true_eta(scene, paths)
    known = KnownGeometry.from_scene(scene)
    anchors = build_anchors(eta, known, scene.rotation, arrays, radio,
                            sigma_eff=1e-8)
    refs = [scene.p_bs] + list(scene.ris_positions)
    assert anchors[0].is_los and not anchors[1].is_los
    for anchor, ref in zip(anchors, refs):
        expect = biased_anchor(ref, scene.p_ue, scene.clock_bias)
        assert np.allclose(anchor.position, expect, atol=1e-6)


def test_fuse_from_eta_noiseless_exact(scene, arrays, radio):
    _, paths, _, _ = make_noiseless_obs(scene, arrays, radio, seed=17)
    eta, _ = _true_eta(scene, paths)
    known = KnownGeometry.from_scene(scene)
    res = fuse_from_eta(eta, known, scene.rotation, arrays, radio, sigma_eff=1e-8)
    assert np.linalg.norm(res.p_ue - scene.p_ue) < 1e-6
    assert abs(res.clock_bias - scene.clock_bias) < 1e-14


def test_ls_baseline_uses_identity_weights(scene, arrays, radio):
    _, paths, _, _ = make_noiseless_obs(scene, arrays, radio, seed=17)
    eta, _ = _true_eta(scene, paths)
    known = KnownGeometry.from_scene(scene)
    anchors = build_anchors(eta, known, scene.rotation, arrays, radio,
                            sigma_eff=1e-8, identity_weights=True)
    for a in anchors:
        assert np.allclose(a.weight, np.eye(3))


def test_exip_objective_zero_at_truth(scene, arrays, radio):
    _, paths, _, _ = make_noiseless_obs(scene, arrays, radio, seed=17)
    eta, xi = _true_eta(scene, paths)
    f_eta = fim_eta(paths, arrays, radio, 1e-8)
    assert exip_objective(eta, f_eta, xi, scene) == pytest.approx(0.0, abs=1e-6)
    # moving the UE raises the objective
    moved = type(xi)(p_ue=xi.p_ue + [0.5, 0, 0], clock_bias=xi.clock_bias,
                     h_bu=xi.h_bu, h_ris=xi.h_ris)
    assert exip_objective(eta, f_eta, moved, scene) > 1.0


def test_exip_refine_stays_at_truth(scene, arrays, radio):
    _, paths, _, _ = make_noiseless_obs(scene, arrays, radio, seed=17)
    eta, xi = _true_eta(scene, paths)
    f_eta = fim_eta(paths, arrays, radio, 1e-8)
    out = exip_refine(eta, f_eta, scene, xi)
    assert np.linalg.norm(out.p_ue - scene.p_ue) < 1e-9
    assert abs(out.clock_bias - scene.clock_bias) < 1e-16


def test_multi_fuse_inverse_variance_oracle():
    p1, p2 = np.array([1.0, 0.0, 0.0]), np.array([3.0, 0.0, 0.0])
    c1, c2 = np.eye(3), 3.0 * np.eye(3)
    fused, cov = multi_fuse([p1, p2], [c1, c2])
    assert np.allclose(fused, (3 * p1 + p2) / 4)  # weights 1 and 1/3
    assert np.allclose(cov, 0.75 * np.eye(3))
    # a drift term downweights the affected estimate
    fused2, _ = multi_fuse([p1, p2], [c1, c2], [np.zeros((3, 3)), np.eye(3)])
    assert fused2[0] < fused[0]
    with pytest.raises(FusionImpossible):
        multi_fuse([], [])
    with pytest.raises(ValueError):
        multi_fuse([p1], [c1, c2])
