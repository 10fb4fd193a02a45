"""Fisher-information oracles: finite differences, inverses, per-path bounds."""

import numpy as np
import pytest

from rispos.bounds import (anchor_fim, anchor_position_cov, fim_eta, fim_xi,
                           jacobian, path_bounds, path_jacobian, path_slices,
                           peb_ceb, safe_inverse, scene_bounds)
from rispos.channel import mean_effective_channel, path_specs_from_eta
from rispos.errors import (DegenerateGeometry, UnboundedCovariance,
                           UnidentifiableError)
from rispos.geometry import (ChannelParams, Scene, forward_map,
                             scene_position_params)

from conftest import make_noiseless_obs


def _eta_steps(eta_vec: np.ndarray, num_ris: int) -> np.ndarray:
    """Per-parameter finite-difference steps: tiny for delays, modest otherwise."""
    steps = np.full_like(eta_vec, 1e-7)
    steps[[0, 1]] = 1e-6  # LOS gain (linear)
    steps[2] = 1e-13  # LOS delay: phase rate ~ 2 pi W
    for q in range(num_ris):
        steps[7 + 5 * q: 9 + 5 * q] = 1e-6
        steps[9 + 5 * q] = 1e-13
    return steps


def numerical_fim(eta: ChannelParams, scene: Scene, arrays, radio,
                  sigma_eff: float) -> np.ndarray:
    """FIM from central differences of the mean observation.

    For a Gaussian model with known covariance, the FIM is
    (2 / sigma^2) Re(G^H G) with G the Jacobian of the vectorized mean.
    """
    v0 = eta.flatten()
    steps = _eta_steps(v0, eta.num_ris)

    def mean(v):
        paths = path_specs_from_eta(ChannelParams.from_vector(v),
                                    scene.ris_positions)
        return mean_effective_channel(paths, arrays, radio).ravel()

    cols = []
    for i, h in enumerate(steps):
        vp, vm = v0.copy(), v0.copy()
        vp[i] += h
        vm[i] -= h
        cols.append((mean(vp) - mean(vm)) / (2 * h))
    g = np.column_stack(cols)
    return (2.0 / sigma_eff ** 2) * np.real(g.conj().T @ g)


def test_fim_eta_matches_finite_differences(scene, arrays, radio):
    _, paths, _, _ = make_noiseless_obs(scene, arrays, radio, seed=13)
    xi = scene_position_params(scene, paths[0].gain, [p.gain for p in paths[1:]])
    eta = forward_map(xi, scene)
    sigma_eff = 1e-7
    exact = fim_eta(paths, arrays, radio, sigma_eff)
    num = numerical_fim(eta, scene, arrays, radio, sigma_eff)
    rel = np.linalg.norm(exact - num) / np.linalg.norm(exact)
    assert rel < 1e-6


def test_fim_scales_with_sigma(scene, arrays, radio):
    _, paths, _, _ = make_noiseless_obs(scene, arrays, radio, seed=13)
    f1 = fim_eta(paths, arrays, radio, 1.0)
    f2 = fim_eta(paths, arrays, radio, 0.5)
    assert np.allclose(4 * f1, f2, rtol=1e-12)
    with pytest.raises(ValueError):
        fim_eta(paths, arrays, radio, 0.0)


def test_jacobian_matches_finite_differences(scene, arrays, radio):
    _, paths, _, _ = make_noiseless_obs(scene, arrays, radio, seed=13)
    xi = scene_position_params(scene, paths[0].gain, [p.gain for p in paths[1:]])
    v0 = xi.flatten()
    jac = jacobian(scene)
    h = 1e-6
    from rispos.geometry import PositionParams
    num = np.empty_like(jac)
    for i in range(len(v0)):
        vp, vm = v0.copy(), v0.copy()
        vp[i] += h
        vm[i] -= h
        fp = forward_map(PositionParams.from_vector(vp), scene).flatten()
        fm = forward_map(PositionParams.from_vector(vm), scene).flatten()
        num[:, i] = (fp - fm) / (2 * h)
    assert np.max(np.abs(jac - num)) < 1e-6


def test_path_slices_cover_eta():
    slices = path_slices(2)
    assert slices == [slice(0, 7), slice(7, 12), slice(12, 17)]


def test_path_jacobian_zenith_raises():
    with pytest.raises(DegenerateGeometry):
        path_jacobian(np.zeros(3), np.array([0.0, 0.0, 10.0]),
                      -np.eye(3)[1:3], with_bs_angles=False)


def test_safe_inverse_identity_and_singular():
    assert np.allclose(safe_inverse(np.eye(4)), np.eye(4))
    with pytest.raises(UnidentifiableError):
        safe_inverse(np.ones((3, 3)))  # rank 1: singular even after scaling


def test_peb_ceb_on_diagonal_fim():
    f = np.diag([4.0, 4.0, 4.0, 16.0, 1.0, 1.0])
    peb, ceb = peb_ceb(f)
    assert peb == pytest.approx(np.sqrt(3 * 0.25))
    assert ceb == pytest.approx(0.25)


def test_scene_bounds_finite_and_scaling(scene, arrays, radio):
    _, paths, _, _ = make_noiseless_obs(scene, arrays, radio, seed=13)
    peb1, ceb1 = scene_bounds(scene, paths, arrays, radio, 1e-7)
    peb2, ceb2 = scene_bounds(scene, paths, arrays, radio, 2e-7)
    assert 0 < peb1 < peb2 and 0 < ceb1 < ceb2
    assert peb2 / peb1 == pytest.approx(2.0, rel=1e-6)
    assert ceb2 / ceb1 == pytest.approx(2.0, rel=1e-6)


def test_anchor_fim_is_psd_and_identifiable(scene, arrays, radio):
    _, paths, _, _ = make_noiseless_obs(scene, arrays, radio, seed=13)
    f_eta = fim_eta(paths, arrays, radio, 1e-7)
    bound = path_bounds(f_eta, scene)
    assert len(bound.covariances) == scene.num_ris + 1
    for cov in bound.covariances:
        assert cov.shape == (3, 3)
        eig = np.linalg.eigvalsh(0.5 * (cov + cov.T))
        assert np.all(eig > 0)
    assert bound.eta_cov_los.shape == (7, 7)


def test_anchor_position_cov_unbounded_on_zero_information(scene):
    with pytest.raises(UnboundedCovariance):
        anchor_position_cov(np.zeros(3), scene.p_ue, scene.rotation,
                            np.zeros((5, 5)), is_los=False)


def test_anchor_fim_consistent_with_block(scene, arrays, radio):
    """J^T F J with the anchor reparameterization keeps the gain rows intact."""
    _, paths, _, _ = make_noiseless_obs(scene, arrays, radio, seed=13)
    f_eta = fim_eta(paths, arrays, radio, 1e-7)
    blk = f_eta[path_slices(scene.num_ris)[1], path_slices(scene.num_ris)[1]]
    fim = anchor_fim(scene.ris_positions[0], scene.p_ue, scene.rotation,
                     blk, is_los=False)
    assert fim.shape == (5, 5)
    assert np.allclose(fim, fim.T, atol=1e-8)
    # pure-gain block maps through unchanged
    assert np.allclose(fim[3:, 3:], blk[:2, :2])


def test_fim_xi_equals_sandwich(scene, arrays, radio):
    _, paths, _, _ = make_noiseless_obs(scene, arrays, radio, seed=13)
    f_eta = fim_eta(paths, arrays, radio, 1e-7)
    jac = jacobian(scene)
    assert np.allclose(fim_xi(f_eta, jac), jac.T @ f_eta @ jac)
