"""Fisher information and Cramer-Rao bounds for channel and position parameters.

The observation model is Gaussian with known covariance, so the FIM over
the channel parameters eta is

    [F]_{ij} = (2 / sigma_eff^2) sum_k Re tr( dH_k/d eta_i ^H  dH_k/d eta_j ).

Every path is rank-1 (see :class:`rispos.channel.PathSpec`), hence every
derivative factors as c_k * u v^H with a subcarrier sequence c, a UE-side
vector u and a BS-side vector v; traces then reduce to three scalar inner
products, which keeps the computation exact and cheap at any array size.

Position-domain bounds follow from the chain rule F_xi = J^T F_eta J with
the Jacobian J = d eta / d xi.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .channel import ArraySet, PathSpec, RadioConfig
from .errors import DegenerateGeometry, UnboundedCovariance, UnidentifiableError
from .geometry import SPEED_OF_LIGHT, Scene

_ZENITH_TOL = 1e-12


@dataclass(frozen=True)
class _Factor:
    """One derivative dH_k = c[k] * outer(u, conj(v))."""

    c: np.ndarray
    u: np.ndarray
    v: np.ndarray


def _path_factors(path: PathSpec, arrays: ArraySet, radio: RadioConfig,
                  with_bs_angles: bool) -> list[_Factor]:
    """Derivative factors of one path w.r.t. its own parameters, in eta order."""
    a_u = arrays.ue.response(*path.ue_cosines)
    a_b = arrays.bs.response(*path.bs_cosines)
    du_g, du_s = arrays.ue.response_grad(*path.ue_cosines)
    b = radio.delay_phase(path.delay)
    db = radio.delay_phase_deriv(path.delay)
    h = path.gain
    factors = [
        _Factor(b, a_u, a_b),            # Re h
        _Factor(1j * b, a_u, a_b),       # Im h
        _Factor(h * db, a_u, a_b),       # tau
        _Factor(h * b, du_g, a_b),       # g_u
        _Factor(h * b, du_s, a_b),       # s_u
    ]
    if with_bs_angles:
        dv_g, dv_s = arrays.bs.response_grad(*path.bs_cosines)
        factors.append(_Factor(h * b, a_u, dv_g))  # g_b
        factors.append(_Factor(h * b, a_u, dv_s))  # s_b
    return factors


def path_factor_table(paths, arrays: ArraySet, radio: RadioConfig) -> list[list[_Factor]]:
    """Per-path factor lists; the first (LOS) path carries BS angles too."""
    return [_path_factors(p, arrays, radio, with_bs_angles=(i == 0))
            for i, p in enumerate(paths)]


def fim_eta(paths, arrays: ArraySet, radio: RadioConfig, sigma_eff: float) -> np.ndarray:
    """FIM over eta = [eta_b (7); eta_r1 (5); ...], shape (7+5Q, 7+5Q).

    ``sigma_eff`` only scales the result; pass 1.0 for a noise-free
    reference information matrix.
    """
    if sigma_eff <= 0:
        raise ValueError("sigma_eff must be positive")
    factors = [f for path in path_factor_table(paths, arrays, radio) for f in path]
    p = len(factors)
    fim = np.empty((p, p))
    for i in range(p):
        fi = factors[i]
        for j in range(i, p):
            fj = factors[j]
            val = (np.vdot(fi.c, fj.c) * np.vdot(fi.u, fj.u) * np.vdot(fj.v, fi.v)).real
            fim[i, j] = fim[j, i] = val
    return (2.0 / sigma_eff ** 2) * fim


def path_slices(num_ris: int) -> list[slice]:
    """Index ranges of each path's parameters inside the eta vector."""
    out = [slice(0, 7)]
    for q in range(num_ris):
        out.append(slice(7 + 5 * q, 12 + 5 * q))
    return out


def _direction_jac(p_ref: np.ndarray, p_ue: np.ndarray):
    """Unit vector u, distance d, and du/dp = (I - u u^T)/d."""
    diff = p_ue - p_ref
    d = np.linalg.norm(diff)
    if d < 1e-9:
        raise DegenerateGeometry("UE coincides with an anchor")
    u = diff / d
    return u, d, (np.eye(3) - np.outer(u, u)) / d


def path_jacobian(p_ref: np.ndarray, p_ue: np.ndarray, rotation_rows: np.ndarray,
                  with_bs_angles: bool) -> np.ndarray:
    """Jacobian of one path's eta block w.r.t. [p_ue (3), clock_bias].

    Rows follow the eta block minus the two gain entries: [tau, g_u, s_u]
    plus [g_b, s_b] for the LOS path.  Columns are (x, y, z, clock).
    """
    u, _, du = _direction_jac(p_ref, p_ue)
    if abs(abs(u[2]) - 1.0) < _ZENITH_TOL:
        raise DegenerateGeometry("path at zenith: azimuth is unidentifiable")
    rows = [np.concatenate([u / SPEED_OF_LIGHT, [1.0]])]
    for row in rotation_rows @ du:
        rows.append(np.concatenate([row, [0.0]]))
    if with_bs_angles:
        for row in du[1:3]:
            rows.append(np.concatenate([row, [0.0]]))
    return np.vstack(rows)


def jacobian(scene: Scene) -> np.ndarray:
    """Full Jacobian J = d eta / d xi, shape (7+5Q, 6+2Q).

    xi is ordered [p_ue, clock, Re/Im h_bu, Re/Im h_r1, ...]; gains map
    one-to-one, delays and cosines depend on position and clock only.
    """
    q = scene.num_ris
    jac = np.zeros((7 + 5 * q, 6 + 2 * q))
    o_r = scene.rotation_rows

    jac[0, 4], jac[1, 5] = 1.0, 1.0  # LOS gain
    jac[2:7, 0:4] = path_jacobian(scene.p_bs, scene.p_ue, o_r, with_bs_angles=True)
    for i in range(q):
        r = 7 + 5 * i
        jac[r, 6 + 2 * i], jac[r + 1, 7 + 2 * i] = 1.0, 1.0
        jac[r + 2:r + 5, 0:4] = path_jacobian(scene.ris_positions[i], scene.p_ue,
                                              o_r, with_bs_angles=False)
    return jac


def fim_xi(f_eta: np.ndarray, jac: np.ndarray) -> np.ndarray:
    """Position-domain FIM J^T F_eta J."""
    return jac.T @ f_eta @ jac


def safe_inverse(mat: np.ndarray, label: str = "FIM") -> np.ndarray:
    """Cholesky-based inverse; raises UnidentifiableError when singular."""
    mat = 0.5 * (mat + mat.T)
    scale = np.sqrt(np.abs(np.diag(mat)))
    scale[scale == 0] = 1.0
    normed = mat / np.outer(scale, scale)
    try:
        c = cho_factor(normed + 1e-14 * np.eye(len(mat)))
    except np.linalg.LinAlgError as exc:
        raise UnidentifiableError(f"{label} is singular") from exc
    inv = cho_solve(c, np.eye(len(mat)))
    cond = np.linalg.cond(normed)
    if not np.isfinite(cond) or cond > 1e14:
        raise UnidentifiableError(f"{label} is numerically singular (cond={cond:.2e})")
    return inv / np.outer(scale, scale)


def peb_ceb(f_xi: np.ndarray) -> tuple[float, float]:
    """Position and clock error bounds from the position-domain FIM.

    PEB = sqrt(tr of the 3x3 position block of the inverse), CEB = sqrt of
    the clock-bias diagonal entry (in seconds).
    """
    inv = safe_inverse(f_xi, label="position-domain FIM")
    peb = float(np.sqrt(np.trace(inv[:3, :3])))
    ceb = float(np.sqrt(inv[3, 3]))
    return peb, ceb


def scene_bounds(scene: Scene, paths, arrays: ArraySet, radio: RadioConfig,
                 sigma_eff: float) -> tuple[float, float]:
    """PEB/CEB of a scene in one call."""
    f_eta = fim_eta(paths, arrays, radio, sigma_eff)
    return peb_ceb(fim_xi(f_eta, jacobian(scene)))


# ---------------------------------------------------------------------------
# per-path bounds (fusion weights)
# ---------------------------------------------------------------------------

def anchor_fim(p_ref: np.ndarray, anchor_pos: np.ndarray, rotation: np.ndarray,
               f_block: np.ndarray, is_los: bool) -> np.ndarray:
    """FIM of one path reparameterized by (anchor position, complex gain).

    The anchor is the clock-biased position the path's delay and direction
    point at; absorbing the clock into it makes each path individually
    identifiable (5 parameters against 5 or 7 measurements).
    """
    geo = path_jacobian(p_ref, anchor_pos, -np.asarray(rotation)[1:3, :],
                        with_bs_angles=is_los)[:, :3]  # drop the clock column
    jac = np.zeros((geo.shape[0] + 2, 5))
    jac[0, 3] = jac[1, 4] = 1.0  # gain rows map through unchanged
    jac[2:, :3] = geo
    return jac.T @ np.asarray(f_block) @ jac


def anchor_position_cov(p_ref, anchor_pos, rotation, f_block, is_los: bool) -> np.ndarray:
    """3x3 position block of the inverse anchor FIM (the per-path bound)."""
    fim = anchor_fim(p_ref, anchor_pos, rotation, f_block, is_los)
    try:
        return safe_inverse(fim, label="per-path anchor FIM")[:3, :3]
    except UnidentifiableError as exc:
        raise UnboundedCovariance(str(exc)) from exc


@dataclass(frozen=True)
class PathBound:
    """Per-path 3x3 anchor-position covariance bounds (LOS first)."""

    covariances: tuple  # of (3, 3) arrays
    eta_cov_los: np.ndarray  # [F_eta^-1]_{1:7,1:7}, the looser joint block


def path_bounds(f_eta: np.ndarray, scene: Scene) -> PathBound:
    """Anchor covariance bound of every path, evaluated at the scene truth.

    Calling this with an FIM built from an estimated eta (via
    ``path_specs_from_eta``) and anchor positions implied by that estimate
    yields the plug-in variant the fusion weights use.
    """
    from .geometry import clock_shifted_anchor  # anchors sit at the biased point

    blocks = path_slices(scene.num_ris)
    refs = [scene.p_bs] + list(scene.ris_positions)
    covs = []
    for i, (blk, ref) in enumerate(zip(blocks, refs)):
        pos = clock_shifted_anchor(ref, scene.p_ue, -scene.clock_bias)
        covs.append(anchor_position_cov(ref, pos, scene.rotation,
                                        f_eta[blk, blk], is_los=(i == 0)))
    cov_full = safe_inverse(f_eta, label="channel-parameter FIM")
    return PathBound(covariances=tuple(covs), eta_cov_los=cov_full[:7, :7])
