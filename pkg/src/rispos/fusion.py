"""Position/clock recovery from estimated channel parameters.

Each path yields an *anchor*: the point its measured delay and direction
place at distance c*tau from the known reference (BS or RIS).  Because the
measured delay carries the UE clock bias, every anchor sits at
p_ue + c * bias * r along its own direction r; a weighted least-squares
fit over all anchors therefore separates the common position from the
common bias.  Weights are plug-in per-path error bounds evaluated at the
estimate, so well-measured paths dominate the fusion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .bounds import anchor_position_cov, fim_eta, path_slices, safe_inverse
from .channel import ArraySet, RadioConfig, path_specs_from_eta
from .errors import (FusionImpossible, InvalidCosines, UnboundedCovariance,
                     UnidentifiableError)
from .estimation import KnownGeometry
from .geometry import (SPEED_OF_LIGHT, ChannelParams, PositionParams, Scene,
                       forward_map)


@dataclass(frozen=True)
class PathAnchor:
    """One path's position fix: anchor point, direction and 3x3 weight."""

    position: np.ndarray  # p_ue + c*bias*direction, ideally
    direction: np.ndarray  # unit vector from the reference toward the UE
    weight: np.ndarray  # inverse of the plug-in position covariance
    is_los: bool

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        object.__setattr__(self, "direction", np.asarray(self.direction, dtype=float).reshape(3))
        object.__setattr__(self, "weight", np.asarray(self.weight, dtype=float).reshape(3, 3))


@dataclass(frozen=True)
class FusionResult:
    """Fused UE position, clock bias and their joint 4x4 covariance."""

    p_ue: np.ndarray
    clock_bias: float
    covariance: np.ndarray  # over [p_ue, c*clock_bias]
    anchors: tuple
    objective: float = 0.0  # weighted residual quadratic at the optimum
    clock_fixed: bool = False  # True when geometry forced clock_bias := 0


# ---------------------------------------------------------------------------
# per-path anchors
# ---------------------------------------------------------------------------

def _constrained_direction(measured: np.ndarray, weight: np.ndarray,
                           rotation: np.ndarray) -> np.ndarray:
    """WLS direction from the 4 LOS cosine measurements [g_u, s_u, g_b, s_b].

    Both pairs are linear images of the unit direction z: the UE pair via
    the rotation rows, the BS pair via coordinate selection.  The 4x3
    system can be rank-deficient (for some rotations no measurement sees
    one component of z); the unseen component is completed from the
    unit-norm constraint with a positive-x sign, the BS boresight side.
    """
    a = np.vstack([-np.asarray(rotation)[1:3, :],
                   np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])])
    w_half = np.linalg.cholesky(0.5 * (weight + weight.T)
                                + 1e-12 * np.trace(weight) / 4 * np.eye(4)).T
    lhs = w_half @ a
    u, sv, vt = np.linalg.svd(lhs)
    rank = int(np.sum(sv > 1e-9 * sv[0]))
    if rank == 0:
        raise FusionImpossible("LOS cosine measurements carry no direction information")
    # minimal-norm solution in the observed subspace
    z = vt[:rank].T @ ((u[:, :rank].conj().T @ (w_half @ measured)) / sv[:rank])
    if rank < 3:
        null = vt[rank:].T  # (3, 3-rank)
        gap = max(0.0, 1.0 - float(z @ z))
        comp = null[:, 0] * np.sqrt(gap)
        z = z + comp if (z + comp)[0] >= (z - comp)[0] else z - comp
    nrm = np.linalg.norm(z)
    if nrm < 1e-9:
        raise FusionImpossible("LOS direction estimate collapsed to zero")
    return z / nrm


def _reflection_direction(g_u: float, s_u: float, rotation: np.ndarray) -> np.ndarray:
    """Global direction RIS -> UE from the UE-side cosine pair.

    The missing first cosine in the UE frame is resolved as
    -sqrt(1 - g^2 - s^2), i.e. arrivals hit the front of the UE array.
    """
    rho = g_u ** 2 + s_u ** 2
    if rho > 1.0 + 1e-3:
        raise InvalidCosines(f"(g_u, s_u) off the unit disk: ({g_u:.4f}, {s_u:.4f})")
    f_u = -np.sqrt(max(0.0, 1.0 - rho))
    t_ue = np.array([f_u, g_u, s_u])
    return -np.asarray(rotation).T @ t_ue


def _anchor_weight(p_ref: np.ndarray, anchor_pos: np.ndarray, rotation: np.ndarray,
                   f_block: np.ndarray, is_los: bool) -> np.ndarray:
    """Plug-in inverse position covariance of one path's anchor.

    Reparameterize the path by (anchor position, complex gain); the clock
    bias is absorbed into the anchor, which is exactly what the WLS stage
    estimates.  The weight is the position block of the resulting FIM
    inverse, inverted again.
    """
    cov = anchor_position_cov(p_ref, anchor_pos, rotation, f_block, is_los)
    if not np.all(np.isfinite(cov)) or np.trace(cov) <= 0:
        raise UnboundedCovariance("anchor covariance is not positive")
    return safe_inverse(cov, label="anchor position covariance")


def build_anchors(eta: ChannelParams, known: KnownGeometry, rotation: np.ndarray,
                  arrays: ArraySet, radio: RadioConfig, sigma_eff: float,
                  p_bs: np.ndarray | None = None,
                  identity_weights: bool = False,
                  clock_hint: float = 0.0) -> list[PathAnchor]:
    """Anchors for every path, weighted by plug-in bounds at the estimate.

    ``identity_weights`` replaces the bound-derived weights with identity
    matrices (the plain-LS benchmark that trusts all paths equally).

    ``clock_hint`` (seconds) shifts the point where each weight is
    evaluated to ``anchor - c*clock_hint*r``.  In the fusion residual
    ``a - p - c*bias*r`` the clock part of the anchor cancels, so the
    direction-error lever arm is the clock-free range, not the biased
    anchor range; a hint from a first WLS pass makes the weights match
    that lever arm.
    """
    p_bs = np.zeros(3) if p_bs is None else np.asarray(p_bs, dtype=float)
    paths = path_specs_from_eta(eta, known.ris_positions, p_bs=p_bs)
    f_full = fim_eta(paths, arrays, radio, sigma_eff)
    cov_full = safe_inverse(f_full, label="channel-parameter FIM")
    blocks = path_slices(eta.num_ris)

    # LOS: fuse the four measured cosines into one direction first
    m = eta.eta_b[3:7]
    try:
        w4 = safe_inverse(cov_full[3:7, 3:7], label="LOS cosine covariance")
    except UnidentifiableError:
        w4 = np.eye(4)  # degenerate weight: fall back to unweighted direction fit
    z = _constrained_direction(m, w4, rotation)
    tau = eta.eta_b[2]
    pos = p_bs + SPEED_OF_LIGHT * tau * z

    def weight(p_ref, p_anchor, direction, block, is_los):
        if identity_weights:
            return np.eye(3)
        at = p_anchor - SPEED_OF_LIGHT * clock_hint * direction
        return _anchor_weight(p_ref, at, rotation, block, is_los)

    anchors = [PathAnchor(position=pos, direction=z, is_los=True,
                          weight=weight(p_bs, pos, z,
                                        f_full[blocks[0], blocks[0]], True))]

    for q in range(eta.num_ris):
        g_u, s_u, tau = eta.eta_r[q, 3], eta.eta_r[q, 4], eta.eta_r[q, 2]
        r = _reflection_direction(g_u, s_u, rotation)
        p_ref = known.ris_positions[q]
        pos = p_ref + SPEED_OF_LIGHT * tau * r
        anchors.append(PathAnchor(position=pos, direction=r, is_los=False,
                                  weight=weight(p_ref, pos, r,
                                                f_full[blocks[q + 1], blocks[q + 1]],
                                                False)))
    return anchors


# ---------------------------------------------------------------------------
# weighted fusion
# ---------------------------------------------------------------------------

def _objective(anchors, p: np.ndarray, c_bias: float) -> float:
    val = 0.0
    for a in anchors:
        e = a.position - p - c_bias * a.direction
        val += float(e @ a.weight @ e)
    return val


def wls_position_given_bias(anchors, c_bias: float) -> np.ndarray:
    """Closed-form position minimizer with the (scaled) clock bias held fixed."""
    w_sum = sum(a.weight for a in anchors)
    rhs = sum(a.weight @ (a.position - c_bias * a.direction) for a in anchors)
    return np.linalg.solve(w_sum, rhs)


def wls_fuse(anchors) -> FusionResult:
    """Weighted least squares over position and clock bias.

    The model anchor_q = p + (c*bias) * r_q is jointly linear in
    x = [p, c*bias], so the optimum solves exact 4x4 normal equations.
    With a single anchor (or near-parallel directions) the bias is not
    separable; it is then fixed to zero and the result flagged.
    """
    if not anchors:
        raise FusionImpossible("no anchors to fuse")
    lhs = np.zeros((4, 4))
    rhs = np.zeros(4)
    for a in anchors:
        mat = np.hstack([np.eye(3), a.direction[:, None]])  # 3x4
        lhs += mat.T @ a.weight @ mat
        rhs += mat.T @ a.weight @ a.position
    if len(anchors) >= 2 and np.linalg.cond(lhs) < 1e12:
        x = np.linalg.solve(lhs, rhs)
        return FusionResult(p_ue=x[:3], clock_bias=float(x[3]) / SPEED_OF_LIGHT,
                            covariance=safe_inverse(lhs, label="fusion normal matrix"),
                            anchors=tuple(anchors),
                            objective=_objective(anchors, x[:3], float(x[3])))
    # fall back: clock bias not separable from position along a single ray
    p = wls_position_given_bias(anchors, 0.0)
    cov4 = np.full((4, 4), np.inf)
    cov4[:3, :3] = safe_inverse(lhs[:3, :3], label="fusion normal matrix")
    return FusionResult(p_ue=p, clock_bias=0.0, covariance=cov4,
                        anchors=tuple(anchors), clock_fixed=True,
                        objective=_objective(anchors, p, 0.0))


def fuse_from_eta(eta: ChannelParams, known: KnownGeometry, rotation: np.ndarray,
                  arrays: ArraySet, radio: RadioConfig, sigma_eff: float,
                  identity_weights: bool = False) -> FusionResult:
    """Anchor construction plus WLS fusion, with one weight re-polish pass.

    The first pass estimates the clock bias with weights evaluated at the
    biased anchors; the second pass re-evaluates the weights at the
    clock-corrected lever arm (see :func:`build_anchors`) and re-solves.
    """
    anchors = build_anchors(eta, known, rotation, arrays, radio, sigma_eff,
                            identity_weights=identity_weights)
    result = wls_fuse(anchors)
    if identity_weights or result.clock_fixed:
        return result
    anchors = build_anchors(eta, known, rotation, arrays, radio, sigma_eff,
                            clock_hint=result.clock_bias)
    return wls_fuse(anchors)


# ---------------------------------------------------------------------------
# ExIP refinement
# ---------------------------------------------------------------------------

def exip_objective(eta_hat: ChannelParams, f_eta: np.ndarray, xi: PositionParams,
                   scene: Scene) -> float:
    """Extended-invariance quadratic form (eta_hat - F(xi))^T F_eta (eta_hat - F(xi))."""
    resid = eta_hat.flatten() - forward_map(xi, scene).flatten()
    return float(resid @ f_eta @ resid)


def exip_refine(eta_hat: ChannelParams, f_eta: np.ndarray, scene: Scene,
                x0: PositionParams) -> PositionParams:
    """Minimize the ExIP objective over the full position-parameter vector.

    ``scene`` supplies the known geometry (RIS/BS placement, rotation);
    its UE position and clock are ignored in favor of the optimizer state.
    """
    # scale to unit diagonal before factorizing: the FIM mixes delay rows
    # (~1/var(tau)) with angle rows many orders of magnitude smaller, and a
    # trace-scaled jitter would drown the small blocks
    d = np.sqrt(np.diag(f_eta))
    d[d <= 0] = 1.0
    scaled = f_eta / np.outer(d, d)
    chol = np.linalg.cholesky(scaled + 1e-12 * np.eye(len(f_eta)))

    def resid(v: np.ndarray) -> np.ndarray:
        xi = PositionParams.from_vector(v)
        return chol.T @ (d * (eta_hat.flatten() - forward_map(xi, scene).flatten()))

    v0 = x0.flatten()
    scale = np.maximum(np.abs(v0), 1e-9)
    res = least_squares(resid, v0, x_scale=scale, xtol=1e-15, ftol=1e-15, gtol=1e-15)
    return PositionParams.from_vector(res.x)


# ---------------------------------------------------------------------------
# multi-BS fusion
# ---------------------------------------------------------------------------

def multi_fuse(positions, covariances, drift_covariances=None) -> tuple[np.ndarray, np.ndarray]:
    """Combine per-BS position estimates with covariance weighting.

    Each estimate may carry an extra covariance term for unsynchronized
    clock drift; the weight of estimate b is (C_b + C_drift_b)^{-1}.
    Returns the fused position and its covariance.
    """
    positions = [np.asarray(p, dtype=float).reshape(3) for p in positions]
    if drift_covariances is None:
        drift_covariances = [np.zeros((3, 3))] * len(positions)
    if not (len(positions) == len(covariances) == len(drift_covariances)):
        raise ValueError("positions, covariances and drift terms must align")
    if not positions:
        raise FusionImpossible("no estimates to fuse")
    w_sum = np.zeros((3, 3))
    wp_sum = np.zeros(3)
    for p, c, cd in zip(positions, covariances, drift_covariances):
        w = safe_inverse(np.asarray(c, dtype=float) + np.asarray(cd, dtype=float),
                         label="per-BS covariance")
        w_sum += w
        wp_sum += w @ p
    cov = safe_inverse(w_sum, label="fused information")
    return cov @ wp_sum, cov
