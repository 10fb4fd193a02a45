"""Ground-truth geometry: positions, rotations, angle/delay relations.

Conventions
-----------
The base station sits at the global origin.  Directions are parameterized
by an elevation/azimuth pair ``(theta, phi)`` mapped to the Cartesian
cosine triple ``(f, g, s) = (cos t cos p, cos t sin p, sin t)``, which is
exactly the unit vector pointing along the path.  The BS array lies in the
y-z plane (responds to ``(g, s)``), each RIS array in the x-z plane of its
local frame (responds to ``(f, s)``), and the UE array orientation is
given by a rotation matrix ``O`` whose negated rows 2..3 map a cosine
triple to the UE-side pair ``(g_u, s_u)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometry

SPEED_OF_LIGHT = 3e8

_COINCIDENT_TOL = 1e-9


def _as_point(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {p.shape}")
    return p


@dataclass(frozen=True)
class PathGeometry:
    """Delay, angles and direction cosines of one propagation path."""

    tau: float
    theta: float
    phi: float
    r: np.ndarray  # unit direction, equal to (f, g, s)

    @property
    def f(self) -> float:
        return float(self.r[0])

    @property
    def g(self) -> float:
        return float(self.r[1])

    @property
    def s(self) -> float:
        return float(self.r[2])


@dataclass(frozen=True)
class PositionParams:
    """UE position, clock bias and per-path complex gains (the xi vector)."""

    p_ue: np.ndarray
    clock_bias: float
    h_bu: complex
    h_ris: np.ndarray  # complex, shape (Q,)

    def __post_init__(self):
        object.__setattr__(self, "p_ue", _as_point(self.p_ue))
        object.__setattr__(self, "h_ris", np.asarray(self.h_ris, dtype=complex).reshape(-1))

    @property
    def num_ris(self) -> int:
        return len(self.h_ris)

    def flatten(self) -> np.ndarray:
        """[p_ue, clock, Re/Im h_bu, Re/Im h_r1, ...], length 6 + 2Q."""
        out = [self.p_ue, [self.clock_bias, self.h_bu.real, self.h_bu.imag]]
        for h in self.h_ris:
            out.append([h.real, h.imag])
        return np.concatenate(out)

    @classmethod
    def from_vector(cls, v: np.ndarray) -> "PositionParams":
        v = np.asarray(v, dtype=float)
        q = (len(v) - 6) // 2
        if len(v) != 6 + 2 * q:
            raise ValueError("xi vector length must be 6 + 2Q")
        h_ris = v[6::2] + 1j * v[7::2]
        return cls(p_ue=v[:3], clock_bias=float(v[3]), h_bu=complex(v[4], v[5]), h_ris=h_ris)


@dataclass(frozen=True)
class ChannelParams:
    """Per-path gains, delays and angle-cosines (the eta vector).

    ``eta_b`` is [Re h_bu, Im h_bu, tau_bu, g_u, s_u, g_b, s_b]; each row
    of ``eta_r`` is [Re h_rq, Im h_rq, tau_ruq, g_u, s_u].
    """

    eta_b: np.ndarray
    eta_r: np.ndarray  # shape (Q, 5)

    def __post_init__(self):
        object.__setattr__(self, "eta_b", np.asarray(self.eta_b, dtype=float).reshape(7))
        object.__setattr__(self, "eta_r", np.asarray(self.eta_r, dtype=float).reshape(-1, 5))

    @property
    def num_ris(self) -> int:
        return self.eta_r.shape[0]

    @property
    def h_bu(self) -> complex:
        return complex(self.eta_b[0], self.eta_b[1])

    def h_r(self, q: int) -> complex:
        return complex(self.eta_r[q, 0], self.eta_r[q, 1])

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.eta_b, self.eta_r.reshape(-1)])

    @classmethod
    def from_vector(cls, v: np.ndarray) -> "ChannelParams":
        v = np.asarray(v, dtype=float)
        q = (len(v) - 7) // 5
        if len(v) != 7 + 5 * q:
            raise ValueError("eta vector length must be 7 + 5Q")
        return cls(eta_b=v[:7], eta_r=v[7:].reshape(q, 5))


@dataclass(frozen=True)
class Scene:
    """Ground-truth placement of BS (origin), RISs and the UE."""

    ris_positions: np.ndarray  # (Q, 3)
    p_ue: np.ndarray
    rotation: np.ndarray  # UE orientation, 3x3, det +1
    clock_bias: float = 0.0
    p_bs: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "ris_positions",
                           np.asarray(self.ris_positions, dtype=float).reshape(-1, 3))
        object.__setattr__(self, "p_ue", _as_point(self.p_ue))
        object.__setattr__(self, "p_bs", _as_point(self.p_bs))
        o = np.asarray(self.rotation, dtype=float)
        if o.shape != (3, 3):
            raise ValueError("rotation must be 3x3")
        if np.linalg.norm(o @ o.T - np.eye(3)) > 1e-10 or abs(np.linalg.det(o) - 1) > 1e-10:
            raise ValueError("rotation must be orthonormal with det +1")
        object.__setattr__(self, "rotation", o)
        if np.any(np.abs(self.p_bs) > 0):
            raise ValueError("the BS anchors the global frame at the origin")
        pts = np.vstack([self.p_bs[None, :], self.ris_positions])
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                if np.linalg.norm(pts[i] - pts[j]) < _COINCIDENT_TOL:
                    raise DegenerateGeometry("BS/RIS positions must be distinct")
        g = [direction_and_angles(self.p_bs, p).g for p in self.ris_positions]
        if len(g) > 1 and np.min(np.abs(np.subtract.outer(g, g) + np.eye(len(g)))) < 1e-9:
            raise ValueError("BS-side cosines g of the RISs must be pairwise distinct")

    @property
    def num_ris(self) -> int:
        return self.ris_positions.shape[0]

    @property
    def rotation_rows(self) -> np.ndarray:
        """The 2x3 map from a cosine triple to the UE pair (g_u, s_u)."""
        return -self.rotation[1:3, :]


def direction_and_angles(p_from, p_to, clock_bias: float = 0.0) -> PathGeometry:
    """Unit direction, elevation/azimuth and biased delay from one point to another."""
    p_from = _as_point(p_from)
    p_to = _as_point(p_to)
    d = np.linalg.norm(p_to - p_from)
    if d < _COINCIDENT_TOL:
        raise DegenerateGeometry("coincident points have no direction")
    r = (p_to - p_from) / d
    theta = float(np.arcsin(np.clip(r[2], -1.0, 1.0)))
    phi = float(np.arctan2(p_to[1] - p_from[1], p_to[0] - p_from[0]))
    tau = d / SPEED_OF_LIGHT + clock_bias
    return PathGeometry(tau=tau, theta=theta, phi=phi, r=r)


def clock_shifted_anchor(p_ref, p_ue, clock_bias: float) -> np.ndarray:
    """Shift the UE position along the path direction by -c * clock_bias."""
    p_ref = _as_point(p_ref)
    p_ue = _as_point(p_ue)
    d = np.linalg.norm(p_ue - p_ref)
    if d < _COINCIDENT_TOL:
        raise DegenerateGeometry("coincident points")
    r = (p_ue - p_ref) / d
    return p_ue - SPEED_OF_LIGHT * clock_bias * r


def biased_anchor(p_ref, p_ue, clock_bias: float) -> np.ndarray:
    """Position implied by the biased delay: p_ref + c*tau*r = p_ue + c*bias*r.

    This is the anchor a delay/angle estimator actually recovers when the
    measured delay carries the clock bias; it is the mirror image of
    :func:`clock_shifted_anchor` in the sign of the bias.
    """
    return clock_shifted_anchor(p_ref, p_ue, -clock_bias)


def rotated_aoa(theta: float, phi: float, rotation: np.ndarray) -> tuple[float, float]:
    """UE-side cosine pair (g_u, s_u) for an incoming direction (theta, phi)."""
    t = np.array([np.cos(theta) * np.cos(phi),
                  np.cos(theta) * np.sin(phi),
                  np.sin(theta)])
    g_u, s_u = -np.asarray(rotation, dtype=float)[1:3, :] @ t
    return float(g_u), float(s_u)


def forward_map(xi: PositionParams, scene: Scene) -> ChannelParams:
    """Map position parameters to channel parameters, F(xi) = eta."""
    if xi.num_ris != scene.num_ris:
        raise ValueError("xi and scene disagree on the number of RISs")
    o_r = scene.rotation_rows

    los = direction_and_angles(scene.p_bs, xi.p_ue, xi.clock_bias)
    g_u, s_u = o_r @ los.r
    eta_b = np.array([xi.h_bu.real, xi.h_bu.imag, los.tau, g_u, s_u, los.g, los.s])

    eta_r = np.empty((scene.num_ris, 5))
    for q in range(scene.num_ris):
        path = direction_and_angles(scene.ris_positions[q], xi.p_ue, xi.clock_bias)
        g_u, s_u = o_r @ path.r
        h = xi.h_ris[q]
        eta_r[q] = [h.real, h.imag, path.tau, g_u, s_u]
    return ChannelParams(eta_b=eta_b, eta_r=eta_r)


def scene_position_params(scene: Scene, h_bu: complex, h_ris) -> PositionParams:
    """Convenience: the xi vector matching a scene's ground truth."""
    return PositionParams(p_ue=scene.p_ue, clock_bias=scene.clock_bias,
                          h_bu=h_bu, h_ris=h_ris)
