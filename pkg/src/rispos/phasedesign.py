"""RIS phase-shift design: SVD-based coverage beams and a random baseline.

The design objective is the region-averaged reflected energy: grid the
angular coverage region, stack the RIS steering vectors of the gridded
directions into D_A, and take the dominant singular direction as the
relaxed optimum.  Projecting its entries to unit modulus gives the phase
profile; the known incident (BS-side) steering phase is compensated so
that the reflected beam, not the element pattern, points at the region.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ArrayConfig
from .geometry import direction_and_angles


@dataclass(frozen=True)
class CoverageRegion:
    """Angular region (elevation x azimuth, radians) seen from the RIS."""

    theta_lo: float
    theta_hi: float
    phi_lo: float
    phi_hi: float
    grid_theta: int = 16
    grid_phi: int = 16

    def __post_init__(self):
        if self.theta_lo > self.theta_hi or self.phi_lo > self.phi_hi:
            raise ValueError("region bounds must satisfy lo <= hi")
        if self.grid_theta < 1 or self.grid_phi < 1:
            raise ValueError("grid counts must be >= 1")

    def cosines(self) -> np.ndarray:
        """(Z, 2) array of (f, s) pairs, uniform in (theta, phi)."""
        th = np.linspace(self.theta_lo, self.theta_hi, self.grid_theta)
        ph = np.linspace(self.phi_lo, self.phi_hi, self.grid_phi)
        tt, pp = np.meshgrid(th, ph, indexing="ij")
        return np.column_stack([(np.cos(tt) * np.cos(pp)).ravel(),
                                np.sin(tt).ravel()])


def region_toward(p_from, p_to, half_width: float,
                  grid_theta: int = 16, grid_phi: int = 16) -> CoverageRegion:
    """Square angular region of the given half-width around one direction."""
    geo = direction_and_angles(p_from, p_to)
    return CoverageRegion(geo.theta - half_width, geo.theta + half_width,
                          geo.phi - half_width, geo.phi + half_width,
                          grid_theta=grid_theta, grid_phi=grid_phi)


@dataclass(frozen=True)
class PhaseDesign:
    """Unit-modulus phase profile and its region-averaged objective value."""

    phases: np.ndarray  # (M,) complex, |.| = 1
    expected_gain: float = float("nan")

    def __post_init__(self):
        p = np.asarray(self.phases, dtype=complex).reshape(-1)
        object.__setattr__(self, "phases", p)
        if np.max(np.abs(np.abs(p) - 1.0)) > 1e-12:
            raise ValueError("phase entries must have unit modulus")


def power_iteration(mat: np.ndarray, tol: float = 1e-10,
                    max_iter: int = 10000) -> np.ndarray:
    """Dominant eigenvector of a Hermitian PSD matrix.

    Deterministic start (first column, normalized) keeps designs
    reproducible without a seed.
    """
    mat = np.asarray(mat)
    v = mat[:, 0].astype(complex)
    nrm = np.linalg.norm(v)
    if nrm == 0:
        v = np.ones(mat.shape[0], dtype=complex)
        nrm = np.linalg.norm(v)
    v = v / nrm
    for _ in range(max_iter):
        w = mat @ v
        nrm = np.linalg.norm(w)
        if nrm == 0:
            return v
        w = w / nrm
        # align the arbitrary global phase before the convergence test
        w = w * np.exp(-1j * np.angle(np.vdot(v, w)))
        if np.linalg.norm(w - v) < tol:
            return w
        v = w
    return v


def _steering_stack(array: ArrayConfig, cosines: np.ndarray) -> np.ndarray:
    """(M, Z) matrix of RIS steering vectors for rows of (f, s) pairs."""
    return np.column_stack([array.response(f, s) for f, s in cosines])


def region_gain(phases: np.ndarray, array: ArrayConfig, bs_cosines,
                region: CoverageRegion) -> float:
    """Region-averaged |cascade|^2 of a phase profile for one incident direction."""
    a_in = array.response(*bs_cosines)
    d_a = _steering_stack(array, region.cosines())
    c = d_a.conj().T @ (np.asarray(phases) * a_in)
    return float(np.mean(np.abs(c) ** 2))


def design_phase_single(region: CoverageRegion, array: ArrayConfig,
                        bs_cosines) -> PhaseDesign:
    """SVD coverage design for one RIS and one BS.

    The dominant eigenvector of D_A D_A^H is the unconstrained maximizer
    of the region-summed beam energy; its phases, minus the incident
    steering phases, give the unit-modulus profile.
    """
    d_a = _steering_stack(array, region.cosines())
    v = power_iteration(d_a @ d_a.conj().T)
    a_in = array.response(*bs_cosines)
    phases = np.exp(1j * (np.angle(v) - np.angle(a_in)))
    return PhaseDesign(phases=phases,
                       expected_gain=region_gain(phases, array, bs_cosines, region))


def design_phase_multibs(ue_region: CoverageRegion, bs_region: CoverageRegion,
                         array: ArrayConfig) -> PhaseDesign:
    """Joint coverage design when the incident direction is itself uncertain.

    A_S pairs every incident grid direction with every serving direction
    through the diagonal phase profile: column m holds
    conj(A_bs[m, :]) kron-paired with A_ue[m, :].  The dominant right
    singular vector of A_S maximizes the summed pairwise cascade energy.
    """
    a_bs = _steering_stack(array, bs_region.cosines())  # (M, Z1)
    a_ue = _steering_stack(array, ue_region.cosines())  # (M, Z2)
    m = array.size
    a_s = np.empty((a_bs.shape[1] * a_ue.shape[1], m), dtype=complex)
    for col in range(m):
        a_s[:, col] = np.kron(np.conj(a_bs[col, :]), a_ue[col, :])
    v = power_iteration(a_s.conj().T @ a_s)
    phases = np.exp(1j * np.angle(v))
    gain = float(np.linalg.norm(a_s @ phases) ** 2 / a_s.shape[0])
    return PhaseDesign(phases=phases, expected_gain=gain)


def random_phases(m: int, rng: np.random.Generator) -> PhaseDesign:
    """Baseline: iid uniform phases on [0, 2*pi)."""
    return PhaseDesign(phases=np.exp(2j * np.pi * rng.uniform(size=m)))
