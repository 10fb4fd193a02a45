"""Channel-parameter estimation: AoD search, MUSIC delays/AoAs, LS gains.

The receiver knows the deployment constants (BS-side cosines and delays of
the BS-RIS legs) and estimates, from the de-precoded observations, the
per-path gains, delays and UE-side angle cosines plus the LOS departure
angles.  The stages are

1. LOS AoD by maximizing the projected-beam energy on the BS side after
   removing the known RIS steering directions,
2. path separation by least squares against the BS-side steering matrix,
   giving per-path energies,
3. delays by root-less MUSIC over the subcarrier axis (all paths jointly),
4. UE-side angle pairs by 2-D MUSIC over the UE array axis,
5. raw MUSIC estimates assigned to paths by matching energy ranks,
6. complex gains by a joint least-squares fit of the reconstructed
   rank-1 regressors to the vectorized observations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh, lstsq
from scipy.ndimage import maximum_filter
from scipy.optimize import minimize, minimize_scalar

from .channel import ObservationSet
from .errors import (GainIllConditioned, MatchingAmbiguous, PeakDeficit,
                     ShapeError)
from .geometry import ChannelParams, Scene, direction_and_angles


@dataclass(frozen=True)
class KnownGeometry:
    """Deployment constants the estimator may rely on."""

    ris_positions: np.ndarray  # (Q, 3)
    ris_bs_cosines: np.ndarray  # (Q, 2): (g, s) of the BS->RIS direction
    ris_delays: np.ndarray  # (Q,): propagation delay of the BS-RIS leg

    def __post_init__(self):
        object.__setattr__(self, "ris_positions",
                           np.asarray(self.ris_positions, dtype=float).reshape(-1, 3))
        object.__setattr__(self, "ris_bs_cosines",
                           np.asarray(self.ris_bs_cosines, dtype=float).reshape(-1, 2))
        object.__setattr__(self, "ris_delays",
                           np.asarray(self.ris_delays, dtype=float).reshape(-1))

    @property
    def num_ris(self) -> int:
        return self.ris_positions.shape[0]

    @classmethod
    def from_scene(cls, scene: Scene) -> "KnownGeometry":
        cos, tau = [], []
        for p_r in scene.ris_positions:
            leg = direction_and_angles(scene.p_bs, p_r)
            cos.append([leg.g, leg.s])
            tau.append(leg.tau)
        return cls(ris_positions=scene.ris_positions,
                   ris_bs_cosines=np.array(cos).reshape(-1, 2),
                   ris_delays=np.array(tau))


@dataclass(frozen=True)
class PeakSearchSpec:
    """Grid and refinement controls for the spectral searches."""

    angle_grid: int = 181  # points per cosine axis on [-1, 1]
    delay_oversample: int = 8  # grid points per subcarrier tap
    refine_xatol: float = 1e-12  # cosine-domain refinement tolerance
    delay_xatol_frac: float = 1e-10  # delay tolerance as a fraction of 1/W


# ---------------------------------------------------------------------------
# data reshapes
# ---------------------------------------------------------------------------

def bs_side_stack(obs: ObservationSet) -> np.ndarray:
    """(N, K*D) matrix whose columns live in the span of the BS steering vectors."""
    return np.conj(obs.r_eff).transpose(2, 0, 1).reshape(obs.r_eff.shape[2], -1)


def subcarrier_stack(obs: ObservationSet) -> np.ndarray:
    """(K, D*N) matrix whose columns live in the span of the delay signatures."""
    k = obs.r_eff.shape[0]
    return obs.r_eff.reshape(k, -1)


def ue_side_stack(obs: ObservationSet) -> np.ndarray:
    """(D, K*N) matrix whose columns live in the span of the UE steering vectors."""
    d = obs.r_eff.shape[1]
    return obs.r_eff.transpose(1, 0, 2).reshape(d, -1)


def _steering_grid(array, grid1: np.ndarray, grid2: np.ndarray) -> np.ndarray:
    """All URA responses on a cosine grid, shape (size, len(grid1)*len(grid2))."""
    u1 = np.exp(1j * np.pi * np.outer(np.arange(array.rows), grid1)) / np.sqrt(array.rows)
    u2 = np.exp(1j * np.pi * np.outer(np.arange(array.cols), grid2)) / np.sqrt(array.cols)
    # kron over the antenna axis for every (i, j) grid pair
    out = u1[:, None, :, None] * u2[None, :, None, :]
    return out.reshape(array.size, len(grid1) * len(grid2))


# ---------------------------------------------------------------------------
# stage 1: LOS departure angles
# ---------------------------------------------------------------------------

def estimate_aod(obs: ObservationSet, known: KnownGeometry,
                 search: PeakSearchSpec = PeakSearchSpec()) -> tuple[float, float]:
    """LOS (g_b, s_b) maximizing ||abar(g,s)^H R_B||^2.

    ``abar`` is the BS steering vector with the known RIS directions
    projected out and renormalized, so reflected energy cannot bias the
    search even when a RIS path is much stronger than the direct one.
    """
    r_b = bs_side_stack(obs)
    n = r_b.shape[0]
    cov = r_b @ r_b.conj().T  # the beam energy is a quadratic form in this
    a_ris = np.column_stack([obs.arrays.bs.response(g, s)
                             for g, s in known.ris_bs_cosines]) \
        if known.num_ris else np.zeros((n, 0), dtype=complex)
    q_ris, _ = np.linalg.qr(a_ris) if a_ris.shape[1] else (a_ris, None)

    def _project(a: np.ndarray) -> np.ndarray:
        if q_ris.shape[1]:
            a = a - q_ris @ (q_ris.conj().T @ a)
        return a

    def objective(gs) -> float:
        a = _project(obs.arrays.bs.response(*gs))
        nrm = np.linalg.norm(a)
        if nrm < 1e-9:  # direction indistinguishable from a RIS column
            return 0.0
        a = a / nrm
        return float(np.real(a.conj() @ cov @ a))

    grid = np.linspace(-1, 1, search.angle_grid)
    a_all = _steering_grid(obs.arrays.bs, grid, grid)  # (N, Gg*Gs)
    a_all = _project(a_all)
    nrm = np.linalg.norm(a_all, axis=0)
    nrm[nrm < 1e-9] = np.inf
    vals = np.real(np.sum(np.conj(a_all) * (cov @ a_all), axis=0)) / nrm ** 2
    gi, si = np.unravel_index(int(np.argmax(vals)), (len(grid), len(grid)))
    best = (grid[gi], grid[si])
    res = minimize(lambda gs: -objective(gs), x0=np.array(best), method="Nelder-Mead",
                   options={"xatol": search.refine_xatol, "fatol": 0, "maxiter": 2000})
    g, s = np.clip(res.x, -1.0, 1.0)
    return float(g), float(s)


# ---------------------------------------------------------------------------
# stage 2: path separation and energies
# ---------------------------------------------------------------------------

def separate_paths(obs: ObservationSet, known: KnownGeometry,
                   aod: tuple[float, float]) -> np.ndarray:
    """LS coefficients (Q+1, K*D) of each path on the BS side (LOS row first)."""
    cols = [obs.arrays.bs.response(*aod)]
    cols += [obs.arrays.bs.response(g, s) for g, s in known.ris_bs_cosines]
    a_b = np.column_stack(cols)
    coeffs, *_ = lstsq(a_b, bs_side_stack(obs))
    return coeffs


def order_paths_by_energy(coeffs: np.ndarray) -> np.ndarray:
    """Row energies of the separation coefficients, one per path."""
    return np.linalg.norm(coeffs, axis=1) ** 2


def match_by_energy(path_energy: np.ndarray, est_energy: np.ndarray,
                    rel_tol: float = 1e-9) -> np.ndarray:
    """kappa[p] = index of the raw estimate whose energy rank equals path p's.

    Raises MatchingAmbiguous when two energies on either side are too close
    to order reliably.
    """
    if len(path_energy) != len(est_energy):
        raise ShapeError("energy vectors must have equal length")
    for e in (path_energy, est_energy):
        srt = np.sort(e)[::-1]
        if len(srt) > 1 and np.min(srt[:-1] - srt[1:]) <= rel_tol * srt[0]:
            raise MatchingAmbiguous("path energies too close to rank")
    path_rank = np.argsort(np.argsort(-path_energy))
    est_by_rank = np.argsort(-est_energy)
    return est_by_rank[path_rank]


# ---------------------------------------------------------------------------
# MUSIC machinery
# ---------------------------------------------------------------------------

def _noise_subspace(data: np.ndarray, n_signals: int) -> np.ndarray:
    """Eigenvectors of data @ data^H beyond the n_signals largest."""
    dim = data.shape[0]
    if n_signals >= dim:
        raise ShapeError(f"need more than {n_signals} sensors/subcarriers, got {dim}")
    cov = data @ data.conj().T
    _, vec = eigh(cov)
    return vec[:, : dim - n_signals]  # ascending eigenvalues -> leading cols are noise


def _top_local_maxima_1d(values: np.ndarray, n_peaks: int) -> list[int]:
    idx = [i for i in range(len(values))
           if values[i] >= values[i - 1] and values[i] >= values[(i + 1) % len(values)]]
    idx.sort(key=lambda i: -values[i])
    out = []
    for i in idx:
        if all(abs(i - j) > 1 for j in out):
            out.append(i)
        if len(out) == n_peaks:
            break
    return out


def estimate_delays_music(obs: ObservationSet, n_paths: int,
                          search: PeakSearchSpec = PeakSearchSpec()) -> np.ndarray:
    """Raw (unassigned) path delays from the subcarrier-axis MUSIC spectrum."""
    radio = obs.radio
    k = radio.num_subcarriers
    noise = _noise_subspace(subcarrier_stack(obs), n_paths)

    def cost(tau: float) -> float:
        b = radio.delay_phase(tau) / np.sqrt(k)
        return float(np.linalg.norm(b.conj() @ noise) ** 2)

    t_max = radio.unambiguous_delay
    grid = np.linspace(0.0, t_max, search.delay_oversample * k, endpoint=False)
    vals = -np.array([cost(t) for t in grid])
    peaks = _top_local_maxima_1d(vals, n_paths)
    if len(peaks) < n_paths:
        found = [float(grid[i]) for i in peaks]
        raise PeakDeficit(f"found {len(peaks)} of {n_paths} delay peaks", found=found)

    step = grid[1] - grid[0]
    out = []
    for i in peaks:
        lo, hi = grid[i] - step, grid[i] + step
        res = minimize_scalar(cost, bounds=(lo, hi), method="bounded",
                              options={"xatol": search.delay_xatol_frac / radio.bandwidth})
        out.append(float(res.x) % t_max)
    return np.array(out)


def estimate_aoas_music(obs: ObservationSet, n_paths: int,
                        search: PeakSearchSpec = PeakSearchSpec()) -> np.ndarray:
    """Raw (unassigned) UE-side cosine pairs (g_u, s_u), shape (n_paths, 2)."""
    noise = _noise_subspace(ue_side_stack(obs), n_paths)
    arr = obs.arrays.ue

    def cost(gs) -> float:
        g, s = gs
        rho = g * g + s * s
        if rho > 1.0:  # keep the refinement on the physical cosine disk
            scale = 1.0 / np.sqrt(rho)
            g, s = g * scale, s * scale
            penalty = 10.0 * (rho - 1.0)
        else:
            penalty = 0.0
        return float(np.linalg.norm(arr.response(g, s).conj() @ noise) ** 2) + penalty

    grid = np.linspace(-1, 1, search.angle_grid)
    a_all = _steering_grid(arr, grid, grid)  # (D, G*G)
    spec = (-np.linalg.norm(a_all.conj().T @ noise, axis=1) ** 2
            ).reshape(len(grid), len(grid))
    local_max = (spec == maximum_filter(spec, size=3, mode="nearest"))
    cand = np.argwhere(local_max)
    cand = cand[np.argsort(-spec[local_max])]

    peaks = []
    sep = 3 * (grid[1] - grid[0])  # distinct local maxima, not distinct beams
    for gi, si in cand:
        pt = (grid[gi], grid[si])
        if all(abs(pt[0] - p[0]) > sep or abs(pt[1] - p[1]) > sep for p in peaks):
            peaks.append(pt)
        if len(peaks) == n_paths:
            break
    if len(peaks) < n_paths:
        raise PeakDeficit(f"found {len(peaks)} of {n_paths} AoA peaks",
                          found=[tuple(map(float, p)) for p in peaks])

    out = []
    for pt in peaks:
        res = minimize(cost, x0=np.array(pt), method="Nelder-Mead",
                       options={"xatol": search.refine_xatol, "fatol": 0, "maxiter": 2000})
        g, s = np.clip(res.x, -1.0, 1.0)
        rho = g * g + s * s
        if rho > 1.0:
            scale = 1.0 / np.sqrt(rho)
            g, s = g * scale, s * scale
        out.append([float(g), float(s)])
    return np.array(out)


# ---------------------------------------------------------------------------
# stage 5/6: assignment and gains
# ---------------------------------------------------------------------------

def _component_energies(signatures: np.ndarray, data: np.ndarray) -> np.ndarray:
    """Per-column LS energy of each signature in the stacked data."""
    coeffs, *_ = lstsq(signatures, data)
    return np.linalg.norm(coeffs, axis=1) ** 2


def match_delays(obs: ObservationSet, delays: np.ndarray, path_energy: np.ndarray,
                 mode: str = "energy") -> np.ndarray:
    """Assign raw delays to paths.

    ``energy`` ranks both sides by energy; ``delay`` pins the LOS path to
    the smallest delay (it is always the shortest route) and ranks the
    reflections by energy.
    """
    radio = obs.radio
    b = np.column_stack([radio.delay_phase(t) / np.sqrt(radio.num_subcarriers)
                         for t in delays])
    d_energy = _component_energies(b, subcarrier_stack(obs))
    if mode == "energy":
        return match_by_energy(path_energy, d_energy)
    if mode != "delay":
        raise ValueError(f"unknown matching mode {mode!r}")
    los = int(np.argmin(delays))
    rest = [i for i in range(len(delays)) if i != los]
    sub = match_by_energy(path_energy[1:], d_energy[rest])
    return np.array([los] + [rest[i] for i in sub])


def match_aoas(obs: ObservationSet, aoas: np.ndarray, path_energy: np.ndarray) -> np.ndarray:
    """Assign raw UE-side angle pairs to paths by energy rank."""
    a_u = np.column_stack([obs.arrays.ue.response(g, s) for g, s in aoas])
    return match_by_energy(path_energy, _component_energies(a_u, ue_side_stack(obs)))


def estimate_gains(obs: ObservationSet, total_delays: np.ndarray,
                   ue_cosines: np.ndarray, bs_cosines: np.ndarray) -> np.ndarray:
    """Joint LS fit of the per-path complex gains on the vectorized data."""
    cols = []
    for tau, (gu, su), (gb, sb) in zip(total_delays, ue_cosines, bs_cosines):
        rank1 = np.outer(obs.arrays.ue.response(gu, su),
                         np.conj(obs.arrays.bs.response(gb, sb)))
        cols.append((obs.radio.delay_phase(tau)[:, None, None] * rank1[None]).ravel())
    reg = np.column_stack(cols)
    gram = reg.conj().T @ reg
    if np.linalg.cond(gram) > 1e12:
        raise GainIllConditioned("path regressors are nearly collinear")
    gains, *_ = lstsq(reg, obs.r_eff.ravel())
    return gains


def estimate_channel_params(obs: ObservationSet, known: KnownGeometry,
                            matching: str = "energy",
                            search: PeakSearchSpec = PeakSearchSpec()) -> ChannelParams:
    """Full pipeline producing an eta estimate compatible with the CRB code."""
    q = known.num_ris
    n_paths = q + 1

    aod = estimate_aod(obs, known, search)
    coeffs = separate_paths(obs, known, aod)
    energy = order_paths_by_energy(coeffs)

    raw_delays = estimate_delays_music(obs, n_paths, search)
    kappa_tau = match_delays(obs, raw_delays, energy, mode=matching)
    total_delays = raw_delays[kappa_tau]

    raw_aoas = estimate_aoas_music(obs, n_paths, search)
    kappa_aoa = match_aoas(obs, raw_aoas, energy)
    ue_cos = raw_aoas[kappa_aoa]

    bs_cos = np.vstack([[aod], known.ris_bs_cosines.reshape(-1, 2)]) \
        if q else np.array([aod])
    gains = estimate_gains(obs, total_delays, ue_cos, bs_cos)

    eta_b = np.array([gains[0].real, gains[0].imag, total_delays[0],
                      ue_cos[0, 0], ue_cos[0, 1], aod[0], aod[1]])
    eta_r = np.empty((q, 5))
    for i in range(q):
        eta_r[i] = [gains[i + 1].real, gains[i + 1].imag,
                    total_delays[i + 1] - known.ris_delays[i],
                    ue_cos[i + 1, 0], ue_cos[i + 1, 1]]
    return ChannelParams(eta_b=eta_b, eta_r=eta_r)
