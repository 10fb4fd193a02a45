"""MIMO-OFDM channel synthesis through reconfigurable intelligent surfaces.

The downlink model: the BS (N-antenna URA, y-z plane) sends T precoded
pilot symbols over K subcarriers of bandwidth W; the UE (D-antenna URA,
orientation O) receives a superposition of the direct path and one
reflection per RIS (M-element URA, x-z plane).  After de-precoding, the
per-subcarrier observation is the D x N effective channel plus white
noise whose variance also absorbs the Rician-fading NLOS residual.

Every deterministic path is a rank-1 outer product of UE/BS steering
vectors scaled by a complex gain and a delay-dependent subcarrier phase;
:class:`PathSpec` captures exactly that and is shared with the Fisher
information code.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ShapeError
from .geometry import SPEED_OF_LIGHT, ChannelParams, Scene, direction_and_angles


# ---------------------------------------------------------------------------
# arrays and steering vectors
# ---------------------------------------------------------------------------

def ula_response(m: int, x: float) -> np.ndarray:
    """Half-wavelength ULA response (1/sqrt(m)) exp(i pi x [0..m-1])."""
    return np.exp(1j * np.pi * x * np.arange(m)) / np.sqrt(m)


def ula_response_deriv(m: int, x: float) -> np.ndarray:
    """Derivative of :func:`ula_response` with respect to the cosine x."""
    n = np.arange(m)
    return 1j * np.pi * n * np.exp(1j * np.pi * x * n) / np.sqrt(m)


@dataclass(frozen=True)
class ArrayConfig:
    """Uniform rectangular array with half-wavelength spacing."""

    rows: int
    cols: int

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("array dimensions must be positive")

    @property
    def size(self) -> int:
        return self.rows * self.cols

    def response(self, c1: float, c2: float) -> np.ndarray:
        """URA response a(c1, c2) = ula_rows(c1) kron ula_cols(c2)."""
        outer = ula_response(self.rows, c1)[:, None] * ula_response(self.cols, c2)
        return outer.ravel()

    def response_grad(self, c1: float, c2: float) -> tuple[np.ndarray, np.ndarray]:
        """Partial derivatives of the response w.r.t. (c1, c2)."""
        a1, a2 = ula_response(self.rows, c1), ula_response(self.cols, c2)
        return (np.kron(ula_response_deriv(self.rows, c1), a2),
                np.kron(a1, ula_response_deriv(self.cols, c2)))


# ---------------------------------------------------------------------------
# radio parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RadioConfig:
    """OFDM and power parameters."""

    carrier_freq: float  # Hz
    bandwidth: float  # Hz, total (subcarrier spacing is bandwidth / num_subcarriers)
    num_subcarriers: int
    num_symbols: int
    power: float = 1.0

    def __post_init__(self):
        if min(self.carrier_freq, self.bandwidth, self.power) <= 0:
            raise ValueError("carrier_freq, bandwidth and power must be positive")
        if self.num_subcarriers < 2 or self.num_symbols < 1:
            raise ValueError("need at least 2 subcarriers and 1 symbol")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq

    @property
    def unambiguous_delay(self) -> float:
        """Delays are observable modulo K/W."""
        return self.num_subcarriers / self.bandwidth

    def delay_phase(self, tau: float) -> np.ndarray:
        """Per-subcarrier phase ramp exp(-i 2 pi k W tau / K), length K."""
        k = np.arange(self.num_subcarriers)
        return np.exp(-2j * np.pi * k * self.bandwidth * tau / self.num_subcarriers)

    def delay_phase_deriv(self, tau: float) -> np.ndarray:
        k = np.arange(self.num_subcarriers)
        return (-2j * np.pi * k * self.bandwidth / self.num_subcarriers) * self.delay_phase(tau)


def delay_steering(radio: RadioConfig, tau: float) -> np.ndarray:
    """Validated per-subcarrier delay signature b(tau).

    Delays are only observable modulo K/W; values outside [0, K/W] alias
    onto other delays, so they are rejected rather than wrapped silently.
    """
    from .errors import AmbiguousDelay

    if not 0.0 <= tau <= radio.unambiguous_delay:
        raise AmbiguousDelay(
            f"delay {tau:.3e} s outside the unambiguous range [0, "
            f"{radio.unambiguous_delay:.3e}] s")
    return radio.delay_phase(tau)


def dft_precoder(n_bs: int, radio: RadioConfig) -> np.ndarray:
    """Pilot matrix X (N x T) cycling unit-norm DFT columns.

    Columns are rescaled per DFT index so that X X^H = (p T / N) I exactly
    even when T is not a multiple of N; this keeps de-precoding unbiased.
    """
    t = radio.num_symbols
    if t < n_bs:
        raise ShapeError(f"need num_symbols >= num BS antennas ({t} < {n_bs})")
    f = np.fft.fft(np.eye(n_bs)) / np.sqrt(n_bs)  # unitary DFT, unit-norm columns
    idx = np.arange(t) % n_bs
    counts = np.bincount(idx, minlength=n_bs)
    scale = np.sqrt(radio.power * t / (n_bs * counts[idx]))
    return f[:, idx] * scale[None, :]


# ---------------------------------------------------------------------------
# link budget
# ---------------------------------------------------------------------------

def pathloss(wavelength: float, distance: float, exponent: float) -> float:
    """Large-scale power gain lambda^2 / (16 pi^2 d^L)."""
    if distance <= 0:
        raise ValueError("distance must be positive")
    return wavelength ** 2 / (16 * np.pi ** 2 * distance ** exponent)


def _los_fraction(k_factor: float) -> float:
    """Fraction K/(1+K) of power in the deterministic component; 1 at K=inf."""
    return 1.0 if np.isinf(k_factor) else k_factor / (1.0 + k_factor)


def _nlos_variance(beta: float, k_factor: float) -> float:
    """Per-entry fading variance beta/(1+K); 0 at K=inf."""
    return 0.0 if np.isinf(k_factor) else beta / (1.0 + k_factor)


@dataclass(frozen=True)
class FadingConfig:
    """Rician factors and pathloss exponents of the three link types.

    Infinite Rician factors switch fading off entirely.
    """

    k_bu: float = 10.0
    k_ru: float = 10.0
    exponent_bu: float = 4.5
    exponent_ris: float = 2.0

    def __post_init__(self):
        if self.k_bu < 0 or self.k_ru < 0:
            raise ValueError("Rician factors must be nonnegative")


@dataclass(frozen=True)
class ChannelGains:
    """Deterministic complex gains and pathloss powers of every link."""

    h_bu: complex
    h_br: np.ndarray  # (Q,) BS -> RIS q
    h_ru: np.ndarray  # (Q,) RIS q -> UE
    beta_bu: float
    beta_br: np.ndarray
    beta_ru: np.ndarray

    def __post_init__(self):
        for name in ("h_br", "h_ru"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=complex).reshape(-1))
        for name in ("beta_br", "beta_ru"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(-1))


def draw_gains(scene: Scene, radio: RadioConfig, arrays: "ArraySet",
               fading: FadingConfig, rng: np.random.Generator) -> ChannelGains:
    """Deterministic (LOS-component) gains with uniform random phases."""
    lam = radio.wavelength
    n, d, m = arrays.bs.size, arrays.ue.size, arrays.ris.size

    def phase() -> complex:
        return np.exp(2j * np.pi * rng.uniform())

    d_bu = np.linalg.norm(scene.p_ue - scene.p_bs)
    beta_bu = pathloss(lam, d_bu, fading.exponent_bu)
    h_bu = phase() * np.sqrt(_los_fraction(fading.k_bu) * beta_bu * n * d)

    h_br, h_ru, beta_br, beta_ru = [], [], [], []
    for p_r in scene.ris_positions:
        b_br = pathloss(lam, np.linalg.norm(p_r - scene.p_bs), fading.exponent_ris)
        b_ru = pathloss(lam, np.linalg.norm(scene.p_ue - p_r), fading.exponent_ris)
        beta_br.append(b_br)
        beta_ru.append(b_ru)
        h_br.append(phase() * np.sqrt(b_br * m * n))
        h_ru.append(phase() * np.sqrt(_los_fraction(fading.k_ru) * b_ru * m * d))
    return ChannelGains(h_bu=h_bu, h_br=np.array(h_br), h_ru=np.array(h_ru),
                        beta_bu=beta_bu, beta_br=np.array(beta_br), beta_ru=np.array(beta_ru))


def fading_variance(gains: ChannelGains, arrays: "ArraySet", fading: FadingConfig) -> float:
    """Per-entry variance of the NLOS residual folded into the effective noise."""
    m = arrays.ris.size
    nlos_bu = _nlos_variance(gains.beta_bu, fading.k_bu)
    nlos_ris = m * _nlos_variance(float(np.sum(gains.beta_br * gains.beta_ru)), fading.k_ru)
    return float(nlos_bu + nlos_ris)


# ---------------------------------------------------------------------------
# path specification and effective channel
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ArraySet:
    """The three URAs of the deployment."""

    bs: ArrayConfig
    ue: ArrayConfig
    ris: ArrayConfig


@dataclass(frozen=True)
class PathSpec:
    """One rank-1 path: gain * delay-phase * a_ue a_bs^H.

    ``delay`` is the total phase-generating delay at the receiver (for a
    reflection, the BS-RIS leg plus the RIS-UE leg including clock bias).
    """

    gain: complex
    delay: float
    ue_cosines: tuple[float, float]  # (g_u, s_u)
    bs_cosines: tuple[float, float]  # (g_b, s_b)


def ris_cascade_gain(theta_q: np.ndarray, arrays: ArraySet,
                     f_br: float, s_br: float, f_ru: float, s_ru: float) -> complex:
    """a_M(f_ru, s_ru)^H diag(theta_q) a_M(f_br, s_br)."""
    a_in = arrays.ris.response(f_br, s_br)
    a_out = arrays.ris.response(f_ru, s_ru)
    return complex(np.conj(a_out) @ (np.asarray(theta_q) * a_in))


def ris_geometry(scene: Scene, q: int):
    """Cosines of both legs seen from RIS q, plus the BS->RIS leg geometry."""
    p_r = scene.ris_positions[q]
    to_bs = direction_and_angles(p_r, scene.p_bs)  # arrival direction at the RIS
    to_ue = direction_and_angles(p_r, scene.p_ue)  # departure direction
    leg_br = direction_and_angles(scene.p_bs, p_r)
    return to_bs, to_ue, leg_br


def path_specs_from_scene(scene: Scene, gains: ChannelGains, arrays: ArraySet,
                          ris_phases: np.ndarray) -> list[PathSpec]:
    """Build the Q+1 deterministic paths of a scene (LOS first).

    ``ris_phases`` has shape (Q, M): one unit-modulus phase vector per RIS.
    """
    ris_phases = np.asarray(ris_phases, dtype=complex)
    if ris_phases.shape != (scene.num_ris, arrays.ris.size):
        raise ShapeError(f"ris_phases must be (Q, M) = ({scene.num_ris}, {arrays.ris.size})")
    o_r = scene.rotation_rows

    los = direction_and_angles(scene.p_bs, scene.p_ue, scene.clock_bias)
    g_u, s_u = o_r @ los.r
    paths = [PathSpec(gain=gains.h_bu, delay=los.tau,
                      ue_cosines=(float(g_u), float(s_u)),
                      bs_cosines=(los.g, los.s))]

    for q in range(scene.num_ris):
        to_bs, to_ue, leg_br = ris_geometry(scene, q)
        cascade = ris_cascade_gain(ris_phases[q], arrays,
                                   f_br=to_bs.f, s_br=to_bs.s,
                                   f_ru=to_ue.f, s_ru=to_ue.s)
        leg_ru = direction_and_angles(scene.ris_positions[q], scene.p_ue, scene.clock_bias)
        g_u, s_u = o_r @ leg_ru.r
        paths.append(PathSpec(gain=gains.h_br[q] * gains.h_ru[q] * cascade,
                              delay=leg_br.tau + leg_ru.tau,
                              ue_cosines=(float(g_u), float(s_u)),
                              bs_cosines=(leg_br.g, leg_br.s)))
    return paths


def path_specs_from_eta(eta: ChannelParams, ris_positions: np.ndarray,
                        p_bs: np.ndarray | None = None) -> list[PathSpec]:
    """Rebuild paths from a channel-parameter vector plus known BS/RIS geometry.

    Used to evaluate plug-in Fisher information at an estimate: the BS-RIS
    legs (delay and BS-side cosines) are deployment constants, everything
    else comes from ``eta``.
    """
    p_bs = np.zeros(3) if p_bs is None else np.asarray(p_bs, dtype=float)
    ris_positions = np.asarray(ris_positions, dtype=float).reshape(-1, 3)
    b = eta.eta_b
    paths = [PathSpec(gain=eta.h_bu, delay=float(b[2]),
                      ue_cosines=(float(b[3]), float(b[4])),
                      bs_cosines=(float(b[5]), float(b[6])))]
    for q in range(eta.num_ris):
        leg_br = direction_and_angles(p_bs, ris_positions[q])
        r = eta.eta_r[q]
        paths.append(PathSpec(gain=eta.h_r(q), delay=leg_br.tau + float(r[2]),
                              ue_cosines=(float(r[3]), float(r[4])),
                              bs_cosines=(leg_br.g, leg_br.s)))
    return paths


def mean_effective_channel(paths: Sequence[PathSpec], arrays: ArraySet,
                           radio: RadioConfig) -> np.ndarray:
    """Noiseless (deterministic) effective channel, shape (K, D, N)."""
    k, d, n = radio.num_subcarriers, arrays.ue.size, arrays.bs.size
    h = np.zeros((k, d, n), dtype=complex)
    for p in paths:
        outer = np.outer(arrays.ue.response(*p.ue_cosines),
                         np.conj(arrays.bs.response(*p.bs_cosines)))
        h += (p.gain * radio.delay_phase(p.delay))[:, None, None] * outer[None, :, :]
    return h


# ---------------------------------------------------------------------------
# per-link synthesis with Rician fading
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinkSet:
    """Per-subcarrier matrices of every physical link.

    The BS-RIS links are deterministic rank-1 (both ends are fixed
    infrastructure); the BS-UE and RIS-UE links carry iid Rician fading
    drawn independently per subcarrier.
    """

    h_bu: np.ndarray  # (K, D, N)
    h_br: np.ndarray  # (Q, K, M, N)
    h_ru: np.ndarray  # (Q, K, D, M)
    gains: ChannelGains


def synth_links(scene: Scene, arrays: ArraySet, radio: RadioConfig,
                gains: ChannelGains, fading: FadingConfig,
                rng: np.random.Generator) -> LinkSet:
    """Draw every link's channel matrices for one coherence block."""
    k = radio.num_subcarriers
    n, d, m = arrays.bs.size, arrays.ue.size, arrays.ris.size
    o_r = scene.rotation_rows

    los = direction_and_angles(scene.p_bs, scene.p_ue, scene.clock_bias)
    g_u, s_u = o_r @ los.r
    outer_bu = np.outer(arrays.ue.response(g_u, s_u),
                        np.conj(arrays.bs.response(los.g, los.s)))
    h_bu = (gains.h_bu * radio.delay_phase(los.tau))[:, None, None] * outer_bu[None]
    h_bu = h_bu + _complex_noise(rng, (k, d, n),
                                 _nlos_variance(gains.beta_bu, fading.k_bu))

    h_br = np.empty((scene.num_ris, k, m, n), dtype=complex)
    h_ru = np.empty((scene.num_ris, k, d, m), dtype=complex)
    for q in range(scene.num_ris):
        to_bs, to_ue, leg_br = ris_geometry(scene, q)
        outer_br = np.outer(arrays.ris.response(to_bs.f, to_bs.s),
                            np.conj(arrays.bs.response(leg_br.g, leg_br.s)))
        h_br[q] = (gains.h_br[q] * radio.delay_phase(leg_br.tau))[:, None, None] \
            * outer_br[None]

        leg_ru = direction_and_angles(scene.ris_positions[q], scene.p_ue,
                                      scene.clock_bias)
        g_u, s_u = o_r @ leg_ru.r
        outer_ru = np.outer(arrays.ue.response(g_u, s_u),
                            np.conj(arrays.ris.response(to_ue.f, to_ue.s)))
        h_ru[q] = (gains.h_ru[q] * radio.delay_phase(leg_ru.tau))[:, None, None] \
            * outer_ru[None]
        h_ru[q] += _complex_noise(rng, (k, d, m),
                                  _nlos_variance(gains.beta_ru[q], fading.k_ru))
    return LinkSet(h_bu=h_bu, h_br=h_br, h_ru=h_ru, gains=gains)


def effective_channel(links: LinkSet, ris_phases: np.ndarray) -> np.ndarray:
    """Compose H_k = H_BU,k + sum_q H_RU,k,q diag(theta_q) H_BR,k,q."""
    ris_phases = np.asarray(ris_phases, dtype=complex)
    n_ris = links.h_br.shape[0]
    if ris_phases.shape != (n_ris, links.h_br.shape[2]):
        raise ShapeError(f"ris_phases must have shape (Q, M) = "
                         f"({n_ris}, {links.h_br.shape[2]})")
    h = links.h_bu.copy()
    for q in range(n_ris):
        h += np.einsum("kdm,m,kmn->kdn", links.h_ru[q], ris_phases[q], links.h_br[q])
    return h


# ---------------------------------------------------------------------------
# observation simulation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ObservationSet:
    """De-precoded observations: r_eff[k] ~ H_k + noise of variance sigma_eff^2."""

    r_eff: np.ndarray  # (K, D, N) complex
    sigma_eff: float
    arrays: ArraySet
    radio: RadioConfig

    @property
    def num_subcarriers(self) -> int:
        return self.r_eff.shape[0]


def _complex_noise(rng: np.random.Generator, shape, var: float) -> np.ndarray:
    if var == 0:
        return np.zeros(shape, dtype=complex)
    s = np.sqrt(var / 2)
    return rng.normal(0, s, shape) + 1j * rng.normal(0, s, shape)


def effective_noise_std(sigma: float, fading_var: float, n_bs: int,
                        radio: RadioConfig) -> float:
    """Std of the de-precoded noise: sqrt(N sigma^2 / (p T) + fading_var)."""
    return float(np.sqrt(n_bs * sigma ** 2 / (radio.power * radio.num_symbols) + fading_var))


def simulate_reception(h: np.ndarray, arrays: ArraySet, radio: RadioConfig,
                       sigma: float, rng: np.random.Generator,
                       fading_var: float = 0.0) -> ObservationSet:
    """Transmit pilots through H (fading included), add noise, de-precode.

    Returns per-subcarrier D x N matrices (N/pT) R_k X^H whose expectation
    is the deterministic part of ``h[k]``.  ``fading_var`` is the known
    per-entry fading variance already present in ``h``; it only enters the
    reported effective noise level.
    """
    k, d, n = h.shape
    x = dft_precoder(n, radio)
    t = radio.num_symbols
    scale = n / (radio.power * t)
    r_eff = np.empty_like(h)
    for i in range(k):
        r = h[i] @ x + _complex_noise(rng, (d, t), sigma ** 2)
        r_eff[i] = scale * (r @ x.conj().T)
    sig_eff = effective_noise_std(sigma, fading_var, n, radio)
    return ObservationSet(r_eff=r_eff, sigma_eff=sig_eff, arrays=arrays, radio=radio)


def observe_effective(h_bar: np.ndarray, arrays: ArraySet, radio: RadioConfig,
                      sigma_eff: float, rng: np.random.Generator) -> ObservationSet:
    """Shortcut: draw the de-precoded observation directly (same statistics)."""
    r_eff = h_bar + _complex_noise(rng, h_bar.shape, sigma_eff ** 2)
    return ObservationSet(r_eff=r_eff, sigma_eff=float(sigma_eff), arrays=arrays, radio=radio)


def sigma_for_snr(h_bar: np.ndarray, radio: RadioConfig, snr_db: float) -> float:
    """Pilot-noise std giving the requested per-entry received SNR.

    SNR is defined as mean |[H X]_{d,t}|^2 / sigma^2 over all subcarriers.
    """
    n = h_bar.shape[2]
    x = dft_precoder(n, radio)
    sig_pow = float(np.mean([np.mean(np.abs(h @ x) ** 2) for h in h_bar]))
    return float(np.sqrt(sig_pow / 10 ** (snr_db / 10)))
