"""Monte-Carlo experiment harness: trials, sweeps, CSV output.

Each sweep value gets its own noise calibration, RIS phase profile and
error bound (all derived from a deterministic reference channel); trials
within a value use independent random streams spawned from the master
seed, so results are reproducible bit-for-bit and trials could run in any
order or in parallel without changing the output.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .bounds import fim_eta, fim_xi, jacobian, peb_ceb
from .channel import (ArraySet, ChannelGains, draw_gains, effective_channel,
                      effective_noise_std, fading_variance,
                      mean_effective_channel, path_specs_from_scene,
                      sigma_for_snr, simulate_reception, synth_links)
from .config import ExperimentConfig, format_sweep_value, resolve_sweep
from .errors import RisposError, UnidentifiableError
from .estimation import KnownGeometry, estimate_channel_params
from .fusion import exip_refine, fuse_from_eta, multi_fuse
from .geometry import Scene, scene_position_params
from .phasedesign import design_phase_single, random_phases, region_toward

CSV_COLUMNS = ("sweep", "value", "method", "trials", "trials_ok", "match_rate",
               "rmse_position_m", "rmse_clock_s", "peb_m", "ceb_s")

_REGION_HALF_WIDTH = 0.1  # rad, coverage half-width of the directed design


@dataclass(frozen=True)
class SweepRow:
    """One CSV row: aggregate results of one (sweep value, method) cell."""

    sweep: str
    value: object
    method: str
    trials: int
    trials_ok: int
    match_rate: float
    rmse_position: float
    rmse_clock: float
    peb: float
    ceb: float


@dataclass(frozen=True)
class TrialResult:
    """Per-method outcome of a single trial."""

    position_error: float
    clock_error: float
    matched: bool
    failure: str = ""

    @property
    def ok(self) -> bool:
        return not self.failure


def directed_phases(scene: Scene, arrays: ArraySet) -> np.ndarray:
    """Deterministic coverage design toward the UE neighborhood, per RIS."""
    phases = np.empty((scene.num_ris, arrays.ris.size), dtype=complex)
    for q, p_r in enumerate(scene.ris_positions):
        region = region_toward(p_r, scene.p_ue, _REGION_HALF_WIDTH)
        incident = _incident_cosines(scene, q)
        phases[q] = design_phase_single(region, arrays.ris, incident).phases
    return phases


def _incident_cosines(scene: Scene, q: int) -> tuple[float, float]:
    from .geometry import direction_and_angles

    geo = direction_and_angles(scene.ris_positions[q], scene.p_bs)
    return geo.f, geo.s


@dataclass(frozen=True)
class SweepContext:
    """Everything fixed within one sweep value."""

    cfg: ExperimentConfig
    value: object
    phases: np.ndarray | None  # None => random per trial
    sigma: float
    sigma_eff: float
    fading_var: float
    peb: float
    ceb: float
    true_delays: np.ndarray


def _reference_gains(cfg: ExperimentConfig, value_index: int) -> ChannelGains:
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, value_index, 2 ** 32)))
    return draw_gains(cfg.scene, cfg.radio, cfg.arrays, cfg.fading, rng)


def prepare_sweep_value(cfg: ExperimentConfig, value, value_index: int) -> SweepContext:
    """Calibrate noise, fix phases, and evaluate bounds for one sweep value."""
    rcfg = resolve_sweep(cfg, value)
    scene, arrays, radio, fading = rcfg.scene, rcfg.arrays, rcfg.radio, rcfg.fading

    if rcfg.phase_design == "directed" and scene.num_ris:
        phases = directed_phases(scene, arrays)
    elif scene.num_ris:
        rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, value_index,
                                                            2 ** 32 + 1)))
        phases = np.vstack([random_phases(arrays.ris.size, rng).phases
                            for _ in range(scene.num_ris)])
    else:
        phases = np.zeros((0, arrays.ris.size), dtype=complex)

    gains = _reference_gains(rcfg, value_index)
    paths = path_specs_from_scene(scene, gains, arrays, phases)
    h_bar = mean_effective_channel(paths, arrays, radio)
    sigma = sigma_for_snr(h_bar, radio, rcfg.snr_db)
    fvar = fading_variance(gains, arrays, fading)
    sigma_eff = effective_noise_std(sigma, fvar, arrays.bs.size, radio)

    try:
        f_eta = fim_eta(paths, arrays, radio, sigma_eff)
        peb, ceb = peb_ceb(fim_xi(f_eta, jacobian(scene)))
    except UnidentifiableError:
        peb, ceb = float("inf"), float("inf")

    return SweepContext(cfg=rcfg, value=value, sigma=sigma, sigma_eff=sigma_eff,
                        fading_var=fvar, peb=peb, ceb=ceb,
                        phases=phases if rcfg.phase_design == "directed" else None,
                        true_delays=np.array([p.delay for p in paths]))


def _matched(estimated: np.ndarray, truth: np.ndarray) -> bool:
    """Assignment is correct when each delay landed nearest its own truth."""
    if len(truth) < 2:
        return True
    spacing = np.min(np.abs(np.subtract.outer(truth, truth))
                     + np.diag(np.full(len(truth), np.inf)))
    return bool(np.all(np.abs(estimated - truth) < spacing / 2))


def run_trial(ctx: SweepContext, trial_index: int, value_index: int) -> dict:
    """One synthesized observation, every method evaluated on it."""
    cfg = ctx.cfg
    scene, arrays, radio = cfg.scene, cfg.arrays, cfg.radio
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, value_index,
                                                        trial_index)))
    gains = draw_gains(scene, radio, arrays, cfg.fading, rng)
    if ctx.phases is not None:
        phases = ctx.phases
    else:
        phases = np.vstack([random_phases(arrays.ris.size, rng).phases
                            for _ in range(scene.num_ris)]) \
            if scene.num_ris else np.zeros((0, arrays.ris.size), dtype=complex)

    links = synth_links(scene, arrays, radio, gains, cfg.fading, rng)
    h = effective_channel(links, phases)
    obs = simulate_reception(h, arrays, radio, ctx.sigma, rng,
                             fading_var=ctx.fading_var)
    known = KnownGeometry.from_scene(scene)

    paths = path_specs_from_scene(scene, gains, arrays, phases)
    truth = scene_position_params(scene, paths[0].gain,
                                  [p.gain for p in paths[1:]])

    results: dict[str, TrialResult] = {}
    etas: dict[str, object] = {}

    def eta_for(mode: str):
        if mode not in etas:
            etas[mode] = estimate_channel_params(obs, known, matching=mode)
        return etas[mode]

    for method in cfg.methods:
        try:
            mode = "delay" if method == "proposed-delay" else "energy"
            eta = eta_for(mode)
            fused = fuse_from_eta(eta, known, scene.rotation, arrays, radio,
                                  obs.sigma_eff,
                                  identity_weights=(method == "ls-baseline"))
            p_hat, bias_hat = fused.p_ue, fused.clock_bias
            if method == "exip-oracle":
                eta_paths = path_specs_from_scene(scene, gains, arrays, phases)
                f_eta = fim_eta(eta_paths, arrays, radio, obs.sigma_eff)
                xi = exip_refine(eta, f_eta, scene, truth)
                p_hat, bias_hat = xi.p_ue, xi.clock_bias
            est_delays = np.concatenate([[eta.eta_b[2]],
                                         eta.eta_r[:, 2] + known.ris_delays])
            results[method] = TrialResult(
                position_error=float(np.linalg.norm(p_hat - scene.p_ue)),
                clock_error=abs(bias_hat - scene.clock_bias),
                matched=_matched(est_delays, ctx.true_delays))
        except RisposError as exc:
            results[method] = TrialResult(position_error=float("nan"),
                                          clock_error=float("nan"), matched=False,
                                          failure=f"{type(exc).__name__}: {exc}")
    return results


def aggregate(ctx: SweepContext, per_trial: list) -> list[SweepRow]:
    """Per-method RMSE rows for one sweep value."""
    rows = []
    for method in ctx.cfg.methods:
        outcomes = [t[method] for t in per_trial]
        ok = [t for t in outcomes if t.ok]
        if ok:
            rmse_p = float(np.sqrt(np.mean([t.position_error ** 2 for t in ok])))
            rmse_c = float(np.sqrt(np.mean([t.clock_error ** 2 for t in ok])))
            match = float(np.mean([t.matched for t in ok]))
        else:
            rmse_p = rmse_c = match = float("nan")
        rows.append(SweepRow(sweep=ctx.cfg.sweep, value=ctx.value, method=method,
                             trials=len(outcomes), trials_ok=len(ok),
                             match_rate=match, rmse_position=rmse_p,
                             rmse_clock=rmse_c, peb=ctx.peb, ceb=ctx.ceb))
    return rows


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def rows_to_csv(rows) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for r in rows:
        lines.append(",".join([
            r.sweep, format_sweep_value(r.value), r.method, str(r.trials),
            str(r.trials_ok), _fmt(r.match_rate), _fmt(r.rmse_position),
            _fmt(r.rmse_clock), _fmt(r.peb), _fmt(r.ceb)]))
    return "\n".join(lines) + "\n"


def run_sweep(cfg: ExperimentConfig, out_dir: str | None = None) -> list[SweepRow]:
    """Run the full experiment; optionally write results.csv (and a JSONL log)."""
    rows: list[SweepRow] = []
    log_records = []
    for vi, value in enumerate(cfg.values):
        ctx = prepare_sweep_value(cfg, value, vi)
        per_trial = [run_trial(ctx, ti, vi) for ti in range(cfg.trials)]
        rows.extend(aggregate(ctx, per_trial))
        if cfg.jsonl_log:
            for ti, tr in enumerate(per_trial):
                for method, res in tr.items():
                    log_records.append({
                        "value": format_sweep_value(value), "trial": ti,
                        "method": method, "position_error": res.position_error,
                        "clock_error": res.clock_error, "matched": res.matched,
                        "failure": res.failure})
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "results.csv"), "w", encoding="utf-8") as fh:
            fh.write(rows_to_csv(rows))
        if cfg.jsonl_log:
            with open(os.path.join(out_dir, "trials.jsonl"), "w", encoding="utf-8") as fh:
                for rec in log_records:
                    fh.write(json.dumps(rec) + "\n")
    return rows


def bounds_table(cfg: ExperimentConfig) -> list[tuple]:
    """(value, PEB, CEB) per sweep value — the `peb` subcommand."""
    out = []
    for vi, value in enumerate(cfg.values):
        ctx = prepare_sweep_value(cfg, value, vi)
        out.append((value, ctx.peb, ctx.ceb))
    return out


# ---------------------------------------------------------------------------
# multi-BS experiment
# ---------------------------------------------------------------------------

def _shifted_scene(scene: Scene, p_bs: np.ndarray) -> Scene:
    """The same physical deployment expressed in a frame centered on p_bs."""
    return Scene(ris_positions=scene.ris_positions - p_bs,
                 p_ue=scene.p_ue - p_bs, rotation=scene.rotation,
                 clock_bias=scene.clock_bias)


def run_multibs_trials(cfg: ExperimentConfig, bs_positions, trials: int,
                       seed_offset: int = 0) -> dict:
    """Per-BS and fused position RMSE with independent observations per BS.

    Each BS runs the full single-BS pipeline in its own frame (same RISs,
    same UE); per-BS estimates are mapped back to the global frame and
    combined with inverse-covariance weights.
    """
    bs_positions = [np.asarray(p, dtype=float) for p in bs_positions]
    scenes = [_shifted_scene(cfg.scene, p) for p in bs_positions]
    cfgs = [ExperimentConfig(scene=s, arrays=cfg.arrays, radio=cfg.radio,
                             fading=cfg.fading, sweep=cfg.sweep, values=cfg.values,
                             trials=trials, seed=cfg.seed + seed_offset + b,
                             snr_db=cfg.snr_db, methods=("proposed-energy",),
                             phase_design=cfg.phase_design, jsonl_log=False)
            for b, s in enumerate(scenes)]
    ctxs = [prepare_sweep_value(c, c.snr_db, 0) for c in cfgs]
    known = [KnownGeometry.from_scene(s) for s in scenes]

    per_bs_err = [[] for _ in bs_positions]
    fused_err = []
    for ti in range(trials):
        estimates, covs = [], []
        for b, (ctx, kn) in enumerate(zip(ctxs, known)):
            c = ctxs[b].cfg
            rng = np.random.default_rng(np.random.SeedSequence((c.seed, 0, ti)))
            gains = draw_gains(c.scene, c.radio, c.arrays, c.fading, rng)
            phases = ctx.phases
            links = synth_links(c.scene, c.arrays, c.radio, gains, c.fading, rng)
            h = effective_channel(links, phases)
            obs = simulate_reception(h, c.arrays, c.radio, ctx.sigma, rng,
                                     fading_var=ctx.fading_var)
            try:
                eta = estimate_channel_params(obs, kn)
                fused = fuse_from_eta(eta, kn, c.scene.rotation, c.arrays,
                                      c.radio, obs.sigma_eff)
            except RisposError:
                continue
            p_global = fused.p_ue + bs_positions[b]
            estimates.append(p_global)
            covs.append(fused.covariance[:3, :3])
            per_bs_err[b].append(np.linalg.norm(p_global - cfg.scene.p_ue))
        if len(estimates) == len(bs_positions):
            p_fused, _ = multi_fuse(estimates, covs)
            fused_err.append(np.linalg.norm(p_fused - cfg.scene.p_ue))

    def rmse(errs):
        return float(np.sqrt(np.mean(np.square(errs)))) if errs else float("nan")

    return {"per_bs_rmse": [rmse(e) for e in per_bs_err],
            "fused_rmse": rmse(fused_err),
            "peb": [c.peb for c in ctxs],
            "trials_fused": len(fused_err)}
