"""Walk the subspace estimation pipeline on a nearly noiseless observation.

Stages: LOS AoD beam search -> BS-side path separation -> delay MUSIC ->
2-D AoA MUSIC -> energy-rank matching -> joint LS gains.  With negligible
noise every stage recovers its parameters to numerical precision.
"""

import numpy as np

from rispos import channel, config, estimation, geometry, phasedesign

cfg = config.build_config({}, profile="desk")
scene, arrays, radio = cfg.scene, cfg.arrays, cfg.radio
nofade = channel.FadingConfig(k_bu=np.inf, k_ru=np.inf,
                              exponent_bu=4.5, exponent_ris=2.0)

rng = np.random.default_rng(7)
phases = np.vstack([phasedesign.random_phases(arrays.ris.size, rng).phases
                    for _ in range(scene.num_ris)])
gains = channel.draw_gains(scene, radio, arrays, nofade, rng)
paths = channel.path_specs_from_scene(scene, gains, arrays, phases)
h_bar = channel.mean_effective_channel(paths, arrays, radio)
obs = channel.observe_effective(h_bar, arrays, radio, sigma_eff=1e-15, rng=rng)

known = estimation.KnownGeometry.from_scene(scene)

# Stage 1: LOS angle of departure from the BS.
g_b, s_b = estimation.estimate_aod(obs, known)
true_aod = paths[0].bs_cosines
print(f"AoD:   est ({g_b:+.6f}, {s_b:+.6f})  true ({true_aod[0]:+.6f}, {true_aod[1]:+.6f})")

# Stage 2: separate the LOS from the RIS paths on the BS side.
coeffs = estimation.separate_paths(obs, known, (g_b, s_b))
energy = np.array([np.linalg.norm(c) ** 2 for c in coeffs])
print(f"Path separation energies: {energy / energy.max()} (relative)")

# Stage 3/4: joint MUSIC over delays and UE-side angle cosines.
n_paths = scene.num_ris + 1
delays = estimation.estimate_delays_music(obs, n_paths)
aoas = estimation.estimate_aoas_music(obs, n_paths)
true_delays = np.sort([p.delay for p in paths])
print(f"Delay error (sorted, ns): {np.abs(np.sort(delays) - true_delays) * 1e9}")

# Full pipeline: stages plus matching and gain estimation in one call.
eta = estimation.estimate_channel_params(obs, known, matching="energy")
xi_true = geometry.scene_position_params(scene, paths[0].gain,
                                         [p.gain for p in paths[1:]])
truth = geometry.forward_map(xi_true, scene)
err = np.abs(eta.flatten() - truth.flatten())
print("\nFull pipeline vs forward map (clock-biased truth):")
print(f"  LOS block  [Re h, Im h, tau, g_u, s_u, g_b, s_b] max err = {err[:7].max():.3e}")
print(f"  RIS blocks [Re h, Im h, tau_RU, g_u, s_u]        max err = {err[7:].max():.3e}")
