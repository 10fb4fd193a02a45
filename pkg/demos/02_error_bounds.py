"""Position and clock error bounds versus SNR.

Evaluates the Fisher information of the channel parameters, maps it into
the position domain through the geometry Jacobian, and prints the
position error bound (PEB) and clock error bound (CEB) across SNR.
"""

import numpy as np

from rispos import bounds, channel, config, harness

cfg = config.build_config({}, profile="desk")
scene, arrays, radio, fading = cfg.scene, cfg.arrays, cfg.radio, cfg.fading

phases = harness.directed_phases(scene, arrays)
rng = np.random.default_rng(1)
gains = channel.draw_gains(scene, radio, arrays, fading, rng)
paths = channel.path_specs_from_scene(scene, gains, arrays, phases)
h_bar = channel.mean_effective_channel(paths, arrays, radio)
fvar = channel.fading_variance(gains, arrays, fading)

print(f"{'SNR (dB)':>8}  {'PEB (m)':>12}  {'CEB (ns)':>12}")
for snr in [-10, 0, 10, 20, 30]:
    sigma = channel.sigma_for_snr(h_bar, radio, snr)
    sig_eff = channel.effective_noise_std(sigma, fvar, arrays.bs.size, radio)
    peb, ceb = bounds.scene_bounds(scene, paths, arrays, radio, sig_eff)
    print(f"{snr:8d}  {peb:12.4g}  {ceb*1e9:12.4g}")

# Per-path anchor bounds at SNR 10: how informative is each path on its own?
sigma = channel.sigma_for_snr(h_bar, radio, 10.0)
sig_eff = channel.effective_noise_std(sigma, fvar, arrays.bs.size, radio)
f_eta = bounds.fim_eta(paths, arrays, radio, sig_eff)
pb = bounds.path_bounds(f_eta, scene)
print("\nPer-path anchor position bounds at SNR 10 dB (sqrt-trace of 3x3 cov):")
for q, cov in enumerate(pb.covariances):
    label = "LOS" if q == 0 else f"RIS{q}"
    print(f"  {label:>5}: {np.sqrt(np.trace(cov)):.4g} m")
print("The LOS path carries BS-side angles and dominates; the RIS anchors")
print("mainly tighten the clock bias and the weak directions of the LOS cone.")
