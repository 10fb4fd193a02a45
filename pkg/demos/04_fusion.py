"""Fuse per-path anchors into a UE position and clock-bias estimate.

Each estimated path pins a clock-biased anchor point; the anchors share
one unknown shift c*Delta along their directions, so a 4-unknown weighted
least squares recovers both the position and the clock bias.  Starting
from exact channel parameters the fusion is exact; perturbed parameters
degrade gracefully and the ExIP refinement matches the WLS solution.
"""

import numpy as np

from rispos import bounds, channel, config, estimation, fusion, geometry, harness

cfg = config.build_config({}, profile="desk")
scene, arrays, radio = cfg.scene, cfg.arrays, cfg.radio
nofade = channel.FadingConfig(k_bu=np.inf, k_ru=np.inf,
                              exponent_bu=4.5, exponent_ris=2.0)

rng = np.random.default_rng(3)
phases = harness.directed_phases(scene, arrays)
gains = channel.draw_gains(scene, radio, arrays, nofade, rng)
paths = channel.path_specs_from_scene(scene, gains, arrays, phases)
xi = geometry.scene_position_params(scene, paths[0].gain, [p.gain for p in paths[1:]])
eta = geometry.forward_map(xi, scene)
known = estimation.KnownGeometry.from_scene(scene)

sigma_eff = 1e-8
f_eta = bounds.fim_eta(paths, arrays, radio, sigma_eff)
anchors = fusion.build_anchors(eta, known, scene.rotation, arrays, radio, sigma_eff)
print("Anchors (clock-biased points each path implies):")
for a, label in zip(anchors, ["LOS", "RIS1", "RIS2"]):
    print(f"  {label:>5}: {np.round(a.position, 3)}")
print(f"True UE position: {scene.p_ue}, clock bias {scene.clock_bias*1e9:g} ns")
print("All anchors sit c*bias downrange of the UE along their own directions.\n")

res = fusion.fuse_from_eta(eta, known, scene.rotation, arrays, radio, sigma_eff)
print(f"WLS from exact eta:  position error "
      f"{np.linalg.norm(res.p_ue - scene.p_ue):.2e} m, "
      f"clock error {abs(res.clock_bias - scene.clock_bias):.2e} s")

# Perturb the channel parameters slightly and refine with ExIP.
v = eta.flatten()
rng2 = np.random.default_rng(9)
v = v * (1 + 1e-7 * rng2.standard_normal(v.size))
eta_hat = geometry.ChannelParams.from_vector(v)
res_wls = fusion.fuse_from_eta(eta_hat, known, scene.rotation, arrays, radio, sigma_eff)
x0 = geometry.PositionParams(p_ue=res_wls.p_ue, clock_bias=res_wls.clock_bias,
                             h_bu=eta_hat.h_bu,
                             h_ris=[eta_hat.h_r(q) for q in range(eta_hat.num_ris)])
xi_exip = fusion.exip_refine(eta_hat, f_eta, scene, x0)
print(f"Perturbed eta:       WLS error "
      f"{np.linalg.norm(res_wls.p_ue - scene.p_ue):.2e} m, "
      f"ExIP error {np.linalg.norm(xi_exip.p_ue - scene.p_ue):.2e} m")

# Two independent position estimates combine with inverse-variance weights.
p1, p2 = scene.p_ue + [0.1, 0, 0], scene.p_ue - [0.1, 0, 0]
c1, c2 = 0.01 * np.eye(3), 0.03 * np.eye(3)
fused, cov = fusion.multi_fuse([p1, p2], [c1, c2])
print(f"\nMulti-BS combining: fused error {np.linalg.norm(fused - scene.p_ue):.3f} m "
      f"(inputs 0.100 m each, weights 3:1), fused std {np.sqrt(cov[0,0]):.3f} m")
