"""Directed RIS phase design versus random phases.

The SVD design points the RIS cascade at an angular coverage region
around the UE prior: the dominant eigenvector of the region-sampled
steering outer product gives the optimal unconstrained beam, and its
phases (minus the incident steering phases) give the unit-modulus
profile.  Random phases scatter the energy and lose ~M of gain.
"""

import numpy as np

from rispos import config, geometry, phasedesign

cfg = config.build_config({}, profile="desk")
scene, arrays = cfg.scene, cfg.arrays
q = 0
p_ris = scene.ris_positions[q]

incident = geometry.direction_and_angles(p_ris, scene.p_bs)
region = phasedesign.region_toward(p_ris, scene.p_ue, half_width=0.1)
print(f"RIS{q+1} at {p_ris}: coverage region toward the UE, "
      f"theta in [{region.theta_lo:.3f}, {region.theta_hi:.3f}] rad, "
      f"phi in [{region.phi_lo:.3f}, {region.phi_hi:.3f}] rad")

design = phasedesign.design_phase_single(region, arrays.ris, (incident.f, incident.s))
rng = np.random.default_rng(0)
rand_gains = [phasedesign.region_gain(phasedesign.random_phases(arrays.ris.size, rng).phases,
                                      arrays.ris, (incident.f, incident.s), region)
              for _ in range(50)]
print(f"Region-averaged cascade gain: designed {design.expected_gain:.4f}, "
      f"random mean {np.mean(rand_gains):.4f} "
      f"(x{design.expected_gain/np.mean(rand_gains):.1f} over {arrays.ris.size} elements)")

# Shrinking the region to a point recovers the classic conjugate beam: gain 1.
ue_dir = geometry.direction_and_angles(p_ris, scene.p_ue)
point = phasedesign.CoverageRegion(ue_dir.theta, ue_dir.theta, ue_dir.phi, ue_dir.phi,
                                   grid_theta=1, grid_phi=1)
pd = phasedesign.design_phase_single(point, arrays.ris, (incident.f, incident.s))
print(f"Point region sanity check: expected gain {pd.expected_gain:.6f} (max possible 1)")

# When the serving BS direction is itself uncertain, design jointly.
bs_dir = geometry.direction_and_angles(p_ris, scene.p_bs)
bs_region = phasedesign.CoverageRegion(bs_dir.theta - 0.05, bs_dir.theta + 0.05,
                                       bs_dir.phi - 0.05, bs_dir.phi + 0.05,
                                       grid_theta=5, grid_phi=5)
joint = phasedesign.design_phase_multibs(region, bs_region, arrays.ris)
print(f"Joint BS/UE-region design objective: {joint.expected_gain:.4f}")
