"""A small Monte-Carlo SNR sweep: estimator RMSE versus the CRB.

Runs the full pipeline (synthesis -> estimation -> fusion) for a handful
of trials per SNR, writes results.csv, and prints RMSE next to the PEB.
The `rispos run` CLI does exactly this from a YAML config.
"""

import tempfile
from pathlib import Path

from rispos import config, harness

cfg = config.build_config({"experiment": {"trials": 20,
                                          "values": [0.0, 10.0, 20.0],
                                          "methods": ["proposed-energy",
                                                      "ls-baseline"]}},
                          profile="desk")
print(f"Sweep {cfg.sweep} over {list(cfg.values)}, {cfg.trials} trials each, "
      f"seed {cfg.seed} (results are byte-reproducible)\n")

out = Path(tempfile.mkdtemp())
rows = harness.run_sweep(cfg, out_dir=str(out))

print(f"{'SNR':>5} {'method':>16} {'ok':>4} {'RMSE pos (m)':>13} "
      f"{'PEB (m)':>9} {'RMSE/PEB':>9}")
for r in rows:
    ratio = r.rmse_position / r.peb
    print(f"{r.value:>5} {r.method:>16} {r.trials_ok:>4} "
          f"{r.rmse_position:>13.4g} {r.peb:>9.4g} {ratio:>9.2f}")

print(f"\nCSV written to {out/'results.csv'}")
print("The weighted fusion (proposed-energy) tracks the bound within a small")
print("factor; the identity-weight ls-baseline trusts weak RIS paths equally")
print("and pays for it, especially at low SNR.")
