"""Walk through one optimized sampling run on the default toy scenario.

Four 16-frame segments are denoised jointly over a 50-step DDIM plan.  At
every step the segment mixing vector is re-optimized against the control
energy; the boundary segments stay pinned to the source and target domains.
The printout shows how the interior mixing values and the energy evolve.

Run with: python3 demos/01_single_run.py
"""

import numpy as np

from pathmix import optimized_sample, scenario_from_dict

scenario = scenario_from_dict({"seed": 7})
result = optimized_sample(scenario, scenario.seed)

print(f"scenario fingerprint: {result.fingerprint[:16]}...")
print(f"wall time: {result.wall_time:.2f}s\n")

print("step  omega (per segment)           transient   terminal    total")
for n in range(0, len(result.energy_trace), 5):
    omega = "  ".join(f"{w:.3f}" for w in result.omega_grid[n])
    e = result.energy_trace[n]
    print(f"{n:4d}  [{omega}]  {e.transient:9.4f}  {e.terminal:9.4f}"
          f"  {e.total:9.4f}")

# the hard stitching constraint holds exactly on the final segments
segs = result.final_segments
overlap_gap = max(np.max(np.abs(segs[k + 1, :8] - segs[k, 8:]))
                  for k in range(3))
print(f"\nmax overlap mismatch across segments: {overlap_gap:g} (exact)")
print(f"assembled sequence shape: {result.long_sequence.shape}")
print(f"final interior omegas: {result.omega_grid[-1, 1:-1]}")
