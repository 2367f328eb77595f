"""Design an H-infinity interface for the nominal grid and check its closed loop.

The grid is a 120 V / 60 Hz Thevenin source whose impedance equals the
24 ohm device resistance (short-circuit ratio S = 1, X/R = 1).  The script
assembles the normalized, weighted model-matching plant, runs the gamma
bisection and then sweeps every closed-loop channel up to 1 kHz.

Run with ``python demos/01_design_and_validate.py``.
"""
import time

import numpy as np

from phil_forge import PhilScenario, assemble_plant, synthesize, validate_closed_loop
from phil_forge import lti

scenario = PhilScenario()
print(f"grid: {scenario.v_grid_rms:g} V rms, {scenario.f0:g} Hz, S = {scenario.scr:g}, "
      f"device {scenario.dut_resistance:g} ohm ({scenario.rated_power:g} W per phase)")

plant = assemble_plant(scenario)
print(f"plant: {plant.sys.n_states} states, "
      f"w={plant.n_w} u={plant.n_u} z={plant.n_z} y={plant.n_y}")

t0 = time.perf_counter()
K = synthesize(plant)
print(f"synthesis: gamma = {K.gamma_achieved:.4f} after "
      f"{len(K.synthesis_report['history'])} Riccati tests ({time.perf_counter() - t0:.2f} s)")
print(f"controller: {K.sys.n_states} states, "
      f"stable on its own: {lti.is_stable(K.sys)}")

report = validate_closed_loop(plant, K, f_max=1000.0)
print(f"closed loop stable: {report.stable}, H-inf norm {report.hinf_norm:.4f}")

# worst channels first; the noise inputs are tiny by construction
peaks = sorted(report.channel_gain_db.items(), key=lambda kv: -kv[1])
print("largest channel gains up to 1 kHz:")
for (z, w), g in peaks[:6]:
    print(f"  {z:>9s} <- {w:<6s} {g:7.2f} dB")
print("verdict:", "all channels below 0 dB" if report.passed else f"violations {report.violations}")

# the closed loop seen from the grid voltage alone
cl = lti.lft_lower(plant, K.sys)
f = np.array([1.0, 60.0, 300.0, 1000.0])
G = lti.freq_response(cl, 2 * np.pi * f * scenario.sample_time)
print("gain from V_grid at 1, 60, 300, 1000 Hz (dB):")
for i, z in enumerate(plant.z_names):
    print(f"  {z:>9s}", " ".join(f"{20 * np.log10(abs(g)):7.1f}" for g in G[:, i, 0]))
