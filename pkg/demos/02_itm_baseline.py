"""The ideal transformer method and its stability threshold.

ITM drives the amplifier with the measured grid-side voltage and feeds a
low-passed copy of the device current back into the grid simulation.  With
one sample of delay around the loop its gain is roughly |Z1| / R2 = 1 / S,
so weak grids (small S) go unstable.  The filter cutoff moves the threshold;
a 140 Hz first-order filter is the package default.
"""
import numpy as np

from phil_forge import PhilScenario, itm_interface, run_closed_loop, accuracy_metrics
from phil_forge.simulation import find_itm_threshold

template = PhilScenario()
itm = itm_interface()
print(f"ITM filter cutoff {itm.filter_cutoff:g} Hz, Ts = {itm.sample_time * 1e6:g} us")

print("\n   S   stable   rms e_V (V)   rms e_I (A)")
for S in (0.1, 1.0, 2.0, 5.0, 200.0):
    trace = run_closed_loop(template.with_scr(S), itm, duration=1.0)
    if trace.diverged:
        t_div = trace.divergence_index * trace.sample_time
        print(f"{S:6g}   no       diverged after {t_div * 1e3:.1f} ms")
        continue
    m = accuracy_metrics(trace)
    print(f"{S:6g}   yes      {m.ss_rms_eV:8.3f}      {m.ss_rms_eI:8.3f}")

s_star = find_itm_threshold(template)
print(f"\nsimulated threshold S* = {s_star:.3f}")

# with a purely resistive grid and an almost transparent filter the loop
# gain argument predicts S* close to 1
resistive = PhilScenario(xr_ratio=0.0)
s_res = find_itm_threshold(resistive, filter_cutoff=0.49 / template.sample_time,
                           S_lo=0.3, S_hi=3.0, tol=0.005, duration=0.5)
print(f"resistive grid, near-Nyquist filter: S* = {s_res:.3f}")

print("\nthreshold against filter cutoff (X/R = 1):")
for fc in (100.0, 140.0, 200.0, 400.0):
    try:
        s = find_itm_threshold(template, fc, S_lo=0.1, S_hi=20.0, tol=0.02, duration=0.5)
        print(f"  {fc:5g} Hz  S* = {s:.2f}")
    except ValueError as exc:
        print(f"  {fc:5g} Hz  {exc}")
