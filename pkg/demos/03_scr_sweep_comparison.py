"""Both interfaces across grid strengths, side by side.

The H-infinity interface is designed once at S = 1 and then left alone while
the grid impedance changes; the ITM interface uses its default filter.  The
table reports steady-state RMS of the accuracy errors
``e_V = V1 - Vc`` and ``e_I = I1 - Id`` (worst of the three phases).

The nominal design is accurate at S = 1 but is not robust to changes in the
grid impedance; ``demos/04_robustness_tradeoff.py`` looks at why.
"""
from phil_forge import (
    PhilScenario,
    assemble_plant,
    itm_interface,
    sweep_scr,
    synthesize,
    wrap_scaled_controller,
)

template = PhilScenario()
K = synthesize(assemble_plant(template))
interfaces = {"hinf": wrap_scaled_controller(K), "itm": itm_interface()}
scr_values = (0.1, 1.0, 2.0, 5.0, 200.0)

print("interface      S   stable   rms e_V (V)   rms e_I (A)   peak e_V (V)")
for label, itf in interfaces.items():
    for row in sweep_scr(template, itf, scr_values):
        m = row.metrics
        if not row.stable:
            print(f"{label:>9s} {row.scr:6g}   no")
            continue
        print(f"{label:>9s} {row.scr:6g}   yes      {m.ss_rms_eV:8.3f}      "
              f"{m.ss_rms_eI:8.3f}      {m.peak_eV:8.3f}")

print("\nerror bounds of the normalization for reference: |e_V| <= 6 V, |e_I| <= 0.5 A")
