"""Optimize a small 6DMA array for the desk scenario and compare it with fixed sectors.

    python3 demos/quickstart.py
"""

from dataclasses import replace

from sixdma import DirectivePattern, build_fpa, crb_report, load_config, optimize_6dma

cfg = load_config("desk")
scenario = cfg.scenario()
site, cons = cfg.site(), cfg.constraints()
kind = DirectivePattern()

fpa = build_fpa(cfg.n_antennas, cfg.wavelength, site)
fpa_crb = crb_report(fpa, kind, scenario.targets, scenario.probe(fpa.n_antennas),
                     scenario.noise_var, cfg.wavelength).total

# a shorter search than the config asks for keeps this under a few seconds
params = replace(cfg.pso, iterations=20)
result = optimize_6dma(scenario, kind, params, seed=0, n_surfaces=cfg.n_surfaces,
                       n_per_surface=cfg.n_per_surface, site=site, cons=cons)

print(f"{scenario.n_targets} typical targets, {cfg.n_antennas} antennas")
print(f"fixed sectors  CRB sum = {fpa_crb:.3e} rad^2")
print(f"6DMA           CRB sum = {result.crb:.3e} rad^2  (feasible: {result.feasible})")
print("surface centers [m]:")
for q in result.layout.positions:
    print("   ", " ".join(f"{v:+.3f}" for v in q))
