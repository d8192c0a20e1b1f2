"""One surface, one target: the CRB as power gain times squared geometric gain.

Sweeps the surface yaw and prints the full FIM bound next to the closed form
``sigma^2 / (4 |rho|^2 P_g G_g^2)``. They agree while the amplitude slope of
the pattern is ignored, which is what ``gain_derivative=False`` does.

    python3 demos/single_surface.py
"""

import numpy as np

from sixdma import ArrayLayout, DirectivePattern, LocalArray, crb_report
from sixdma.estimation import crb_closed_form_single
from sixdma.scenario import Target, make_probe

lam = 0.125
kind = DirectivePattern()
target = Target(0.0, 40.0, 1e-4)
probe = make_probe(1.0, 256, 8)

print(" yaw[deg]   P_g         G_g         CRB(FIM)     closed form")
for yaw in np.deg2rad([0, 15, 30, 45, 60]):
    layout = ArrayLayout.uniform([[0, 0, 0]], [[yaw, 0, 0]], LocalArray.ula(8, lam / 2))
    rep = crb_report(layout, kind, [target], probe, 1e-12, lam, gain_derivative=False)
    closed = crb_closed_form_single(layout, kind, target, probe, 1e-12, lam, gain_derivative=False)
    print(f"{np.rad2deg(yaw):8.0f}   {rep.power_gain[0]:.3e}   {rep.geometric_gain[0]:.3e}"
          f"   {rep.total:.4e}   {closed:.4e}")
