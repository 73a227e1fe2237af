"""A sharp SNR-per-photon peak from the skin-effect coupling.

The boundary coupling between the first and last A sites is probed with the
drive at m = floor(alpha* N).  Photons and signal grow together until the
linear regime breaks at N*; past that point the signal saturates while the
photon number keeps rising, so the SNR per photon peaks near N* and the SNR
itself settles at 8 tau |beta|^2.

    python3 demos/skin_effect_peak.py
"""

import math

import numpy as np

from nhsense import ChainSpec, DriveSpec, PerturbationSpec
from nhsense.analysis import ScanMode, breakdown_size, optimal_alpha, scaling_scan

chain = ChainSpec(1, t1=0.6, t2=0.4, gamma1=1.1, gamma2=1.6, kappa=0.05)
drive = DriveSpec(beta_abs=1.0, theta=math.pi / 4, tau=100.0)
a = optimal_alpha(chain)
print(f"alpha* = {a.alpha_star:.4f}, n_min = {a.n_min}")

ns = np.arange(5, 41)
for eps in (1e-6, 1e-4):
    rows = scaling_scan(chain, drive, PerturbationSpec.nhse(eps, math.pi / 2), n_values=ns, mode=ScanMode.ALL_ORDERS)
    spp = np.array([r.snr_per_photon for r in rows])
    snr = np.array([r.snr for r in rows])
    n_star = breakdown_size(chain, pert_kind="nhse", eps0=eps)
    print(f"\neps0={eps:.0e}: N*={n_star:.2f}, spp peaks at N={ns[np.argmax(spp)]}, snr(N=40)={snr[-1]:.4f}")
    flagged = [(r.n, r.flags) for r in rows if r.flags]
    if flagged:
        print(f"  flagged rows: {flagged[:4]}{' ...' if len(flagged) > 4 else ''}")
