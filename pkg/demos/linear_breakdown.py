"""Where linear response stops: saturation of the on-site SNR.

Beyond the size N* the perturbation is no longer small compared with the
exponentially shrinking effective damping, and the all-order SNR saturates at
8 tau |beta|^2.  The knee of ln(snr) sits at N* and moves by
ln(100)/(2 ln R) cells when eps0 changes by two decades.

    python3 demos/linear_breakdown.py
"""

import math

import numpy as np

from nhsense import ChainSpec, DriveSpec, PerturbationSpec
from nhsense.analysis import ScanMode, breakdown_size, knee_location, scaling_scan

chain = ChainSpec(1, t1=1.0, t2=1.0, gamma1=1.5, gamma2=2.5, kappa=0.05)
drive = DriveSpec(beta_abs=1.0, theta=math.pi / 2, tau=100.0)
ns = np.arange(1, 26)

for eps in (1e-6, 1e-5, 1e-4):
    rows = scaling_scan(chain, drive, PerturbationSpec.onsite(eps), n_values=ns, mode=ScanMode.ALL_ORDERS)
    snr = np.array([r.snr for r in rows])
    knee = knee_location(ns, np.log(snr))
    n_star = breakdown_size(chain, eps0=eps)
    print(f"eps0={eps:.0e}: N*={n_star:6.2f}  knee of ln(snr) at {knee:6.2f}  snr(N=25)={snr[-1]:.6f}")
    worst = max(abs(r.signal_numeric / r.signal_analytic - 1) for r in rows if r.signal_analytic > 0)
    print(f"            closed form vs dense solve, worst relative signal gap {worst:.1e}")
