"""Which chain parity senses better, across the (t1, t2) plane.

Each cell compares the growth rate of ln(snr per photon) for odd and even
chains over N = 4..8 and labels the amplification regime.  A coarse grid
keeps the run short; configs/fig3a.toml runs the full 45 x 45 scan.

    python3 demos/phase_diagram.py
"""

import math
from collections import Counter

from nhsense import ChainSpec, DriveSpec, PerturbationSpec
from nhsense.analysis import MASKED, Axis, ScanGrid, phase_diagram_scan

for g1, g2 in ((1.6, 2.0), (2.0, 1.6)):
    grid = ScanGrid(
        (Axis("t1", 0.02, 2.0, 12), Axis("t2", 0.02, 2.0, 12)),
        ChainSpec(4, 0.1, 0.1, g1, g2, kappa=0.05),
        DriveSpec(theta=math.pi / 4),
        PerturbationSpec.nhse(0.0, math.pi / 2),
    )
    cells = phase_diagram_scan(grid)
    tally = Counter((c.regime.rstrip("*"), c.onsite_winner) for c in cells if c.regime != MASKED)
    print(f"gamma1={g1}, gamma2={g2}: {sum(c.regime == MASKED for c in cells)} masked cells")
    for (regime, winner), n in sorted(tally.items()):
        print(f"  regime {regime:>4}: {winner:>4} chain wins in {n} cells")
