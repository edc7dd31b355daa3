"""Range-based efficient frontiers for the five-asset Student-t model (takes a few minutes)."""

import numpy as np

from rangerisk import paperdata as P
from rangerisk.portfolio import FrontierInput, frontier
from rangerisk.riskmeasures import RangeSpec, risk_report

model = P.model5()
for k, (p, q) in P.RANGES5.items():
    rep = risk_report(model, RangeSpec.uniform(p, q, 5), tol=1e-6, seed=42)
    targets = np.linspace(rep.mrvar.min(), rep.mrvar.max(), 5)
    pts = frontier(FrontierInput(rep.mrvar, rep.mrcov, targets))
    a, b, c, d = pts[0].abcd
    print(f"range {k} ({p}, {q}): minimum-variance level {b / c:.6f}")
    for pt in pts:
        print(f"  mu0 {pt.mu0:.6f} std {pt.std:.6f} weights {np.round(pt.weights, 4)}")
