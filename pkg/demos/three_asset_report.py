"""Risk report for the three-asset normal model on the central 30-70% range."""

import numpy as np

from rangerisk import paperdata as P
from rangerisk.riskmeasures import RangeSpec, risk_report

np.set_printoptions(precision=6, suppress=True)

for name in "UVW":
    rep = risk_report(P.model3(name), RangeSpec.uniform(0.3, 0.7, 3), tol=1e-8)
    print(f"model {name}")
    print("  MRVaR ", rep.mrvar)
    print("  MRCov\n", rep.mrcov)
    print("  MRCorr\n", rep.mrcorr)
