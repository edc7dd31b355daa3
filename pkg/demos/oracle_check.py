"""Compare formula values with a Monte-Carlo oracle in both conditioning modes."""

import numpy as np

from rangerisk import paperdata as P
from rangerisk.riskmeasures import RangeSpec, oracle, oracle_draws, risk_report

model = P.model3("W")
rng = RangeSpec.uniform(0.3, 0.8, 3)
for region in ("y_box", "x_box"):
    rep = risk_report(model, rng, tol=1e-8, region=region)
    draws = oracle_draws(rep.diagnostics[0]["value"])
    o = oracle(model, rng, region, draws, seed=1)
    z = (rep.mrvar - o.mrvar) / np.hypot(rep.mrvar_se, o.mrvar_se)
    print(f"{region}: formula {np.round(rep.mrvar, 6)} oracle {np.round(o.mrvar, 6)} z {np.round(z, 2)}")
