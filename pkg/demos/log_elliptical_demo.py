"""Range moments of prices Z = exp(X) under normal and Laplace log models."""

import numpy as np

from rangerisk.riskmeasures import LogEllipticalModel, RangeSpec, log_mrcov, log_mrvar

sigma = np.array([[0.08, 0.03, -0.015], [0.03, 0.06, 0.02], [-0.015, 0.02, 0.1]])
for gen in ("normal", "laplace"):
    m = LogEllipticalModel(np.zeros(3), sigma, gen)
    v, _ = log_mrvar(m, RangeSpec.uniform(0.1, 0.9, 3))
    c, _ = log_mrcov(m, RangeSpec.uniform(0.1, 0.9, 3))
    print(gen, np.round(v, 6))
    print(np.round(c, 6))
