"""Published reference values for the three-asset and five-asset illustrations."""

from __future__ import annotations

import numpy as np

from .distributions import EllipticalModel
from .generators import GeneratorFamily

INF = np.inf

# three-asset models U (normal), V (Student-t, m = 4), W (Laplace)
MU3 = np.array([1.4, 1.1, 3.4])
SIGMA3 = np.array([[1.33, -0.067, 0.83],
                   [-0.067, 0.25, -0.50],
                   [0.83, -0.50, 5.76]])

FAMILIES3 = {
    "U": GeneratorFamily.normal(),
    "V": GeneratorFamily.student_t(4.0),
    "W": GeneratorFamily.laplace(),
}


def model3(name: str) -> EllipticalModel:
    return EllipticalModel(MU3, SIGMA3, FAMILIES3[name])


RANGES3 = {
    1: (0.0, 0.10),
    2: (0.30, 0.70),
    3: (0.30, 0.80),
    4: (0.95, 1.0),
}

# VaR rows for p in TABLE1_P; columns U1 U2 U3 V1 V2 V3 W1 W2 W3
TABLE1_P = (0.10, 0.30, 0.70, 0.80, 0.95)
TABLE1 = np.array([
    [-0.077958, 0.459224, 0.324277, -0.368180, 0.333397, -0.279695, -1.364674, -0.098638, -2.353460],
    [0.795232, 0.837800, 2.141439, 0.744202, 0.815675, 2.035242, 0.393145, 0.663478, 1.304670],
    [2.004768, 1.362200, 4.658561, 2.055799, 1.384325, 4.764757, 2.406857, 1.536528, 5.495330],
    [2.370604, 1.520811, 5.419894, 2.485174, 1.570482, 5.658313, 3.090910, 1.833102, 6.918880],
    [3.296937, 1.922426, 7.347650, 3.858566, 2.165923, 8.516429, 5.173240, 2.735906, 11.252350],
])

MRVAR3 = {
    "U": {1: [-0.702948, 0.296865, -0.553282],
          2: [1.4, 1.1, 3.4],
          3: [1.561117, 1.161038, 3.704342],
          4: [3.858560, 2.061853, 8.104730]},
    "V": {1: [-2.703324, -0.355314, -3.940607],
          2: [1.400001, 1.1, 3.4],
          3: [1.568532, 1.159554, 3.705519],
          4: [6.867393, 3.048464, 13.211250]},
    "W": {1: [-3.448572, -0.679482, -5.466375],
          2: [1.4, 1.100002, 3.400001],
          3: [1.641988, 1.184636, 3.837478],
          4: [7.321639, 3.316232, 14.374700]},
}


def _sym(a, b, c, d, e, f):
    return [[a, b, c], [b, d, e], [c, e, f]]


MRCOV3 = {
    "U": {1: _sym(0.2725561, -6.3955180e-5, 0.0210362, 0.02197306, -0.0053686, 0.6122263),
          2: _sym(0.1171168, -1.4123580e-5, 0.0071105, 0.02193414, -0.0046652, 0.5036470),
          3: _sym(0.1929618, -0.0001503, 0.0191361, 0.0359268, -0.0124602, 0.8243330),
          4: _sym(0.2310622, -1.5509710e-5, 0.0138496, 0.0168436, -0.0032329, 0.4767768)},
    "V": {1: _sym(7.5413450, 0.8690497, 5.3625440, 0.8078437, 1.2198950, 21.5812600),
          2: _sym(0.1329993, -0.0001762, 0.0140416, 0.0248552, -0.0091530, 0.5695088),
          3: _sym(0.2224948, -0.0004433, 0.0365105, 0.0411555, -0.0216376, 0.9434341),
          4: _sym(12.824010, 1.494721, 9.180549, 1.365656, 2.109936, 36.532980)},
    "W": {1: _sym(3.2616840, 0.0868712, 0.8060599, 0.3085260, 0.0466691, 8.3800210),
          2: _sym(0.2955763, -0.0012197, 0.0434348, 0.0551933, -0.0279061, 1.2635410),
          3: _sym(0.5058757, -0.0001401, 0.1032881, 0.0933769, -0.0514781, 2.1412330),
          4: _sym(3.5062380, 0.0777070, 0.7360139, 0.3113243, 0.0393784, 8.5506770)},
}

# upper-triangular correlation entries (1,2), (1,3), (2,3)
MRCORR3 = {
    "U": {1: [-0.0008264, 0.0514972, -0.0462871],
          2: [-0.0002787, 0.0292771, -0.0443861],
          3: [-0.0018052, 0.0479807, -0.0724043],
          4: [-0.0002486, 0.04172681, -0.0360759]},
    "V": {1: [0.3520923, 0.4203471, 0.2921597],
          2: [-0.0030646, 0.0510202, -0.0769316],
          3: [-0.0046326, 0.0796897, -0.1098094],
          4: [0.3571721, 0.4241448, 0.2987143]},
    "W": {1: [0.0865982, 0.1541785, 0.02902425],
          2: [-0.0095494, 0.0710736, -0.1056723],
          3: [-0.0006446, 0.0992422, -0.1151253],
          4: [0.0743760, 0.1344204, 0.0241352]},
}

# five-asset Student-t fit used for the portfolio illustration
DOF5 = 6.2623761
MU5 = 1e-3 * np.array([1.1216, 0.5261, 0.1270, -0.6643, -0.2408])
SIGMA5 = 1e-2 * np.array([
    [1.12591, 0.28224, 0.25971, 0.34555, 0.13225],
    [0.28224, 0.95803, 0.13244, 0.20053, 0.14266],
    [0.25971, 0.13244, 1.58482, 0.21797, 0.11606],
    [0.34555, 0.20053, 0.21797, 1.14941, 0.18298],
    [0.13225, 0.14266, 0.11606, 0.18298, 1.16874],
])
LABELS5 = ("AAPL", "CSCO", "EBAY", "INTC", "SIRI")


def model5() -> EllipticalModel:
    return EllipticalModel(MU5, SIGMA5, GeneratorFamily.student_t(DOF5))


RANGES5 = {
    1: (0.75, 0.95),
    2: (0.80, 1.0),
    3: (0.95, 1.0),
}

TABLE5_P = (0.40, 0.60, 0.70, 0.75, 0.80, 0.90, 0.95)
TABLE5 = np.array([
    [-0.026928, -0.025348, -0.033151, -0.029005, -0.028818],
    [0.029171, 0.026400, 0.033405, 0.027676, 0.028337],
    [0.059708, 0.054568, 0.069634, 0.058529, 0.059449],
    [0.077060, 0.070575, 0.090222, 0.076063, 0.077129],
    [0.096922, 0.088896, 0.113786, 0.096131, 0.097365],
    [0.153112, 0.140727, 0.180451, 0.152904, 0.154613],
    [0.205775, 0.189307, 0.242932, 0.206114, 0.208267],
])

MRVAR5 = {
    1: [0.1332060, 0.1206013, 0.1530140, 0.1320112, 0.1307101],
    2: [0.2371618, 0.2091944, 0.2603811, 0.2338855, 0.2213374],
    3: [0.4030022, 0.3569983, 0.4461190, 0.3991542, 0.3798648],
}

MRCOV5 = {
    1: 1e-3 * np.array([
        [1.27195500, 0.04475777, 0.04455139, 0.05303480, 0.02447907],
        [0.04475777, 1.07132200, 0.02831541, 0.03035051, 0.03088864],
        [0.04455139, 0.02831541, 1.75647200, 0.03894598, 0.03414841],
        [0.05303480, 0.03035051, 0.03894598, 1.29421400, 0.03557834],
        [0.02447907, 0.03088864, 0.03414841, 0.03557834, 1.29211600]]),
    2: 1e-2 * np.array([
        [1.6051150, 0.4483114, 0.5045233, 0.5268113, 0.3850687],
        [0.4483114, 1.2609090, 0.3945301, 0.3959148, 0.3503502],
        [0.5045233, 0.3945301, 1.9562300, 0.4777596, 0.4089094],
        [0.5268113, 0.3959148, 0.4777596, 1.5922910, 0.4076230],
        [0.3850687, 0.3503502, 0.4089094, 0.4076230, 1.4156880]]),
    3: 1e-2 * np.array([
        [3.4845110, 1.0072270, 1.1441760, 1.1812240, 0.8861056],
        [1.0072270, 2.7075940, 0.9071066, 0.9011320, 0.7995451],
        [1.1441760, 0.9071066, 4.1678580, 1.0889430, 0.9398218],
        [1.1812240, 0.9011320, 1.0889430, 3.4419590, 0.9280654],
        [0.8861056, 0.7995451, 0.9398218, 0.9280654, 3.0099370]]),
}
