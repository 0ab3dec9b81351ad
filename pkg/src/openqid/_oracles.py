"""Closed-form transfer-function coefficients of the built-in models.

Each function takes the model's own parameter vector and returns
``(num, den)`` coefficient lists in ascending powers of ``s``. Entries that
have no closed form are NaN.
"""

import numpy as np


def energy_transfer_z1(theta):
    wd, d, n1, n2, m1, m2, g = theta
    d2, w2 = d * d, wd * wd
    q3 = m1 + 2 * n1 + 4 * n2 + 2 * g
    q2 = (
        2 * d2 + n1**2 + 6 * n1 * n2 + 2 * n1 * g + 2 * m1 * n1 + 5 * n2**2
        + 6 * n2 * g + 4 * m1 * n2 + g**2 + 2 * m1 * g + w2
    )
    q1 = (
        2 * d2 * m1 + 2 * d2 * m2 + 2 * d2 * n1 + 2 * d2 * n2 + 2 * d2 * g
        + m1 * n1**2 + 5 * m1 * n2**2 + 4 * n1 * n2**2 + 2 * n1**2 * n2 + m1 * g**2
        + 2 * n2 * g**2 + 4 * n2**2 * g + m1 * w2 + 2 * n2 * w2 + 2 * n2**3
        + 6 * m1 * n1 * n2 + 2 * m1 * n1 * g + 6 * m1 * n2 * g + 4 * n1 * n2 * g
    )
    q0 = (
        2 * m1 * n2**3 + 2 * d2 * m1 * g + 2 * d2 * m2 * g + 4 * m1 * n1 * n2**2
        + 2 * m1 * n1**2 * n2 + 2 * m1 * n2 * g**2 + 4 * m1 * n2**2 * g + 2 * m1 * n2 * w2
        + 2 * d2 * m1 * n1 + 2 * d2 * m1 * n2 + 2 * d2 * m2 * n1 + 2 * d2 * m2 * n2
        + 4 * m1 * n1 * n2 * g
    )
    return [q0, q1, q2, q3, 1.0], _energy_den(theta)


def energy_transfer_z2(theta):
    wd, d, n1, n2, m1, m2, g = theta
    d2, w2 = d * d, wd * wd
    r3 = m2
    r2 = 2 * d2 + 4 * m2 * n1 + 2 * m2 * n2 + 2 * m2 * g
    r1 = (
        2 * d2 * m1 + 2 * d2 * m2 + 2 * d2 * n1 + 2 * d2 * n2 + 2 * d2 * g
        + 5 * m2 * n1**2 + m2 * n2**2 + m2 * g**2 + m2 * w2 + 6 * m2 * n1 * n2
        + 6 * m2 * n1 * g + 2 * m2 * n2 * g
    )
    r0 = (
        2 * m2 * n1**3 + 2 * d2 * m1 * g + 2 * d2 * m2 * g + 2 * m2 * n1 * n2**2
        + 4 * m2 * n1**2 * n2 + 2 * m2 * n1 * g**2 + 4 * m2 * n1**2 * g + 2 * m2 * n1 * w2
        + 2 * d2 * m1 * n1 + 2 * d2 * m1 * n2 + 2 * d2 * m2 * n1 + 2 * d2 * m2 * n2
        + 4 * m2 * n1 * n2 * g
    )
    return [r0, r1, r2, r3], _energy_den(theta)


def _energy_den(theta):
    wd, d, n1, n2, m1, m2, g = theta
    d2, w2 = d * d, wd * wd
    p4 = 4 * n1 + 4 * n2 + 2 * g
    p3 = 4 * d2 + 5 * n1**2 + 14 * n1 * n2 + 6 * n1 * g + 5 * n2**2 + 6 * n2 * g + g**2 + w2
    p2 = (
        8 * d2 * n1 + 8 * d2 * n2 + 4 * d2 * g + 2 * n1**3 + 14 * n1**2 * n2 + 4 * n1**2 * g
        + 14 * n1 * n2**2 + 16 * n1 * n2 * g + 2 * n1 * g**2 + 2 * n1 * w2 + 2 * n2**3
        + 4 * n2**2 * g + 2 * n2 * g**2 + 2 * n2 * w2
    )
    p1 = (
        4 * d2 * n1**2 + 8 * d2 * n1 * n2 + 4 * d2 * n1 * g + 4 * d2 * n2**2 + 4 * d2 * n2 * g
        + 4 * n1**3 * n2 + 8 * n1**2 * n2**2 + 8 * n1**2 * n2 * g + 4 * n1 * n2**3
        + 8 * n1 * n2**2 * g + 4 * n1 * n2 * g**2 + 4 * n1 * n2 * w2
    )
    return [0.0, p1, p2, p3, p4, 1.0]


def dephasing3_x1(theta):
    w1, w2, w3, d1, d2, g1, g2, g3 = theta
    p5 = 2 * (g1 + g2 + g3)
    p4 = (
        2 * d1**2 + 2 * d2**2 + g1**2 + 4 * g1 * g2 + g2**2 + 4 * (g1 + g2) * g3 + g3**2
        + w1**2 + w2**2 + w3**2
    )
    p3 = 2 * (
        g1**2 * g2 + g1 * g2**2 + g1**2 * g3 + 4 * g1 * g2 * g3 + g2**2 * g3 + g1 * g3**2
        + g2 * g3**2 + d2**2 * (2 * g1 + g2 + g3) + d1**2 * (g1 + g2 + 2 * g3)
        + g2 * w1**2 + g3 * w1**2 + g1 * w2**2 + g3 * w2**2 + (g1 + g2) * w3**2
    )
    p2 = (
        d1**4 + d2**4 + g1**2 * g2**2 + 4 * g1**2 * g2 * g3 + 4 * g1 * g2**2 * g3
        + g1**2 * g3**2 + 4 * g1 * g2 * g3**2 + g2**2 * g3**2 + g2**2 * w1**2
        + 4 * g2 * g3 * w1**2 + g3**2 * w1**2 + g1**2 * w2**2 + 4 * g1 * g3 * w2**2
        + g3**2 * w2**2 + w1**2 * w2**2
        + (g1**2 + 4 * g1 * g2 + g2**2 + w1**2 + w2**2) * w3**2
        + 2 * d2**2 * (g1**2 + g2 * g3 + 2 * g1 * (g2 + g3) + w1**2 - w2 * w3)
        + 2 * d1**2 * (d2**2 + g1 * g2 + 2 * (g1 + g2) * g3 + g3**2 - w1 * w2 + w3**2)
    )
    p1 = 2 * (
        d2**4 * g1 + d1**4 * g3
        + g2 * g3 * (g1 * g2 * g3 + g1**2 * (g2 + g3) + (g2 + g3) * w1**2)
        + g3 * (g1 * (g1 + g3) + w1**2) * w2**2
        + (g2 * (g1 * (g1 + g2) + w1**2) + g1 * w2**2) * w3**2
        + d1**2 * (d2**2 * (g1 + g3) + g3 * (2 * g1 * g2 + (g1 + g2) * g3 - 2 * w1 * w2) + (g1 + g2) * w3**2)
        + d2**2 * (g1**2 * (g2 + g3) + (g2 + g3) * w1**2 + 2 * g1 * (g2 * g3 - w2 * w3))
    )
    # the widely reproduced form of this coefficient nests the d2^4 (g1^2 + w1^2)
    # term inside the 2 d2^2 bracket; it belongs outside
    p0 = (
        (d1**4 + 2 * d1**2 * (g1 * g2 - w1 * w2) + (g1**2 + w1**2) * (g2**2 + w2**2)) * (g3**2 + w3**2)
        + 2 * d2**2 * (d1**2 * (g1 * g3 + w1 * w3) + (g1**2 + w1**2) * (g2 * g3 - w2 * w3))
        + d2**4 * (g1**2 + w1**2)
    )
    q4 = g1 + 2 * g2 + 2 * g3
    q3 = d1**2 + 2 * d2**2 + g2**2 + 4 * g2 * g3 + g3**2 + 2 * g1 * (g2 + g3) + w2**2 + w3**2
    q2 = (
        2 * d2**2 * (g1 + g2 + g3) + d1**2 * (g2 + 2 * g3) + 2 * g3 * (g2 * (g2 + g3) + w2**2)
        + 2 * g2 * w3**2 + g1 * (g2**2 + 4 * g2 * g3 + g3**2 + w2**2 + w3**2)
    )
    q1 = (
        d2**4 + g2 * g3 * (g2 * g3 + 2 * g1 * (g2 + g3)) + g3 * (2 * g1 + g3) * w2**2
        + (2 * g1 * g2 + g2**2 + w2**2) * w3**2 + 2 * d2**2 * (g2 * g3 + g1 * (g2 + g3) - w2 * w3)
        + d1**2 * (d2**2 + 2 * g2 * g3 + g3**2 + w3**2)
    )
    q0 = (
        d2**4 * g1 + d2**2 * (d1**2 * g3 + 2 * g1 * g2 * g3 - 2 * g1 * w2 * w3)
        + (d1**2 * g2 + g1 * (g2**2 + w2**2)) * (g3**2 + w3**2)
    )
    return [q0, q1, q2, q3, q4, 1.0], [p0, p1, p2, p3, p4, p5, 1.0]


def dephasing3_p0_as_printed(theta):
    """The constant denominator coefficient in its commonly printed (incorrect) form."""
    w1, w2, w3, d1, d2, g1, g2, g3 = theta
    return (d1**4 + 2 * d1**2 * (g1 * g2 - w1 * w2) + (g1**2 + w1**2) * (g2**2 + w2**2)) * (
        g3**2 + w3**2
    ) + 2 * d2**2 * (
        d1**2 * (g1 * g3 + w1 * w3) + d2**4 * (g1**2 + w1**2) + (g1**2 + w1**2) * (g2 * g3 - w2 * w3)
    )


def relaxation_x_x1(theta):
    w1, w2, d, g1, g2 = theta
    nan = np.nan
    q6 = 7 * g1 + 8 * g2
    q5 = 26 * g2**2 + 48 * g2 * g1 + 3 * d**2 + 2 * w2**2 + 19 * g1**2 + w1**2
    q4 = (
        130 * g1 * g2**2 + 17 * d**2 * g2 + 5 * w1**2 * g1 + 10 * w2**2 * g1 + 12 * w2**2 * g2
        + 108 * g1**2 * g2 + 44 * g2**3 + 18 * d**2 * g1 + 25 * g1**3 + 4 * w1**2 * g2
    )
    p7 = 8 * g1 + 8 * g2
    p6 = 2 * w2**2 + 26 * g1**2 + 26 * g2**2 + 56 * g2 * g1 + 2 * w1**2 + 4 * d**2
    num = [nan, nan, nan, nan, q4, q5, q6, 1.0]
    den = [nan, nan, nan, nan, nan, nan, p6, p7, 1.0]
    return num, den


def relaxation_z_z1(theta):
    w1, w2, d, g1, g2 = theta
    wd2 = (w1 - w2) ** 2
    gs = g1 + g2
    q3 = -g1
    q2 = 2 * d**2 - 2 * g1**2 - 4 * g1 * g2
    q1 = -g1 * (g1**2 + 6 * g1 * g2 + 5 * g2**2 + wd2)
    q0 = -2 * d**2 * gs**2 - 2 * g1 * g2 * (gs**2 + wd2)
    p4 = 4 * gs
    p3 = 4 * d**2 + 5 * g1**2 + 14 * g1 * g2 + 5 * g2**2 + wd2
    p2 = 2 * gs * (4 * d**2 + g1**2 + 6 * g1 * g2 + g2**2 + wd2)
    p1 = 4 * d**2 * gs**2 + 4 * g1 * g2 * (gs**2 + wd2)
    return [q0, q1, q2, q3], [0.0, p1, p2, p3, p4, 1.0]


# (canonical model, output) -> formula
TABLE = {
    ("energy_transfer", "z1"): energy_transfer_z1,
    ("energy_transfer", "z2"): energy_transfer_z2,
    ("dephasing_chain(3)", "x1"): dephasing3_x1,
    ("relaxation_chain_x", "x1"): relaxation_x_x1,
    ("relaxation_chain_z", "z1"): relaxation_z_z1,
}

ALIASES = {
    "energy_transfer": "energy_transfer",
    "dephasing3": "dephasing_chain(3)",
    "dephasing_chain(3)": "dephasing_chain(3)",
    "dephasing_chain:3": "dephasing_chain(3)",
    "relaxation_x": "relaxation_chain_x",
    "relaxation_chain_x": "relaxation_chain_x",
    "relaxation_z": "relaxation_chain_z",
    "relaxation_chain_z": "relaxation_chain_z",
}
