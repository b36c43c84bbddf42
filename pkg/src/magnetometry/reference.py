"""Published reference estimates used as comparison targets.

Keys are (true field, N).  A1 holds single-run (estimate, std) pairs, A2
and A3 hold 10-run averages; A3 rows are (gx_est, gy_est, dgx, dgy).
"""

TABLE_A1 = {
    (0.1, 4): (0.09729, 0.004343),
    (0.1, 6): (0.09749, 0.002931),
    (0.1, 8): (0.09817, 0.001949),
    (0.1, 10): (0.09824, 0.002105),
}

TABLE_A2 = {
    (0.05, 4): (0.04788, 0.004513),
    (0.05, 6): (0.04872, 0.002251),
    (0.05, 8): (0.04769, 0.002376),
    (0.05, 10): (0.04931, 0.002239),
    (0.1, 4): (0.1005, 0.004513),
    (0.1, 6): (0.1005, 0.002850),
    (0.1, 8): (0.1006, 0.002062),
    (0.1, 10): (0.1003, 0.002238),
    (0.15, 4): (0.1529, 0.004112),
    (0.15, 6): (0.1511, 0.002566),
    (0.15, 8): (0.1515, 0.002444),
    (0.15, 10): (0.1498, 0.002973),
    (0.2, 4): (0.2016, 0.003225),
    (0.2, 6): (0.2001, 0.002625),
    (0.2, 8): (0.2013, 0.003672),
    (0.2, 10): (0.2015, 0.004255),
}

TABLE_A3 = {
    ((0.05, 0.05), 4): (0.04153, 0.04909, 0.01859, 0.003323),
    ((0.05, 0.05), 6): (0.04752, 0.04999, 0.004651, 0.002452),
    ((0.05, 0.05), 8): (0.04798, 0.04881, 0.002235, 0.002088),
    ((0.05, 0.05), 10): (0.04923, 0.04983, 0.001535, 0.002327),
    ((0.075, 0.075), 4): (0.06909, 0.07339, 0.01062, 0.003817),
    ((0.075, 0.075), 6): (0.07590, 0.07662, 0.002804, 0.002991),
    ((0.075, 0.075), 8): (0.07505, 0.07477, 0.002509, 0.003322),
    ((0.075, 0.075), 10): (0.07343, 0.07687, 0.003050, 0.003502),
    ((0.1, 0.1), 4): (0.09779, 0.09799, 0.004168, 0.003942),
    ((0.1, 0.1), 6): (0.1002, 0.09752, 0.003011, 0.003913),
    ((0.1, 0.1), 8): (0.1023, 0.09630, 0.003542, 0.004176),
    ((0.1, 0.1), 10): (0.1022, 0.09813, 0.004438, 0.003917),
}

MEAN_BAND = 0.01
STD_FACTOR = 2.0


def within_bands(estimate, std, ref_estimate, ref_std) -> dict:
    """Mean within +-0.01 absolute; std within a factor of 2 either way."""
    ratio = std / ref_std
    return {
        "mean_ok": abs(estimate - ref_estimate) <= MEAN_BAND,
        "std_ok": 1.0 / STD_FACTOR <= ratio <= STD_FACTOR,
        "std_ratio": ratio,
    }
