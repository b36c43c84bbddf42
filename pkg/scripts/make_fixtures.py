"""Regenerate the frozen regression curves in tests/fixtures from the test oracles."""

import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

import oracles  # noqa: E402


def save(name, times, values, note):
    path = ROOT / "tests" / "fixtures" / name
    with open(path, "w") as fh:
        fh.write(f"# {note}\n")
        fh.write("t,value\n")
        for t, v in zip(times, values):
            fh.write(f"{t:.17g},{v:.17g}\n")
    print("wrote", path)


if __name__ == "__main__":
    t, v = oracles.rk4_curve(8, g_x=0.1253, step=1e-3)
    save("curve_unitary_N8_gx0.1253.csv", t, v, "RK4 Schrodinger oracle, step 1e-3, N=8, J_z=0, g_x=0.1253, axis x")
    t, v = oracles.lindblad_curve_expm(4, 0.1, g_x=0.2053)
    save("curve_lindblad_N4_gamma0.1_gx0.2053.csv", t, v, "Liouvillian expm oracle, N=4, gamma=0.1, g_x=0.2053, axis x")
