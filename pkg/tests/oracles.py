"""Independent reference computations used only by the tests.

Nothing here imports the package's physics: Hamiltonians are assembled
element by element from bit operations, unitary dynamics is stepped with a
plain RK4 loop, and Lindblad dynamics uses the exponential of the explicit
Liouvillian superoperator.
"""

import numpy as np
from scipy.linalg import eigh, expm


def bit(state, site, n):
    """Spin at 1-based ``site``: 0 = up, 1 = down; site 1 is the high bit."""
    return (state >> (n - site)) & 1


def hamiltonian_by_elements(n, j_z=0.0, g_x=0.0, g_y=0.0):
    dim = 2**n
    h = np.zeros((dim, dim), dtype=complex)
    for s in range(dim):
        for i in range(1, n):
            a, b = bit(s, i, n), bit(s, i + 1, n)
            sz_a, sz_b = 1 - 2 * a, 1 - 2 * b
            h[s, s] -= j_z * sz_a * sz_b
            flipped = s ^ (1 << (n - i)) ^ (1 << (n - i - 1))
            # XX + YY = 2 (S+S- + S-S+): nonzero only on antiparallel pairs
            if a != b:
                h[flipped, s] -= 2.0
        for i in range(1, n + 1):
            t = s ^ (1 << (n - i))
            h[t, s] += g_x
            # <t|sigma_y|s>: up->down gives +i, down->up gives -i
            h[t, s] += g_y * (1j if bit(s, i, n) == 0 else -1j)
    return h


def sigma_on_site(n, site, axis):
    dim = 2**n
    op = np.zeros((dim, dim), dtype=complex)
    for s in range(dim):
        t = s ^ (1 << (n - site))
        if axis == "x":
            op[t, s] = 1
        elif axis == "y":
            op[t, s] = 1j if bit(s, site, n) == 0 else -1j
        elif axis == "z":
            op[s, s] = 1 - 2 * bit(s, site, n)
        elif axis == "-":
            if bit(s, site, n) == 0:
                op[t, s] = 1
    return op


def ground_state_oracle(n, j_z=0.0):
    h = hamiltonian_by_elements(n, j_z)
    w, v = eigh(h)
    return v[:, 0], w[0]


def rk4_curve(n, g_x=0.0, g_y=0.0, axis="x", t_max=5.0, n_times=101, step=1e-3):
    """Schrodinger RK4 on the zero-field ground state; returns <(sigma+1)/2>."""
    psi, _ = ground_state_oracle(n)
    h = hamiltonian_by_elements(n, 0.0, g_x, g_y)
    obs = sigma_on_site(n, n // 2, axis)
    times = np.linspace(0.0, t_max, n_times)
    sub = int(round((times[1] - times[0]) / step))
    dt = (times[1] - times[0]) / sub
    rhs = lambda p: -1j * (h @ p)
    out = []
    for k in range(n_times):
        if k:
            for _ in range(sub):
                k1 = rhs(psi)
                k2 = rhs(psi + 0.5 * dt * k1)
                k3 = rhs(psi + 0.5 * dt * k2)
                k4 = rhs(psi + dt * k3)
                psi = psi + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out.append(0.5 * (np.vdot(psi, obs @ psi).real + 1))
    return times, np.array(out)


def liouvillian(h, jumps, gamma):
    """Column-stacking superoperator: vec(A rho B) = (B^T kron A) vec(rho)."""
    d = h.shape[0]
    eye = np.eye(d)
    lv = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for L in jumps:
        ld = L.conj().T
        lv += gamma * (np.kron(L.conj(), L) - 0.5 * np.kron(eye, ld @ L) - 0.5 * np.kron((ld @ L).T, eye))
    return lv


def lindblad_curve_expm(n, gamma, g_x=0.0, axis="x", t_max=5.0, n_times=101):
    psi, _ = ground_state_oracle(n)
    h = hamiltonian_by_elements(n, 0.0, g_x)
    jumps = [sigma_on_site(n, k, "-") for k in range(1, n + 1)]
    lv = liouvillian(h, jumps, gamma)
    times = np.linspace(0.0, t_max, n_times)
    prop = expm(lv * (times[1] - times[0]))
    rho = np.outer(psi, psi.conj()).reshape(-1, order="F")
    obs = sigma_on_site(n, n // 2, axis)
    out = []
    for k in range(n_times):
        if k:
            rho = prop @ rho
        r = rho.reshape(2**n, 2**n, order="F")
        out.append(0.5 * (np.trace(obs @ r).real + 1))
    return times, np.array(out)
