"""Shared fixtures and independent oracles for the test suite.

The oracles here deliberately avoid the library's own code paths: the
cascade oracle solves the raw wave-variable equations, the Touchstone
reader is a from-scratch minimal parser, and the TRL oracle is a direct
per-frequency textbook eigendecomposition.
"""

import numpy as np
import pytest

from quadcal.network import FrequencyGrid, Network

C0 = 299792458.0


@pytest.fixture
def grid5():
    return FrequencyGrid.linspace(1e9, 170e9, 5)


@pytest.fixture
def grid41():
    return FrequencyGrid.linspace(1e9, 170e9, 41)


@pytest.fixture
def grid201():
    return FrequencyGrid.linspace(1e9, 170e9, 201)


@pytest.fixture
def pack():
    from quadcal.standards import load_builtin_pack
    return load_builtin_pack()


def rand_passive(rng, grid, n_ports, margin=0.1, reciprocal=False):
    """Random passive network, max singular value 1 - margin."""
    a = (rng.standard_normal((grid.n, n_ports, n_ports))
         + 1j * rng.standard_normal((grid.n, n_ports, n_ports)))
    if reciprocal:
        a = 0.5 * (a + np.transpose(a, (0, 2, 1)))
    smax = np.linalg.svd(a, compute_uv=False)[:, 0]
    a *= ((1.0 - margin) / smax)[:, None, None]
    return Network(grid, a)


def rand_terms(rng, grid):
    """Random one-port terms within the documented property-test bounds:
    |e00|, |e11| <= 0.3 and |tracking - 1| <= 0.5."""
    from quadcal.errormodel import OnePortTerms

    def disk(radius):
        r = radius * np.sqrt(rng.uniform(0, 1, grid.n))
        ph = rng.uniform(-np.pi, np.pi, grid.n)
        return r * np.exp(1j * ph)

    return OnePortTerms(grid, disk(0.3), disk(0.3), 1.0 + disk(0.5))


def rand_smooth_terms(rng, grid):
    """Smooth random terms (suitable for solver sweeps with continuity)."""
    from quadcal.errormodel import OnePortTerms
    x = np.linspace(0.0, 1.0, grid.n)

    def smooth(scale):
        c = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        p = np.polyval(c, x)
        return scale * p / np.max(np.abs(p))

    e00 = rng.uniform(0.05, 0.3) * smooth(1.0)
    e11 = rng.uniform(0.05, 0.3) * smooth(1.0)
    tau = rng.uniform(0, 3e-12)
    mag = np.exp(0.2 * np.real(smooth(1.0)) - 0.2)
    tracking = rng.uniform(0.8, 1.0) * mag * np.exp(
        1j * (rng.uniform(-np.pi, np.pi) - 2 * np.pi * grid.points * tau))
    return OnePortTerms(grid, e00, e11, tracking)


def rand_pair_model(rng, grid, ports=(1, 2), smooth=True):
    """Random two-port calibration model with a random smooth k."""
    from quadcal.errormodel import MultiPortCalModel
    make = rand_smooth_terms if smooth else rand_terms
    x = np.linspace(0.0, 1.0, grid.n)
    c = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    p = np.polyval(c, x)
    k = np.exp(0.2 * (p / np.max(np.abs(p))) + 1j * (
        rng.uniform(-np.pi, np.pi) - 2 * np.pi * grid.points * rng.uniform(0, 2e-12)))
    return MultiPortCalModel(grid, tuple(ports),
                             {ports[0]: make(rng, grid),
                              ports[1]: make(rng, grid)},
                             {tuple(ports): k})


def sfg_cascade(a, b):
    """Signal-flow-graph cascade oracle: solve the junction wave equations
    directly per frequency and excitation, independent of any T-matrix or
    closed-form cascade formula."""
    nf = a.grid.n
    s = np.empty((nf, 2, 2), dtype=complex)
    for i in range(nf):
        sa, sb = a.s[i], b.s[i]
        for exc in range(2):
            a1 = 1.0 if exc == 0 else 0.0
            a2 = 1.0 if exc == 1 else 0.0
            # unknowns: x = wave into a's port 2, y = wave into b's port 1
            # y = sa21*a1 + sa22*x ; x = sb11*y + sb12*a2
            m = np.array([[1.0, -sa[1, 1]], [-sb[0, 0], 1.0]], dtype=complex)
            rhs = np.array([sa[1, 0] * a1, sb[0, 1] * a2], dtype=complex)
            y, x = np.linalg.solve(m, rhs)
            s[i, 0, exc] = sa[0, 0] * a1 + sa[0, 1] * x
            s[i, 1, exc] = sb[1, 0] * y + sb[1, 1] * a2
    return Network(a.grid, s, a.z_ref)


def tiny_touchstone_reader(text, n_ports):
    """Independent minimal Touchstone v1 reader used to cross-check the
    real parser (2-port column order, formats, units)."""
    mult = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}
    unit, fmt, zr = 1e9, "ma", 50.0
    rows = []
    for raw in text.splitlines():
        line = raw.split("!")[0].strip()
        if not line:
            continue
        if line.startswith("#"):
            toks = line[1:].lower().split()
            for i, t in enumerate(toks):
                if t in mult:
                    unit = mult[t]
                elif t in ("ri", "ma", "db"):
                    fmt = t
                elif t == "r":
                    zr = float(toks[i + 1])
            continue
        rows.extend(float(t) for t in line.split())
    per = 1 + 2 * n_ports * n_ports
    rows = np.array(rows).reshape(-1, per)
    f = rows[:, 0] * unit
    pairs = rows[:, 1:].reshape(len(rows), -1, 2)
    if fmt == "ri":
        vals = pairs[..., 0] + 1j * pairs[..., 1]
    elif fmt == "ma":
        vals = pairs[..., 0] * np.exp(1j * np.pi / 180 * pairs[..., 1])
    else:
        vals = 10 ** (pairs[..., 0] / 20) * np.exp(1j * np.pi / 180 * pairs[..., 1])
    s = np.empty((len(rows), n_ports, n_ports), dtype=complex)
    if n_ports == 2:
        s[:, 0, 0], s[:, 1, 0], s[:, 0, 1], s[:, 1, 1] = vals.T
    else:
        s[:] = vals.reshape(len(rows), n_ports, n_ports)
    return f, s, zr


def classical_trl(thru, line, length, reflect_a, reflect_b, hint):
    """Textbook single-line TRL oracle, solved per frequency with direct
    eigendecompositions (no projector accumulation, no weighting)."""
    from quadcal.network import s_to_t

    m0 = s_to_t(thru).t
    m1 = s_to_t(line).t
    nf = thru.grid.n
    e00a = np.empty(nf, complex)
    e11a = np.empty(nf, complex)
    trka = np.empty(nf, complex)
    e00b = np.empty(nf, complex)
    e11b = np.empty(nf, complex)
    trkb = np.empty(nf, complex)
    gamma = np.empty(nf, complex)
    ga = reflect_a.reflection
    gb = reflect_b.reflection
    hint_val = -1.0 if hint == "short" else 1.0
    prev_gamma_r = hint_val
    for i in range(nf):
        p = m1[i] @ np.linalg.inv(m0[i])
        q = np.linalg.inv(m0[i]) @ m1[i]
        vals, vecs = np.linalg.eig(p)
        # lambda+ = exp(+gamma*length): positive angle at low phase
        order = np.argsort(-np.angle(vals))
        if abs(vals[order[0]]) + abs(vals[order[1]]) > 2:  # lossy tiebreak
            order = np.argsort(-np.abs(vals))
        lam_p, lam_m = vals[order[0]], vals[order[1]]
        v1, v2 = vecs[:, order[0]], vecs[:, order[1]]
        valsq, vecsq = np.linalg.eig(q.T)
        match = np.argmin(np.abs(valsq - lam_p))
        r1 = vecsq[:, match]
        r2 = vecsq[:, 1 - match]
        gamma[i] = np.log(lam_p) / length

        basis = np.stack([np.outer(v1, r1).ravel(),
                          np.outer(v2, r2).ravel()], axis=1)
        pq, *_ = np.linalg.lstsq(basis, m0[i].ravel(), rcond=None)
        p_prod, q_prod = pq
        u_a = (ga[i] * v1[0] - v1[1]) / (v2[1] - ga[i] * v2[0])
        u_b = (gb[i] * r1[0] + r1[1]) / (r2[1] + gb[i] * r2[0])
        g_r = np.sqrt(u_a * u_b * p_prod / q_prod)
        if abs(g_r - prev_gamma_r) > abs(-g_r - prev_gamma_r):
            g_r = -g_r
        prev_gamma_r = g_r
        rho = u_a / g_r
        tau = u_b / g_r
        ta = np.column_stack([v1, rho * v2])
        tb = p_prod * np.vstack([r1, tau * r2])
        e00a[i] = ta[1, 0] / ta[0, 0]
        e11a[i] = -ta[0, 1] / ta[0, 0]
        trka[i] = np.linalg.det(ta) / ta[0, 0] ** 2
        e00b[i] = -tb[0, 1] / tb[0, 0]
        e11b[i] = tb[1, 0] / tb[0, 0]
        trkb[i] = np.linalg.det(tb) / tb[0, 0] ** 2
    return {"gamma": gamma, "e00_a": e00a, "e11_a": e11a, "trk_a": trka,
            "e00_b": e00b, "e11_b": e11b, "trk_b": trkb}
