"""Frequency-indexed n-port scattering networks and their linear algebra.

All values in this module are immutable after construction and every
operation is a pure function, so callers may evaluate independent networks
or frequency blocks in parallel.

T-parameter convention (the single definition all solver math refers to):
with port waves a1,b1 (port 1) and a2,b2 (port 2),

    [a1]       [b2]            1   [ 1    -S22 ]
    [  ] = T * [  ],    T = ------ [            ],   dS = S11*S22 - S12*S21
    [b1]       [a2]          S21   [ S11   -dS  ]

Under this convention an ideal thru maps to the identity matrix, a matched
line with S21 = exp(-j*theta) maps to diag(exp(j*theta), exp(-j*theta)),
and cascading two-ports left-to-right is the ordinary matrix product
T_total = T_a @ T_b.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatch, SingularT, ZeroTransmission

# Documented default tolerances for round-trip/algebra identities.
# Tests may override locally; library code never loosens them.
TOL_ROUNDTRIP = 1e-10
TOL_EXACT = 1e-12


def _frozen_array(values, dtype):
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    """Strictly increasing sweep of frequency points in Hz.

    A leading DC point (0 Hz) is allowed; every other point must be > 0.
    """

    points: np.ndarray

    def __post_init__(self):
        pts = _frozen_array(self.points, float)
        if pts.ndim != 1 or pts.size == 0:
            raise ValueError("frequency grid must be a non-empty 1-D array")
        if not np.all(np.isfinite(pts)):
            raise ValueError("frequency grid contains non-finite values")
        if pts[0] < 0.0:
            raise ValueError("frequencies must be >= 0 (DC) ")
        if pts.size > 1 and not np.all(np.diff(pts) > 0.0):
            raise ValueError("frequencies must be strictly increasing")
        object.__setattr__(self, "points", pts)

    @classmethod
    def linspace(cls, start_hz, stop_hz, n_points):
        return cls(np.linspace(start_hz, stop_hz, int(n_points)))

    @property
    def n(self):
        return self.points.size

    def __eq__(self, other):
        if not isinstance(other, FrequencyGrid):
            return NotImplemented
        return np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash(self.points.tobytes())

    def __repr__(self):
        p = self.points
        return (f"FrequencyGrid({p.size} pts, "
                f"{p[0] / 1e9:.6g}..{p[-1] / 1e9:.6g} GHz)")


def same_grid(a, b):
    """Grids are interchangeable only when bitwise equal; no interpolation."""
    return a.grid == b.grid


def _require_same_grid(a, b, what):
    if not same_grid(a, b):
        raise GridMismatch(f"{what}: frequency grids differ "
                           f"({a.grid!r} vs {b.grid!r})")


@dataclass(frozen=True, eq=False)
class Network:
    """n-port scattering matrices over a frequency grid.

    ``s`` has shape (n_freq, n_ports, n_ports), linear complex values (not
    dB). ``z_ref`` is the single real reference impedance in ohms.
    """

    grid: FrequencyGrid
    s: np.ndarray
    z_ref: float = 50.0

    def __post_init__(self):
        s = _frozen_array(self.s, complex)
        if s.ndim != 3 or s.shape[1] != s.shape[2]:
            raise ValueError(f"s must have shape (n_freq, n, n), got {s.shape}")
        if s.shape[0] != self.grid.n:
            raise ValueError(f"s has {s.shape[0]} frequency points, "
                             f"grid has {self.grid.n}")
        if not np.all(np.isfinite(s)):
            raise ValueError("scattering matrix contains NaN/Inf entries")
        zr = float(self.z_ref)
        if not (zr > 0.0 and np.isfinite(zr)):
            raise ValueError(f"z_ref must be a positive real, got {self.z_ref}")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "z_ref", zr)

    @property
    def n_ports(self):
        return self.s.shape[1]

    @classmethod
    def one_port(cls, grid, gamma, z_ref=50.0):
        """Build a 1-port network from per-frequency reflection values."""
        g = np.asarray(gamma, dtype=complex).reshape(-1, 1, 1)
        return cls(grid, g, z_ref)

    @classmethod
    def two_port(cls, grid, s11, s12, s21, s22, z_ref=50.0):
        n = grid.n
        s = np.empty((n, 2, 2), dtype=complex)
        s[:, 0, 0] = s11
        s[:, 0, 1] = s12
        s[:, 1, 0] = s21
        s[:, 1, 1] = s22
        return cls(grid, s, z_ref)

    @property
    def reflection(self):
        """S11 as a 1-D array (the whole story for 1-ports)."""
        return self.s[:, 0, 0]

    def flipped(self):
        """Port-reversed network (port 1 <-> port n); 2-port fixture flips."""
        return Network(self.grid, self.s[:, ::-1, ::-1], self.z_ref)

    def __repr__(self):
        return (f"Network({self.n_ports}-port, {self.grid.n} pts, "
                f"z_ref={self.z_ref:g})")


@dataclass(frozen=True, eq=False)
class TwoPortT:
    """2x2 transfer (cascade) matrices under the convention in the module
    docstring. Convertible back to S-parameters whenever T11 != 0."""

    grid: FrequencyGrid
    t: np.ndarray

    def __post_init__(self):
        t = _frozen_array(self.t, complex)
        if t.ndim != 3 or t.shape[1:] != (2, 2):
            raise ValueError(f"t must have shape (n_freq, 2, 2), got {t.shape}")
        if t.shape[0] != self.grid.n:
            raise ValueError("t and grid lengths differ")
        if not np.all(np.isfinite(t)):
            raise ValueError("transfer matrix contains NaN/Inf entries")
        object.__setattr__(self, "t", t)


def ideal_thru(grid, z_ref=50.0):
    """Zero-length lossless connection: S = [[0,1],[1,0]] at every point."""
    s = np.zeros((grid.n, 2, 2), dtype=complex)
    s[:, 0, 1] = 1.0
    s[:, 1, 0] = 1.0
    return Network(grid, s, z_ref)


def s_to_t(net):
    """Convert a 2-port network to transfer matrices.

    Fails with ZeroTransmission if S21 vanishes at any point.
    """
    if net.n_ports != 2:
        raise ValueError("s_to_t requires a 2-port network")
    s = net.s
    s21 = s[:, 1, 0]
    zero = np.flatnonzero(s21 == 0.0)
    if zero.size:
        raise ZeroTransmission("S21 = 0, transfer parameters undefined",
                               frequency_hz=net.grid.points[zero[0]])
    det = s[:, 0, 0] * s[:, 1, 1] - s[:, 0, 1] * s[:, 1, 0]
    t = np.empty_like(s)
    t[:, 0, 0] = 1.0
    t[:, 0, 1] = -s[:, 1, 1]
    t[:, 1, 0] = s[:, 0, 0]
    t[:, 1, 1] = -det
    t /= s21[:, None, None]
    return TwoPortT(net.grid, t)


def t_to_s(tp, z_ref=50.0):
    """Inverse of s_to_t. Fails with SingularT if T11 vanishes."""
    t = tp.t
    t11 = t[:, 0, 0]
    zero = np.flatnonzero(t11 == 0.0)
    if zero.size:
        raise SingularT("T11 = 0, scattering parameters undefined",
                        frequency_hz=tp.grid.points[zero[0]])
    det = t[:, 0, 0] * t[:, 1, 1] - t[:, 0, 1] * t[:, 1, 0]
    s = np.empty_like(t)
    s[:, 0, 0] = t[:, 1, 0]
    s[:, 0, 1] = det
    s[:, 1, 0] = 1.0
    s[:, 1, 1] = -t[:, 0, 1]
    s /= t11[:, None, None]
    return Network(tp.grid, s, z_ref)


def cascade(a, b):
    """Join a's port 2 to b's port 1.

    Uses the direct star-junction formula, so zero-transmission inputs are
    fine; equals t_to_s(s_to_t(a) @ s_to_t(b)) wherever that is defined.
    """
    if a.n_ports != 2 or b.n_ports != 2:
        raise ValueError("cascade requires 2-port networks")
    _require_same_grid(a, b, "cascade")
    if a.z_ref != b.z_ref:
        raise ValueError(f"cascade: z_ref differs ({a.z_ref} vs {b.z_ref})")
    sa, sb = a.s, b.s
    d = 1.0 / (1.0 - sa[:, 1, 1] * sb[:, 0, 0])
    s = np.empty_like(sa)
    s[:, 0, 0] = sa[:, 0, 0] + sa[:, 0, 1] * sb[:, 0, 0] * sa[:, 1, 0] * d
    s[:, 0, 1] = sa[:, 0, 1] * sb[:, 0, 1] * d
    s[:, 1, 0] = sa[:, 1, 0] * sb[:, 1, 0] * d
    s[:, 1, 1] = sb[:, 1, 1] + sb[:, 1, 0] * sa[:, 1, 1] * sb[:, 0, 1] * d
    return Network(a.grid, s, a.z_ref)


def terminate(two_port, load):
    """Reflection looking into a 2-port whose port 2 is closed by a 1-port."""
    if two_port.n_ports != 2 or load.n_ports != 1:
        raise ValueError("terminate requires a 2-port and a 1-port")
    _require_same_grid(two_port, load, "terminate")
    s = two_port.s
    g = load.reflection
    gin = s[:, 0, 0] + s[:, 0, 1] * s[:, 1, 0] * g / (1.0 - s[:, 1, 1] * g)
    return Network.one_port(two_port.grid, gin, two_port.z_ref)


def reciprocity_error(net):
    """max over port pairs i<j of |S_ij - S_ji| at each frequency."""
    if net.n_ports < 2:
        raise ValueError("reciprocity is defined for n_ports >= 2")
    d = np.abs(net.s - np.transpose(net.s, (0, 2, 1)))
    return d.reshape(net.grid.n, -1).max(axis=1)


def passivity_margin(net):
    """1 - (largest singular value of S) per frequency; >= 0 means passive."""
    smax = np.linalg.svd(net.s, compute_uv=False)[:, 0]
    return 1.0 - smax
