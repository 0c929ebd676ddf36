"""Eight-term error model and its multiport generalization.

Each VNA port i carries a fictitious 2-port error box between the ideal
reference and the probe tip. Its measurable content is the triple
(e00, e11, e01*e10): directivity, source match, and the reflection-tracking
product. The per-port split of e01 vs e10 is not observable one port at a
time; this module fixes the reciprocal split e01 = e10 = sqrt(tracking)
(principal branch, phase continuity enforced across the sweep) and carries
the remaining inter-port freedom in per-pair transmission-tracking ratios
k(i, j) on a spanning tree of ports.

Forward model, per frequency, with diagonal E00, E11 and split diagonals
E01, E10 (e01_i = s_i * c_i, e10_i = s_i / c_i, s_i = sqrt(tracking_i),
c from the k potentials):

    M = E00 + E01 . S . (I - E11 . S)^-1 . E10

which for a 2-port with |S21| > 0 equals the T-matrix cascade
T_A . T_dut . T_B of the port error boxes.

Raw data is modeled as already switch-term corrected (the pure eight-term
idealization); real-hardware users must pre-correct switch terms upstream.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (DisconnectedTree, GridMismatch, InconsistentK, PoleHit,
                     SingularCorrection, SingularEmbedding)
from .network import Network, _require_same_grid

POLE_TOL = 1e-12
K_CONSISTENCY_RTOL = 1e-6


def reciprocal_split(tracking):
    """Square root of a tracking product with sweep-continuous phase.

    Principal branch at the first point, then np.unwrap keeps the branch
    continuous so serialized splits are deterministic.
    """
    tracking = np.asarray(tracking, dtype=complex)
    mag = np.sqrt(np.abs(tracking))
    ph = 0.5 * np.unwrap(np.angle(tracking))
    return mag * np.exp(1j * ph)


@dataclass(frozen=True, eq=False)
class OnePortTerms:
    """Per-frequency error triple (e00, e11, tracking = e01*e10)."""

    grid: object
    e00: np.ndarray
    e11: np.ndarray
    tracking: np.ndarray

    def __post_init__(self):
        for name in ("e00", "e11", "tracking"):
            arr = np.asarray(getattr(self, name), dtype=complex)
            if arr.shape != (self.grid.n,):
                raise ValueError(f"{name} must have shape ({self.grid.n},)")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains NaN/Inf")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(self.tracking == 0.0):
            raise ValueError("tracking must be nonzero at every frequency "
                             "(singular calibration)")

    @classmethod
    def identity(cls, grid):
        z = np.zeros(grid.n, dtype=complex)
        return cls(grid, z, z.copy(), np.ones(grid.n, dtype=complex))


@dataclass(frozen=True, eq=False)
class PortErrorBox:
    """One-port terms viewed as a reciprocal 2-port: S11 = e00, S22 = e11,
    S21 = S12 = sqrt(tracking)."""

    terms: OnePortTerms

    def as_network(self, z_ref=50.0):
        t = self.terms
        s = reciprocal_split(t.tracking)
        net = Network.two_port(t.grid, t.e00, s, s, t.e11, z_ref)
        return net

    @classmethod
    def from_network(cls, net):
        """Re-extract terms from a 2-port error-box network."""
        if net.n_ports != 2:
            raise ValueError("error box must be a 2-port")
        s = net.s
        return cls(OnePortTerms(net.grid, s[:, 0, 0], s[:, 1, 1],
                                s[:, 0, 1] * s[:, 1, 0]))


def embed_oneport(terms, gamma):
    """Measured reflection Gm = e00 + tracking*G / (1 - e11*G)."""
    _require_same_grid_terms(terms, gamma, "embed_oneport")
    g = gamma.reflection
    den = 1.0 - terms.e11 * g
    hit = np.flatnonzero(np.abs(den) < POLE_TOL)
    if hit.size:
        raise PoleHit("reflection at the error-box pole 1/e11",
                      frequency_hz=terms.grid.points[hit[0]])
    gm = terms.e00 + terms.tracking * g / den
    return Network.one_port(gamma.grid, gm, gamma.z_ref)


def correct_oneport(terms, gamma_m):
    """Exact inverse of embed_oneport:
    G = (Gm - e00) / (tracking + e11*(Gm - e00))."""
    _require_same_grid_terms(terms, gamma_m, "correct_oneport")
    num = gamma_m.reflection - terms.e00
    den = terms.tracking + terms.e11 * num
    bad = np.flatnonzero(np.abs(den) < POLE_TOL)
    if bad.size:
        raise SingularCorrection("one-port correction denominator vanishes",
                                 frequency_hz=terms.grid.points[bad[0]])
    return Network.one_port(gamma_m.grid, num / den, gamma_m.z_ref)


def _require_same_grid_terms(terms, net, what):
    if terms.grid != net.grid:
        raise GridMismatch(f"{what}: terms and network grids differ")


@dataclass(frozen=True, eq=False)
class MultiPortCalModel:
    """Per-port error boxes plus transmission-tracking ratios k(i, j) over
    a connected graph of port pairs.

    ``ports`` are the external port labels in DUT matrix order. k pairs may
    cover any connected subset; missing pairs are derived by composition
    along a deterministic spanning tree (BFS from the smallest label).
    Redundant pairs must agree with the tree to K_CONSISTENCY_RTOL.
    """

    grid: object
    ports: tuple
    boxes: dict      # port label -> OnePortTerms
    k: dict          # (i, j) -> complex array, ratio c_i / c_j

    def __post_init__(self):
        ports = tuple(self.ports)
        object.__setattr__(self, "ports", ports)
        if len(set(ports)) != len(ports):
            raise ValueError("duplicate port labels")
        if set(self.boxes) != set(ports):
            raise ValueError("boxes must cover exactly the model ports")
        for p, t in self.boxes.items():
            if t.grid != self.grid:
                raise GridMismatch(f"port {p} terms on a different grid")
        k = {}
        for (i, j), arr in self.k.items():
            if i not in ports or j not in ports or i == j:
                raise ValueError(f"k pair ({i}, {j}) not between distinct ports")
            a = np.asarray(arr, dtype=complex)
            if a.shape != (self.grid.n,):
                raise ValueError(f"k({i},{j}) must have shape ({self.grid.n},)")
            a.setflags(write=False)
            k[(i, j)] = a
        object.__setattr__(self, "k", k)
        if len(ports) > 1:
            object.__setattr__(self, "_potentials", self._solve_potentials())
        else:
            object.__setattr__(self, "_potentials",
                               {ports[0]: np.ones(self.grid.n, complex)})

    @property
    def n_ports(self):
        return len(self.ports)

    def _edges(self):
        edges = {}
        for (i, j), arr in self.k.items():
            edges.setdefault(i, []).append((j, arr, False))
            edges.setdefault(j, []).append((i, arr, True))  # inverted sense
        return edges

    def _solve_potentials(self):
        """Split factors c_i from the k graph; BFS tree from smallest label.

        Tree values win; redundant edges are checked for composition
        consistency and rejected beyond K_CONSISTENCY_RTOL.
        """
        edges = self._edges()
        root = min(self.ports)
        c = {root: np.ones(self.grid.n, dtype=complex)}
        frontier = [root]
        while frontier:
            nxt = []
            for i in sorted(frontier):
                for j, arr, inverted in sorted(edges.get(i, ()), key=lambda e: e[0]):
                    # k(i,j) = c_i / c_j
                    cj = c[i] / arr if not inverted else c[i] * arr
                    if j not in c:
                        c[j] = cj
                        nxt.append(j)
                    else:
                        rel = np.max(np.abs(cj - c[j]) / np.abs(c[j]))
                        if rel > K_CONSISTENCY_RTOL:
                            raise InconsistentK(
                                f"redundant pair through ports ({i}, {j}) "
                                f"disagrees with the spanning tree "
                                f"(relative error {rel:.3g})")
            frontier = nxt
        missing = set(self.ports) - set(c)
        if missing:
            raise DisconnectedTree(
                f"k pairs do not reach ports {sorted(missing)}")
        return c

    def split_factors(self):
        """Per-port split potentials c_i as an (n_freq, n_ports) array."""
        return np.stack([self._potentials[p] for p in self.ports], axis=1)

    def k_for(self, i, j):
        """Transmission-tracking ratio for any port pair (derived if needed)."""
        return self._potentials[i] / self._potentials[j]

    def k_consistency_residual(self):
        """Worst relative disagreement of supplied k pairs vs tree values."""
        worst = 0.0
        for (i, j), arr in self.k.items():
            tree = self.k_for(i, j)
            worst = max(worst, float(np.max(np.abs(arr - tree) / np.abs(tree))))
        return worst

    def port_terms(self, port):
        return self.boxes[port]

    @classmethod
    def identity(cls, grid, ports):
        ports = tuple(ports)
        boxes = {p: OnePortTerms.identity(grid) for p in ports}
        ones = np.ones(grid.n, dtype=complex)
        k = {(ports[i], ports[i + 1]): ones.copy()
             for i in range(len(ports) - 1)}
        return cls(grid, ports, boxes, k)

    def _diagonals(self):
        e00 = np.stack([self.boxes[p].e00 for p in self.ports], axis=1)
        e11 = np.stack([self.boxes[p].e11 for p in self.ports], axis=1)
        split = np.stack([reciprocal_split(self.boxes[p].tracking)
                          for p in self.ports], axis=1)
        c = self.split_factors()
        return e00, e11, split * c, split / c  # e00, e11, e01, e10


def embed_multiport(model, dut):
    """Forward measurement model M = E00 + E01 S (I - E11 S)^-1 E10."""
    if dut.n_ports != model.n_ports:
        raise ValueError(f"DUT has {dut.n_ports} ports, model has "
                         f"{model.n_ports}")
    if dut.grid != model.grid:
        raise GridMismatch("embed_multiport: grids differ")
    s = dut.s
    e00, e11, e01, e10 = model._diagonals()
    ident = np.eye(model.n_ports)[None, :, :]
    lhs = ident - e11[:, :, None] * s          # I - E11 S
    # A = S (I - E11 S)^-1, via the transposed solve
    try:
        a = np.transpose(np.linalg.solve(np.transpose(lhs, (0, 2, 1)),
                                         np.transpose(s, (0, 2, 1))),
                         (0, 2, 1))
    except np.linalg.LinAlgError:
        idx = _first_singular(lhs)
        raise SingularEmbedding("I - E11*S is singular",
                                frequency_hz=model.grid.points[idx]) from None
    m = e01[:, :, None] * a * e10[:, None, :]
    m[:, range(model.n_ports), range(model.n_ports)] += e00
    return Network(dut.grid, m, dut.z_ref)


def correct_multiport(model, measured):
    """Exact inverse of embed_multiport.

    With W = E01^-1 (M - E00) E10^-1, the DUT is S = (I + W E11)^-1 W.
    """
    if measured.n_ports != model.n_ports:
        raise ValueError(f"measurement has {measured.n_ports} ports, model "
                         f"has {model.n_ports}")
    if measured.grid != model.grid:
        raise GridMismatch("correct_multiport: grids differ")
    m = measured.s.copy()
    e00, e11, e01, e10 = model._diagonals()
    m[:, range(model.n_ports), range(model.n_ports)] -= e00
    w = m / e01[:, :, None] / e10[:, None, :]
    lhs = np.eye(model.n_ports)[None, :, :] + w * e11[:, None, :]  # I + W E11
    try:
        s = np.linalg.solve(lhs, w)
    except np.linalg.LinAlgError:
        idx = _first_singular(lhs)
        cond = np.linalg.cond(lhs[idx])
        raise SingularCorrection(
            f"correction system singular (condition {cond:.3g})",
            frequency_hz=model.grid.points[idx]) from None
    return Network(measured.grid, s, measured.z_ref)


def _first_singular(batch):
    for i, m in enumerate(batch):
        try:
            np.linalg.solve(m, np.eye(m.shape[0]))
        except np.linalg.LinAlgError:
            return i
    return 0


def compose_fixture(model, fixture):
    """Fold a 2-port fixture (port 1 at the probe side) into every port's
    error box, moving the model's reference plane to the fixture's far end.

    The composite per-port box is the cascade of the split error box with
    the fixture; the split potentials are re-derived so k stays consistent
    with the reciprocal-split convention.
    """
    from .network import cascade
    if fixture.grid != model.grid:
        raise GridMismatch("compose_fixture: grids differ")
    e00, e11, e01, e10 = model._diagonals()
    boxes, pots = {}, {}
    for idx, p in enumerate(model.ports):
        box = Network.two_port(model.grid, e00[:, idx], e01[:, idx],
                               e10[:, idx], e11[:, idx], fixture.z_ref)
        comp = cascade(box, fixture)
        s = comp.s
        tracking = s[:, 0, 1] * s[:, 1, 0]
        boxes[p] = OnePortTerms(model.grid, s[:, 0, 0], s[:, 1, 1], tracking)
        pots[p] = reciprocal_split(tracking) / s[:, 1, 0]   # c = split / e10
    k = {pair: pots[pair[0]] / pots[pair[1]] for pair in model.k}
    return MultiPortCalModel(model.grid, model.ports, boxes, k)


# --- cal-model file ----------------------------------------------------------

_CAL_MAGIC = "quadcal cal-model v1"


def write_cal_model(model, path=None):
    """Serialize a model to plain text (>= 17 significant digits, so the
    file round-trips bit-stable). Returns the text; writes it when a path
    is given."""
    lines = [f"! {_CAL_MAGIC}",
             "! columns: freq_hz then per port e00_re e00_im e11_re e11_im "
             "trk_re trk_im",
             "ports " + " ".join(str(p) for p in model.ports),
             "terms"]
    cols = []
    for p in model.ports:
        t = model.boxes[p]
        cols += [t.e00.real, t.e00.imag, t.e11.real, t.e11.imag,
                 t.tracking.real, t.tracking.imag]
    for i, f in enumerate(model.grid.points):
        row = [f"{f:.17g}"] + [f"{col[i]:.17g}" for col in cols]
        lines.append(" ".join(row))
    for (a, b) in sorted(model.k):
        arr = model.k[(a, b)]
        lines.append(f"kpair {a} {b}")
        for i, f in enumerate(model.grid.points):
            lines.append(f"{f:.17g} {arr[i].real:.17g} {arr[i].imag:.17g}")
    lines.append("end")
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    return text


def read_cal_model(path_or_text):
    """Parse a cal-model file (path or literal text)."""
    from .network import FrequencyGrid
    text = path_or_text
    if "\n" not in str(path_or_text):
        with open(path_or_text) as fh:
            text = fh.read()
    ports = None
    term_rows = []
    kpairs = {}
    current_k = None
    mode = None
    for line_no, raw in enumerate(str(text).splitlines(), start=1):
        line = raw.split("!", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if tokens[0] == "ports":
            ports = tuple(int(t) for t in tokens[1:])
        elif tokens[0] == "terms":
            mode = "terms"
        elif tokens[0] == "kpair":
            current_k = (int(tokens[1]), int(tokens[2]))
            kpairs[current_k] = []
            mode = "k"
        elif tokens[0] == "end":
            break
        elif mode == "terms":
            term_rows.append([float(t) for t in tokens])
        elif mode == "k":
            kpairs[current_k].append([float(t) for t in tokens])
        else:
            raise ValueError(f"cal-model line {line_no}: unexpected {line!r}")
    if ports is None or not term_rows:
        raise ValueError("cal-model file missing ports/terms")
    rows = np.array(term_rows)
    grid = FrequencyGrid(rows[:, 0])
    boxes = {}
    for idx, p in enumerate(ports):
        base = 1 + 6 * idx
        boxes[p] = OnePortTerms(
            grid,
            rows[:, base] + 1j * rows[:, base + 1],
            rows[:, base + 2] + 1j * rows[:, base + 3],
            rows[:, base + 4] + 1j * rows[:, base + 5])
    k = {}
    for pair, krows in kpairs.items():
        ka = np.array(krows)
        if not np.array_equal(ka[:, 0], grid.points):
            raise ValueError(f"kpair {pair} frequency column mismatch")
        k[pair] = ka[:, 1] + 1j * ka[:, 2]
    return MultiPortCalModel(grid, ports, boxes, k)
