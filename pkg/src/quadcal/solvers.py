"""Calibration solvers: one-port SOL, SOLR with reciprocal-thru sign
resolution, multiline TRL, standard characterization, and multiport model
assembly.

Conventions shared by everything here:

* one-port standards always travel as (short, open, load) triples;
* all transfer-matrix math uses the single convention defined in
  quadcal.network (ideal thru = identity, cascade = matrix product);
* per-frequency linear algebra is vectorized and independent across the
  sweep, but SOLR sign resolution and mTRL eigenvalue-branch tracking are
  sequential scans from the lowest frequency upward and must stay ordered.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errormodel import (MultiPortCalModel, OnePortTerms, correct_multiport,
                         correct_oneport, reciprocal_split)
from .errors import (AllPairsDegenerate, BranchTrackingLost,
                     DegenerateStandards, DisconnectedTree, GridMismatch,
                     InconsistentSharedPort, LowTransmission, SignAmbiguous,
                     SingularSystem)
from .network import Network, reciprocity_error, s_to_t
from .standards import fit_reflect_poly

STANDARD_DISTINCT_TOL = 1e-6    # min pairwise |dGamma| between definitions
TRANSMISSION_FLOOR = 1e-6       # min |S21|,|S12| of a usable reciprocal thru
SIGN_AMBIGUITY_TOL = 0.5        # rad; min score separation between +/- k
SIGN_FLAG_TOL = np.pi / 2       # rad; mean phase mismatch that flags a cal
DEGENERATE_TOL = 0.1            # rad; |beta*dl - n*pi| below this is flagged
SHARED_PORT_RTOL = 1e-6


def _check_common_grid(nets, what):
    grid = nets[0].grid
    for net in nets[1:]:
        if net.grid != grid:
            raise GridMismatch(f"{what}: inputs on different grids")
    return grid


def solve_one_port_sol(measured, definitions):
    """Solve the three one-port error terms from S/O/L measurements.

    ``measured`` and ``definitions`` are (short, open, load) triples of
    1-port networks on a common grid. Writing delta = e00*e11 - tracking,
    the measurement equation linearizes to

        Gm = e00 + (G*Gm)*e11 - G*delta

    giving an exactly determined 3x3 system per frequency; tracking is
    recovered as e00*e11 - delta.
    """
    if len(measured) != 3 or len(definitions) != 3:
        raise ValueError("expected (short, open, load) triples")
    grid = _check_common_grid([*measured, *definitions], "solve_one_port_sol")
    g = np.stack([d.reflection for d in definitions], axis=1)   # (nf, 3)
    gm = np.stack([m.reflection for m in measured], axis=1)

    for a in range(3):
        for b in range(a + 1, 3):
            sep = np.abs(g[:, a] - g[:, b])
            bad = np.flatnonzero(sep <= STANDARD_DISTINCT_TOL)
            if bad.size:
                raise DegenerateStandards(
                    f"defined standards {a} and {b} separated by only "
                    f"{sep[bad[0]]:.3g}", frequency_hz=grid.points[bad[0]])

    a_mat = np.stack([np.ones_like(g), g * gm, -g], axis=2)     # (nf, 3, 3)
    try:
        x = np.linalg.solve(a_mat, gm[:, :, None])[:, :, 0]
    except np.linalg.LinAlgError:
        raise SingularSystem("SOL 3x3 system singular") from None
    e00, e11, delta = x[:, 0], x[:, 1], x[:, 2]
    return OnePortTerms(grid, e00, e11, e00 * e11 - delta)


def thru_delay_mismatch(net, delay_s):
    """Mean |wrapped phase error| (rad) of S21 against exp(-j*2*pi*f*delay).

    Small for a thru whose electrical length matches the estimate; close to
    pi when a wrong square-root sign has flipped the transmission phase.
    """
    f = net.grid.points
    rotated = net.s[:, 1, 0] * np.exp(2j * np.pi * f * delay_s)
    return float(np.mean(np.abs(np.angle(rotated))))


@dataclass(frozen=True)
class SolrInput:
    """Measurements and definitions for one SOLR port pair.

    SOL triples are (short, open, load); definitions are 1-port networks
    (evaluate models, or pass characterized/tabulated data). The thru is
    the unknown-but-reciprocal 2-port in port order ``ports``;
    ``delay_estimate`` is a coarse electrical delay used only to resolve
    the transmission-tracking sign.
    """

    ports: tuple
    sol_a: tuple
    defs_a: tuple
    sol_b: tuple
    defs_b: tuple
    thru: Network
    delay_estimate: float

    def __post_init__(self):
        if len(self.ports) != 2 or self.ports[0] == self.ports[1]:
            raise ValueError("ports must be two distinct labels")
        if self.thru.n_ports != 2:
            raise ValueError("thru must be a 2-port network")
        _check_common_grid([*self.sol_a, *self.defs_a, *self.sol_b,
                            *self.defs_b, self.thru], "SolrInput")


@dataclass(frozen=True)
class SolrResult:
    """SOLR solve output: the pair calibration model plus the sign-
    resolution evidence (scores are thru_delay_mismatch for each k sign)."""

    model: MultiPortCalModel
    corrected_thru: Network
    sign: int
    score_chosen: float
    score_rejected: float
    thru_reciprocity: float


def solve_solr(inp, ambiguity_tol=SIGN_AMBIGUITY_TOL):
    """Solve the eight-term model of one port pair from SOL + reciprocal thru.

    Per-port terms come from solve_one_port_sol. Correcting the thru with a
    provisional unit-k model leaves S12/S21 scaled by k^2 and k^-2, so
    k^2 = S12_prov/S21_prov at every frequency. The square root is taken
    with phase continuity from the lowest frequency upward, and the global
    sign is the one whose corrected thru phase best matches the coarse
    delay estimate; SignAmbiguous reports both candidates when the scores
    are too close to call.
    """
    terms_a = solve_one_port_sol(inp.sol_a, inp.defs_a)
    terms_b = solve_one_port_sol(inp.sol_b, inp.defs_b)
    grid = inp.thru.grid
    f = grid.points

    s21 = inp.thru.s[:, 1, 0]
    s12 = inp.thru.s[:, 0, 1]
    weak = np.flatnonzero(np.minimum(np.abs(s21), np.abs(s12))
                          <= TRANSMISSION_FLOOR)
    if weak.size:
        raise LowTransmission(
            "reciprocal thru transmission below "
            f"{TRANSMISSION_FLOOR:g} (|S21| or |S12|)",
            frequency_hz=f[weak[0]])

    a, b = inp.ports
    ones = np.ones(grid.n, dtype=complex)
    provisional = MultiPortCalModel(grid, (a, b),
                                    {a: terms_a, b: terms_b},
                                    {(a, b): ones})
    s_x = correct_multiport(provisional, inp.thru)
    k2 = s_x.s[:, 0, 1] / s_x.s[:, 1, 0]
    k_smooth = reciprocal_split(k2)

    scores = {}
    for sign in (+1, -1):
        s21_corr = s_x.s[:, 1, 0] * (sign * k_smooth)
        rotated = s21_corr * np.exp(2j * np.pi * f * inp.delay_estimate)
        scores[sign] = float(np.mean(np.abs(np.angle(rotated))))
    chosen = +1 if scores[+1] <= scores[-1] else -1
    if abs(scores[+1] - scores[-1]) < ambiguity_tol:
        raise SignAmbiguous(
            "thru sign unresolved: phase-mismatch scores "
            f"+k: {scores[+1]:.3f} rad, -k: {scores[-1]:.3f} rad; "
            "refine delay_estimate or use a denser grid")

    model = MultiPortCalModel(grid, (a, b), {a: terms_a, b: terms_b},
                              {(a, b): chosen * k_smooth})
    corrected = correct_multiport(model, inp.thru)
    return SolrResult(model=model, corrected_thru=corrected, sign=chosen,
                      score_chosen=scores[chosen],
                      score_rejected=scores[-chosen],
                      thru_reciprocity=float(reciprocity_error(corrected).max()))


# --- multiline TRL -----------------------------------------------------------

@dataclass(frozen=True)
class MtrlInput:
    """Thru + line + reflect measurements for a multiline TRL solve.

    ``lines`` is a sequence of (excess_length_m, Network) where lengths are
    in excess of the thru (pass l_i - l_thru for a non-zero-length thru;
    the reference plane always lands at the thru center). The reflect is
    the same unknown symmetric standard measured at each port;
    ``reflect_hint`` ('short' or 'open') picks its low-frequency sign.
    """

    thru: Network
    lines: tuple
    reflect_a: Network
    reflect_b: Network
    reflect_hint: str = "short"
    ports: tuple = (1, 2)

    def __post_init__(self):
        object.__setattr__(self, "lines", tuple(self.lines))
        if not self.lines:
            raise ValueError("need at least one line beyond the thru")
        lengths = [0.0] + [float(l) for l, _ in self.lines]
        if len(set(lengths)) != len(lengths):
            raise ValueError("line lengths must be distinct (thru is 0)")
        if self.reflect_hint not in ("short", "open"):
            raise ValueError("reflect_hint must be 'short' or 'open'")
        _check_common_grid([self.thru, *(n for _, n in self.lines),
                            self.reflect_a, self.reflect_b], "MtrlInput")


@dataclass(frozen=True, eq=False)
class GammaEstimate:
    """Propagation-constant estimate with per-frequency fit residual and
    degeneracy flags (True where every line pair sits near a half-
    wavelength multiple)."""

    grid: object
    gamma: np.ndarray
    residual: np.ndarray
    degenerate: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=complex)
        if np.any(g.real < -1e-6):
            i = int(np.argmin(g.real))
            raise ValueError(f"negative line attenuation {g.real[i]:.3g} Np/m "
                             f"at {self.grid.points[i] / 1e9:.4g} GHz")
        object.__setattr__(self, "gamma", g)


@dataclass(frozen=True)
class MtrlResult:
    """Multiline TRL output: gamma estimate, the pair calibration model,
    the recovered reflect, and the reference-plane statement."""

    gamma: GammaEstimate
    model: MultiPortCalModel
    reflect_gamma: np.ndarray
    ref_plane: str = "center of thru"


def _eig2(p):
    """Closed-form eigenvalues of a batch of 2x2 matrices."""
    tr = p[..., 0, 0] + p[..., 1, 1]
    det = p[..., 0, 0] * p[..., 1, 1] - p[..., 0, 1] * p[..., 1, 0]
    disc = np.sqrt(tr * tr / 4.0 - det)
    return tr / 2.0 + disc, tr / 2.0 - disc


def _assign_branches(lam1, lam2, gamma_est, dl):
    """Per-pair choice of which eigenvalue is exp(+gamma*dl)."""
    expected = np.exp(gamma_est * dl)
    d1 = np.abs(np.log(lam1 / expected))
    d2 = np.abs(np.log(lam2 / expected))
    swap = d2 < d1
    lam_p = np.where(swap, lam2, lam1)
    lam_m = np.where(swap, lam1, lam2)
    return lam_p, lam_m


def _unwrapped_gamma(lam_p, lam_m, gamma_est, dl):
    """Average gamma estimate from both eigenvalue branches of one pair."""
    lp = np.log(lam_p)
    n = np.round((gamma_est.imag * dl - lp.imag) / (2.0 * np.pi))
    gp = (lp + 2j * np.pi * n) / dl
    lm = -np.log(lam_m)
    n = np.round((gamma_est.imag * dl - lm.imag) / (2.0 * np.pi))
    gm = (lm + 2j * np.pi * n) / dl
    return 0.5 * (gp + gm)


def solve_mtrl(inp, eps_eff_hint=None, degenerate_tol=DEGENERATE_TOL):
    """Multiline TRL over every line pair.

    For each pair (i, j) the eigenvalues of M_i M_j^-1 estimate
    exp(+-gamma*dl). Branch assignment is seeded at the lowest frequency
    (where beta*dl_min < pi/2, or from eps_eff_hint when the grid starts
    too high) and tracked by continuity upward. gamma is the weighted
    least-squares combination over pairs with weights sin^2 of the
    eigenvalue angle -- the phase-separation sensitivity proxy -- and a
    frequency is flagged degenerate when every pair has
    |beta*dl - n*pi| < degenerate_tol. Error boxes come from weighted
    spectral projectors shared across pairs, the thru fixes the column
    products, and the reflect plus its sign hint removes the final
    one-parameter ambiguity. The reference plane is the thru center.
    """
    grid = inp.thru.grid
    f = grid.points
    nf = grid.n

    lengths = np.array([0.0] + [l for l, _ in inp.lines])
    nets = [inp.thru] + [n for _, n in inp.lines]
    t_all = np.stack([s_to_t(n).t for n in nets], axis=0)   # (n_std, nf, 2, 2)
    t_inv = np.linalg.inv(t_all)

    pairs = [(hi, lo) for hi in range(len(nets)) for lo in range(hi)]
    # orient every pair so dl > 0
    pairs = [(hi, lo) if lengths[hi] > lengths[lo] else (lo, hi)
             for hi, lo in pairs]
    dls = np.array([lengths[hi] - lengths[lo] for hi, lo in pairs])
    n_pairs = len(pairs)

    p_mats = np.stack([t_all[hi] @ t_inv[lo] for hi, lo in pairs], axis=0)
    q_mats = np.stack([t_inv[lo] @ t_all[hi] for hi, lo in pairs], axis=0)
    lam1, lam2 = _eig2(p_mats)          # (n_pairs, nf)

    shortest = int(np.argmin(dls))
    lam_p = np.empty_like(lam1)
    lam_m = np.empty_like(lam1)
    gamma = np.zeros(nf, dtype=complex)
    residual = np.zeros(nf)
    degenerate = np.zeros(nf, dtype=bool)
    weights = np.zeros((n_pairs, nf))

    # sequential branch tracking over the sweep
    gamma_est = None
    prev_f = None
    for i in range(nf):
        if f[i] == 0.0:
            # DC point: all pairs trivially degenerate, gamma is 0
            lam_p[:, i], lam_m[:, i] = lam1[:, i], lam2[:, i]
            degenerate[i] = True
            continue
        if gamma_est is None:
            if eps_eff_hint is not None:
                gamma_est = 2j * np.pi * f[i] * math.sqrt(eps_eff_hint) / 299792458.0
            else:
                a1 = np.angle(lam1[shortest, i])
                a2 = np.angle(lam2[shortest, i])
                if max(abs(a1), abs(a2)) >= np.pi / 2:
                    raise BranchTrackingLost(
                        "grid starts too high to seed the eigenvalue branch "
                        "(beta*dl_min >= pi/2); supply eps_eff_hint",
                        frequency_hz=f[i])
                seed = lam1[shortest, i] if a1 >= a2 else lam2[shortest, i]
                g0 = np.log(seed) / dls[shortest]
                gamma_est = abs(g0.real) + 1j * abs(g0.imag)
        else:
            gamma_est = gamma_est * (f[i] / prev_f)

        lp, lm = _assign_branches(lam1[:, i], lam2[:, i], gamma_est, dls)
        lam_p[:, i], lam_m[:, i] = lp, lm
        # distance of beta*dl from the nearest multiple of pi, per pair
        sep = 0.5 * np.abs(np.angle(lp / lm))
        degenerate[i] = bool(np.all(sep < degenerate_tol))
        w = np.sin(np.angle(lp)) ** 2
        weights[:, i] = w
        gp = _unwrapped_gamma(lp, lm, gamma_est, dls)
        wsum = w.sum()
        if wsum > 0.0:
            gamma[i] = np.sum(w * gp) / wsum
            residual[i] = math.sqrt(float(np.sum(w * np.abs(gp - gamma[i]) ** 2)
                                          / wsum))
        else:
            gamma[i] = gamma_est
            degenerate[i] = True
        gamma_est = gamma[i]
        prev_f = f[i]

    if gamma_est is None or bool(np.all(degenerate)):
        raise AllPairsDegenerate(
            "every line pair is degenerate over the whole sweep "
            f"(flagged band {f[0] / 1e9:.4g}..{f[-1] / 1e9:.4g} GHz)")

    # --- error boxes from weighted spectral projectors -----------------------
    wnorm = weights.copy()
    wsum = wnorm.sum(axis=0)
    flat = wsum <= 0.0
    wnorm[:, flat] = 1.0 / n_pairs
    wnorm /= wnorm.sum(axis=0, keepdims=True)

    eye = np.eye(2)
    denom = (lam_p - lam_m)[..., None, None]
    safe = np.where(np.abs(denom) < 1e-30, 1.0, denom)
    proj_a1 = (p_mats - lam_m[..., None, None] * eye) / safe
    proj_a2 = (p_mats - lam_p[..., None, None] * eye) / -safe
    qt = np.transpose(q_mats, (0, 1, 3, 2))
    proj_b1 = (qt - lam_m[..., None, None] * eye) / safe
    proj_b2 = (qt - lam_p[..., None, None] * eye) / -safe

    wq = wnorm[..., None, None]
    v1 = _dominant_eigvec((wq * proj_a1).sum(axis=0))
    v2 = _dominant_eigvec((wq * proj_a2).sum(axis=0))
    r1 = _dominant_eigvec((wq * proj_b1).sum(axis=0))
    r2 = _dominant_eigvec((wq * proj_b2).sum(axis=0))

    # thru fixes the products P = kappa1*mu1, Q = kappa2*mu2
    m0 = t_all[0]
    basis = np.stack([
        (v1[:, :, None] * r1[:, None, :]).reshape(nf, 4),
        (v2[:, :, None] * r2[:, None, :]).reshape(nf, 4)], axis=2)
    rhs = m0.reshape(nf, 4)
    bh = np.conj(np.transpose(basis, (0, 2, 1)))
    try:
        pq = np.linalg.solve(bh @ basis, (bh @ rhs[:, :, None]))[:, :, 0]
    except np.linalg.LinAlgError:
        raise SingularSystem("thru normalization system singular") from None
    p_prod, q_prod = pq[:, 0], pq[:, 1]

    # reflect removes the last one-parameter ambiguity
    gm_a = inp.reflect_a.reflection
    gm_b = inp.reflect_b.reflection
    u_a = (gm_a * v1[:, 0] - v1[:, 1]) / (v2[:, 1] - gm_a * v2[:, 0])
    u_b = (gm_b * r1[:, 0] + r1[:, 1]) / (r2[:, 1] + gm_b * r2[:, 0])
    base = np.sqrt(u_a * u_b * p_prod / q_prod)
    hint = -1.0 if inp.reflect_hint == "short" else 1.0
    signs = np.empty(nf)
    prev = hint
    for i in range(nf):  # sequential sign continuity
        signs[i] = 1.0 if abs(base[i] - prev) <= abs(-base[i] - prev) else -1.0
        prev = signs[i] * base[i]
    reflect = signs * base

    rho = u_a / reflect          # kappa2 / kappa1
    tau = u_b / reflect          # mu2 / mu1

    ta11, ta21 = v1[:, 0], v1[:, 1]
    ta12, ta22 = rho * v2[:, 0], rho * v2[:, 1]
    tb11, tb12 = p_prod * r1[:, 0], p_prod * r1[:, 1]
    tb21, tb22 = p_prod * tau * r2[:, 0], p_prod * tau * r2[:, 1]

    e00_a = ta21 / ta11
    e11_a = -ta12 / ta11
    trk_a = (ta11 * ta22 - ta12 * ta21) / ta11 ** 2
    e00_b = -tb12 / tb11
    e11_b = tb21 / tb11
    trk_b = (tb11 * tb22 - tb12 * tb21) / tb11 ** 2

    pa, pb = inp.ports
    terms_a = OnePortTerms(grid, e00_a, e11_a, trk_a)
    terms_b = OnePortTerms(grid, e00_b, e11_b, trk_b)
    k_ab = (reciprocal_split(trk_a) * reciprocal_split(trk_b) * ta11 * tb11)
    model = MultiPortCalModel(grid, (pa, pb), {pa: terms_a, pb: terms_b},
                              {(pa, pb): k_ab})
    return MtrlResult(
        gamma=GammaEstimate(grid, gamma, residual, degenerate),
        model=model, reflect_gamma=reflect)


def _dominant_eigvec(mats):
    """Eigenvector of the larger-|eigenvalue| eigenvalue, batched 2x2."""
    vals, vecs = np.linalg.eig(mats)
    idx = np.argmax(np.abs(vals), axis=1)
    return vecs[np.arange(mats.shape[0]), :, idx]


# --- standard characterization ("virtual mTRL") -------------------------------

@dataclass(frozen=True)
class CharacterizedStandards:
    """De-embedded standard definitions at the mTRL reference plane."""

    short: Network
    open: Network
    load: Network
    short_fit: object    # FitResult for the short polynomial
    open_fit: object     # FitResult for the open polynomial

    @property
    def definitions(self):
        return (self.short, self.open, self.load)


def characterize_standards(model, port, raw_short, raw_open, raw_load):
    """De-embed raw S/O/L reflection measurements with mTRL-derived port
    terms, fitting polynomial definitions for open and short and keeping
    the load as tabulated data."""
    terms = model.port_terms(port)
    short = correct_oneport(terms, raw_short)
    open_ = correct_oneport(terms, raw_open)
    load = correct_oneport(terms, raw_load)
    return CharacterizedStandards(
        short=short, open=open_, load=load,
        short_fit=fit_reflect_poly("short", short),
        open_fit=fit_reflect_poly("open", open_))


# --- multiport assembly --------------------------------------------------------

def build_fourport_cal(pair_models):
    """Assemble one multiport model from pairwise SOLR/mTRL results.

    Accepts 2-port MultiPortCalModel instances (or SolrResult/MtrlResult
    holding them). Shared ports must agree to SHARED_PORT_RTOL; the united
    k graph must connect every port, and redundant pairs are validated
    against the spanning tree inside MultiPortCalModel.
    """
    models = [getattr(m, "model", m) for m in pair_models]
    if not models:
        raise ValueError("no pairwise calibrations given")
    grid = models[0].grid
    boxes = {}
    k = {}
    for m in models:
        if m.grid != grid:
            raise GridMismatch("pairwise calibrations on different grids")
        if m.n_ports != 2:
            raise ValueError("pairwise calibration must cover exactly 2 ports")
        for p in m.ports:
            t = m.boxes[p]
            if p in boxes:
                _check_terms_agree(boxes[p], t, p)
            else:
                boxes[p] = t
        k.update(m.k)
    ports = tuple(sorted(boxes))
    if len(ports) < 2:
        raise DisconnectedTree("fewer than two ports covered")
    return MultiPortCalModel(grid, ports, boxes, k)


def _check_terms_agree(a, b, port):
    for name in ("e00", "e11", "tracking"):
        x, y = getattr(a, name), getattr(b, name)
        rel = float(np.max(np.abs(x - y) / (1.0 + np.abs(y))))
        if rel > SHARED_PORT_RTOL:
            raise InconsistentSharedPort(
                f"port {port} {name} differs between pairwise cals "
                f"(relative error {rel:.3g})")
