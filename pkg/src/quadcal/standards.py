"""Parameterized circuit models for on-chip calibration standards.

Covers the Short/Open/Load reflects (cubic polynomial L(f)/C(f) plus an
offset delay), the resistive load with its series inductance and optional
tuning line, lossy microstrip lines, and the pad+feed fixture, together
with the polynomial standard-definition fit and the dB-threshold validity
report used to grade a calibration.

Loss model: conductor loss scales as sqrt(f), dielectric loss linearly in
f, both normalized at 1 GHz and given in nepers/m.
"""

import math
from dataclasses import dataclass
from importlib import resources

import numpy as np
import scipy.optimize

from .configfile import read_config_file
from .errors import ConfigError, IllConditioned, NonPhysical
from .network import Network, cascade, reciprocity_error, terminate

C0 = 299792458.0  # speed of light in vacuum, m/s

GAMMA_MAG_TOL = 1e-9       # |Gamma| may exceed 1 by at most this much
FIT_CONDITION_BOUND = 1e10  # fit design-matrix condition limit
_LOSS_REF_HZ = 1e9


@dataclass(frozen=True)
class ReflectPoly:
    """Open/short definition: cubic frequency polynomial for C (farads) or
    L (henries), coefficient k carrying units F/Hz^k (H/Hz^k), plus an
    offset delay in seconds. offset_loss is carried for file-format
    stability but must be 0 in this version."""

    kind: str                 # 'open' | 'short'
    coeffs: tuple             # (c0, c1, c2, c3) in SI units
    offset_delay: float = 0.0
    offset_loss: float = 0.0

    def __post_init__(self):
        if self.kind not in ("open", "short"):
            raise ValueError(f"kind must be 'open' or 'short', got {self.kind!r}")
        if len(self.coeffs) != 4:
            raise ValueError("exactly four polynomial coefficients required")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if self.offset_loss != 0.0:
            raise ValueError("offset_loss must be 0 in this version")

    def element_value(self, f_hz):
        """C(f) or L(f) evaluated on an array of frequencies."""
        c0_, c1, c2, c3 = self.coeffs
        return c0_ + f_hz * (c1 + f_hz * (c2 + f_hz * c3))


@dataclass(frozen=True)
class TuneLine:
    """Tuning line ahead of the load resistor, specified by its delay.

    Internally modeled as an equivalent air line (eps_eff = 1) of length
    c0*delay; ``alpha`` is nepers/m at 1 GHz on that equivalent length,
    scaling as sqrt(f)."""

    delay: float
    z0: float
    alpha: float = 0.0


@dataclass(frozen=True)
class LoadModel:
    """Series R-L load, optionally reached through a tuning line."""

    r_dc: float
    l_series: float = 0.0
    tune_line: TuneLine = None

    def __post_init__(self):
        if not self.r_dc > 0.0:
            raise ValueError("r_dc must be positive")


@dataclass(frozen=True)
class LineModel:
    """Uniform transmission line: length (m), characteristic impedance,
    effective permittivity, and 1 GHz loss coefficients (nepers/m)."""

    length: float
    z0: float
    eps_eff: float
    alpha_c: float = 0.0   # conductor loss, scales as sqrt(f)
    alpha_d: float = 0.0   # dielectric loss, scales linearly in f

    def __post_init__(self):
        if self.eps_eff < 1.0:
            raise ValueError("eps_eff must be >= 1")

    def gamma(self, f_hz):
        """Propagation constant alpha(f) + j*beta(f) per meter."""
        fr = f_hz / _LOSS_REF_HZ
        alpha = self.alpha_c * np.sqrt(fr) + self.alpha_d * fr
        beta = 2.0 * np.pi * f_hz * math.sqrt(self.eps_eff) / C0
        return alpha + 1j * beta


@dataclass(frozen=True)
class FixtureModel:
    """Probe-side shunt pad capacitance followed by the feed line; port 1
    is the probe side. Reciprocal by construction."""

    pad_c: float
    feed: LineModel


def eval_reflect(model, grid, z_ref=50.0):
    """Reflection of an open (shunt C) or short (series L) standard.

    Open: Y = j*w*C(f), Gamma = (1 - Y z)/(1 + Y z); short: Z = j*w*L(f),
    Gamma = (Z - z)/(Z + z). The offset delay rotates the result by
    exp(-2j*w*delay).
    """
    f = grid.points
    w = 2.0 * np.pi * f
    val = model.element_value(f)
    if model.kind == "open":
        yz = 1j * w * val * z_ref
        gamma = (1.0 - yz) / (1.0 + yz)
    else:
        z = 1j * w * val
        gamma = (z - z_ref) / (z + z_ref)
    if model.offset_delay:
        gamma = gamma * np.exp(-2j * w * model.offset_delay)
    excess = np.abs(gamma) - 1.0
    if np.any(excess > GAMMA_MAG_TOL):
        i = int(np.argmax(excess))
        raise NonPhysical(f"|Gamma| = {abs(gamma[i]):.9g} > 1",
                          frequency_hz=f[i])
    return Network.one_port(grid, gamma, z_ref)


def eval_load(model, grid, z_ref=50.0):
    """Reflection of the series R-L load behind its optional tuning line."""
    f = grid.points
    z = model.r_dc + 2j * np.pi * f * model.l_series
    gamma = Network.one_port(grid, (z - z_ref) / (z + z_ref), z_ref)
    if model.tune_line is not None and model.tune_line.delay > 0.0:
        tl = model.tune_line
        line = LineModel(length=C0 * tl.delay, z0=tl.z0, eps_eff=1.0,
                         alpha_c=tl.alpha)
        gamma = terminate(eval_line(line, grid, z_ref), gamma)
    return gamma


def eval_line(model, grid, z_ref=50.0):
    """Two-port of a uniform lossy line, exactly reciprocal.

    With Gamma0 = (z0 - z_ref)/(z0 + z_ref) and p = exp(-gamma*length):
    S11 = S22 = Gamma0 (1 - p^2)/(1 - Gamma0^2 p^2),
    S21 = S12 = p (1 - Gamma0^2)/(1 - Gamma0^2 p^2).
    """
    g0 = (model.z0 - z_ref) / (model.z0 + z_ref)
    p = np.exp(-model.gamma(grid.points) * model.length)
    den = 1.0 - g0 * g0 * p * p
    s11 = g0 * (1.0 - p * p) / den
    s21 = p * (1.0 - g0 * g0) / den
    return Network.two_port(grid, s11, s21, s21, s11, z_ref)


def eval_fixture(model, grid, z_ref=50.0):
    """Shunt pad capacitance cascaded with the feed line; port 1 = probe."""
    yz = 2j * np.pi * grid.points * model.pad_c * z_ref
    s11 = -yz / (2.0 + yz)
    s21 = 2.0 / (2.0 + yz)
    pad = Network.two_port(grid, s11, s21, s21, s11, z_ref)
    return cascade(pad, eval_line(model.feed, grid, z_ref))


@dataclass(frozen=True)
class FitResult:
    """Outcome of a standard-definition fit."""

    model: ReflectPoly
    residual: float      # sqrt(mean |Gamma_model - Gamma_data|^2)
    condition: float     # design-matrix condition estimate


def fit_reflect_poly(kind, gamma_net):
    """Cubic-polynomial fit of C(f) or L(f) to measured reflection data.

    Requires >= 8 points with |Gamma| in (0.2, 1.2); any offset delay must
    be de-embedded first (the fit pins offset_delay = 0). A linear solve in
    the element domain seeds a least-squares refinement of
    sum |Gamma_model - Gamma_data|^2.
    """
    if kind not in ("open", "short"):
        raise ValueError(f"kind must be 'open' or 'short', got {kind!r}")
    f = gamma_net.grid.points
    g = gamma_net.reflection
    z = gamma_net.z_ref
    if f.size < 8:
        raise ValueError(f"need >= 8 frequency points, got {f.size}")
    mag = np.abs(g)
    if np.any(mag <= 0.2) or np.any(mag >= 1.2):
        raise ValueError("reflection magnitude outside (0.2, 1.2); "
                         "not an open/short-like standard")

    w = 2.0 * np.pi * f
    if kind == "open":
        # (1 - G)/(1 + G) = j w C z
        elem = ((1.0 - g) / (1.0 + g) / (1j * w * z)).real
    else:
        # (1 + G)/(1 - G) = j w L / z
        elem = ((1.0 + g) / (1.0 - g) * z / (1j * w)).real

    scale = f[-1]
    x = f / scale
    design = np.stack([np.ones_like(x), x, x * x, x ** 3], axis=1)
    condition = float(np.linalg.cond(design))
    if condition > FIT_CONDITION_BOUND:
        raise IllConditioned(
            f"fit design matrix condition {condition:.3g} exceeds "
            f"{FIT_CONDITION_BOUND:.3g}")
    coeffs_scaled, *_ = np.linalg.lstsq(design, elem, rcond=None)

    def unscale(cs):
        return tuple(c / scale ** k for k, c in enumerate(cs))

    def residuals(cs):
        model = ReflectPoly(kind, unscale(cs))
        gm = eval_reflect(model, gamma_net.grid, z).reflection
        d = gm - g
        return np.concatenate([d.real, d.imag])

    sol = scipy.optimize.least_squares(residuals, coeffs_scaled,
                                       xtol=1e-15, ftol=1e-15, gtol=1e-15)
    model = ReflectPoly(kind, unscale(sol.x))
    resid = float(np.sqrt(np.mean(np.abs(
        eval_reflect(model, gamma_net.grid, z).reflection - g) ** 2)))
    return FitResult(model, resid, condition)


@dataclass(frozen=True)
class ThresholdReport:
    """Validity of a network against a dB threshold.

    ``valid_up_to`` is the largest grid frequency such that the criterion
    holds at every grid point up to and including it (None if the first
    point already fails); ``full_grid`` marks validity over the whole
    sweep. ``margin_db`` is threshold minus level, positive where the
    criterion passes.
    """

    quantity: str
    threshold_db: float
    valid_up_to: float
    full_grid: bool
    margin_db: np.ndarray

    def describe(self):
        if self.full_grid:
            return f"valid over full grid ({self.quantity} < {self.threshold_db:g} dB)"
        if self.valid_up_to is None:
            return f"invalid at first point ({self.quantity} >= {self.threshold_db:g} dB)"
        return (f"valid up to {self.valid_up_to / 1e9:.6g} GHz "
                f"({self.quantity} < {self.threshold_db:g} dB)")


def threshold_report(net, threshold_db, quantity="s11_below"):
    """Grade |S11| or the S21/S12 reciprocity error against a dB threshold."""
    if quantity == "s11_below":
        if threshold_db >= 0.0:
            raise ValueError("s11_below threshold must be negative dB")
        level = np.abs(net.s[:, 0, 0])
    elif quantity == "s21_reciprocity":
        level = reciprocity_error(net)
    else:
        raise ValueError(f"unknown quantity {quantity!r}")
    with np.errstate(divide="ignore"):
        level_db = 20.0 * np.log10(level)
    margin = threshold_db - level_db
    passing = level_db < threshold_db
    if passing.all():
        return ThresholdReport(quantity, threshold_db,
                               float(net.grid.points[-1]), True, margin)
    first_fail = int(np.argmin(passing))
    valid = float(net.grid.points[first_fail - 1]) if first_fail > 0 else None
    return ThresholdReport(quantity, threshold_db, valid, False, margin)


# --- standard packs ----------------------------------------------------------

@dataclass(frozen=True)
class StandardPack:
    """A complete desk-scale calibration standard set.

    ``mtrl_lengths`` are the straight-line lengths (meters, first entry 0
    for the thru); ``thru_lengths`` maps orthogonal-thru names ('arc',
    'diagonal') to their line lengths.
    """

    name: str
    open: ReflectPoly
    short: ReflectPoly
    load: LoadModel
    fixture: FixtureModel
    line_z0: float
    line_eps_eff: float
    line_alpha_c: float
    line_alpha_d: float
    mtrl_lengths: tuple
    thru_lengths: dict

    def line_model(self, length):
        return LineModel(length, self.line_z0, self.line_eps_eff,
                         self.line_alpha_c, self.line_alpha_d)

    def eval_standard(self, name, grid, z_ref=50.0, embedded=False):
        """1-port S/O/L standard; embedded=True looks through the fixture."""
        if name == "open":
            bare = eval_reflect(self.open, grid, z_ref)
        elif name == "short":
            bare = eval_reflect(self.short, grid, z_ref)
        elif name == "load":
            bare = eval_load(self.load, grid, z_ref)
        else:
            raise ValueError(f"unknown standard {name!r}")
        if not embedded:
            return bare
        return terminate(eval_fixture(self.fixture, grid, z_ref), bare)

    def eval_thru_structure(self, length, grid, z_ref=50.0, embedded=True):
        """2-port line of the given length, optionally between fixtures."""
        line = eval_line(self.line_model(length), grid, z_ref)
        if not embedded:
            return line
        fix = eval_fixture(self.fixture, grid, z_ref)
        return cascade(cascade(fix, line), fix.flipped())

    def feed_delay(self):
        """One fixture feed's delay in seconds."""
        return self.fixture.feed.length * math.sqrt(
            self.fixture.feed.eps_eff) / C0

    def thru_delay_estimate(self, name):
        """Coarse delay of an orthogonal thru at the calibration plane
        (the bare line; the feeds sit inside the error boxes)."""
        return self.thru_lengths[name] * math.sqrt(self.line_eps_eff) / C0


def _poly_from_section(sec, kind, prefix, source):
    coeffs = [sec.get_float(f"{prefix}{i}", 0.0, source=source)
              for i in range(4)]
    return ReflectPoly(kind, coeffs,
                       offset_delay=sec.get_float("offset_delay_s", 0.0,
                                                  source=source),
                       offset_loss=sec.get_float("offset_loss", 0.0,
                                                 source=source))


def parse_standard_pack(doc):
    """Build a StandardPack from a parsed config document.

    Sections and keys (SI units):

    [pack]    name
    [open]    c0..c3 (F, F/Hz, ...), offset_delay_s, offset_loss
    [short]   l0..l3 (H, H/Hz, ...), offset_delay_s, offset_loss
    [load]    r_dc_ohm, l_series_h, tune_delay_s, tune_z0_ohm, tune_alpha_np_m
    [fixture] pad_c_f, feed_length_m, feed_z0_ohm, feed_eps_eff,
              feed_alpha_c_np_m, feed_alpha_d_np_m
    [line]    z0_ohm, eps_eff, alpha_c_np_m, alpha_d_np_m   (at 1 GHz)
    [mtrl]    lengths_m = 0 250e-6 ...                      (thru first)
    [thrus]   arc_m, diagonal_m
    """
    src = doc.source
    name = doc.require("pack").get("name", "unnamed", source=src)
    open_ = _poly_from_section(doc.require("open"), "open", "c", src)
    short = _poly_from_section(doc.require("short"), "short", "l", src)

    lsec = doc.require("load")
    tune = None
    tdelay = lsec.get_float("tune_delay_s", 0.0, source=src)
    if tdelay > 0.0:
        tune = TuneLine(delay=tdelay,
                        z0=lsec.get_float("tune_z0_ohm", 50.0, source=src),
                        alpha=lsec.get_float("tune_alpha_np_m", 0.0, source=src))
    load = LoadModel(r_dc=lsec.get_float("r_dc_ohm", required=True, source=src),
                     l_series=lsec.get_float("l_series_h", 0.0, source=src),
                     tune_line=tune)

    fsec = doc.require("fixture")
    feed = LineModel(length=fsec.get_float("feed_length_m", required=True, source=src),
                     z0=fsec.get_float("feed_z0_ohm", 50.0, source=src),
                     eps_eff=fsec.get_float("feed_eps_eff", 1.0, source=src),
                     alpha_c=fsec.get_float("feed_alpha_c_np_m", 0.0, source=src),
                     alpha_d=fsec.get_float("feed_alpha_d_np_m", 0.0, source=src))
    fixture = FixtureModel(pad_c=fsec.get_float("pad_c_f", 0.0, source=src),
                           feed=feed)

    line = doc.require("line")
    msec = doc.require("mtrl")
    raw_lengths = msec.get("lengths_m", required=True, source=src).split()
    try:
        mtrl_lengths = tuple(float(tok) for tok in raw_lengths)
    except ValueError:
        raise ConfigError("bad mtrl lengths_m list", source=src,
                          line=msec.line) from None
    if not mtrl_lengths or mtrl_lengths[0] != 0.0:
        raise ConfigError("mtrl lengths_m must start with 0 (the thru)",
                          source=src, line=msec.line)
    if len(set(mtrl_lengths)) != len(mtrl_lengths):
        raise ConfigError("mtrl lengths_m must be distinct", source=src,
                          line=msec.line)

    tsec = doc.require("thrus")
    thrus = {}
    for key in ("arc", "diagonal"):
        val = tsec.get_float(f"{key}_m", source=src)
        if val is not None:
            thrus[key] = val

    return StandardPack(
        name=name, open=open_, short=short, load=load, fixture=fixture,
        line_z0=line.get_float("z0_ohm", 50.0, source=src),
        line_eps_eff=line.get_float("eps_eff", required=True, source=src),
        line_alpha_c=line.get_float("alpha_c_np_m", 0.0, source=src),
        line_alpha_d=line.get_float("alpha_d_np_m", 0.0, source=src),
        mtrl_lengths=mtrl_lengths, thru_lengths=thrus)


def load_standard_pack(path):
    return parse_standard_pack(read_config_file(path))


def builtin_pack_path(name="nyu28"):
    """Filesystem path of a pack shipped with the package."""
    return resources.files("quadcal").joinpath(f"packs/{name}.stdpack")


def load_builtin_pack(name="nyu28"):
    from .configfile import parse_config
    res = builtin_pack_path(name)
    return parse_standard_pack(parse_config(res.read_bytes(),
                                            source=f"builtin:{name}"))
