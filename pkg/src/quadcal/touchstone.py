"""Touchstone version 1 reader and writer (.s1p/.s2p/.s4p and friends).

Grammar notes that bite in practice, all honored here:

* option-line defaults when a token is absent: GHz, S, MA, R 50;
* angles are always degrees; dB fields are 20*log10 magnitude;
* 2-port data column order is S11 S21 S12 S22 (yes, S21 before S12);
* n-port data for n > 2 is row-major S11 S12 ... wrapped at four complex
  values per line, with the frequency only on the first line of a record;
* ``!`` starts a comment anywhere on a line; keywords are case-insensitive;
* trailing 2-port noise-parameter sections are skipped with a warning;
* Touchstone v2 files ([Version], [Number of Ports], ...) are rejected.

Frequencies are returned in Hz and values as linear complex numbers.
"""

import re
import warnings
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation

import numpy as np

from .errors import (EmptyFile, MalformedOptionLine, NonMonotonicFrequency,
                     UnsupportedVersion, WrongValueCount)
from .network import FrequencyGrid, Network

FREQ_MULTIPLIERS = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}
# frequency unit scaling is done in the decimal domain (single rounding),
# so written files reproduce their frequencies bit-exactly on read
_FREQ_EXPONENT = {"hz": 0, "khz": 3, "mhz": 6, "ghz": 9}
FORMATS = ("RI", "MA", "DB")

# floor applied when writing dB of an exact zero; reads back as ~1e-30
_DB_FLOOR = -600.0


@dataclass
class TouchstoneOptions:
    """Option-line state: frequency unit, parameter type, value format,
    reference impedance. Defaults follow the v1 convention."""

    freq_unit: str = "GHz"
    param: str = "S"
    format: str = "MA"
    z_ref: float = 50.0

    def __post_init__(self):
        if self.freq_unit.lower() not in FREQ_MULTIPLIERS:
            raise MalformedOptionLine(f"unknown frequency unit {self.freq_unit!r}")
        if self.param.upper() != "S":
            raise MalformedOptionLine(f"only S-parameters supported, got {self.param!r}")
        if self.format.upper() not in FORMATS:
            raise MalformedOptionLine(f"unknown format {self.format!r}")
        self.freq_unit = {u.lower(): u for u in ("Hz", "kHz", "MHz", "GHz")}[
            self.freq_unit.lower()]
        self.param = "S"
        self.format = self.format.upper()
        self.z_ref = float(self.z_ref)


def _parse_option_line(tokens, line_no):
    """Tokens after '#'. Order-tolerant; 'R' must be followed by an impedance."""
    opts = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        low = tok.lower()
        if low in FREQ_MULTIPLIERS:
            if "freq_unit" in opts:
                raise MalformedOptionLine("duplicate frequency unit", line=line_no)
            opts["freq_unit"] = tok
        elif low in ("s", "y", "z", "h", "g"):
            if "param" in opts:
                raise MalformedOptionLine("duplicate parameter type", line=line_no)
            opts["param"] = tok
        elif tok.upper() in FORMATS:
            if "format" in opts:
                raise MalformedOptionLine("duplicate format", line=line_no)
            opts["format"] = tok
        elif low == "r":
            if i + 1 >= len(tokens):
                raise MalformedOptionLine("R not followed by an impedance", line=line_no)
            try:
                opts["z_ref"] = float(tokens[i + 1])
            except ValueError:
                raise MalformedOptionLine(
                    f"bad reference impedance {tokens[i + 1]!r}", line=line_no) from None
            i += 1
        else:
            raise MalformedOptionLine(f"unknown option token {tok!r}", line=line_no)
        i += 1
    try:
        return TouchstoneOptions(**opts)
    except MalformedOptionLine as exc:
        raise MalformedOptionLine(str(exc), line=line_no) from None


def _to_complex(pairs, fmt):
    """pairs: (..., 2) array of value pairs in the file's format."""
    a = pairs[..., 0]
    b = pairs[..., 1]
    if fmt == "RI":
        return a + 1j * b
    if fmt == "MA":
        return a * np.exp(1j * np.deg2rad(b))
    # DB
    return 10.0 ** (a / 20.0) * np.exp(1j * np.deg2rad(b))


def parse_touchstone(text, n_ports):
    """Parse Touchstone v1 text (str or bytes) into an n-port Network."""
    if isinstance(text, (bytes, bytearray)):
        text = bytes(text).decode("utf-8", errors="replace")
    n = int(n_ports)
    if n < 1:
        raise ValueError("n_ports must be positive")
    values_per_record = 1 + 2 * n * n

    options = None
    records = []      # (line_no, freq_token, [value floats]) logical records
    noise_from = None

    pending = None    # accumulating record for n > 2 wrapped layout
    for line_no, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if stripped.startswith("["):
            raise UnsupportedVersion(
                "Touchstone v2 keyword; only v1 files are supported", line=line_no)
        cut = raw.find("!")
        if cut >= 0:
            raw = raw[:cut]
        tokens = raw.replace("\t", " ").split()
        if not tokens:
            continue
        if tokens[0].startswith("#"):
            if options is not None:
                raise MalformedOptionLine("duplicate option line", line=line_no)
            rest = tokens[1:] if tokens[0] == "#" else [tokens[0][1:], *tokens[1:]]
            options = _parse_option_line(rest, line_no)
            continue

        def _floats(toks):
            try:
                return [float(tok) for tok in toks]
            except ValueError as exc:
                raise WrongValueCount(f"unparseable data value: {exc}",
                                      line=line_no) from None

        if n <= 2:
            if n == 2 and records and len(tokens) == 5:
                # v1 .s2p noise-parameter block: f Fmin |Gopt| <Gopt Rn/z0
                noise_from = line_no
                break
            if len(tokens) != values_per_record:
                _floats(tokens)  # surface bad numbers before count errors
                raise WrongValueCount(
                    f"expected {values_per_record} values for a {n}-port record, "
                    f"got {len(tokens)}", line=line_no)
            records.append((line_no, tokens[0], _floats(tokens[1:])))
        else:
            if pending is None:
                pending = (line_no, tokens[0], _floats(tokens[1:]))
            else:
                pending = (pending[0], pending[1], pending[2] + _floats(tokens))
            if 1 + len(pending[2]) > values_per_record:
                raise WrongValueCount(
                    f"record starting here has {1 + len(pending[2])} values, "
                    f"expected {values_per_record}", line=pending[0])
            if 1 + len(pending[2]) == values_per_record:
                records.append(pending)
                pending = None

    if pending is not None:
        raise WrongValueCount(
            f"truncated record: got {1 + len(pending[2])} of "
            f"{values_per_record} values", line=pending[0])
    if noise_from is not None:
        warnings.warn(f"line {noise_from}: skipping noise-parameter section",
                      stacklevel=2)
    if not records:
        raise EmptyFile("no data records found")
    if options is None:
        options = TouchstoneOptions()

    exp = _FREQ_EXPONENT[options.freq_unit.lower()]
    freqs = np.empty(len(records))
    for idx, rec in enumerate(records):
        try:
            freqs[idx] = float(Decimal(rec[1]).scaleb(exp))
        except InvalidOperation:
            raise WrongValueCount(f"unparseable frequency {rec[1]!r}",
                                  line=rec[0]) from None
    bad = np.flatnonzero(np.diff(freqs) <= 0)
    if bad.size:
        raise NonMonotonicFrequency(
            f"frequency does not increase ({freqs[bad[0] + 1]:g} Hz after "
            f"{freqs[bad[0]]:g} Hz)", line=records[bad[0] + 1][0])

    data = np.array([rec[2] for rec in records])
    vals = _to_complex(data.reshape(len(records), -1, 2), options.format)
    if n == 2:
        # column order S11 S21 S12 S22
        s = np.empty((len(records), 2, 2), dtype=complex)
        s[:, 0, 0] = vals[:, 0]
        s[:, 1, 0] = vals[:, 1]
        s[:, 0, 1] = vals[:, 2]
        s[:, 1, 1] = vals[:, 3]
    else:
        s = vals.reshape(len(records), n, n)  # row-major S11 S12 ...
    return Network(FrequencyGrid(freqs), s, options.z_ref)


def _freq_text(f_hz, unit_exp):
    """Unit-scaled frequency text that reconstructs f_hz exactly on read.

    The shortest repr of f_hz is shifted by the unit exponent in the
    decimal domain, so the reader's single decimal-to-float rounding lands
    back on f_hz bit-exactly.
    """
    d = Decimal(repr(float(f_hz))).scaleb(-unit_exp)
    return format(d.normalize(), "f") if -6 < d.adjusted() < 16 else str(d)


def _format_value(v, fmt):
    if fmt == "RI":
        return f"{v.real:.12g} {v.imag:.12g}"
    mag = abs(v)
    ang = np.degrees(np.angle(v)) if mag > 0.0 else 0.0
    if fmt == "MA":
        return f"{mag:.12g} {ang:.12g}"
    db = 20.0 * np.log10(mag) if mag > 0.0 else _DB_FLOOR
    return f"{db:.12g} {ang:.12g}"


def write_touchstone(net, options=None, comments=()):
    """Render a Network as Touchstone v1 text.

    ``comments`` lines are emitted first (prefixed with '! '); callers use
    them to name the producing tool and calibration state. Round trip
    through parse_touchstone reproduces frequencies exactly and values to
    better than 1e-9 relative.
    """
    if options is None:
        options = TouchstoneOptions(z_ref=net.z_ref)
    fmt = options.format
    mult = FREQ_MULTIPLIERS[options.freq_unit.lower()]
    n = net.n_ports
    out = []
    for c in comments:
        out.append(f"! {c}")
    out.append(f"# {options.freq_unit} S {fmt} R {options.z_ref:g}")
    for i, f in enumerate(net.grid.points):
        ftext = _freq_text(f, mult)
        m = net.s[i]
        if n == 1:
            out.append(f"{ftext} {_format_value(m[0, 0], fmt)}")
        elif n == 2:
            row = [ftext,
                   _format_value(m[0, 0], fmt), _format_value(m[1, 0], fmt),
                   _format_value(m[0, 1], fmt), _format_value(m[1, 1], fmt)]
            out.append(" ".join(row))
        else:
            flat = m.reshape(-1)
            for start in range(0, flat.size, 4):
                chunk = " ".join(_format_value(v, fmt)
                                 for v in flat[start:start + 4])
                out.append(f"{ftext} {chunk}" if start == 0 else f"  {chunk}")
    out.append("")
    return "\n".join(out)


def ports_from_path(path):
    """Port count implied by a .sNp extension, or None."""
    m = re.search(r"\.s(\d+)p$", str(path), re.IGNORECASE)
    return int(m.group(1)) if m else None


def read_touchstone_file(path, n_ports=None):
    """Read a Touchstone file; explicit n_ports wins over the extension."""
    if n_ports is None:
        n_ports = ports_from_path(path)
        if n_ports is None:
            raise ValueError(f"cannot infer port count from {path!r}; "
                             "pass n_ports explicitly")
    with open(path, "rb") as fh:
        return parse_touchstone(fh.read(), n_ports)


def write_touchstone_file(path, net, options=None, comments=()):
    text = write_touchstone(net, options, comments)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
