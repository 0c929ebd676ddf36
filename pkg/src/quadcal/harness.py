"""Synthetic-measurement harness: generates raw data from a standard pack
behind seeded error boxes (plus optional noise), drives the calibration
solvers, applies corrections, and renders the validity reports.

Determinism contract: every operation is a pure function of its input
files and the scenario seed. The random stream is numpy's PCG64 seeded
with the scenario seed, consumed in a fixed documented order (per-port
boxes in ascending port order, then the 4-port DUT when present, then
noise per output in manifest order), so repeated runs are byte-identical.
"""

import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .configfile import parse_config, read_config_file
from .errormodel import (MultiPortCalModel, OnePortTerms, compose_fixture,
                         correct_multiport, embed_multiport, embed_oneport,
                         read_cal_model, write_cal_model)
from .errors import ConfigError, InvalidScenario
from .network import (FrequencyGrid, Network, passivity_margin,
                      reciprocity_error)
from .solvers import (MtrlInput, SolrInput, build_fourport_cal,
                      characterize_standards, solve_mtrl, solve_solr)
from .standards import (load_builtin_pack, load_standard_pack,
                        threshold_report)
from .touchstone import (TouchstoneOptions, read_touchstone_file,
                         write_touchstone_file)

TOOL_TAG = "quadcal 1.0"
SOL_NAMES = ("short", "open", "load")
DEFAULT_THRESHOLD_DB = -15.0

# random error-box generator bounds (see _random_box)
BOX_REFL_MAG_MAX = 0.3
BOX_TRACKING_MAG = (0.75, 1.0)
BOX_TRACKING_DELAY_MAX = 3e-12
BOX_SPLIT_DELAY_MAX = 2e-12


@dataclass(frozen=True)
class Scenario:
    """Recipe for one synthetic measurement session."""

    seed: int
    f_start: float
    f_stop: float
    n_points: int
    pack: object
    pack_ref: str = "builtin:nyu28"
    ports: tuple = (1, 2)
    pairs: tuple = ((1, 2),)
    noise_db: float = None
    boxes_from: str = None      # cal-model file; None draws random boxes
    z_ref: float = 50.0

    def __post_init__(self):
        object.__setattr__(self, "ports", tuple(self.ports))
        object.__setattr__(self, "pairs",
                           tuple(tuple(p) for p in self.pairs))
        if len(set(self.ports)) != len(self.ports) or len(self.ports) < 2:
            raise InvalidScenario("ports must be >= 2 distinct labels")
        for i, j in self.pairs:
            if i not in self.ports or j not in self.ports or i == j:
                raise InvalidScenario(f"pair ({i}, {j}) not between scenario ports")
        if self.n_points < 2:
            raise InvalidScenario("need at least 2 grid points")
        if not (0 <= self.f_start < self.f_stop):
            raise InvalidScenario("need 0 <= f_start < f_stop")

    @property
    def grid(self):
        return FrequencyGrid.linspace(self.f_start, self.f_stop, self.n_points)


def resolve_pack(ref, base_dir="."):
    """Load a pack from 'builtin:NAME' or a file path (relative to base_dir)."""
    if ref.startswith("builtin:"):
        return load_builtin_pack(ref.split(":", 1)[1])
    path = ref if os.path.isabs(ref) else os.path.join(base_dir, ref)
    return load_standard_pack(path)


def scenario_from_config(doc, base_dir="."):
    sec = doc.require("scenario")
    src = doc.source
    pack_ref = sec.get("pack", "builtin:nyu28", source=src)
    ports = tuple(int(t) for t in sec.get("ports", "1 2", source=src).split())
    pair_toks = sec.get("pairs", "1-2", source=src).split()
    try:
        pairs = tuple(tuple(int(x) for x in tok.split("-")) for tok in pair_toks)
    except ValueError:
        raise ConfigError("bad pairs list (use i-j tokens)", source=src,
                          line=sec.line) from None
    noise = sec.get_float("noise_db", None, source=src)
    boxes = sec.get("boxes", "random", source=src)
    return Scenario(
        seed=int(sec.get_float("seed", 0, source=src)),
        f_start=sec.get_float("f_start_hz", required=True, source=src),
        f_stop=sec.get_float("f_stop_hz", required=True, source=src),
        n_points=int(sec.get_float("n_points", required=True, source=src)),
        pack=resolve_pack(pack_ref, base_dir), pack_ref=pack_ref,
        ports=ports, pairs=pairs, noise_db=noise,
        boxes_from=None if boxes == "random" else os.path.join(base_dir, boxes))


def _smooth_unit(rng, x, order=3):
    """Random smooth complex profile over x in [0, 1], normalized to max 1."""
    coeffs = rng.standard_normal(order + 1) + 1j * rng.standard_normal(order + 1)
    p = np.polyval(coeffs, x)
    return p / np.max(np.abs(p))


def _random_box(rng, f):
    """One port's error terms plus its split potential.

    Draw policy (documented for cross-run stability): |e00|, |e11| bounded
    by 0.3 with smooth cubic frequency shapes; tracking magnitude in
    [0.61, 1.0] via a bounded log-cubic, with a linear phase of up to 3 ps
    plus a random offset; the split potential has unit-scale magnitude
    wobble and its own linear phase. Unsmoothed white draws would break
    sign-continuity tracking in ways real hardware does not.
    """
    x = (f - f[0]) / max(f[-1] - f[0], 1.0)
    e00 = rng.uniform(0.05, BOX_REFL_MAG_MAX) * _smooth_unit(rng, x)
    e11 = rng.uniform(0.05, BOX_REFL_MAG_MAX) * _smooth_unit(rng, x)
    logmag = 0.25 * np.real(_smooth_unit(rng, x))
    m0 = rng.uniform(*BOX_TRACKING_MAG)
    tau = rng.uniform(0.0, BOX_TRACKING_DELAY_MAX)
    phi0 = rng.uniform(-np.pi, np.pi)
    tracking = m0 * np.exp(logmag - logmag.max()) * np.exp(
        1j * (phi0 - 2.0 * np.pi * f * tau))
    tau_c = rng.uniform(0.0, BOX_SPLIT_DELAY_MAX)
    psi0 = rng.uniform(-np.pi, np.pi)
    c = np.exp(0.15 * _smooth_unit(rng, x)) * np.exp(
        1j * (psi0 - 2.0 * np.pi * f * tau_c))
    return e00, e11, tracking, c


def _random_reciprocal_passive(rng, grid, n_ports, margin=0.1):
    a = (rng.standard_normal((grid.n, n_ports, n_ports))
         + 1j * rng.standard_normal((grid.n, n_ports, n_ports)))
    s = 0.5 * (a + np.transpose(a, (0, 2, 1)))
    smax = np.linalg.svd(s, compute_uv=False)[:, 0]
    s *= ((1.0 - margin) / smax)[:, None, None]
    return s


def make_truth_model(scn):
    """Scenario error boxes as a calibration model (k on every listed pair)."""
    grid = scn.grid
    if scn.boxes_from is not None:
        model = read_cal_model(scn.boxes_from)
        if tuple(sorted(model.ports)) != tuple(sorted(scn.ports)):
            raise InvalidScenario(
                f"cal-model ports {model.ports} do not match scenario "
                f"ports {scn.ports}")
        if model.grid != grid:
            raise InvalidScenario("cal-model grid differs from scenario grid")
        return model
    rng = np.random.default_rng(scn.seed)
    boxes, pots = {}, {}
    for p in sorted(scn.ports):
        e00, e11, tracking, c = _random_box(rng, grid.points)
        boxes[p] = OnePortTerms(grid, e00, e11, tracking)
        pots[p] = c
    k = {(i, j): pots[i] / pots[j] for i, j in scn.pairs}
    model = MultiPortCalModel(grid, tuple(sorted(scn.ports)), boxes, k)
    return model


@dataclass
class SimulatedMeasurements:
    """In-memory result of a scenario run; ``networks`` maps role names to
    raw Networks, ``files`` to written paths when an output dir was given."""

    scenario: Scenario
    truth: MultiPortCalModel
    dut_actual: Network
    networks: dict
    files: dict = field(default_factory=dict)
    session_path: str = None


def simulate_measurements(scn, out_dir=None):
    """Produce every raw measurement of a scenario; optionally write the
    Touchstone files plus a session/manifest config into ``out_dir``."""
    grid = scn.grid
    pack = scn.pack
    truth = make_truth_model(scn)
    rng = np.random.default_rng(scn.seed)
    if scn.boxes_from is None:
        for _ in sorted(scn.ports):      # skip past the box draws
            _random_box(rng, grid.points)

    nets = {}
    for p in sorted(scn.ports):
        for name in SOL_NAMES:
            std = pack.eval_standard(name, grid, scn.z_ref, embedded=True)
            nets[f"{name}_p{p}"] = embed_oneport(truth.port_terms(p), std)

    arc_len = pack.thru_lengths["arc"]
    for i, j in scn.pairs:
        struct = pack.eval_thru_structure(arc_len, grid, scn.z_ref)
        pair_model = _pair_model(truth, i, j)
        nets[f"thru_p{i}{j}"] = embed_multiport(pair_model, struct)

    mi, mj = scn.pairs[0]
    pair_model = _pair_model(truth, mi, mj)
    for length in pack.mtrl_lengths:
        struct = pack.eval_thru_structure(length, grid, scn.z_ref)
        raw = embed_multiport(pair_model, struct)
        role = ("mtrl_thru" if length == 0.0
                else f"mtrl_line{int(round(length * 1e6))}u")
        nets[f"{role}_p{mi}{mj}"] = raw

    if len(scn.ports) == 2:
        dut_actual = pack.eval_thru_structure(pack.thru_lengths["diagonal"],
                                              grid, scn.z_ref, embedded=False)
        dut_raw = embed_multiport(
            pair_model, pack.eval_thru_structure(pack.thru_lengths["diagonal"],
                                                 grid, scn.z_ref))
        nets["dut"] = dut_raw
    else:
        # a multiport DUT structure carries the same pad+feed fixture on
        # every port; fold it into the boxes before embedding
        s = _random_reciprocal_passive(rng, grid, len(scn.ports))
        dut_actual = Network(grid, s, scn.z_ref)
        from .standards import eval_fixture
        fix = eval_fixture(pack.fixture, grid, scn.z_ref)
        nets["dut"] = embed_multiport(compose_fixture(truth, fix), dut_actual)

    if scn.noise_db is not None:
        sigma = 10.0 ** (scn.noise_db / 20.0)
        for role in sorted(nets):
            net = nets[role]
            shape = net.s.shape
            noise = sigma / math.sqrt(2.0) * (
                rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
            nets[role] = Network(grid, net.s + noise, net.z_ref)

    sim = SimulatedMeasurements(scn, truth, dut_actual, nets)
    if out_dir is not None:
        _write_simulated(sim, out_dir)
    return sim


def _pair_model(truth, i, j):
    return MultiPortCalModel(
        truth.grid, (i, j), {i: truth.boxes[i], j: truth.boxes[j]},
        {(i, j): truth.k_for(i, j)})


def _write_simulated(sim, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    scn = sim.scenario
    comments = (TOOL_TAG, "state: raw synthetic measurement",
                f"scenario seed {scn.seed}")
    for role in sorted(sim.networks):
        net = sim.networks[role]
        fname = f"{role}.s{net.n_ports}p"
        write_touchstone_file(os.path.join(out_dir, fname), net,
                              comments=comments)
        sim.files[role] = fname

    lines = ["# quadcal session manifest (generated)",
             "[scenario]",
             f"seed = {scn.seed}",
             f"f_start_hz = {scn.f_start:.17g}",
             f"f_stop_hz = {scn.f_stop:.17g}",
             f"n_points = {scn.n_points}",
             f"pack = {scn.pack_ref}",
             "ports = " + " ".join(str(p) for p in scn.ports),
             "pairs = " + " ".join(f"{i}-{j}" for i, j in scn.pairs)]
    if scn.noise_db is not None:
        lines.append(f"noise_db = {scn.noise_db:g}")
    lines += ["", "[session]", f"pack = {scn.pack_ref}",
              f"threshold_db = {DEFAULT_THRESHOLD_DB:g}"]
    for p in sorted(scn.ports):
        lines += ["", f"[port {p}]"]
        for name in SOL_NAMES:
            lines.append(f"{name} = {sim.files[f'{name}_p{p}']}")
    for i, j in scn.pairs:
        lines += ["", f"[thru {i} {j}]",
                  f"file = {sim.files[f'thru_p{i}{j}']}",
                  f"delay_estimate_s = {scn.pack.thru_delay_estimate('arc'):.17g}"]
    mi, mj = scn.pairs[0]
    lines += ["", f"[mtrl {mi} {mj}]",
              f"thru = {sim.files[f'mtrl_thru_p{mi}{mj}']}"]
    for length in scn.pack.mtrl_lengths:
        if length == 0.0:
            continue
        role = f"mtrl_line{int(round(length * 1e6))}u_p{mi}{mj}"
        lines.append(f"line = {length:.17g} {sim.files[role]}")
    lines += [f"reflect_a = {sim.files[f'short_p{mi}']}",
              f"reflect_b = {sim.files[f'short_p{mj}']}",
              "reflect_hint = short",
              f"eps_eff_hint = {scn.pack.line_eps_eff:.17g}"]
    lines += ["", "[dut]", f"file = {sim.files['dut']}",
              "ports = " + " ".join(str(p) for p in sorted(scn.ports)), ""]
    session_path = os.path.join(out_dir, "session.cfg")
    with open(session_path, "w", newline="\n") as fh:
        fh.write("\n".join(lines))
    sim.session_path = session_path
    return sim


# --- calibration runs ---------------------------------------------------------

@dataclass
class RunCalResult:
    model: MultiPortCalModel
    method: str
    report: str
    load_threshold: object
    solr_results: list = field(default_factory=list)
    mtrl_result: object = None
    model_path: str = None
    report_path: str = None


def _read_rel(base_dir, rel, n_ports):
    return read_touchstone_file(os.path.join(base_dir, rel), n_ports)


def _sol_files(doc, port, base_dir):
    sec = doc.require("port", (str(port),))
    return tuple(_read_rel(base_dir, sec.get(name, required=True,
                                             source=doc.source), 1)
                 for name in SOL_NAMES)


def _definitions(doc, sec, pack, grid, z_ref, base_dir):
    """Standard definitions for one port: explicit files win over the pack."""
    defs = []
    for name in SOL_NAMES:
        override = sec.get(f"{name}_def")
        if override is not None:
            defs.append(_read_rel(base_dir, override, 1))
        else:
            defs.append(pack.eval_standard(name, grid, z_ref, embedded=False))
    return tuple(defs)


def run_cal(session, method, out_dir=None, threshold_db=None):
    """Drive a calibration session end to end.

    ``session`` is a parsed ConfigDoc or a path; ``method`` is 'solr' or
    'mtrl'. Writes cal_model.cal and cal_report.txt/.tsv when out_dir is
    given.
    """
    doc = session if not isinstance(session, (str, os.PathLike)) \
        else read_config_file(session)
    base_dir = os.path.dirname(os.path.abspath(doc.source)) \
        if os.path.exists(doc.source) else "."
    ssec = doc.require("session")
    pack = resolve_pack(ssec.get("pack", "builtin:nyu28", source=doc.source),
                        base_dir)
    if threshold_db is None:
        threshold_db = ssec.get_float("threshold_db", DEFAULT_THRESHOLD_DB,
                                      source=doc.source)

    solr_results = []
    mtrl_result = None
    if method == "solr":
        thrus = doc.find_all("thru")
        if not thrus:
            raise ConfigError("no [thru i j] sections", source=doc.source)
        sols, defs = {}, {}
        for tsec in thrus:
            i, j = (int(a) for a in tsec.args)
            thru = _read_rel(base_dir, tsec.get("file", required=True,
                                                source=doc.source), 2)
            grid, z_ref = thru.grid, thru.z_ref
            for p in (i, j):
                if p not in sols:
                    sols[p] = _sol_files(doc, p, base_dir)
                    defs[p] = _definitions(doc, doc.require("port", (str(p),)),
                                           pack, grid, z_ref, base_dir)
            inp = SolrInput(ports=(i, j), sol_a=sols[i], defs_a=defs[i],
                            sol_b=sols[j], defs_b=defs[j], thru=thru,
                            delay_estimate=tsec.get_float(
                                "delay_estimate_s", required=True,
                                source=doc.source))
            solr_results.append(solve_solr(inp))
        model = solr_results[0].model if len(solr_results) == 1 \
            else build_fourport_cal(solr_results)
        first_port = min(p for r in solr_results for p in r.model.ports)
        load_def = defs[first_port][2]
    elif method == "mtrl":
        msec = doc.find_all("mtrl")
        if not msec:
            raise ConfigError("no [mtrl i j] section", source=doc.source)
        msec = msec[0]
        i, j = (int(a) for a in msec.args)
        thru = _read_rel(base_dir, msec.get("thru", required=True,
                                            source=doc.source), 2)
        lines = []
        for value, line_no in msec.get_all("line"):
            try:
                length_tok, path = value.split(None, 1)
                lines.append((float(length_tok),
                              _read_rel(base_dir, path.strip(), 2)))
            except ValueError:
                raise ConfigError(f"bad line entry {value!r} "
                                  "(want: length_m path)", source=doc.source,
                                  line=line_no) from None
        inp = MtrlInput(
            thru=thru, lines=lines,
            reflect_a=_read_rel(base_dir, msec.get("reflect_a", required=True,
                                                   source=doc.source), 1),
            reflect_b=_read_rel(base_dir, msec.get("reflect_b", required=True,
                                                   source=doc.source), 1),
            reflect_hint=msec.get("reflect_hint", "short", source=doc.source),
            ports=(i, j))
        mtrl_result = solve_mtrl(inp, eps_eff_hint=msec.get_float(
            "eps_eff_hint", None, source=doc.source))
        model = mtrl_result.model
        load_def = pack.eval_standard("load", thru.grid, thru.z_ref)
    else:
        raise ValueError(f"unknown method {method!r}")

    load_rep = threshold_report(load_def, threshold_db, "s11_below")
    report = _cal_report(model, method, solr_results, mtrl_result, load_rep)
    result = RunCalResult(model=model, method=method, report=report,
                          load_threshold=load_rep, solr_results=solr_results,
                          mtrl_result=mtrl_result)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        result.model_path = os.path.join(out_dir, "cal_model.cal")
        write_cal_model(model, result.model_path)
        result.report_path = os.path.join(out_dir, "cal_report.txt")
        with open(result.report_path, "w", newline="\n") as fh:
            fh.write(report)
        _write_terms_tsv(model, os.path.join(out_dir, "cal_terms.tsv"))
    return result


def _cal_report(model, method, solr_results, mtrl_result, load_rep):
    f = model.grid.points
    lines = [f"{TOOL_TAG} cal report",
             f"method: {method}",
             "ports: " + " ".join(str(p) for p in model.ports),
             f"grid: {model.grid.n} points, {f[0] / 1e9:.6g}..{f[-1] / 1e9:.6g} GHz",
             "",
             "[per-port terms]"]
    for p in model.ports:
        t = model.boxes[p]
        lines.append(
            f"port {p}: max|e00| = {np.max(np.abs(t.e00)):.6g}, "
            f"max|e11| = {np.max(np.abs(t.e11)):.6g}, "
            f"|tracking| in [{np.min(np.abs(t.tracking)):.6g}, "
            f"{np.max(np.abs(t.tracking)):.6g}]")
    if solr_results:
        lines += ["", "[sign resolution]"]
        for r in solr_results:
            lines.append(
                f"pair {r.model.ports}: sign {'+' if r.sign > 0 else '-'}1, "
                f"phase mismatch chosen {r.score_chosen:.4g} rad vs "
                f"rejected {r.score_rejected:.4g} rad; corrected-thru "
                f"reciprocity {r.thru_reciprocity:.3g}")
    if mtrl_result is not None:
        g = mtrl_result.gamma
        n_deg = int(np.count_nonzero(g.degenerate))
        lines += ["", "[mtrl]",
                  f"reference plane: {mtrl_result.ref_plane}",
                  f"max fit residual: {np.max(g.residual):.3g} /m",
                  f"degenerate-flagged points: {n_deg} of {g.grid.n}"]
    lines += ["", "[k consistency]",
              f"residual = {model.k_consistency_residual():.3g}",
              "", "[load threshold]",
              f"cal {load_rep.describe()}", ""]
    return "\n".join(lines)


def _write_terms_tsv(model, path):
    cols = ["freq_hz"]
    data = [model.grid.points]
    for p in model.ports:
        t = model.boxes[p]
        for name, arr in (("e00", t.e00), ("e11", t.e11),
                          ("trk", t.tracking)):
            cols += [f"{name}{p}_re", f"{name}{p}_im"]
            data += [arr.real, arr.imag]
    with open(path, "w", newline="\n") as fh:
        fh.write("\t".join(cols) + "\n")
        for row in np.stack(data, axis=1):
            fh.write("\t".join(f"{v:.12g}" for v in row) + "\n")


# --- correction ----------------------------------------------------------------

@dataclass
class RunCorrectResult:
    corrected: Network
    report: str
    reciprocity: np.ndarray
    corrected_path: str = None
    report_path: str = None


def run_correct(cal_model, raw_dut, out_path=None):
    """Apply a calibration to a raw DUT measurement.

    Accepts a MultiPortCalModel or a cal-model file path, and a Network or
    a Touchstone path. The comparison report tabulates raw vs corrected
    |S21| (dB) and unwrapped phase plus the corrected reciprocity error.
    """
    model = cal_model if isinstance(cal_model, MultiPortCalModel) \
        else read_cal_model(cal_model)
    raw = raw_dut if isinstance(raw_dut, Network) \
        else read_touchstone_file(raw_dut, model.n_ports)
    corrected = correct_multiport(model, raw)
    rec = reciprocity_error(corrected) if corrected.n_ports >= 2 else None

    f = model.grid.points
    rows = ["freq_hz\traw_s21_db\traw_s21_phase_deg\tcorr_s21_db\t"
            "corr_s21_phase_deg\tcorr_reciprocity"]
    if raw.n_ports >= 2:
        raw21 = raw.s[:, 1, 0]
        cor21 = corrected.s[:, 1, 0]
        with np.errstate(divide="ignore"):
            raw_db = 20.0 * np.log10(np.abs(raw21))
            cor_db = 20.0 * np.log10(np.abs(cor21))
        raw_ph = np.degrees(np.unwrap(np.angle(raw21)))
        cor_ph = np.degrees(np.unwrap(np.angle(cor21)))
        for i in range(f.size):
            rows.append(f"{f[i]:.12g}\t{raw_db[i]:.9g}\t{raw_ph[i]:.9g}\t"
                        f"{cor_db[i]:.9g}\t{cor_ph[i]:.9g}\t{rec[i]:.6g}")
    report = "\n".join(rows) + "\n"

    result = RunCorrectResult(corrected=corrected, report=report,
                              reciprocity=rec)
    if out_path is not None:
        write_touchstone_file(out_path, corrected,
                              comments=(TOOL_TAG, "state: corrected"))
        result.corrected_path = out_path
        result.report_path = str(out_path) + ".report.tsv"
        with open(result.report_path, "w", newline="\n") as fh:
            fh.write(report)
    return result


def run_characterize(session, out_dir=None):
    """Virtual-mTRL standard characterization: run the session's mTRL,
    de-embed the raw S/O/L at each mTRL port, and (when out_dir is given)
    write the tabulated definitions plus a session variant that uses them.
    """
    doc = session if not isinstance(session, (str, os.PathLike)) \
        else read_config_file(session)
    base_dir = os.path.dirname(os.path.abspath(doc.source)) \
        if os.path.exists(doc.source) else "."
    cal = run_cal(doc, "mtrl")
    msec = doc.find_all("mtrl")[0]
    ports = tuple(int(a) for a in msec.args)
    characterized = {}
    for p in ports:
        raw = _sol_files(doc, p, base_dir)
        characterized[p] = characterize_standards(cal.model, p, *raw)

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        def_files = {}
        for p, ch in characterized.items():
            for name, net in zip(SOL_NAMES, ch.definitions):
                fname = f"{name}_def_p{p}.s1p"
                write_touchstone_file(
                    os.path.join(out_dir, fname), net,
                    comments=(TOOL_TAG, "state: characterized definition"))
                def_files[(p, name)] = fname
        _write_characterized_session(doc, base_dir, out_dir, def_files)
        with open(os.path.join(out_dir, "characterize_report.txt"), "w",
                  newline="\n") as fh:
            fh.write(_characterize_report(characterized))
    return cal, characterized


def _characterize_report(characterized):
    lines = [f"{TOOL_TAG} standard characterization"]
    for p, ch in sorted(characterized.items()):
        oc = ch.open_fit.model.coeffs
        sc = ch.short_fit.model.coeffs
        lines += [
            f"port {p}: open C0 = {oc[0] * 1e15:.6g} fF "
            f"(residual {ch.open_fit.residual:.3g}), "
            f"short L0 = {sc[0] * 1e12:.6g} pH "
            f"(residual {ch.short_fit.residual:.3g})"]
    return "\n".join(lines) + "\n"


def _write_characterized_session(doc, base_dir, out_dir, def_files):
    """Copy the session config, pointing standard definitions at the
    characterized files (paths relative to the new session's directory)."""
    lines = ["# quadcal session (characterized definitions)"]
    for sec in doc.sections:
        head = sec.name if not sec.args else f"{sec.name} {' '.join(sec.args)}"
        lines += ["", f"[{head}]"]
        for key, value, _ in sec.entries:
            if sec.name in ("port", "thru", "mtrl", "dut") and key in (
                    "file", "thru", "reflect_a", "reflect_b", *SOL_NAMES):
                value = os.path.relpath(os.path.join(base_dir, value), out_dir)
            if sec.name == "mtrl" and key == "line":
                length_tok, path = value.split(None, 1)
                value = (f"{length_tok} "
                         f"{os.path.relpath(os.path.join(base_dir, path.strip()), out_dir)}")
            lines.append(f"{key} = {value}")
        if sec.name == "port":
            p = int(sec.args[0])
            for name in SOL_NAMES:
                if (p, name) in def_files:
                    lines.append(f"{name}_def = {def_files[(p, name)]}")
    path = os.path.join(out_dir, "session_characterized.cfg")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def check_network(net):
    """Reciprocity and passivity summary used by the `check` command."""
    out = {"n_ports": net.n_ports,
           "passivity_min_margin": float(passivity_margin(net).min())}
    if net.n_ports >= 2:
        out["reciprocity_max"] = float(reciprocity_error(net).max())
    return out
