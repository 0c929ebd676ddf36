import warnings

import numpy as np
import pytest

from quadcal.errors import (EmptyFile, MalformedOptionLine,
                            NonMonotonicFrequency, TouchstoneError,
                            UnsupportedVersion, WrongValueCount)
from quadcal.network import FrequencyGrid, Network, ideal_thru
from quadcal.touchstone import (TouchstoneOptions, parse_touchstone,
                                ports_from_path, write_touchstone)

from conftest import rand_passive, tiny_touchstone_reader

GOLDEN_2PORT = """\
! hand-written golden file: v1 column order is S11 S21 S12 S22
# GHz S MA R 50
1  0.1 0  0.9 -45  0.9 -45  0.2 0
2  0.2 10  0.8 -90  0.8 -90  0.3 5
"""


class TestParsing:
    def test_one_port_ma(self):
        net = parse_touchstone("# GHz S MA R 50\n1 1 0\n", 1)
        assert net.grid.points[0] == 1e9
        assert net.s[0, 0, 0] == 1 + 0j
        assert net.z_ref == 50.0

    def test_db_format(self):
        net = parse_touchstone("# Hz S DB R 50\n2e9 -20 90\n", 1)
        assert net.grid.points[0] == 2e9
        assert abs(net.s[0, 0, 0] - 0.1j) < 1e-15

    def test_two_port_column_order(self):
        text = "# GHz S MA R 50\n1 0.1 0 0.9 -45 0.9 -45 0.2 0\n"
        net = parse_touchstone(text, 2)
        w = 0.9 * np.exp(-1j * np.pi / 4)
        assert abs(net.s[0, 0, 0] - 0.1) < 1e-15
        assert abs(net.s[0, 1, 0] - w) < 1e-15
        assert abs(net.s[0, 0, 1] - w) < 1e-15
        assert abs(net.s[0, 1, 1] - 0.2) < 1e-15

    def test_golden_vs_independent_reader(self):
        net = parse_touchstone(GOLDEN_2PORT, 2)
        f, s, zr = tiny_touchstone_reader(GOLDEN_2PORT, 2)
        assert np.array_equal(net.grid.points, f)
        assert np.max(np.abs(net.s - s)) < 1e-15
        assert net.z_ref == zr

    def test_defaults_without_option_line(self):
        net = parse_touchstone("2 0.5 0\n", 1)    # GHz, MA, 50 defaults
        assert net.grid.points[0] == 2e9
        assert net.s[0, 0, 0] == 0.5
        assert net.z_ref == 50.0

    def test_case_insensitive_and_tabs(self):
        net = parse_touchstone("# ghz s ma r 50\n1\t0.5\t0\n", 1)
        assert net.s[0, 0, 0] == 0.5

    def test_option_tokens_any_order(self):
        net = parse_touchstone("# RI Hz S R 75\n1e9 0.1 0.2\n", 1)
        assert net.z_ref == 75.0
        assert abs(net.s[0, 0, 0] - (0.1 + 0.2j)) < 1e-15

    def test_comment_anywhere(self):
        net = parse_touchstone("# GHz S RI R 50 ! opts\n1 1 0 ! the point\n", 1)
        assert net.s[0, 0, 0] == 1.0

    def test_four_port_wrapped(self):
        rows = ["# GHz S RI R 50", "1 1 0 0 0 0 0 0 0", "0 0 1 0 0 0 0 0",
                "0 0 0 0 1 0 0 0", "0 0 0 0 0 0 1 0"]
        net = parse_touchstone("\n".join(rows) + "\n", 4)
        assert np.allclose(net.s[0], np.eye(4))

    def test_v2_rejected(self):
        with pytest.raises(UnsupportedVersion):
            parse_touchstone("[Version] 2.0\n# GHz S MA R 50\n1 1 0\n", 1)

    def test_noise_section_skipped_with_warning(self):
        text = ("# GHz S MA R 50\n"
                "1 .1 0 .9 0 .9 0 .1 0\n"
                "2 .1 0 .9 0 .9 0 .1 0\n"
                "1 3.0 0.5 45 0.4\n"          # noise row: 5 values
                "2 3.5 0.4 40 0.35\n")
        with pytest.warns(UserWarning, match="noise"):
            net = parse_touchstone(text, 2)
        assert net.grid.n == 2

    def test_wrong_value_count_reports_line(self):
        with pytest.raises(WrongValueCount) as err:
            parse_touchstone("# GHz S MA R 50\n1 1 0\n2 1\n", 1)
        assert err.value.line == 3

    def test_bad_number_reports_line(self):
        with pytest.raises(WrongValueCount) as err:
            parse_touchstone("# GHz S MA R 50\n1 bogus 0\n", 1)
        assert err.value.line == 2

    def test_non_monotonic(self):
        with pytest.raises(NonMonotonicFrequency) as err:
            parse_touchstone("# GHz S MA R 50\n2 1 0\n1 1 0\n", 1)
        assert err.value.line == 3

    def test_empty(self):
        with pytest.raises(EmptyFile):
            parse_touchstone("# GHz S MA R 50\n! nothing\n", 1)

    def test_malformed_option_line(self):
        with pytest.raises(MalformedOptionLine):
            parse_touchstone("# GHz S XX R 50\n1 1 0\n", 1)
        with pytest.raises(MalformedOptionLine):
            parse_touchstone("# GHz S MA R\n1 1 0\n", 1)
        with pytest.raises(MalformedOptionLine):
            parse_touchstone("# THz S MA R 50\n1 1 0\n", 1)

    def test_duplicate_option_line(self):
        with pytest.raises(MalformedOptionLine):
            parse_touchstone("# GHz S MA R 50\n# Hz S RI R 50\n1 1 0\n", 1)

    def test_parser_total_on_fuzz_corpus(self):
        # never crashes with anything but a named diagnostic
        rng = np.random.default_rng(77)
        base = GOLDEN_2PORT
        alphabet = list("0123456789.eE+- #!\tABCZ[]\n")
        for _ in range(300):
            text = list(base)
            for _ in range(rng.integers(1, 12)):
                op = rng.integers(0, 3)
                pos = int(rng.integers(0, len(text)))
                if op == 0 and text:
                    text[pos] = str(rng.choice(alphabet))
                elif op == 1:
                    text.insert(pos, str(rng.choice(alphabet)))
                elif op == 2 and text:
                    del text[pos]
            mutated = "".join(text)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                try:
                    parse_touchstone(mutated, 2)
                except TouchstoneError:
                    pass


class TestWriting:
    def test_thru_roundtrip_exact(self):
        grid = FrequencyGrid([1e9, 2e9, 3e9])
        net = ideal_thru(grid)
        text = write_touchstone(net)
        back = parse_touchstone(text, 2)
        assert np.array_equal(back.grid.points, grid.points)
        assert np.max(np.abs(back.s - net.s)) < 1e-12

    def test_four_port_layout_and_roundtrip(self):
        grid = FrequencyGrid([1e9, 5e9])
        s = np.tile(np.eye(4, dtype=complex), (2, 1, 1))
        net = Network(grid, s)
        text = write_touchstone(net, TouchstoneOptions(format="RI"))
        data_lines = [l for l in text.splitlines()
                      if l and not l.startswith(("!", "#"))]
        # v1 n-port layout: 4 complex values (8 numbers) per line
        assert len(data_lines) == 2 * 4
        assert len(data_lines[0].split()) == 9   # freq + 8
        assert len(data_lines[1].split()) == 8
        back = parse_touchstone(text, 4)
        assert np.max(np.abs(back.s - net.s)) < 1e-12

    def test_db_write_of_0p1(self):
        grid = FrequencyGrid([1e9])
        net = Network.one_port(grid, [0.1])
        text = write_touchstone(net, TouchstoneOptions(format="DB"))
        data = [l for l in text.splitlines()
                if l and not l.startswith(("!", "#"))][0]
        assert float(data.split()[1]) == -20.0

    def test_comment_header(self):
        grid = FrequencyGrid([1e9])
        net = Network.one_port(grid, [0.5])
        text = write_touchstone(net, comments=("mytool 1.0", "state: raw"))
        assert text.splitlines()[0] == "! mytool 1.0"
        assert text.splitlines()[1] == "! state: raw"

    @pytest.mark.parametrize("fmt", ["RI", "MA", "DB"])
    @pytest.mark.parametrize("unit", ["Hz", "kHz", "MHz", "GHz"])
    def test_frequency_roundtrip_exact(self, fmt, unit):
        grid = FrequencyGrid.linspace(1e9, 170e9, 201)
        rng = np.random.default_rng(10)
        net = rand_passive(rng, grid, 1)
        text = write_touchstone(net, TouchstoneOptions(freq_unit=unit,
                                                       format=fmt))
        back = parse_touchstone(text, 1)
        assert np.array_equal(back.grid.points, grid.points)

    @pytest.mark.parametrize("fmt", ["RI", "MA", "DB"])
    @pytest.mark.parametrize("n_ports", [1, 2, 4])
    def test_value_roundtrip(self, fmt, n_ports):
        grid = FrequencyGrid.linspace(1e9, 170e9, 31)
        rng = np.random.default_rng(n_ports)
        net = rand_passive(rng, grid, n_ports)
        text = write_touchstone(net, TouchstoneOptions(format=fmt))
        back = parse_touchstone(text, n_ports)
        rel = np.abs(back.s - net.s) / np.maximum(np.abs(net.s), 1.0)
        assert rel.max() < 1e-9


def test_ports_from_path():
    assert ports_from_path("a/b/meas.s2p") == 2
    assert ports_from_path("meas.S4P") == 4
    assert ports_from_path("meas.dat") is None
