"""Minimal structured-text config format shared by standard packs, cal
sessions, and scenarios.

Grammar, line oriented:

    # comment (also ';'), blank lines ignored
    [section arg1 arg2]      section header; args are whitespace-separated
    key = value              entry; value runs to end of line

Keys may repeat within a section (collected in order), which the session
format uses for line standards. All diagnostics carry file and line.
"""

from dataclasses import dataclass, field

from .errors import ConfigError


@dataclass
class ConfigSection:
    name: str
    args: tuple
    line: int
    entries: list = field(default_factory=list)  # (key, value, line)

    def get(self, key, default=None, required=False, source=None):
        for k, v, _ in self.entries:
            if k == key:
                return v
        if required:
            raise ConfigError(f"[{self.name}] missing required key {key!r}",
                              source=source, line=self.line)
        return default

    def get_float(self, key, default=None, required=False, source=None):
        raw = self.get(key, None, required, source)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            line = next(l for k, _, l in self.entries if k == key)
            raise ConfigError(f"key {key!r}: not a number: {raw!r}",
                              source=source, line=line) from None

    def get_all(self, key):
        return [(v, l) for k, v, l in self.entries if k == key]

    def keys(self):
        return [k for k, _, _ in self.entries]


@dataclass
class ConfigDoc:
    sections: list
    source: str = "<config>"

    def find(self, name, args=None):
        for sec in self.sections:
            if sec.name == name and (args is None or sec.args == tuple(args)):
                return sec
        return None

    def require(self, name, args=None):
        sec = self.find(name, args)
        if sec is None:
            label = name if args is None else f"{name} {' '.join(args)}"
            raise ConfigError(f"missing required section [{label}]",
                              source=self.source)
        return sec

    def find_all(self, name):
        return [sec for sec in self.sections if sec.name == name]


def parse_config(text, source="<config>"):
    if isinstance(text, (bytes, bytearray)):
        text = bytes(text).decode("utf-8", errors="replace")
    sections = []
    current = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith(";"):
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError("unterminated section header",
                                  source=source, line=line_no)
            parts = line[1:-1].split()
            if not parts:
                raise ConfigError("empty section header", source=source,
                                  line=line_no)
            current = ConfigSection(parts[0], tuple(parts[1:]), line_no)
            sections.append(current)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}",
                              source=source, line=line_no)
        if current is None:
            raise ConfigError("entry before any [section]", source=source,
                              line=line_no)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError("empty key", source=source, line=line_no)
        current.entries.append((key, value, line_no))
    return ConfigDoc(sections, source)


def read_config_file(path):
    with open(path, "rb") as fh:
        return parse_config(fh.read(), source=str(path))
