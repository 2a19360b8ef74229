"""Run configuration: a sectioned ``key = value`` text format.

Example (the single-window Lee model)::

    [model]
    type = lee
    M = 2.0

    [channel.1]
    g2 = 0.36
    form = window
    E0 = 0.0
    Lambda = 5.0

    [task]
    name = survive

    [grid]
    t_min = 0
    t_max = 25
    n_points = 501

Sections ``channel.<n>`` are read in numeric order.  ``#`` and ``;`` start
comments.  Every diagnostic carries the line it refers to.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
import math
import re

TASKS = ("spectral", "survive", "channels", "emission", "oracle-check")

# allowed keys per section; values are (parser, required)
_MODEL_KEYS = {
    "lee": {"type": (str, True), "m": (float, True)},
    "qft": {"type": (str, True), "m": (float, True), "e_cut": (float, False)},
}
_LEE_CHANNEL_KEYS = {
    "g2": (float, False), "coupling": (float, False), "form": (str, False),
    "e0": (float, False), "lambda": (float, False), "alpha": (float, False),
    "k": (str, False), "f": (str, False),
}
_QFT_CHANNEL_KEYS = {
    "kind": (str, True), "mass": (float, True), "width": (float, False),
    "coupling": (float, False), "cutoff": (float, False), "form": (str, False),
    "smooth_width": (float, False),
}
_TASK_KEYS = {
    "name": (str, False), "t": (float, False), "n_modes": (int, False),
    "k_lo": (float, False), "k_hi": (float, False), "tolerance": (float, False),
    "step": (float, False),
}
_GRID_KEYS = {
    "t_min": (float, False), "t_max": (float, False), "n_points": (int, False),
    "e_min": (float, False), "e_max": (float, False), "n_e": (int, False),
}
_OUTPUT_KEYS = {"path": (str, False), "format": (str, False)}


class ConfigError(ValueError):
    """Invalid configuration; ``kind`` names the rule that was broken."""

    def __init__(self, kind, message, line=None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{kind}: {message}")
        self.kind = kind
        self.line = line


@dataclass
class Grid:
    start: float
    stop: float
    n: int

    def values(self):
        import numpy as np
        return np.linspace(self.start, self.stop, self.n)


@dataclass
class RunConfig:
    model_type: str
    M: float
    channels: list  # one dict per channel, keys as in the file
    task: str | None
    task_options: dict = field(default_factory=dict)
    t_grid: Grid | None = None
    E_grid: Grid | None = None
    output_path: str | None = None
    output_format: str = "csv"
    E_cut: float | None = None

    def build_model(self):
        """Instantiate the LeeModel / QftModel described by the config."""
        if self.model_type == "lee":
            from .lee import Channel, ConstantOne, LeeModel, Tabulated, Window

            chans = []
            for c in self.channels:
                form = c.get("form", "window")
                if form == "window":
                    ff = Window(c["e0"], c["lambda"])
                elif form == "constant":
                    ff = ConstantOne()
                else:
                    ff = Tabulated(tuple(c["k"]), tuple(c["f"]))
                g = math.sqrt(c["g2"]) if "g2" in c else c["coupling"]
                chans.append(Channel(g, ff, c.get("alpha", 0.0)))
            return LeeModel(self.M, tuple(chans))
        from .qft import FermionPair, QftModel, ScalarPair, coupling_for_width

        chans = []
        for c in self.channels:
            kind = c["kind"]
            form = c.get("form", "hard")
            if "coupling" in c:
                g = c["coupling"]
            else:
                g = coupling_for_width(kind, self.M, c["mass"], c["width"], cutoff=c.get("cutoff"),
                                       form=form, smooth_width=c.get("smooth_width"))
            if kind == "scalar":
                chans.append(ScalarPair(c["mass"], g))
            else:
                chans.append(FermionPair(c["mass"], g, c.get("cutoff"), form, c.get("smooth_width")))
        return QftModel(self.M, tuple(chans), self.E_cut)


def _line_map(text):
    """``{(section, key): line}`` and ``{section: line}`` for diagnostics."""
    keys, sections = {}, {}
    section = None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip().lower()
            sections.setdefault(section, n)
            continue
        m = re.match(r"([^=:]+)[=:]", line)
        if m and section is not None:
            keys.setdefault((section, m.group(1).strip().lower()), n)
    return keys, sections


def _floats(text):
    return [float(v) for v in text.replace(",", " ").split()]


def _read_section(cp, name, allowed, keys, sections):
    out = {}
    sec = cp[name]
    for key, raw in sec.items():
        line = keys.get((name, key))
        if key not in allowed:
            raise ConfigError("unknown key", f"[{name}] has no key {key!r}", line)
        conv = allowed[key][0]
        try:
            out[key] = conv(raw) if conv is not str else raw.strip().lower()
        except ValueError:
            raise ConfigError("bad value", f"[{name}] {key} = {raw!r} is not a valid {conv.__name__}",
                              line) from None
    for key, (_, required) in allowed.items():
        if required and key not in out:
            raise ConfigError("missing key", f"[{name}] needs {key!r}", sections.get(name))
    return out


def parse_config(text: str) -> RunConfig:
    """Parse and validate a run configuration.

    Raises :class:`ConfigError` for syntax errors, unknown or missing keys
    and broken invariants (window ordering, grid ordering, ...).
    """
    keys, sections = _line_map(text)
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), strict=True,
                                   interpolation=None)
    cp.optionxform = str.lower
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("syntax", "key outside any section", exc.lineno) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError("duplicate key", f"{exc.option!r} repeated in [{exc.section}]",
                          exc.lineno) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError("duplicate section", f"[{exc.section}] repeated", exc.lineno) from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ConfigError("syntax", "cannot parse line", lineno) from None
    names = [s.lower() for s in cp.sections()]
    if names != cp.sections():
        raise ConfigError("syntax", "section names must be lower case")

    if "model" not in names:
        raise ConfigError("missing model section", "the config needs a [model] section")
    mtype = cp["model"].get("type", "").strip().lower()
    if mtype not in _MODEL_KEYS:
        raise ConfigError("invariant", "model type must be 'lee' or 'qft'",
                          keys.get(("model", "type"), sections["model"]))
    model = _read_section(cp, "model", _MODEL_KEYS[mtype], keys, sections)

    known = {"model", "task", "grid", "output"}
    chan_names = []
    for name in names:
        if name in known:
            continue
        m = re.fullmatch(r"channel\.(\d+)", name)
        if not m:
            raise ConfigError("unknown section", f"[{name}]", sections.get(name))
        chan_names.append((int(m.group(1)), name))
    if not chan_names:
        raise ConfigError("missing channel", "at least one [channel.<n>] section is required",
                          sections["model"])
    chan_names.sort()
    channels = []
    for _, name in chan_names:
        allowed = _LEE_CHANNEL_KEYS if mtype == "lee" else _QFT_CHANNEL_KEYS
        c = _read_section(cp, name, allowed, keys, sections)
        line = sections[name]
        if mtype == "lee":
            _check_lee_channel(c, name, keys, line)
        else:
            _check_qft_channel(c, name, keys, line)
        channels.append(c)

    task_opts = _read_section(cp, "task", _TASK_KEYS, keys, sections) if "task" in names else {}
    task = task_opts.pop("name", None)
    if task is not None and task not in TASKS:
        raise ConfigError("invariant", f"task must be one of {', '.join(TASKS)}",
                          keys.get(("task", "name")))

    grid = _read_section(cp, "grid", _GRID_KEYS, keys, sections) if "grid" in names else {}
    t_grid = _grid(grid, "t_min", "t_max", "n_points", keys)
    E_grid = _grid(grid, "e_min", "e_max", "n_e", keys)

    out = _read_section(cp, "output", _OUTPUT_KEYS, keys, sections) if "output" in names else {}
    fmt = out.get("format", "csv")
    if fmt != "csv":
        raise ConfigError("invariant", "only format = csv is supported", keys.get(("output", "format")))
    path = cp["output"]["path"].strip() if "output" in names and "path" in cp["output"] else None

    return RunConfig(model_type=mtype, M=model["m"], channels=channels, task=task,
                     task_options=task_opts, t_grid=t_grid, E_grid=E_grid, output_path=path,
                     output_format=fmt, E_cut=model.get("e_cut"))


def _grid(d, lo_key, hi_key, n_key, keys):
    given = [k for k in (lo_key, hi_key, n_key) if k in d]
    if not given:
        return None
    if len(given) != 3:
        missing = [k for k in (lo_key, hi_key, n_key) if k not in d]
        raise ConfigError("missing key", f"[grid] needs {', '.join(missing)} as well",
                          keys.get(("grid", given[0])))
    if d[n_key] < 2 or not d[hi_key] > d[lo_key]:
        raise ConfigError("invariant", f"grid must be strictly increasing ({lo_key} < {hi_key}, "
                          f"{n_key} >= 2)", keys.get(("grid", hi_key)))
    return Grid(d[lo_key], d[hi_key], d[n_key])


def _check_lee_channel(c, name, keys, line):
    if ("g2" in c) == ("coupling" in c):
        raise ConfigError("missing key", f"[{name}] needs exactly one of g2, coupling", line)
    if c.get("g2", 0.0) < 0 or c.get("coupling", 0.0) < 0:
        raise ConfigError("invariant", "coupling must be >= 0", line)
    form = c.get("form", "window")
    if form == "window":
        for k in ("e0", "lambda"):
            if k not in c:
                raise ConfigError("missing key", f"[{name}] window form needs {k!r}", line)
        if not c["e0"] < c["lambda"]:
            raise ConfigError("window invariant", f"need E0 < Lambda, got E0={c['e0']}, "
                              f"Lambda={c['lambda']}", keys.get((name, "lambda"), line))
    elif form == "tabulated":
        for k in ("k", "f"):
            if k not in c:
                raise ConfigError("missing key", f"[{name}] tabulated form needs {k!r}", line)
        try:
            c["k"], c["f"] = _floats(c["k"]), _floats(c["f"])
        except ValueError:
            raise ConfigError("bad value", "k and f must be number lists", line) from None
        if len(c["k"]) != len(c["f"]) or len(c["k"]) < 2 or any(
                b <= a for a, b in zip(c["k"], c["k"][1:])) or min(c["f"]) < 0:
            raise ConfigError("invariant", "tabulated form needs increasing k, f >= 0, equal lengths",
                              keys.get((name, "k"), line))
    elif form != "constant":
        raise ConfigError("invariant", "form must be window, constant or tabulated",
                          keys.get((name, "form"), line))


def _check_qft_channel(c, name, keys, line):
    if c["kind"] not in ("scalar", "fermion"):
        raise ConfigError("invariant", "kind must be scalar or fermion", keys.get((name, "kind"), line))
    if ("width" in c) == ("coupling" in c):
        raise ConfigError("missing key", f"[{name}] needs exactly one of width, coupling", line)
    if c["kind"] == "fermion" and "cutoff" not in c:
        raise ConfigError("missing key", f"[{name}] fermion channel needs a finite cutoff", line)
    if c.get("form", "hard") not in ("hard", "smooth"):
        raise ConfigError("invariant", "form must be hard or smooth", keys.get((name, "form"), line))


def format_config(cfg: RunConfig, extra=None) -> str:
    """Sectioned text for the metadata sidecar (stable key order)."""
    lines = ["[model]", f"type = {cfg.model_type}", f"M = {cfg.M!r}"]
    if cfg.E_cut is not None:
        lines.append(f"E_cut = {cfg.E_cut!r}")
    for i, c in enumerate(cfg.channels, start=1):
        lines += ["", f"[channel.{i}]"]
        for k in sorted(c):
            v = c[k]
            if isinstance(v, list):
                v = ", ".join(repr(x) for x in v)
            lines.append(f"{k} = {v}")
    for sec, d in (extra or {}).items():
        lines += ["", f"[{sec}]"]
        lines += [f"{k} = {d[k]}" for k in sorted(d)]
    return "\n".join(lines) + "\n"
