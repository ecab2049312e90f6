"""Config-driven experiment runner with bundled scenario fixtures.

An experiment is a JSON document: a ``kind`` picks the pipeline, ``system``
names the circuit or conductance model, ``params`` carries the kind-specific
knobs, and everything is validated against a strict schema (unknown keys are
rejected, so a typo cannot silently fall back to a default).  Running an
experiment writes a directory of artifacts:

* data tables as CSV (comma separator, '.' decimal, header row, LF endings),
* ``report.md`` with the headline numbers,
* ``manifest.json`` echoing the resolved config, the package version, the
  kernel in use, and a SHA-256 per artifact.

Nothing here computes physics: pipelines call the analysis and simulation
modules and format what comes back.  There are no timestamps and no RNG in
any pipeline, so rerunning a fixture reproduces every artifact byte for byte
on the same platform/kernel; ``--seedless`` additionally asserts that the
process-wide RNG state was never touched.

Verbs:
    run NAME|PATH...    run experiments (``--out``, ``--jobs``, ``--seedless``)
    list                catalog of bundled fixtures
    validate [NAME...]  validate configs without running (default: all bundled)
    export-schema       print the config JSON Schema
    serve               start the live session service

Exit codes: 0 success, 1 internal error, 2 malformed config, 3 unknown
fixture or missing config file, 4 runtime divergence (non-finite state, or
an RNG tripwire hit under ``--seedless``).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import copy
import hashlib
import json
import math
import random
import sys
from importlib import resources
from pathlib import Path

import numpy as np

import jsonschema

from . import __version__
from . import hardware, ivcurve, kernels, linearize, sim
from . import network as nw
from .core import NeuronSpec, mixed_feedback_spec
from .models import build_aplysia_r15, build_hodgkin_huxley

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNKNOWN = 3
EXIT_DIVERGED = 4

SCHEMA_VERSION = 1

KINDS = ("iv-curves", "single-neuron", "fI-curve", "rebound",
         "transition-sweep", "hco", "stg", "hardware-map", "linearize")


class ConfigError(Exception):
    """Config failed to parse or validate; message names the field."""


class UnknownFixtureError(Exception):
    pass


class DivergenceError(Exception):
    """A simulation left the finite domain, or a determinism tripwire hit."""


# -- config schema -----------------------------------------------------------

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NODE = {"type": "integer", "minimum": 0}

# Gain/offset/timescale knobs of the four-element circuit preset.  Strict on
# purpose: a misspelled key must fail validation, not silently do nothing.
_OVERRIDE_KEYS = ("alpha_fast_neg", "alpha_slow_pos", "alpha_slow_neg",
                  "alpha_ultra_pos", "delta_fast", "delta_slow_pos",
                  "delta_slow_neg", "delta_ultra", "tau_slow", "tau_ultra")

_OVERRIDES = {
    "type": "object",
    "additionalProperties": False,
    "properties": {k: _NUM for k in _OVERRIDE_KEYS},
}

_SPEC_REF = [
    {"type": "object", "additionalProperties": False, "required": ["preset"],
     "properties": {"preset": {"const": "mixed"}, "overrides": _OVERRIDES}},
    {"type": "object", "additionalProperties": False, "required": ["inline"],
     "properties": {"inline": {"type": "object"}}},
]

_MODEL_REF = {
    "type": "object", "additionalProperties": False, "required": ["model"],
    "properties": {"model": {"enum": ["hodgkin-huxley", "aplysia-r15"]},
                   "overrides": {"type": "object",
                                 "additionalProperties": _NUM}},
}

_PROTOCOL = {
    "type": "array",
    "items": {"oneOf": [
        {"type": "object", "additionalProperties": False,
         "required": ["type", "amplitude", "t0", "t1"],
         "properties": {"type": {"const": "step"}, "amplitude": _NUM,
                        "t0": _NUM, "t1": _NUM, "node": _NODE}},
        {"type": "object", "additionalProperties": False,
         "required": ["type", "amplitude", "t0", "width", "period", "count"],
         "properties": {"type": {"const": "train"}, "amplitude": _NUM,
                        "t0": _NUM, "width": _POS, "period": _POS,
                        "count": {"type": "integer", "minimum": 1},
                        "node": _NODE}},
        {"type": "object", "additionalProperties": False,
         "required": ["type", "i0", "i1", "t0", "t1"],
         "properties": {"type": {"const": "ramp"}, "i0": _NUM, "i1": _NUM,
                        "t0": _NUM, "t1": _NUM, "node": _NODE}},
        {"type": "object", "additionalProperties": False,
         "required": ["type", "path", "v0", "v1", "t0", "t1"],
         "properties": {"type": {"const": "param-ramp"},
                        "path": {"type": "string"}, "v0": _NUM, "v1": _NUM,
                        "t0": _NUM, "t1": _NUM}},
    ]},
}

_VARIANTS = {
    "type": "array", "minItems": 1,
    "items": {"type": "object", "additionalProperties": False,
              "required": ["name", "overrides"],
              "properties": {"name": {"type": "string", "minLength": 1},
                             "overrides": _OVERRIDES,
                             "i_app": _NUM}},
}

_WINDOWS = {
    "type": "array",
    "items": {"type": "object", "additionalProperties": False,
              "required": ["name", "t_from"],
              "properties": {"name": {"type": "string", "minLength": 1},
                             "t_from": _NUM, "t_to": _NUM}},
}

_PARAMS_DEFS = {
    "iv-curves": {
        "type": "object", "additionalProperties": False,
        "required": ["i_app"],
        "properties": {
            "i_app": {"type": "array", "minItems": 1, "items": _NUM},
            "v_min": _NUM, "v_max": _NUM,
            "points": {"type": "integer", "minimum": 3},
        },
    },
    "single-neuron": {
        "type": "object", "additionalProperties": False,
        "required": ["t_end"],
        "properties": {
            "i_app": _NUM, "t_end": _POS, "min_span": _POS,
            "variants": _VARIANTS, "windows": _WINDOWS,
            "include_baseline": {"type": "boolean"},
            "pulse_sweep": {
                "type": "object", "additionalProperties": False,
                "required": ["amplitudes", "width"],
                "properties": {
                    "amplitudes": {"type": "array", "minItems": 2,
                                   "items": _NUM},
                    "width": _POS},
            },
        },
    },
    "fI-curve": {
        "type": "object", "additionalProperties": False,
        "required": ["cases"],
        "properties": {
            "cases": {"type": "array", "minItems": 1, "items": {
                "type": "object", "additionalProperties": False,
                "required": ["name", "overrides", "i_values"],
                "properties": {
                    "name": {"type": "string", "minLength": 1},
                    "overrides": _OVERRIDES,
                    "i_values": {"type": "array", "minItems": 2,
                                 "items": _NUM},
                    "settle": _POS, "window": _POS},
            }},
        },
    },
    "rebound": {
        "type": "object", "additionalProperties": False,
        "required": ["i_app", "amplitude", "width"],
        "properties": {"i_app": _NUM, "amplitude": _NUM, "width": _POS,
                       "settle": _POS, "post": _POS, "min_span": _POS},
    },
    "transition-sweep": {
        "type": "object", "additionalProperties": False,
        "required": ["i_app", "cases"],
        "properties": {
            "i_app": _NUM, "settle": _POS, "window": _POS,
            "cases": {"type": "array", "minItems": 1, "items": {
                "type": "object", "additionalProperties": False,
                "required": ["name", "scale", "factors"],
                "properties": {
                    "name": {"type": "string", "minLength": 1},
                    "scale": {"type": "object", "minProperties": 1,
                              "additionalProperties": False,
                              "properties": {k: _NUM
                                             for k in _OVERRIDE_KEYS}},
                    "factors": {"type": "array", "minItems": 2,
                                "items": _NUM}},
            }},
        },
    },
    "hco": {
        "type": "object", "additionalProperties": False,
        "required": ["weight", "delta_syn", "i_base", "t_end", "t_from"],
        "properties": {
            "weight": _NUM, "delta_syn": _NUM, "tau_syn": _POS, "beta": _POS,
            "i_base": _NUM, "kick": _NUM, "t_end": _POS, "t_from": _NUM,
            "min_span": _POS, "variants": _VARIANTS,
            "include_baseline": {"type": "boolean"},
        },
    },
    "stg": {
        "type": "object", "additionalProperties": False,
        "required": ["fast", "slow", "hub", "gap_g", "weight", "delta_syn",
                     "i_base", "t_end", "t_from"],
        "properties": {
            "fast": {"oneOf": _SPEC_REF}, "slow": {"oneOf": _SPEC_REF},
            "hub": {"oneOf": _SPEC_REF},
            "gap_g": {"type": "number", "minimum": 0},
            "weight": _NUM, "delta_syn": _NUM, "tau_syn": _POS, "beta": _POS,
            "i_base": _NUM, "kick": _NUM, "t_end": _POS, "t_from": _NUM,
            "min_span": _POS,
            "modulation": {
                "type": "object", "additionalProperties": False,
                "required": ["nodes", "overrides"],
                "properties": {
                    "nodes": {"type": "array", "minItems": 1,
                              "items": {"enum": list(nw.STG_NODE_NAMES)}},
                    "overrides": _OVERRIDES},
            },
        },
    },
    "hardware-map": {
        "type": "object", "additionalProperties": False,
        "required": ["i_app"],
        "properties": {
            "i_app": _NUM, "G": _POS, "v_0": _POS, "c_membrane": _POS,
            "equivalence": {
                "type": "object", "additionalProperties": False,
                "required": ["t_end"],
                "properties": {"t_end": _POS, "dt": _POS,
                               "record_dt": _POS},
            },
        },
    },
    "linearize": {
        "type": "object", "additionalProperties": False,
        "properties": {"v_min": _NUM, "v_max": _NUM,
                       "points": {"type": "integer", "minimum": 3}},
    },
}


def _kind_clause(kind, needs_system, params_ref):
    then = {"properties": {"params": {"$ref": params_ref}}}
    if needs_system == "spec":
        then["required"] = ["system"]
        then["properties"]["system"] = {"oneOf": _SPEC_REF}
    elif needs_system == "any":
        then["required"] = ["system"]
    elif needs_system == "model":
        then["required"] = ["system"]
        then["properties"]["system"] = _MODEL_REF
    elif needs_system == "none":
        then["not"] = {"required": ["system"]}
    return {"if": {"properties": {"kind": {"const": kind}},
                   "required": ["kind"]},
            "then": then}


CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "neuromix experiment config",
    "type": "object",
    "additionalProperties": False,
    "required": ["schema", "kind", "name", "params"],
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "kind": {"enum": list(KINDS)},
        "name": {"type": "string", "pattern": "^[a-z][a-z0-9_]*$"},
        "title": {"type": "string"},
        "system": {"oneOf": _SPEC_REF + [_MODEL_REF]},
        "protocol": _PROTOCOL,
        "integrator": {"type": "object", "additionalProperties": False,
                       "properties": {"dt": _POS, "record_dt": _POS}},
        "params": {"type": "object"},
        "out_dir": {"type": "string", "minLength": 1},
    },
    "allOf": [
        _kind_clause("iv-curves", "spec", "#/$defs/iv-curves"),
        _kind_clause("single-neuron", "any", "#/$defs/single-neuron"),
        _kind_clause("fI-curve", "spec", "#/$defs/fI-curve"),
        _kind_clause("rebound", "spec", "#/$defs/rebound"),
        _kind_clause("transition-sweep", "spec", "#/$defs/transition-sweep"),
        _kind_clause("hco", "spec", "#/$defs/hco"),
        _kind_clause("stg", "none", "#/$defs/stg"),
        _kind_clause("hardware-map", "spec", "#/$defs/hardware-map"),
        _kind_clause("linearize", "model", "#/$defs/linearize"),
    ],
    "$defs": _PARAMS_DEFS,
}

_VALIDATOR = jsonschema.Draft202012Validator(CONFIG_SCHEMA)

# Defaults merged into params when absent; part of the resolved config the
# manifest echoes, so they are spelled out rather than buried in pipelines.
_PARAM_DEFAULTS = {
    "iv-curves": {"v_min": -4.0, "v_max": 4.0, "points": 1601},
    "single-neuron": {"i_app": 0.0, "min_span": sim.DEFAULT_MIN_SPAN,
                      "include_baseline": False, "windows": []},
    "fI-curve": {},
    "rebound": {"min_span": sim.DEFAULT_MIN_SPAN},
    "transition-sweep": {},
    "hco": {"tau_syn": 50.0, "beta": 8.0, "kick": 0.1,
            "min_span": sim.DEFAULT_MIN_SPAN, "include_baseline": False},
    "stg": {"tau_syn": 50.0, "beta": 8.0, "kick": 0.1,
            "min_span": sim.DEFAULT_MIN_SPAN},
    "hardware-map": {"G": hardware.DEFAULT_G, "v_0": hardware.DEFAULT_V0,
                     "c_membrane": hardware.DEFAULT_C},
    "linearize": {"points": 201},
}


def load_config(path: Path) -> dict:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise UnknownFixtureError(f"cannot read config {path}: {e}") from e
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON at line {e.lineno}, "
                          f"column {e.colno}: {e.msg}") from e
    return cfg


def validate_config(cfg) -> None:
    """Raise ConfigError naming the offending field on the first violation."""
    err = jsonschema.exceptions.best_match(_VALIDATOR.iter_errors(cfg))
    if err is not None:
        where = err.json_path
        raise ConfigError(f"config field {where}: {err.message}")


def resolve_config(cfg: dict) -> dict:
    """Validated config with every default made explicit.

    Idempotent: resolving, re-emitting as JSON, and resolving again yields
    the same document, which is the form the run manifest echoes.
    """
    validate_config(cfg)
    out = copy.deepcopy(cfg)
    out.setdefault("title", "")
    out.setdefault("protocol", [])
    out.setdefault("integrator", {})
    params = out["params"]
    for key, val in _PARAM_DEFAULTS[out["kind"]].items():
        params.setdefault(key, val)
    for entry in out["protocol"]:
        if entry["type"] in ("step", "train", "ramp"):
            entry.setdefault("node", 0)
    validate_config(out)
    return out


def _integrator(cfg: dict) -> dict:
    integ = cfg.get("integrator", {})
    return {"dt": integ.get("dt"), "record_dt": integ.get("record_dt")}


def emit_config(cfg: dict) -> str:
    return json.dumps(cfg, indent=2, sort_keys=True) + "\n"


# -- system and protocol construction -----------------------------------------

def _spec_from_ref(ref: dict, extra_overrides: dict | None = None) -> NeuronSpec:
    if "preset" in ref:
        kw = dict(ref.get("overrides", {}))
        if extra_overrides:
            kw.update(extra_overrides)
        return mixed_feedback_spec(**kw)
    if extra_overrides:
        raise ConfigError("parameter overrides need a preset-based system, "
                          "not an inline spec")
    try:
        return NeuronSpec.from_dict(ref["inline"])
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"config field $.system.inline: {e}") from e


_MODEL_BUILDERS = {"hodgkin-huxley": build_hodgkin_huxley,
                   "aplysia-r15": build_aplysia_r15}


def build_system(ref: dict):
    """('spec', NeuronSpec) or ('model', ConductanceModel) from a reference."""
    if "model" in ref:
        try:
            return "model", _MODEL_BUILDERS[ref["model"]](ref.get("overrides"))
        except (KeyError, ValueError) as e:
            raise ConfigError(f"config field $.system: {e}") from e
    return "spec", _spec_from_ref(ref)


_SEGMENT_TYPES = {
    "step": (sim.CurrentStep, ("amplitude", "t0", "t1", "node")),
    "train": (sim.PulseTrain, ("amplitude", "t0", "width", "period",
                               "count", "node")),
    "ramp": (sim.CurrentRamp, ("i0", "i1", "t0", "t1", "node")),
    "param-ramp": (sim.ParamRamp, ("path", "v0", "v1", "t0", "t1")),
}


def build_protocol(entries) -> tuple:
    out = []
    for entry in entries:
        cls, fields = _SEGMENT_TYPES[entry["type"]]
        out.append(cls(*(entry.get(f, 0) for f in fields)))
    return tuple(out)


def _finite(tr: sim.Trace) -> sim.Trace:
    if not np.all(np.isfinite(tr.y)):
        k = int(np.argmax(~np.isfinite(tr.y).all(axis=1)))
        raise DivergenceError(
            f"state left the finite domain near t = {tr.t[k]:g}; "
            "reduce the time step")
    return tr


# -- artifact writing ----------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return format(x, ".12g") if math.isfinite(x) else str(x)
    s = str(x)
    if "," in s or "\n" in s:
        raise ValueError(f"CSV cell may not contain separators: {s!r}")
    return s


class ArtifactSet:
    """Collects the files of one run and hashes them for the manifest."""

    def __init__(self, out_dir: Path):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.records: list[dict] = []

    def _write(self, name: str, data: bytes) -> None:
        (self.dir / name).write_bytes(data)
        self.records.append({"name": name, "bytes": len(data),
                             "sha256": hashlib.sha256(data).hexdigest()})

    def text(self, name: str, content: str) -> None:
        self._write(name, content.encode("utf-8"))

    def table(self, name: str, columns: dict) -> None:
        """CSV from named columns: comma, '.' decimal, header, LF."""
        cols = {k: list(v) for k, v in columns.items()}
        n = {len(v) for v in cols.values()}
        if len(n) > 1:
            raise ValueError(f"ragged columns in {name}: "
                             f"{ {k: len(v) for k, v in cols.items()} }")
        lines = [",".join(cols)]
        for row in zip(*cols.values()):
            lines.append(",".join(_fmt(x) for x in row))
        self.text(name, "\n".join(lines) + "\n")

    def trace(self, name: str, tr: sim.Trace, v_only: bool = False) -> None:
        cols = {"t": tr.t}
        if v_only:
            names = tr.meta.get("nodes") or [f"n{k}" for k
                                             in range(len(tr.node_v_index))]
            for label, idx in zip(names, tr.node_v_index):
                cols[f"v_{label}"] = tr.y[:, idx]
        else:
            for k, label in enumerate(tr.names):
                cols[label] = tr.y[:, k]
        self.table(name, cols)

    def finish(self, resolved_cfg: dict) -> None:
        # out_dir is wherever the manifest sits; echoing it would make the
        # same experiment hash differently under --out.
        echo = {k: v for k, v in resolved_cfg.items() if k != "out_dir"}
        manifest = {"tool": "neuromix", "version": __version__,
                    "kernel": kernels.IMPLEMENTATION, "config": echo,
                    "artifacts": sorted(self.records,
                                        key=lambda r: r["name"])}
        self.text("manifest.json", emit_config(manifest))


# -- shared report helpers -------------------------------------------------------

_QUIET = {"resting", "excitable", "burst-excitable"}


def _norm_regime(label: str) -> str:
    return "resting" if label in _QUIET else label


def _pattern(t, v, min_span: float):
    """Settled-trace rhythm label and stats via the network cycle detector."""
    return nw._cycle_events(np.asarray(t), np.asarray(v), min_span)


def _waveform_stats(t, v, min_span: float):
    """(floor, peak, trough): extremes plus the median dip between
    consecutive spikes of one burst, which separates plateau bursts
    (trough well above floor) from waveforms that return to baseline."""
    t = np.asarray(t)
    v = np.asarray(v)
    floor, peak = float(v.min()), float(v.max())
    spikes = sim.detect_spikes(t, v, min_span=min_span)
    dips = []
    for burst in sim.segment_bursts(spikes):
        for a, b in zip(burst[:-1], burst[1:]):
            m = (t >= a) & (t <= b)
            if m.any():
                dips.append(v[m].min())
    trough = float(np.median(dips)) if dips else float("nan")
    return floor, peak, trough


def _md_table(header: list[str], rows: list[list[str]]) -> str:
    out = ["| " + " | ".join(header) + " |",
           "|" + "|".join(" --- " for _ in header) + "|"]
    for r in rows:
        out.append("| " + " | ".join(r) + " |")
    return "\n".join(out) + "\n"


def _g(x, digits: int = 6) -> str:
    if x is None:
        return "-"
    x = float(x)
    return format(x, f".{digits}g") if math.isfinite(x) else str(x)


# -- pipelines -------------------------------------------------------------------

def _run_iv_curves(cfg, art):
    p = cfg["params"]
    spec = _spec_from_ref(cfg["system"])
    grid = np.linspace(p["v_min"], p["v_max"], p["points"])
    tags = [t for t in ("fast", "slow", "ultraslow")
            if t == "fast" or any(el.timescale == t for el in spec.elements)]
    curves = {tag: ivcurve.iv_curve(spec, tag, grid) for tag in tags}
    cols = {"v": grid}
    for tag in tags:
        cols[f"i_{tag}"] = curves[tag].current(grid)
    art.table("curves.csv", cols)

    tp_rows = {"timescale": [], "kind": [], "v": [], "i": []}
    for tag in tags:
        for tp in curves[tag].turning_points():
            tp_rows["timescale"].append(tag)
            tp_rows["kind"].append(tp.kind)
            tp_rows["v"].append(tp.v)
            tp_rows["i"].append(tp.i)
    art.table("turning_points.csv", tp_rows)

    reg = {"i_app": [], "v_rest": [], "predicted": [], "simulated": [],
           "agree": []}
    for i_app in p["i_app"]:
        pred = ivcurve.predict_regime(spec, i_app)
        beh = sim.classify_behavior(spec, i_app, dt=_integrator(cfg)["dt"])
        reg["i_app"].append(i_app)
        reg["v_rest"].append(pred.v_rest)
        reg["predicted"].append(pred.regime)
        reg["simulated"].append(beh.kind)
        reg["agree"].append(_norm_regime(pred.regime) == _norm_regime(beh.kind))
    art.table("regimes.csv", reg)

    lines = [f"# {cfg['name']}\n"]
    if cfg["title"]:
        lines.append(cfg["title"] + "\n")
    lines.append(f"\nCurves on v in [{_g(p['v_min'])}, {_g(p['v_max'])}] "
                 f"({p['points']} points), timescales: {', '.join(tags)}.\n\n")
    lines.append("## Turning points\n\n")
    lines.append(_md_table(
        ["timescale", "kind", "v", "i"],
        [[tag, k, _g(v), _g(i)] for tag, k, v, i
         in zip(tp_rows["timescale"], tp_rows["kind"], tp_rows["v"],
                tp_rows["i"])]))
    lines.append("\n## Regimes per applied current\n\n")
    lines.append("Prediction reads the rest point against the regenerative "
                 "windows; simulation classifies the settled trace.  The "
                 "quiet labels (resting / excitable / burst-excitable) all "
                 "mean no sustained firing.\n\n")
    lines.append(_md_table(
        ["i_app", "v_rest", "predicted", "simulated", "agree"],
        [[_g(i), _g(v), pr, si, str(ag).lower()] for i, v, pr, si, ag
         in zip(reg["i_app"], reg["v_rest"], reg["predicted"],
                reg["simulated"], reg["agree"])]))
    art.text("report.md", "".join(lines))


def _simulate_system(syskind, system, i_app, t_end, protocol, integ,
                     t0: float = 0.0):
    kw = {}
    if integ["dt"] is not None:
        kw["dt"] = integ["dt"]
    if syskind == "model":
        tr = system.simulate(t_end, i_app=i_app, protocol=protocol,
                             record_dt=integ["record_dt"], t0=t0, **kw)
    else:
        tr = sim.simulate(system, i_app, t_end, protocol=protocol,
                          record_dt=integ["record_dt"], t0=t0, **kw)
    return _finite(tr)


def _run_single_neuron(cfg, art):
    p = cfg["params"]
    integ = _integrator(cfg)
    syskind, system = build_system(cfg["system"])
    protocol = build_protocol(cfg["protocol"])
    if syskind == "model" and any(isinstance(s, sim.ParamRamp)
                                  for s in protocol):
        raise ConfigError("param-ramp drives apply to feedback circuits, "
                          "not conductance models")
    variants = p.get("variants") or [{"name": "", "overrides": {}}]
    if syskind == "model" and any(v["overrides"] for v in variants):
        raise ConfigError("variants with overrides need a preset-based "
                          "system, not a conductance model")

    lines = [f"# {cfg['name']}\n"]
    if cfg["title"]:
        lines.append(cfg["title"] + "\n")

    for var in variants:
        name = var["name"]
        suffix = f"_{name}" if name else ""
        if syskind == "spec" and var["overrides"]:
            system_v = _spec_from_ref(cfg["system"], var["overrides"])
        else:
            system_v = system
        i_var = var.get("i_app", p["i_app"])
        tr = _simulate_system(syskind, system_v, i_var, p["t_end"],
                              protocol, integ)
        art.trace(f"trace{suffix}.csv", tr)
        head = f"## variant {name}" if name else "## trace"
        lines.append(f"\n{head}\n\n")
        windows = p["windows"] or [{"name": "settled",
                                    "t_from": 0.5 * p["t_end"]}]
        rows = []
        for w in windows:
            seg = tr.window(w["t_from"], w.get("t_to"))
            pat = _pattern(seg.t, seg.v(), p["min_span"])
            floor, peak, trough = _waveform_stats(seg.t, seg.v(),
                                                  p["min_span"])
            # How far the between-spike dips sit above the floor, as a
            # fraction of total swing: near 0 when each cycle returns to
            # baseline, large when spikes ride on a sustained plateau.
            span = peak - floor
            ride = (trough - floor) / span if span > 0 else float("nan")
            rows.append([w["name"], _g(w["t_from"]),
                         _g(w.get("t_to", p["t_end"])), pat.pattern,
                         _g(pat.frequency), str(pat.n_spikes),
                         _g(floor), _g(peak), _g(ride)])
        lines.append(_md_table(
            ["window", "t_from", "t_to", "pattern", "frequency", "spikes",
             "v_floor", "v_peak", "dip_above_floor"],
            rows))
        if p["include_baseline"]:
            trb = _simulate_system(syskind, system_v, i_var, p["t_end"],
                                   (), integ)
            art.trace(f"trace{suffix}_baseline.csv", trb)
            w0 = windows[0]
            seg = tr.window(w0["t_from"], w0.get("t_to"))
            segb = trb.window(w0["t_from"], w0.get("t_to"))
            n = len(sim.detect_spikes(seg.t, seg.v(),
                                      min_span=p["min_span"]))
            nb = len(sim.detect_spikes(segb.t, segb.v(),
                                       min_span=p["min_span"]))
            lines.append(f"\nSpikes in window {w0['name']!r}: "
                         f"{nb} without the drive, {n} with it "
                         f"({n - nb:+d}).\n")

    if "pulse_sweep" in p:
        ps = p["pulse_sweep"]
        rep = sim.pulse_response_test(system, ps["amplitudes"], ps["width"],
                                      i_app=p["i_app"],
                                      min_span=p["min_span"])
        art.table("pulse_peaks.csv", {"amplitude": rep.amplitudes,
                                      "peak": rep.peaks})
        gap_lo, gap_hi = rep.gap
        lines.append("\n## pulse sweep\n\n")
        lines.append(f"Rest at v = {_g(rep.v_rest)}; peak deflections jump "
                     f"from {_g(gap_lo)} to {_g(gap_hi)} across the largest "
                     f"gap ({_g(gap_hi - gap_lo)} wide).\n")
        if rep.bracket is not None:
            lo, hi = rep.bracket
            lines.append(f"All-or-none bracket: threshold between "
                         f"amplitude {_g(lo)} and {_g(hi)}.\n")
            post = 50.0 * ps["width"]
            for tag, amp in (("sub", lo), ("supra", hi)):
                pulse = (sim.CurrentStep(amp, 5.0, 5.0 + ps["width"]),)
                trp = _simulate_system(syskind, system, p["i_app"],
                                       5.0 + ps["width"] + post, pulse,
                                       integ)
                art.trace(f"trace_pulse_{tag}.csv", trp)
        else:
            lines.append("No all-or-none split on this amplitude grid.\n")

    art.text("report.md", "".join(lines))


def _run_fi_curve(cfg, art):
    p = cfg["params"]
    integ = _integrator(cfg)
    lines = [f"# {cfg['name']}\n"]
    if cfg["title"]:
        lines.append(cfg["title"] + "\n")
    for case in p["cases"]:
        spec = _spec_from_ref(cfg["system"], case["overrides"])
        kw = {}
        if "settle" in case:
            kw["settle"] = case["settle"]
        if "window" in case:
            kw["window"] = case["window"]
        if integ["dt"] is not None:
            kw["dt"] = integ["dt"]
        fi = sim.measure_fI_curve(spec, case["i_values"], **kw)
        onset = sim.classify_onset(fi)
        art.table(f"fi_{case['name']}.csv",
                  {"i_app": fi.i, "frequency": fi.f, "kind": fi.kinds})
        mask = fi.spiking_mask()
        f_first = fi.f[mask][0] if mask.any() else None
        f_last = fi.f[mask][-1] if mask.any() else None
        lines.append(f"\n## case {case['name']}\n\n")
        lines.append(f"Onset class: **{onset}**.  First spiking frequency "
                     f"{_g(f_first)}, last {_g(f_last)}.\n\n")
        lines.append(_md_table(
            ["i_app", "frequency", "kind"],
            [[_g(i, 10), _g(f), k] for i, f, k
             in zip(fi.i, fi.f, fi.kinds)]))
    art.text("report.md", "".join(lines))


def _run_rebound(cfg, art):
    p = cfg["params"]
    integ = _integrator(cfg)
    spec = _spec_from_ref(cfg["system"])
    slowest = spec.slowest_tau()
    settle = p.get("settle", sim.SETTLE_TAU * slowest)
    post = p.get("post", 4.0 * slowest)
    rep = sim.rebound_test(spec, p["i_app"], p["amplitude"], p["width"],
                           settle=settle, post=post,
                           dt=integ["dt"], min_span=p["min_span"])
    protocol = (sim.CurrentStep(p["amplitude"], settle, settle + p["width"]),)
    tr = _finite(sim.simulate(spec, p["i_app"], settle + p["width"] + post,
                              protocol=protocol, dt=integ["dt"],
                              record_dt=integ["record_dt"]))
    art.trace("trace.csv", tr)
    art.table("rebound_spikes.csv", {"spike_t": rep.spike_times})
    lines = [f"# {cfg['name']}\n"]
    if cfg["title"]:
        lines.append(cfg["title"] + "\n")
    lines.append(
        f"\nHolding current {_g(p['i_app'])}, pulse {_g(p['amplitude'])} "
        f"for {_g(p['width'])} time units, released at "
        f"t = {_g(rep.release_t)}.\n\n"
        f"Baseline spikes (no pulse): {rep.n_baseline}.  Spikes after "
        f"release: {rep.n_spikes}.  Post-release pattern: "
        f"{rep.behavior}.\n")
    art.text("report.md", "".join(lines))


def _run_transition_sweep(cfg, art):
    p = cfg["params"]
    integ = _integrator(cfg)
    lines = [f"# {cfg['name']}\n"]
    if cfg["title"]:
        lines.append(cfg["title"] + "\n")
    kw = {}
    if "settle" in p:
        kw["settle"] = p["settle"]
    if "window" in p:
        kw["window"] = p["window"]
    if integ["dt"] is not None:
        kw["dt"] = integ["dt"]
    for case in p["cases"]:
        names = sorted(case["scale"])
        cols = {"factor": []}
        for nm in names:
            cols[nm] = []
        cols.update(kind=[], intraburst_rate=[], interburst_rate=[],
                    n_bursts=[])
        for k in case["factors"]:
            over = {nm: case["scale"][nm] * k for nm in names}
            spec = _spec_from_ref(cfg["system"], over)
            beh = sim.classify_behavior(spec, p["i_app"], **kw)
            cols["factor"].append(k)
            for nm in names:
                cols[nm].append(over[nm])
            cols["kind"].append(beh.kind)
            cols["intraburst_rate"].append(beh.intraburst_rate)
            cols["interburst_rate"].append(beh.interburst_rate)
            cols["n_bursts"].append(beh.n_bursts)
        art.table(f"sweep_{case['name']}.csv", cols)
        intra, inter = cols["intraburst_rate"], cols["interburst_rate"]

        def trend(vals):
            v = [x for x in vals if math.isfinite(x)]
            if len(v) < 2:
                return "flat"
            if all(a < b for a, b in zip(v, v[1:])):
                return "strictly increasing"
            if all(a > b for a, b in zip(v, v[1:])):
                return "strictly decreasing"
            return "non-monotone"

        scaled = ", ".join(f"{nm} = {_g(case['scale'][nm])} x factor"
                           for nm in names)
        lines.append(f"\n## case {case['name']}\n\n")
        lines.append(f"Scaled: {scaled} at i_app = {_g(p['i_app'])}.\n\n"
                     f"Within-burst rate is {trend(intra)} over the sweep; "
                     f"between-burst rate is {trend(inter)}.\n\n")
        lines.append(_md_table(
            ["factor", "kind", "intraburst", "interburst"],
            [[_g(f), k, _g(a), _g(b)] for f, k, a, b
             in zip(cols["factor"], cols["kind"], intra, inter)]))
    art.text("report.md", "".join(lines))


def _rhythm_tables(art, suffix, rhythm):
    nodes = {"node": [], "pattern": [], "frequency": [], "period": [],
             "duty": [], "n_spikes": []}
    for name, nr in rhythm.nodes.items():
        nodes["node"].append(name)
        nodes["pattern"].append(nr.pattern)
        nodes["frequency"].append(nr.frequency)
        nodes["period"].append(nr.period)
        nodes["duty"].append(nr.duty)
        nodes["n_spikes"].append(nr.n_spikes)
    art.table(f"rhythm{suffix}.csv", nodes)
    pairs = {"a": [], "b": [], "locked": [], "phase": [], "coherence": [],
             "period": []}
    for (a, b), pr in rhythm.pairs.items():
        pairs["a"].append(a)
        pairs["b"].append(b)
        pairs["locked"].append(pr.locked)
        pairs["phase"].append(pr.phase)
        pairs["coherence"].append(pr.coherence)
        pairs["period"].append(pr.period)
    art.table(f"pairs{suffix}.csv", pairs)
    return nodes, pairs


def _rhythm_report_md(nodes, pairs):
    out = [_md_table(
        ["node", "pattern", "frequency", "period", "duty", "spikes"],
        [[n, p, _g(f), _g(t), _g(d), str(s)] for n, p, f, t, d, s
         in zip(nodes["node"], nodes["pattern"], nodes["frequency"],
                nodes["period"], nodes["duty"], nodes["n_spikes"])])]
    if pairs["a"]:
        out.append("\n")
        out.append(_md_table(
            ["pair", "locked", "phase", "coherence", "period"],
            [[f"{a}-{b}", str(l).lower(), _g(ph), _g(c), _g(t)]
             for a, b, l, ph, c, t
             in zip(pairs["a"], pairs["b"], pairs["locked"], pairs["phase"],
                    pairs["coherence"], pairs["period"])]))
    return "".join(out)


def _run_hco(cfg, art):
    p = cfg["params"]
    integ = _integrator(cfg)
    protocol = build_protocol(cfg["protocol"])
    variants = p.get("variants") or [{"name": "", "overrides": {}}]
    lines = [f"# {cfg['name']}\n"]
    if cfg["title"]:
        lines.append(cfg["title"] + "\n")
    for var in variants:
        name = var["name"]
        suffix = f"_{name}" if name else ""
        spec = _spec_from_ref(cfg["system"], var["overrides"])
        net = nw.build_half_center(spec, p["weight"], p["delta_syn"],
                                   tau_syn=p["tau_syn"], beta=p["beta"],
                                   i_base=p["i_base"], kick=p["kick"])
        asm = nw.assemble_network(net)
        tr = _finite(asm.simulate(p["t_end"], protocol=protocol,
                                  dt=integ["dt"],
                                  record_dt=integ["record_dt"]))
        art.trace(f"trace{suffix}.csv", tr, v_only=True)
        rhythm = nw.rhythm_report(tr, t_from=p["t_from"],
                                  min_span=p["min_span"])
        nodes, pairs = _rhythm_tables(art, suffix, rhythm)
        head = f"## variant {name}" if name else "## rhythm"
        lines.append(f"\n{head}\n\n")
        lines.append(_rhythm_report_md(nodes, pairs))
        if p["include_baseline"]:
            trb = _finite(asm.simulate(p["t_end"], dt=integ["dt"],
                                       record_dt=integ["record_dt"]))
            art.trace(f"trace{suffix}_baseline.csv", trb, v_only=True)
            w, wb = tr.window(p["t_from"]), trb.window(p["t_from"])
            deltas = []
            for k, node in enumerate(asm.net.names):
                n1 = len(sim.detect_spikes(w.t, w.v(k),
                                           min_span=p["min_span"]))
                n0 = len(sim.detect_spikes(wb.t, wb.v(k),
                                           min_span=p["min_span"]))
                deltas.append(f"{node}: {n0} -> {n1} ({n1 - n0:+d})")
            lines.append(f"\nSpikes after t = {_g(p['t_from'])} without vs "
                         f"with the drive: {'; '.join(deltas)}.\n")
    art.text("report.md", "".join(lines))


def _spectrum_peak(freqs, power, f0: float, halfwidth: float = 0.15):
    """Peak power within +-halfwidth of f0, against the median background."""
    band = (freqs >= f0 * (1 - halfwidth)) & (freqs <= f0 * (1 + halfwidth))
    if not band.any():
        return float("nan"), float("nan")
    peak = float(power[band].max())
    back = float(np.median(power[(freqs > 0)]))
    return peak, peak / back if back > 0 else float("inf")


def _run_stg(cfg, art):
    p = cfg["params"]
    integ = _integrator(cfg)
    refs = {"fast": p["fast"], "slow": p["slow"], "hub": p["hub"]}
    specs = {k: _spec_from_ref(r) for k, r in refs.items()}
    net = nw.build_stg(specs["fast"], specs["slow"], specs["hub"],
                       p["gap_g"], p["weight"], p["delta_syn"],
                       tau_syn=p["tau_syn"], beta=p["beta"],
                       i_base=p["i_base"], kick=p["kick"])
    base_ref = {"fast_a": "fast", "fast_b": "fast", "slow_a": "slow",
                "slow_b": "slow", "hub": "hub"}
    if "modulation" in p:
        mod = p["modulation"]
        for node in mod["nodes"]:
            spec_m = _spec_from_ref(refs[base_ref[node]], mod["overrides"])
            net = nw.with_node_spec(net, node, spec_m)
    asm = nw.assemble_network(net)
    tr = _finite(asm.simulate(p["t_end"], protocol=build_protocol(cfg["protocol"]),
                              dt=integ["dt"], record_dt=integ["record_dt"]))
    art.trace("trace.csv", tr, v_only=True)
    rhythm = nw.rhythm_report(tr, t_from=p["t_from"], min_span=p["min_span"])
    nodes, pairs = _rhythm_tables(art, "", rhythm)
    lines = [f"# {cfg['name']}\n"]
    if cfg["title"]:
        lines.append(cfg["title"] + "\n")
    lines.append("\n## rhythm\n\n")
    lines.append(_rhythm_report_md(nodes, pairs))

    w = tr.window(p["t_from"])
    hub_idx = list(net.names).index("hub")
    freqs, power = nw.power_spectrum(w.t, w.v(hub_idx))
    art.table("spectrum_hub.csv", {"frequency": freqs, "power": power})
    lines.append("\n## hub spectrum\n\n")
    for pair_name in ("fast_a", "slow_a"):
        f_pair = rhythm.node(pair_name).frequency
        if not math.isfinite(f_pair):
            continue
        # An anti-phase pair drives the hub twice per pair cycle, so the
        # hub's coupling signature sits at 2x the pair frequency.
        peak, ratio = _spectrum_peak(freqs, power, 2.0 * f_pair)
        lines.append(f"Power near 2 x f({pair_name}) = {_g(2 * f_pair)}: "
                     f"{_g(peak)} ({_g(ratio)} x median background).\n")

    if p["gap_g"] == 0.0:
        lines.append("\n## isolated pair check\n\n")
        for tag, node in (("fast", "fast_a"), ("slow", "slow_a")):
            hco = nw.build_half_center(specs[tag], p["weight"],
                                       p["delta_syn"], tau_syn=p["tau_syn"],
                                       beta=p["beta"], i_base=p["i_base"],
                                       kick=p["kick"])
            tri = _finite(nw.assemble_network(hco).simulate(
                p["t_end"], dt=integ["dt"], record_dt=integ["record_dt"]))
            f_iso = nw.rhythm_report(tri, t_from=p["t_from"],
                                     min_span=p["min_span"]).node("a").frequency
            f_net = rhythm.node(node).frequency
            dev = abs(f_net - f_iso) / f_iso if f_iso else float("nan")
            lines.append(f"{tag} pair: {_g(f_net)} in the network vs "
                         f"{_g(f_iso)} isolated ({_g(100 * dev, 3)}% off).\n")
    art.text("report.md", "".join(lines))


def _run_hardware_map(cfg, art):
    p = cfg["params"]
    spec = _spec_from_ref(cfg["system"])
    sheet = hardware.map_spec_to_hardware(spec, p["i_app"], G=p["G"],
                                          v_0=p["v_0"],
                                          c_membrane=p["c_membrane"])
    sc = hardware.hardware_scales(spec, G=p["G"], v_0=p["v_0"],
                                  c_membrane=p["c_membrane"])
    art.text("sheet.csv", sheet.to_csv())
    lines = [f"# {cfg['name']}\n"]
    if cfg["title"]:
        lines.append(cfg["title"] + "\n")
    lines.append(
        f"\nLeak {_g(p['G'])} S, thermal scale {_g(p['v_0'])} V, membrane "
        f"{_g(p['c_membrane'])} F.  One unit of model voltage = "
        f"{_g(sc.voltage)} V, current = {_g(sc.current)} A, time = "
        f"{_g(sc.time)} s.  Membrane time constant "
        f"T_v = {_g(sheet.t_v)} s.\n\n")
    lines.append(_md_table(
        ["element", "sign", "timescale", "i_b (A)", "v_delta (V)",
         "C (F)", "T (s)"],
        [[r.label, f"{r.sign:+d}", r.timescale, _g(r.params.i_b),
          _g(r.params.v_delta), _g(r.params.C),
          _g(r.params.time_constant)] for r in sheet.rows]))
    if "equivalence" in p:
        eq = p["equivalence"]
        dt = eq.get("dt", sim.default_dt(spec))
        rdt = eq.get("record_dt", dt)
        ref = _finite(sim.simulate(spec, p["i_app"], eq["t_end"], dt=dt,
                                   record_dt=rdt))
        si = _finite(hardware.simulate_hardware(
            spec, p["i_app"] * sc.current, eq["t_end"] * sc.time,
            dt=dt * sc.time, record_dt=rdt * sc.time, G=p["G"],
            v_0=p["v_0"], c_membrane=p["c_membrane"]))
        back = hardware.rescale_trace(si)
        err = np.abs(back.v() - ref.v())
        art.table("equivalence.csv",
                  {"t": ref.t, "v_reference": ref.v(),
                   "v_mapped_rescaled": back.v(), "abs_err": err})
        lines.append(
            f"\nSimulating the mapped circuit in SI units and undoing the "
            f"change of variables reproduces the dimensionless trace to "
            f"max |dv| = {_g(float(err.max()), 3)} over "
            f"{_g(eq['t_end'])} time units.\n")
    art.text("report.md", "".join(lines))


def _run_linearize(cfg, art):
    p = cfg["params"]
    _, model = build_system(cfg["system"])
    lo, hi = model.voltage_window
    v_min = p.get("v_min", lo)
    v_max = p.get("v_max", hi)
    grid = np.linspace(v_min, v_max, p["points"])
    table = linearize.conductance_profiles(model, grid)
    art.text("conductances.csv", linearize.profiles_to_csv(table))
    lines = [f"# {cfg['name']}\n"]
    if cfg["title"]:
        lines.append(cfg["title"] + "\n")
    lines.append(f"\nLocal conductance of {model.name} per timescale group "
                 f"on [{_g(v_min)}, {_g(v_max)}] mV.\n\n")
    for group in table:
        if group in ("v", "G"):
            continue
        y = table[group]
        neg = []
        start = None
        for k in range(len(grid)):
            if y[k] < 0 and start is None:
                start = grid[k]
            elif y[k] >= 0 and start is not None:
                neg.append((start, grid[k - 1]))
                start = None
        if start is not None:
            neg.append((start, grid[-1]))
        if neg:
            span = ", ".join(f"[{_g(a, 4)}, {_g(b, 4)}]" for a, b in neg)
            lines.append(f"* {group}: negative on {span}\n")
        else:
            lines.append(f"* {group}: nonnegative on the whole window\n")
    art.text("report.md", "".join(lines))


_PIPELINES = {
    "iv-curves": _run_iv_curves,
    "single-neuron": _run_single_neuron,
    "fI-curve": _run_fi_curve,
    "rebound": _run_rebound,
    "transition-sweep": _run_transition_sweep,
    "hco": _run_hco,
    "stg": _run_stg,
    "hardware-map": _run_hardware_map,
    "linearize": _run_linearize,
}


# -- fixture registry ------------------------------------------------------------

def _fixture_dir():
    return resources.files("neuromix") / "experiments"


def fixture_path(name: str) -> Path:
    p = Path(str(_fixture_dir() / f"{name}.json"))
    if not p.is_file():
        raise UnknownFixtureError(
            f"unknown fixture {name!r}; `neuromix list` shows the catalog")
    return p


def list_fixtures() -> list[tuple[str, str, str]]:
    """(name, kind, title) per bundled fixture, sorted by name."""
    out = []
    for entry in sorted(Path(str(_fixture_dir())).glob("*.json")):
        cfg = json.loads(entry.read_text(encoding="utf-8"))
        out.append((cfg["name"], cfg["kind"], cfg.get("title", "")))
    return out


def _locate(arg: str) -> Path:
    """Bundled fixture name, else a config file path."""
    looks_like_path = any(c in arg for c in "/\\") or arg.endswith(".json")
    if not looks_like_path:
        return fixture_path(arg)
    p = Path(arg)
    if not p.is_file():
        raise UnknownFixtureError(f"no config file at {arg}")
    return p


# -- run driver --------------------------------------------------------------------

def _rng_fingerprint():
    st = np.random.get_state()
    return (random.getstate(), st[0], st[1].tobytes(), st[2:])


def run_experiment(arg: str, out_root: str | None = None,
                   seedless: bool = False) -> Path:
    """Run one experiment by fixture name or config path; returns out dir."""
    path = _locate(arg)
    cfg = resolve_config(load_config(path))
    if out_root is not None:
        out_dir = Path(out_root) / cfg["name"]
    elif "out_dir" in cfg:
        out_dir = Path(cfg["out_dir"])
    else:
        out_dir = Path("runs") / cfg["name"]
    before = _rng_fingerprint() if seedless else None
    art = ArtifactSet(out_dir)
    _PIPELINES[cfg["kind"]](cfg, art)
    if seedless and _rng_fingerprint() != before:
        raise DivergenceError(
            "process-wide RNG state changed during the run; the pipelines "
            "must not draw random numbers")
    art.finish(cfg)
    return out_dir


def _run_one_cli(arg: str, out_root, seedless) -> tuple[str, int, str]:
    try:
        out = run_experiment(arg, out_root, seedless)
        return arg, EXIT_OK, str(out)
    except ConfigError as e:
        return arg, EXIT_CONFIG, str(e)
    except UnknownFixtureError as e:
        return arg, EXIT_UNKNOWN, str(e)
    except DivergenceError as e:
        return arg, EXIT_DIVERGED, str(e)
    except Exception as e:  # a bug; report it without killing sibling runs
        return arg, 1, f"internal error: {type(e).__name__}: {e}"


# -- CLI ---------------------------------------------------------------------------

def _cmd_run(args) -> int:
    worst = EXIT_OK
    if args.jobs > 1 and len(args.experiment) > 1:
        with concurrent.futures.ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_run_one_cli, args.experiment,
                                    [args.out] * len(args.experiment),
                                    [args.seedless] * len(args.experiment)))
    else:
        results = [_run_one_cli(a, args.out, args.seedless)
                   for a in args.experiment]
    for name, code, msg in results:
        if code == EXIT_OK:
            print(f"{name}: ok ({msg})")
        else:
            print(f"{name}: error: {msg}", file=sys.stderr)
            worst = max(worst, code)
    return worst


def _cmd_list(args) -> int:
    for name, kind, title in list_fixtures():
        print(f"{name:24s} {kind:18s} {title}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    targets = args.experiment or [n for n, _, _ in list_fixtures()]
    worst = EXIT_OK
    for arg in targets:
        try:
            resolve_config(load_config(_locate(arg)))
            print(f"{arg}: ok")
        except ConfigError as e:
            print(f"{arg}: error: {e}", file=sys.stderr)
            worst = max(worst, EXIT_CONFIG)
        except UnknownFixtureError as e:
            print(f"{arg}: error: {e}", file=sys.stderr)
            worst = max(worst, EXIT_UNKNOWN)
    return worst


def _cmd_export_schema(args) -> int:
    doc = json.dumps(CONFIG_SCHEMA, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(doc, encoding="utf-8")
    else:
        sys.stdout.write(doc)
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from . import service
    uvicorn.run(service.app, host=args.host, port=args.port,
                log_level="warning")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="neuromix",
        description="Run mixed-feedback circuit experiments from JSON "
                    "configs and write CSV/report artifacts.",
        epilog="Exit codes: 0 success, 1 internal error, 2 malformed "
               "config, 3 unknown fixture or missing file, 4 runtime "
               "divergence.")
    parser.add_argument("--version", action="version",
                        version=f"neuromix {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="run experiments")
    p_run.add_argument("experiment", nargs="+",
                       help="bundled fixture name or config file path")
    p_run.add_argument("--out", help="output root (default: runs/ or the "
                                     "config's out_dir)")
    p_run.add_argument("--jobs", type=int, default=1,
                       help="run this many experiments in parallel")
    p_run.add_argument("--seedless", action="store_true",
                       help="assert that no pipeline touches the "
                            "process-wide RNG")
    p_run.set_defaults(fn=_cmd_run)

    p_list = sub.add_parser("list", help="catalog of bundled fixtures")
    p_list.set_defaults(fn=_cmd_list)

    p_val = sub.add_parser("validate",
                           help="validate configs without running")
    p_val.add_argument("experiment", nargs="*",
                       help="fixture names or config paths "
                            "(default: every bundled fixture)")
    p_val.set_defaults(fn=_cmd_validate)

    p_schema = sub.add_parser("export-schema",
                              help="print the config JSON Schema")
    p_schema.add_argument("--out", help="write to a file instead of stdout")
    p_schema.set_defaults(fn=_cmd_export_schema)

    p_serve = sub.add_parser("serve", help="start the live session service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.set_defaults(fn=_cmd_serve)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
