"""Experiment configuration: schema validation and defaults.

The schema lives in ``schema.yaml`` next to this module.  Validation never
raises on bad content; it returns a list of human-readable problems, each
naming the offending dotted key.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

_SCALARS = {"float", "int", "bool", "str"}


class ConfigError(ValueError):
    """The configuration cannot be used (unreadable or invalid)."""

    def __init__(self, problems):
        problems = [problems] if isinstance(problems, str) else list(problems)
        super().__init__("; ".join(problems))
        self.problems = problems


def load_schema() -> dict:
    text = resources.files("kplateau").joinpath("schema.yaml").read_text()
    return yaml.safe_load(text)


@dataclass
class ExperimentConfig:
    """A validated configuration tree with defaults filled in."""

    kind: str
    data: dict
    path: Path
    seed: int = 0
    output_dir: Path = field(default_factory=lambda: Path("out"))
    threads: int = 1

    def block(self, name: str) -> dict:
        return self.data.get(name, {})


def _check_leaf(spec: dict, value: Any, key: str, out: list) -> None:
    t = spec["type"]
    if t == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            out.append(f"{key}: expected a finite number, got {value!r}")
            return
    elif t == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            out.append(f"{key}: expected an integer, got {value!r}")
            return
    elif t == "bool":
        if not isinstance(value, bool):
            out.append(f"{key}: expected true/false, got {value!r}")
        return
    elif t == "str":
        if not isinstance(value, str):
            out.append(f"{key}: expected a string, got {value!r}")
            return
    elif t in ("vec3", "floats", "ints"):
        if not isinstance(value, list):
            out.append(f"{key}: expected a list, got {value!r}")
            return
        want_int = t == "ints"
        for v in value:
            ok = isinstance(v, int) if want_int else isinstance(v, (int, float)) and math.isfinite(v)
            if isinstance(v, bool) or not ok:
                out.append(f"{key}: bad list entry {v!r}")
                return
        if t == "vec3" and len(value) != 3:
            out.append(f"{key}: expected three components")
        return
    if "choices" in spec and value not in spec["choices"]:
        out.append(f"{key}: {value!r} not one of {spec['choices']}")
    if "min" in spec and value < spec["min"]:
        out.append(f"{key}: {value} below minimum {spec['min']}")
    if "max" in spec and value > spec["max"]:
        out.append(f"{key}: {value} above maximum {spec['max']}")


def _check_section(schema: dict, data: Any, prefix: str, out: list) -> None:
    if not isinstance(data, dict):
        out.append(f"{prefix or 'config'}: expected a mapping")
        return
    for k in data:
        if k not in schema:
            out.append(f"unknown key: {prefix}{k}")
    for k, spec in schema.items():
        key = f"{prefix}{k}"
        if k not in data:
            if spec.get("required"):
                out.append(f"missing required key: {key}")
            continue
        v = data[k]
        if spec["type"] == "section":
            _check_section(spec["keys"], v, key + ".", out)
        elif spec["type"] == "sections":
            if not isinstance(v, list):
                out.append(f"{key}: expected a list of mappings")
                continue
            for i, item in enumerate(v):
                _check_section(spec["keys"], item, f"{key}[{i}].", out)
        else:
            _check_leaf(spec, v, key, out)


def _defaults(schema: dict, data: dict) -> dict:
    out = {}
    for k, spec in schema.items():
        if spec["type"] == "section":
            out[k] = _defaults(spec["keys"], data.get(k, {}) or {})
        elif spec["type"] == "sections":
            out[k] = [_defaults(spec["keys"], item) for item in data.get(k, [])]
        elif k in data:
            out[k] = data[k]
        elif "default" in spec:
            out[k] = spec["default"]
    return out


def read_raw(path) -> dict:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def _semantic(data: dict, path: Path, out: list) -> None:
    """Cross-field checks that the per-key schema cannot express."""
    kind = data.get("kind")
    sec = data.get("section", {})
    if kind in ("kp", "linked", "dimred") and isinstance(sec, dict):
        if ("radius" in sec) == ("vertices" in sec):
            out.append("section: give exactly one of radius or vertices")
        v = sec.get("vertices")
        if isinstance(v, list) and (len(v) < 6 or len(v) % 2):
            out.append("section.vertices: need an even count of at least 6 numbers")
    if kind in ("plateau-disc", "plateau-mesh", "quasistatic"):
        curves = data.get("boundary", {}).get("curves", []) if isinstance(data.get("boundary"), dict) else []
        if not curves:
            out.append("boundary.curves: at least one curve required")
        for i, c in enumerate(curves if isinstance(curves, list) else []):
            if isinstance(c, dict) and c.get("shape") == "file":
                f = c.get("file")
                if not f:
                    out.append(f"boundary.curves[{i}].file: required for shape 'file'")
                elif not (path.parent / f).exists():
                    out.append(f"boundary.curves[{i}].file: {f} does not exist")
            if isinstance(c, dict) and c.get("shape") == "ellipse":
                r = c.get("radii")
                if not (isinstance(r, list) and len(r) == 2 and all(isinstance(x, (int, float)) and x > 0 for x in r)):
                    out.append(f"boundary.curves[{i}].radii: two positive semi-axes required")
    if kind in ("linked", "repulsive") and "rod2" not in data:
        out.append("rod2: required for this kind")
    lk = data.get("linked", {})
    if isinstance(lk, dict) and ("h_epsilon" in lk) != ("h_slope" in lk):
        out.append("linked: h_epsilon and h_slope go together")
    if kind == "dimred":
        eps = data.get("dimred", {}).get("eps", [0.2, 0.1, 0.05]) if isinstance(data.get("dimred"), dict) else []
        if isinstance(eps, list) and (any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:]))):
            out.append("dimred.eps: must be positive and strictly decreasing")
    if kind == "minimal-graph":
        dom = data.get("graph", {}).get("domain", [0, 1, 0, 1]) if isinstance(data.get("graph"), dict) else []
        if isinstance(dom, list) and (len(dom) != 4 or dom[0] >= dom[1] or dom[2] >= dom[3]):
            out.append("graph.domain: expected [x0, x1, y0, y1] with x0 < x1 and y0 < y1")


def validate(path) -> list[str]:
    """Problems found in the config at ``path``; empty when it is valid."""
    try:
        data = read_raw(path)
    except ConfigError as exc:
        return exc.problems
    out: list[str] = []
    _check_section(load_schema(), data, "", out)
    if not out:
        _semantic(data, Path(path), out)
    return out


def load(path, seed: int | None = None, output_dir=None, threads: int | None = None) -> ExperimentConfig:
    """Validate and return the config with defaults; command-line overrides win."""
    path = Path(path)
    problems = validate(path)
    if problems:
        raise ConfigError(problems)
    raw = read_raw(path)
    data = _defaults(load_schema(), raw)
    for opt in ("rod2",):
        if opt not in raw:
            data.pop(opt, None)
    out_dir = Path(output_dir) if output_dir is not None else Path(data["output_dir"])
    return ExperimentConfig(
        kind=data["kind"],
        data=data,
        path=path,
        seed=data["seed"] if seed is None else int(seed),
        output_dir=out_dir,
        threads=data["threads"] if threads is None else int(threads),
    )
