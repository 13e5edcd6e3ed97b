"""Run configuration documents: JSON schema, dotted overrides, and materialized objects."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from importlib import resources

import jsonschema
import numpy as np

from .config import PRESET_CONFIGS, ConfigError, GevreyConfig
from .grid import Grid
from .problems import Problem, make_preset

DEFAULTS = {
    "problem": {"preset": "kdv3", "c0": 0.1, "imag_scale": 1.0, "oscillating": False,
                "data": {"kind": "gaussian"}, "forcing": None},
    "grid": {"L": 10.0, "N": 128},
    "gevrey": {},
    "run": {"steps": 64, "scheme": "crank_nicolson", "seed": 0, "m": 0.0, "lam": True,
            "sigmas": [0.4, 0.6, 0.8, 0.95], "horizon": 0.1, "workers": 1},
    "outputs": {"dir": "."},
}


def load_schema(name: str = "runconfig") -> dict:
    text = resources.files("pevo").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def apply_override(doc: dict, spec: str) -> dict:
    """``a.b.c=<json>``; bare words that are not JSON are taken as strings."""
    if "=" not in spec:
        raise ConfigError(f"override must look like key=value, got {spec!r}")
    key, raw = spec.split("=", 1)
    parts = [p for p in key.strip().split(".") if p]
    if not parts:
        raise ConfigError(f"empty override key in {spec!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    out = copy.deepcopy(doc)
    node = out
    for p in parts[:-1]:
        nxt = node.setdefault(p, {})
        if not isinstance(nxt, dict):
            raise ConfigError(f"override {key!r} descends into a non-object at {p!r}")
        node = nxt
    node[parts[-1]] = value
    return out


def config_hash(doc: dict) -> str:
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class RunConfig:
    doc: dict

    @classmethod
    def from_dict(cls, doc: dict, overrides=()) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        for o in overrides:
            doc = apply_override(doc, o)
        merged = _merge(DEFAULTS, doc)
        try:
            jsonschema.validate(merged, load_schema())
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"config invalid at {where}: {exc.message}") from None
        rc = cls(merged)
        rc.cfg  # cross-field GevreyConfig invariants are enforced at load
        rc.grid
        return rc

    @classmethod
    def load(cls, path, overrides=()) -> "RunConfig":
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(doc, overrides)

    # ------------------------------------------------------------------
    @property
    def hash(self) -> str:
        return config_hash(self.doc)

    @property
    def preset(self) -> str:
        return self.doc["problem"]["preset"]

    @property
    def run(self) -> dict:
        return self.doc["run"]

    @property
    def out_dir(self) -> str:
        return self.doc["outputs"]["dir"]

    @property
    def pinned_M(self) -> dict:
        """Levels fixed by the config: {k: M_{p-k}} for non-null entries of gevrey.M."""
        M = self.doc["gevrey"].get("M")
        if not M:
            return {}
        return {k: float(m) for k, m in enumerate(M, start=1) if m is not None}

    @property
    def cfg(self) -> GevreyConfig:
        g = dict(self.doc["gevrey"])
        base = dict(PRESET_CONFIGS[self.preset])
        pinned = self.pinned_M
        M = g.pop("M", None)
        base.update(g)
        p = base["p"]
        if M is not None and len(M) != p - 1:
            raise ConfigError(f"gevrey.M needs p-1 = {p - 1} entries, got {len(M)}")
        if M is not None and len(pinned) == p - 1:
            base["M"] = tuple(pinned[k] for k in range(1, p))
            base["allow_zero_M"] = True
        if "x_window" in base:
            base["x_window"] = tuple(base["x_window"])
        if "xi_window" in base:
            base["xi_window"] = tuple(base["xi_window"])
        try:
            return GevreyConfig(**base)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def grid(self) -> Grid:
        g = self.doc["grid"]
        try:
            return Grid(float(g["L"]), int(g["N"]), float(g.get("h", 1.0)))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def problem(self) -> Problem:
        pr = self.doc["problem"]
        kw = {k: pr[k] for k in ("c", "c0", "imag_scale", "oscillating", "sigma") if k in pr}
        if pr.get("exponents"):
            kw["exponents"] = {int(j): float(v) for j, v in pr["exponents"].items()}
        try:
            return make_preset(self.preset, self.cfg, **kw)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def initial_data(self) -> np.ndarray:
        from .pipeline import initial_data

        spec = dict(self.doc["problem"]["data"] or {"kind": "zero"})
        if spec.get("kind") == "random":
            return random_data(self.grid, self.cfg, int(self.run["seed"]), float(spec.get("amplitude", 1.0)))
        return initial_data(self.grid, spec)

    def forcing(self):
        """None, or t -> amplitude exp(-((x-c)/w)^2/2) cos(freq t)."""
        f = self.doc["problem"].get("forcing")
        if not f or f.get("kind", "none") == "none":
            return None
        x = self.grid.x_nodes
        amp, c, w = float(f.get("amplitude", 0.1)), float(f.get("center", 0.0)), float(f.get("width", 1.0))
        freq = float(f.get("frequency", 1.0))
        shape = amp * np.exp(-0.5 * ((x - c) / w) ** 2)
        return lambda t: shape * np.cos(freq * t)


def random_data(grid: Grid, cfg: GevreyConfig, seed: int, amplitude: float = 1.0) -> np.ndarray:
    """Random spectrum damped by exp(-rho <xi>^(1/theta)), so the data lies in the rho class."""
    rng = np.random.default_rng(seed)
    spec = rng.standard_normal(grid.N) + 1j * rng.standard_normal(grid.N)
    decay = np.exp(-1.5 * cfg.rho * (1.0 + grid.xi_nodes ** 2) ** (0.5 / cfg.theta))
    u = grid.inverse(spec * decay)
    return amplitude * u / max(grid.l2(u), 1e-300)
