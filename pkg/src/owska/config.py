"""Run configuration: a versioned JSON document.

Example::

    {
      "version": "owska-config/1",
      "source": {"bsc": {"p": 0.1, "q": 0.4}},
      "n": 16, "eps": 0.8, "sigma": 0.25, "delta": null,
      "mode": "calibrated",
      "seed": 2024,
      "experiments": [
        {"kind": "reliability", "trials": 10000},
        {"kind": "robustness", "strategy": "random-tag-flip", "trials": 1000}
      ],
      "output": {"jsonl": "reports.jsonl", "csv": "reports.csv"}
    }

``source`` is either a ``bsc`` preset or ``{"sizes": [...], "rows": [[x, y,
z, prob], ...]}``.  Probabilities given as strings such as ``"1/8"`` select
exact rational mode.  ``nu`` and ``t`` are optional overrides, and
``fields`` maps a degree to a reduction polynomial in hex.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .source import JointSpec

CONFIG_VERSION = "owska-config/1"
EXPERIMENT_KINDS = ("reliability", "secrecy", "impersonation", "substitution", "robustness")


class ConfigError(ValueError):
    pass


@dataclass
class Experiment:
    kind: str
    trials: int = 1000
    strategy: str | None = None
    observed: int | None = 16
    budget: int | None = None


@dataclass
class RunConfig:
    spec: JointSpec
    n: int
    eps: float
    sigma: float
    delta: float | None
    mode: str
    seed: int
    nu: float | None = None
    t: int | None = None
    fields: dict[int, int] = field(default_factory=dict)
    experiments: list[Experiment] = field(default_factory=list)
    jsonl: str = "reports.jsonl"
    csv: str = "reports.csv"


def _require(d: dict, key: str):
    if key not in d:
        raise ConfigError(f"missing required key {key!r}")
    return d[key]


def parse_config(d: dict) -> RunConfig:
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    if d.get("version") != CONFIG_VERSION:
        raise ConfigError(f"config version must be {CONFIG_VERSION!r}")
    try:
        spec = JointSpec.from_dict(_require(d, "source"))
    except (KeyError, TypeError, ValueError, IndexError) as e:
        raise ConfigError(f"bad source: {e}") from e
    experiments = []
    for i, e in enumerate(d.get("experiments", [])):
        kind = e.get("kind")
        if kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"experiment {i}: unknown kind {kind!r}")
        if kind == "robustness" and not e.get("strategy"):
            raise ConfigError(f"experiment {i}: robustness needs a strategy")
        trials = int(e.get("trials", 1000))
        if trials < 1:
            raise ConfigError(f"experiment {i}: trials must be >= 1")
        experiments.append(Experiment(kind, trials, e.get("strategy"), e.get("observed", 16), e.get("budget")))
    mode = d.get("mode", "theorem")
    if mode not in ("theorem", "calibrated", "overridden"):
        raise ConfigError(f"unknown mode {mode!r}")
    if mode == "overridden" and d.get("nu") is None:
        raise ConfigError("overridden mode needs nu")
    seed = _require(d, "seed")
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a non-negative integer")
    out = d.get("output", {})
    try:
        fields = {int(m): int(p, 16) for m, p in d.get("fields", {}).items()}
        cfg = RunConfig(
            spec=spec, n=int(_require(d, "n")), eps=float(_require(d, "eps")),
            sigma=float(_require(d, "sigma")),
            delta=None if d.get("delta") is None else float(d["delta"]),
            mode=mode, seed=seed,
            nu=None if d.get("nu") is None else float(d["nu"]),
            t=None if d.get("t") is None else int(d["t"]),
            fields=fields, experiments=experiments,
            jsonl=out.get("jsonl", "reports.jsonl"), csv=out.get("csv", "reports.csv"),
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from e
    for name in ("eps", "sigma"):
        if not 0 < getattr(cfg, name) < 1:
            raise ConfigError(f"{name} must lie in (0, 1)")
    if cfg.delta is not None and not 0 < cfg.delta < 1:
        raise ConfigError("delta must lie in (0, 1)")
    return cfg


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from e
    try:
        return parse_config(json.loads(text))
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e}") from e
