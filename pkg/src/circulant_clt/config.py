"""Flat ``key = value`` experiment configs.

Grammar, one entry per line::

    # comment (also allowed after a value)
    name         = quickcheck        # text, default "experiment"
    law          = gaussian          # registered law name (required)
    n            = 1023, 1024        # comma-separated integers (required)
    powers       = 2, 3              # comma-separated integers
    polynomial   = 0, 1, 1           # coefficients of x^1, x^2, ...; may repeat
    replicates   = 2000              # integer (required)
    seed         = 12345             # unsigned 64-bit integer, default 0
    threads      = 1                 # worker count, default 1

Blank lines are ignored.  Keys other than ``polynomial`` may appear once.
The environment variable ``CIRCULANT_CLT_SEED`` overrides ``seed``.
"""

from __future__ import annotations

import os
from importlib import resources
from pathlib import Path
from typing import Optional

from .experiment import ExperimentConfig
from .laws import U64

SEED_ENV = "CIRCULANT_CLT_SEED"
REQUIRED = ("law", "n", "replicates")


class ConfigError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None, key: Optional[str] = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"field '{key}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.line = line
        self.key = key


def _int(text: str) -> int:
    return int(text.strip(), 0)


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(_int(t) for t in text.split(","))


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.split(","))


def parse_seed(text: str) -> int:
    seed = _int(text)
    if not 0 <= seed < U64:
        raise ValueError(f"seed {seed} is not an unsigned 64-bit integer")
    return seed


FIELDS = {
    "name": str.strip,
    "law": str.strip,
    "n": _int_list,
    "powers": _int_list,
    "polynomial": _float_list,
    "replicates": _int,
    "seed": parse_seed,
    "threads": _int,
}


def parse_config(text: str, env: Optional[dict] = None) -> ExperimentConfig:
    env = os.environ if env is None else env
    values: dict = {}
    lines: dict = {}
    polynomials: list = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in FIELDS:
            raise ConfigError(f"unknown key; expected one of {sorted(FIELDS)}", lineno, key)
        if not value:
            raise ConfigError("empty value", lineno, key)
        try:
            parsed = FIELDS[key](value)
        except ValueError as exc:
            raise ConfigError(f"bad value {value!r} ({exc})", lineno, key) from None
        if key == "polynomial":
            polynomials.append(parsed)
            continue
        if key in values:
            raise ConfigError(f"duplicate key (first set on line {lines[key]})", lineno, key)
        values[key] = parsed
        lines[key] = lineno
    for key in REQUIRED:
        if key not in values:
            raise ConfigError("missing required key", key=key)
    if SEED_ENV in env:
        try:
            values["seed"] = parse_seed(env[SEED_ENV])
        except ValueError as exc:
            raise ConfigError(f"bad {SEED_ENV} ({exc})", key="seed") from None
    cfg = ExperimentConfig(
        law=values["law"],
        n_list=values["n"],
        powers=values.get("powers", ()),
        polynomials=tuple(polynomials),
        replicates=values["replicates"],
        seed=values.get("seed", 0),
        parallel_width=values.get("threads", 1),
        name=values.get("name", "experiment"),
    )
    try:
        cfg.validate()
    except ValueError as exc:
        key = "powers" if "power" in str(exc) else None
        raise ConfigError(str(exc), lines.get(key) if key else None, key) from None
    return cfg


def load_config(path: str) -> ExperimentConfig:
    """Parse a config file; a bare name like ``quickcheck`` selects a bundled config."""
    p = Path(path)
    if not p.exists() and p.suffix == "" and p.parent == Path("."):
        bundled = resources.files("circulant_clt") / "configs" / f"{path}.cfg"
        if bundled.is_file():
            return parse_config(bundled.read_text(encoding="utf-8"))
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None
    return parse_config(text)
