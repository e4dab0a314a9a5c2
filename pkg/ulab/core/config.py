"""
Experiment configuration.
Configs are INI files with an [experiment] section (kind, seed, output,
cache_dir, workers, budget) and a [params] section; they are validated into
pydantic models and serialise back with to_ini().
"""

import configparser
import logging
import os
import re
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator

from ulab.core.errors import ConfigError

logger = logging.getLogger(__name__)

EXPERIMENT_KINDS = (
    "sieve", "gowers-avg", "weak-gowers", "pretentious", "patterns",
    "chowla", "polyavg", "nilseq", "algebra",
)
ExperimentKind = Literal["sieve", "gowers-avg", "weak-gowers", "pretentious", "patterns",
                         "chowla", "polyavg", "nilseq", "algebra"]

_SEP = re.compile(r"\s*,\s*")


def load_env(path: Optional[Union[str, Path]] = None) -> bool:
    """Load ULAB_* settings from .env without overriding the environment."""
    env_file = Path(path) if path else Path.cwd() / ".env"
    return load_dotenv(env_file, override=False) if env_file.exists() else False


def parse_int(text: Union[str, int]) -> int:
    """'10^4', '1e4' and '10000' all give 10000."""
    if isinstance(text, int):
        return text
    s = str(text).strip()
    if "^" in s:
        base, exp = s.split("^", 1)
        return int(base) ** int(exp)
    if "e" in s.lower():
        return int(float(s))
    return int(s)


def _split(value: Any, sep: str = ",") -> List[str]:
    if isinstance(value, str):
        parts = value.split(";") if sep == ";" else _SEP.split(value)
        return [p.strip() for p in parts if p.strip()]
    return list(value)


class ExperimentParams(BaseModel):
    """Parameters of one experiment; unknown keys are rejected."""
    model_config = ConfigDict(extra="forbid")

    spec: str = "liouville"
    X: List[int] = [10_000]
    H: str = "X^0.4"
    k: int = 1
    ks: List[int] = []
    sigma: float = 0.05
    mode: Literal["exhaustive", "heuristic"] = "exhaustive"
    method: Literal["direct", "recursive"] = "recursive"
    samples: int = 100
    Q: int = 10
    t_resolution: float = 0.05
    t_max: Optional[float] = None
    epsilon: float = 0.3
    shifts: List[int] = [0, 1]
    polys: List[str] = ["m", "2*m"]
    weights: List[str] = ["lambda", "lambda"]
    coeffs: str = "1:0.414213562373095:0.732050807568877:0"
    F: str = "horizontal(1,0)"
    N: List[int] = [1000]
    start: int = 1
    end: int = 100
    logarithmic: bool = False

    @field_validator("X", "N", mode="before")
    @classmethod
    def _ints(cls, v):
        return [parse_int(s) for s in _split(v)] if isinstance(v, (str, int)) else [parse_int(s) for s in v]

    @field_validator("ks", mode="before")
    @classmethod
    def _ks(cls, v):
        if isinstance(v, str):
            if ".." in v:
                lo, hi = v.split("..", 1)
                return list(range(int(lo), int(hi) + 1))
            return [int(s) for s in _split(v)]
        return v

    @field_validator("shifts", mode="before")
    @classmethod
    def _shifts(cls, v):
        return [int(s) for s in _split(v)] if isinstance(v, str) else v

    @field_validator("polys", mode="before")
    @classmethod
    def _polys(cls, v):
        return _split(v, ";")

    @field_validator("weights", mode="before")
    @classmethod
    def _weights(cls, v):
        return _split(v)

    @field_validator("start", "end", mode="before")
    @classmethod
    def _bound(cls, v):
        return parse_int(v)

    @field_validator("H", mode="before")
    @classmethod
    def _h_rule(cls, v):
        return str(v).replace(" ", "")


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: ExperimentKind
    seed: int
    output: Optional[str] = None
    cache_dir: Optional[str] = None
    workers: Optional[int] = None
    budget: Optional[float] = None
    params: ExperimentParams = ExperimentParams()

    def resolved_cache_dir(self) -> Optional[str]:
        return self.cache_dir or os.environ.get("ULAB_CACHE") or None

    def to_ini(self) -> str:
        lines = ["[experiment]", f"kind = {self.kind}", f"seed = {self.seed}"]
        for key in ("output", "cache_dir", "workers", "budget"):
            value = getattr(self, key)
            if value is not None:
                lines.append(f"{key} = {value}")
        lines += ["", "[params]"]
        for key, value in self.params.model_dump(exclude_defaults=True).items():
            if key == "polys":
                text = "; ".join(value)
            elif isinstance(value, list):
                text = ", ".join(str(v) for v in value)
            else:
                text = str(value)
            lines.append(f"{key} = {text}")
        return "\n".join(lines) + "\n"


class ResultRow(BaseModel):
    """One CSV row: experiment id, parameter columns, value columns, optional wall time."""
    experiment: str
    params: Dict[str, Any] = {}
    values: Dict[str, Any] = {}
    wall_time: Optional[float] = None

    def flat(self) -> Dict[str, Any]:
        row = {"experiment": self.experiment, **self.params, **self.values}
        if self.wall_time is not None:
            row["wall_time"] = round(self.wall_time, 3)
        return row


def _locate(text: str, section: Optional[str], key: str) -> tuple:
    """(line, column) of `key` inside `section`, 1-based; (0, 0) when absent."""
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            current = stripped[1:-1].strip()
            continue
        name = re.split(r"[=:]", stripped, maxsplit=1)[0].strip()
        if name == key and (section is None or current == section):
            return lineno, raw.index(name) + 1
    return 0, 0


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"{source}: missing section header", exc.lineno, 1) from exc
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"{source}: duplicate key '{exc.option}'", exc.lineno, 1) from exc
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"{source}: duplicate section '{exc.section}'", exc.lineno, 1) from exc
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else 0
        raise ConfigError(f"{source}: cannot parse line", lineno, 1) from exc

    unknown = [s for s in parser.sections() if s not in ("experiment", "params")]
    if unknown:
        line, _ = _locate(text, None, "")
        for lineno, raw in enumerate(text.splitlines(), start=1):
            if raw.strip() == f"[{unknown[0]}]":
                line = lineno
        raise ConfigError(f"{source}: unknown section [{unknown[0]}]", line, 1)
    if not parser.has_section("experiment"):
        raise ConfigError(f"{source}: missing [experiment] section", 1, 1)

    data: Dict[str, Any] = dict(parser["experiment"])
    data["params"] = dict(parser["params"]) if parser.has_section("params") else {}
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        loc = [str(p) for p in err["loc"]]
        if loc and loc[0] == "params" and len(loc) > 1:
            section, key = "params", loc[1]
        else:
            section, key = "experiment", loc[0] if loc else ""
        line, column = _locate(text, section, key)
        raise ConfigError(f"{source}: {'.'.join(loc)}: {err['msg']}", line, column) from exc


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}", 0, 0) from exc
    cfg = parse_config(text, str(path))
    logger.debug("loaded %s experiment from %s", cfg.kind, path)
    return cfg
