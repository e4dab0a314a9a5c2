"""
Core table store.
Function tables (sampled values of an arithmetic function on an integer
range) are built by the sieve agent and cached on disk in a small binary
format so that repeated experiments do not re-sieve.

File layout (little endian):
    magic   4s   b"ULAB"
    version u32
    start   u64
    end     u64
    kind    u8
    values  raw array (int8 for ±1/0 kinds, float64 for von Mangoldt,
            complex128 otherwise)
"""

import hashlib
import logging
import os
import struct
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np

from ulab.core.errors import (
    CacheCorruptionError,
    InvalidParameterError,
    RangeTooLargeError,
    TableRangeError,
)

logger = logging.getLogger(__name__)

MAGIC = b"ULAB"
VERSION = 1
HEADER = struct.Struct("<4sIQQB")
DEFAULT_MAX_ENTRIES = 2 * 10**8

KIND_CODES = {
    "liouville": 1,
    "moebius": 2,
    "von_mangoldt": 3,
    "character_twist": 4,
    "custom_prime_map": 5,
}
KIND_DTYPES = {
    "liouville": np.int8,
    "moebius": np.int8,
    "von_mangoldt": np.float64,
    "character_twist": np.complex128,
    "custom_prime_map": np.complex128,
}


@dataclass(frozen=True)
class MultSpec:
    """Which arithmetic function a table holds."""
    kind: str
    modulus: int = 1
    character_index: int = 0
    t: float = 0.0
    prime_values: Tuple[Tuple[int, complex], ...] = ()
    default_value: complex = 1.0

    def __post_init__(self):
        if self.kind not in KIND_CODES:
            raise InvalidParameterError(f"Unknown function kind '{self.kind}'. Options: {list(KIND_CODES)}")
        if self.kind == "character_twist":
            from sympy import totient
            if self.modulus < 1:
                raise InvalidParameterError("character_twist modulus must be >= 1")
            phi = int(totient(self.modulus))
            if not 0 <= self.character_index < phi:
                raise InvalidParameterError(
                    f"character_index {self.character_index} outside [0, {phi}) for modulus {self.modulus}")
        if self.kind == "custom_prime_map":
            for p, v in self.prime_values:
                if abs(v) > 1 + 1e-12:
                    raise InvalidParameterError(f"custom prime value at p={p} has modulus {abs(v)} > 1")
            if abs(self.default_value) > 1 + 1e-12:
                raise InvalidParameterError("custom default prime value must have modulus <= 1")

    # -- constructors ---------------------------------------------------
    @classmethod
    def liouville(cls) -> "MultSpec":
        return cls("liouville")

    @classmethod
    def moebius(cls) -> "MultSpec":
        return cls("moebius")

    @classmethod
    def von_mangoldt(cls) -> "MultSpec":
        return cls("von_mangoldt")

    @classmethod
    def character_twist(cls, modulus: int = 1, character_index: int = 0, t: float = 0.0) -> "MultSpec":
        return cls("character_twist", modulus=modulus, character_index=character_index, t=float(t))

    @classmethod
    def custom(cls, prime_map: Dict[int, complex], default: complex = 1.0) -> "MultSpec":
        items = tuple(sorted((int(p), complex(v)) for p, v in prime_map.items()))
        return cls("custom_prime_map", prime_values=items, default_value=complex(default))

    # -- properties -----------------------------------------------------
    @property
    def kind_code(self) -> int:
        return KIND_CODES[self.kind]

    @property
    def dtype(self):
        return KIND_DTYPES[self.kind]

    @property
    def one_bounded(self) -> bool:
        return self.kind != "von_mangoldt"

    def cache_key(self) -> str:
        digest = hashlib.sha1(repr(self).encode("utf-8")).hexdigest()[:12]
        return f"{self.kind}-{digest}"

    def label(self) -> str:
        if self.kind == "character_twist":
            return f"chi{self.modulus}.{self.character_index}*n^i{self.t:g}"
        if self.kind == "custom_prime_map":
            return f"custom[{len(self.prime_values)}|{self.default_value:g}]"
        return self.kind


@dataclass(frozen=True, eq=False)
class FunctionTable:
    """Values of an arithmetic function on [start, end], extended by zero below."""
    start: int
    end: int
    values: np.ndarray
    spec: MultSpec = field(default_factory=MultSpec.liouville)

    def __post_init__(self):
        if self.start < 1:
            raise InvalidParameterError(f"table start must be >= 1, got {self.start}")
        if self.end < self.start:
            raise InvalidParameterError(f"table end {self.end} < start {self.start}")
        if len(self.values) != self.end - self.start + 1:
            raise InvalidParameterError(
                f"table length {len(self.values)} does not match range [{self.start}, {self.end}]")
        self.values.setflags(write=False)

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, n: int):
        if n < self.start:
            return self.values.dtype.type(0)
        if n > self.end:
            raise TableRangeError(f"n={n} beyond table end {self.end}")
        return self.values[n - self.start]

    def window(self, x: int, H: int) -> np.ndarray:
        """Values on the H integers x, x+1, ..., x+H-1 (zero below the support)."""
        if H < 0:
            raise InvalidParameterError("window length must be nonnegative")
        hi = x + H - 1
        if hi > self.end:
            raise TableRangeError(f"window [{x}, {hi}] runs past table end {self.end}")
        out = np.zeros(H, dtype=self.values.dtype)
        lo = max(x, self.start)
        if lo <= hi:
            out[lo - x:] = self.values[lo - self.start:hi - self.start + 1]
        return out

    def restrict(self, lo: int, hi: int) -> "FunctionTable":
        if lo < self.start or hi > self.end:
            raise TableRangeError(f"[{lo}, {hi}] not inside [{self.start}, {self.end}]")
        return FunctionTable(lo, hi, self.values[lo - self.start:hi - self.start + 1].copy(), self.spec)


# ---------------------------------------------------------------------------
# Disk cache
# ---------------------------------------------------------------------------

def max_table_entries() -> int:
    return int(os.environ.get("ULAB_MAX_TABLE", DEFAULT_MAX_ENTRIES))


def check_table_budget(start: int, end: int) -> None:
    if start < 1:
        raise InvalidParameterError(f"start must be >= 1, got {start}")
    if end < start:
        raise InvalidParameterError(f"end {end} < start {start}")
    size = end - start + 1
    if size > max_table_entries():
        raise RangeTooLargeError(f"table [{start}, {end}]", size, max_table_entries())


def default_cache_dir() -> Optional[Path]:
    env = os.environ.get("ULAB_CACHE")
    return Path(env) if env else None


def table_path(cache_dir: Union[str, Path], spec: MultSpec, start: int, end: int) -> Path:
    return Path(cache_dir) / f"{spec.cache_key()}_{start}_{end}.ulab"


def write_table(path: Union[str, Path], table: FunctionTable) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    values = np.ascontiguousarray(table.values, dtype=table.spec.dtype)
    tmp = path.with_suffix(".tmp")
    with open(tmp, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, VERSION, table.start, table.end, table.spec.kind_code))
        fh.write(values.astype(values.dtype.newbyteorder("<"), copy=False).tobytes())
    os.replace(tmp, path)


def read_header(path: Union[str, Path]) -> Tuple[int, int, int, int]:
    with open(path, "rb") as fh:
        raw = fh.read(HEADER.size)
    if len(raw) < HEADER.size:
        raise CacheCorruptionError(f"{path}: truncated header")
    magic, version, start, end, kind = HEADER.unpack(raw)
    if magic != MAGIC:
        raise CacheCorruptionError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise CacheCorruptionError(f"{path}: unsupported version {version}")
    return version, start, end, kind


def read_table(path: Union[str, Path], spec: MultSpec) -> FunctionTable:
    _, start, end, kind = read_header(path)
    if kind != spec.kind_code:
        raise CacheCorruptionError(f"{path}: kind code {kind} does not match {spec.kind}")
    dtype = np.dtype(spec.dtype).newbyteorder("<")
    values = np.fromfile(path, dtype=dtype, offset=HEADER.size)
    if len(values) != end - start + 1:
        raise CacheCorruptionError(f"{path}: expected {end - start + 1} values, found {len(values)}")
    return FunctionTable(start, end, values.astype(spec.dtype), spec)


def _find_covering(cache_dir: Path, spec: MultSpec, start: int, end: int) -> Optional[Path]:
    for candidate in sorted(cache_dir.glob(f"{spec.cache_key()}_*.ulab")):
        _, lo, hi, _ = read_header(candidate)
        if lo <= start and hi >= end:
            return candidate
    return None


@lru_cache(maxsize=8)
def _memo_table(spec: MultSpec, start: int, end: int) -> FunctionTable:
    from ulab.agents.mult_sieve import build_table
    return build_table(spec, start, end)


def ensure_table(spec: MultSpec, start: int, end: int,
                 cache_dir: Optional[Union[str, Path]] = None,
                 builder: Optional[Callable[[MultSpec, int, int], FunctionTable]] = None) -> FunctionTable:
    """Return a table covering [start, end], from cache when possible."""
    check_table_budget(start, end)
    cache_dir = Path(cache_dir) if cache_dir else default_cache_dir()
    if cache_dir is None:
        return builder(spec, start, end) if builder else _memo_table(spec, start, end)

    hit = _find_covering(cache_dir, spec, start, end) if cache_dir.exists() else None
    if hit is not None:
        logger.debug("cache hit %s for [%d, %d]", hit.name, start, end)
        table = read_table(hit, spec)
        return table if (table.start, table.end) == (start, end) else table.restrict(start, end)

    logger.info("building %s table on [%d, %d]", spec.label(), start, end)
    if builder is None:
        from ulab.agents.mult_sieve import build_table
        builder = build_table
    table = builder(spec, start, end)
    write_table(table_path(cache_dir, spec, start, end), table)
    return table
