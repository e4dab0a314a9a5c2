import numpy as np
import pytest

from ulab.core.errors import CacheCorruptionError, InvalidParameterError, TableRangeError
from ulab.core.tables import (
    FunctionTable,
    MultSpec,
    ensure_table,
    read_header,
    read_table,
    table_path,
    write_table,
)


def _table(start=1, end=10):
    from ulab.agents.mult_sieve import sieve_liouville
    return sieve_liouville(start, end)


class TestFunctionTable:
    def test_zero_extension_below_support(self):
        table = _table(5, 10)
        assert table[1] == 0
        assert table.window(3, 4).tolist() == [0, 0, table[5], table[6]]

    def test_window_past_end(self):
        with pytest.raises(TableRangeError):
            _table().window(8, 5)

    def test_index_past_end(self):
        with pytest.raises(TableRangeError):
            _table()[11]

    def test_length_mismatch(self):
        with pytest.raises(InvalidParameterError):
            FunctionTable(1, 5, np.ones(4, dtype=np.int8))

    def test_restrict(self):
        sub = _table(1, 10).restrict(3, 6)
        assert (sub.start, sub.end) == (3, 6)
        assert sub.values.tolist() == [-1, 1, -1, 1]


class TestCache:
    def test_round_trip(self, cache_dir):
        table = _table(1, 100)
        path = table_path(cache_dir, table.spec, 1, 100)
        write_table(path, table)
        assert read_header(path)[1:3] == (1, 100)
        assert read_table(path, table.spec).values.tolist() == table.values.tolist()

    def test_bad_magic(self, cache_dir):
        path = cache_dir / "bad.ulab"
        path.write_bytes(b"NOPE" + bytes(40))
        with pytest.raises(CacheCorruptionError):
            read_header(path)

    def test_kind_mismatch(self, cache_dir):
        table = _table(1, 20)
        path = table_path(cache_dir, table.spec, 1, 20)
        write_table(path, table)
        with pytest.raises(CacheCorruptionError):
            read_table(path, MultSpec.moebius())

    def test_truncated(self, cache_dir):
        table = _table(1, 20)
        path = table_path(cache_dir, table.spec, 1, 20)
        write_table(path, table)
        path.write_bytes(path.read_bytes()[:-3])
        with pytest.raises(CacheCorruptionError):
            read_table(path, table.spec)

    def test_covering_table_is_reused(self, cache_dir):
        calls = []

        def builder(spec, start, end):
            calls.append((start, end))
            return _table(start, end)

        ensure_table(MultSpec.liouville(), 1, 1000, cache_dir, builder)
        sub = ensure_table(MultSpec.liouville(), 100, 200, cache_dir, builder)
        assert calls == [(1, 1000)]
        assert sub.values.tolist() == _table(100, 200).values.tolist()

    def test_env_cache_dir(self, cache_dir, monkeypatch):
        monkeypatch.setenv("ULAB_CACHE", str(cache_dir))
        ensure_table(MultSpec.moebius(), 1, 50)
        assert list(cache_dir.glob("moebius-*.ulab"))
