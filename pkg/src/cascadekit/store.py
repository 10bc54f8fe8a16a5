"""Compact binary cascade store: one record per cascade plus a TSV index.

Metric passes stream records without re-parsing raw event TSV. The data
file starts with a versioned magic header; records are self-contained and
the index maps cascade ids to (offset, length) for random access.
"""

from __future__ import annotations

import struct
from typing import Iterator

import numpy as np

from .cascade import CascadeGraph

MAGIC = b"CKSTORE1"
_HEAD = struct.Struct("<IIIQ")  # id_bytes, n_nodes, n_edges, post_count


def _encode(c: CascadeGraph) -> bytes:
    cid = c.cascade_id.encode("utf-8")
    blob = "\n".join(c.order).encode("utf-8")
    parts = [
        _HEAD.pack(len(cid), c.n_nodes, c.n_edges, c.post_count),
        struct.pack("<II", len(blob), c.root_index),
        cid,
        blob,
        np.ascontiguousarray(c.t, dtype=np.int64).tobytes(),
        np.ascontiguousarray(c.edge_src, dtype=np.int32).tobytes(),
        np.ascontiguousarray(c.edge_dst, dtype=np.int32).tobytes(),
        np.ascontiguousarray(c.edge_w, dtype=np.int64).tobytes(),
    ]
    return b"".join(parts)


def _decode(buf: bytes) -> CascadeGraph:
    id_len, n, m, post_count = _HEAD.unpack_from(buf, 0)
    blob_len, root_index = struct.unpack_from("<II", buf, _HEAD.size)
    off = _HEAD.size + 8
    cid = buf[off:off + id_len].decode("utf-8")
    off += id_len
    order = buf[off:off + blob_len].decode("utf-8").split("\n") if blob_len \
        else []
    off += blob_len
    t = np.frombuffer(buf, dtype=np.int64, count=n, offset=off).copy()
    off += 8 * n
    src = np.frombuffer(buf, dtype=np.int32, count=m, offset=off).copy()
    off += 4 * m
    dst = np.frombuffer(buf, dtype=np.int32, count=m, offset=off).copy()
    off += 4 * m
    w = np.frombuffer(buf, dtype=np.int64, count=m, offset=off).copy()
    return CascadeGraph(cid, order, t, root_index, src, dst, w, post_count)


class StoreWriter:
    """Appends cascade records to ``<prefix>.bin`` and indexes them in
    ``<prefix>.idx``. Use as a context manager or call close()."""

    def __init__(self, prefix: str):
        self.prefix = str(prefix)
        self._fh = open(self.prefix + ".bin", "wb")
        self._fh.write(MAGIC)
        self._entries: list[tuple[str, int, int]] = []
        self.count = 0

    def add(self, c: CascadeGraph) -> None:
        record = _encode(c)
        offset = self._fh.tell()
        self._fh.write(record)
        self._entries.append((c.cascade_id, offset, len(record)))
        self.count += 1

    def close(self) -> None:
        self._fh.close()
        with open(self.prefix + ".idx", "w", encoding="utf-8") as idx:
            idx.write("cascade_id\toffset\tlength\n")
            for cid, off, length in self._entries:
                idx.write(f"{cid}\t{off}\t{length}\n")

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close()
        return False


def _check_magic(fh, path) -> None:
    if fh.read(len(MAGIC)) != MAGIC:
        raise ValueError(f"{path}: not a cascade store (bad magic)")


def read_index(prefix: str) -> dict[str, tuple[int, int]]:
    out: dict[str, tuple[int, int]] = {}
    with open(str(prefix) + ".idx", "r", encoding="utf-8") as fh:
        header = fh.readline()
        if header.rstrip("\n") != "cascade_id\toffset\tlength":
            raise ValueError(f"{prefix}.idx: unexpected index header")
        for line in fh:
            cid, off, length = line.rstrip("\n").split("\t")
            out[cid] = (int(off), int(length))
    return out


def iter_store(prefix: str) -> Iterator[CascadeGraph]:
    """Stream every cascade in index order (the order records were written)."""
    index = read_index(prefix)
    path = str(prefix) + ".bin"
    with open(path, "rb") as fh:
        _check_magic(fh, path)
        for cid, (off, length) in index.items():
            fh.seek(off)
            yield _decode(fh.read(length))


def load_cascade(prefix: str, cascade_id: str) -> CascadeGraph:
    index = read_index(prefix)
    off, length = index[cascade_id]
    path = str(prefix) + ".bin"
    with open(path, "rb") as fh:
        _check_magic(fh, path)
        fh.seek(off)
        return _decode(fh.read(length))


def store_count(prefix: str) -> int:
    return len(read_index(prefix))
