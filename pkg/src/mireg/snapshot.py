"""Binary snapshot container for model data.

Byte layout (all integers little-endian unsigned unless noted):

    offset  size  field
    0       4     magic  b"MIRG"
    4       4     version (currently 1)
    8       8     alpha numerator (signed)
    16      8     alpha denominator (signed)
    24      4     spatial dimension d
    28      4     cutoff integer part (signed)
    32      4     cutoff alpha part (signed)
    36      4     nt
    40      4     nx
    44      8     n0 (float64)
    52      4     jet order
    56      4     index-table byte length L
    60      L     index table, UTF-8 (the text format of the index set)
    --      4     record count R
    then R records:
        4         key byte length K
        K         record key, UTF-8
        4         rank
        4*rank    shape entries
        8*prod    float64 array data, C order, little-endian
    tail:
        32        SHA-256 digest of every preceding byte

Every write is deterministic: records are sorted by key, so snapshots
from identical data are byte-identical regardless of construction order.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Optional, Tuple

import numpy as np

from .fields import PolyField, TorusGrid
from .indices import Homogeneity, IndexSet
from .jets import Jet

MAGIC = b"MIRG"
VERSION = 1


class SnapshotError(ValueError):
    pass


@dataclass
class Snapshot:
    alpha: Fraction
    d: int
    cutoff: Homogeneity
    nt: int
    nx: int
    n0: float
    jet_order: int
    iset: IndexSet
    arrays: Dict[str, np.ndarray]

    def digest(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()

    def to_bytes(self) -> bytes:
        head = bytearray()
        head += MAGIC
        head += struct.pack("<I", VERSION)
        head += struct.pack("<qq", self.alpha.numerator,
                            self.alpha.denominator)
        head += struct.pack("<I", self.d)
        head += struct.pack("<ii", self.cutoff.int_part,
                            self.cutoff.alpha_part)
        head += struct.pack("<II", self.nt, self.nx)
        head += struct.pack("<d", self.n0)
        head += struct.pack("<I", self.jet_order)
        table = self.iset.to_text().encode()
        head += struct.pack("<I", len(table)) + table
        head += struct.pack("<I", len(self.arrays))
        for key in sorted(self.arrays):
            arr = np.ascontiguousarray(self.arrays[key], dtype="<f8")
            kb = key.encode()
            head += struct.pack("<I", len(kb)) + kb
            head += struct.pack("<I", arr.ndim)
            head += struct.pack(f"<{arr.ndim}I", *arr.shape)
            head += arr.tobytes()
        head += hashlib.sha256(bytes(head)).digest()
        return bytes(head)

    def write(self, path: str) -> str:
        data = self.to_bytes()
        with open(path, "wb") as fh:
            fh.write(data)
        return hashlib.sha256(data).hexdigest()

    @staticmethod
    def read(path: str) -> "Snapshot":
        with open(path, "rb") as fh:
            data = fh.read()
        if len(data) < 60 + 32:
            raise SnapshotError("truncated snapshot")
        body, tail = data[:-32], data[-32:]
        if hashlib.sha256(body).digest() != tail:
            raise SnapshotError("digest mismatch: snapshot corrupted")
        if body[:4] != MAGIC:
            raise SnapshotError("bad magic")
        off = 4
        (version,) = struct.unpack_from("<I", body, off); off += 4
        if version != VERSION:
            raise SnapshotError(f"unsupported version {version}")
        p, q = struct.unpack_from("<qq", body, off); off += 16
        (d,) = struct.unpack_from("<I", body, off); off += 4
        cm, ca = struct.unpack_from("<ii", body, off); off += 8
        nt, nx = struct.unpack_from("<II", body, off); off += 8
        (n0,) = struct.unpack_from("<d", body, off); off += 8
        (order,) = struct.unpack_from("<I", body, off); off += 4
        (tlen,) = struct.unpack_from("<I", body, off); off += 4
        iset = IndexSet.from_text(body[off:off + tlen].decode()); off += tlen
        (count,) = struct.unpack_from("<I", body, off); off += 4
        arrays: Dict[str, np.ndarray] = {}
        for _ in range(count):
            (klen,) = struct.unpack_from("<I", body, off); off += 4
            key = body[off:off + klen].decode(); off += klen
            (rank,) = struct.unpack_from("<I", body, off); off += 4
            shape = struct.unpack_from(f"<{rank}I", body, off); off += 4 * rank
            n = int(np.prod(shape)) if rank else 1
            arr = np.frombuffer(body, dtype="<f8", count=n, offset=off)
            off += 8 * n
            arrays[key] = arr.reshape(shape).copy()
        if off != len(body):
            raise SnapshotError("trailing bytes after last record")
        return Snapshot(Fraction(p, q), d, Homogeneity(cm, ca), nt, nx,
                        n0, order, iset, arrays)


def _index_key(beta) -> str:
    bx = ".".join(str(b) for b in beta.beta_x)
    bp = ".".join(f"{k}-{c}" for k, c in beta.beta_prime)
    return f"x{bx}p{bp}"


def model_snapshot(model, n0: float) -> Snapshot:
    """Serialize a stationary model: per-index periodic and linear jet
    coefficient arrays plus the noise realization."""
    grid = model.grid
    arrays: Dict[str, np.ndarray] = {"xi": model.xi}
    for beta, coeff in model.pi.terms.items():
        fld = coeff if isinstance(coeff, PolyField) else None
        key = _index_key(beta)
        if fld is None:
            continue
        arrays[f"pi/{key}/per"] = fld.per.coeffs
        if fld.lin is not None:
            for i, l in enumerate(fld.lin):
                arrays[f"pi/{key}/lin{i}"] = l.coeffs
    for beta, coeff in model.pi_minus.terms.items():
        key = _index_key(beta)
        from .model import _as_field
        fld = _as_field(coeff, grid)
        arrays[f"pim/{key}/per"] = fld.per.coeffs
        if fld.lin is not None:
            for i, l in enumerate(fld.lin):
                arrays[f"pim/{key}/lin{i}"] = l.coeffs
    for beta, jet in model.q.components.items():
        arrays[f"q/{_index_key(beta)}"] = jet.coeffs
    return Snapshot(model.ctx.alpha, model.ctx.d, model.ctx.cutoff,
                    grid.nt, grid.nx, n0, model.ctx.jet_order,
                    model.iset, arrays)


def field_snapshot(ctx, grid: TorusGrid, iset: IndexSet, n0: float,
                   arrays: Dict[str, np.ndarray]) -> Snapshot:
    """Generic container for named grid arrays under one configuration."""
    return Snapshot(ctx.alpha, ctx.d, ctx.cutoff, grid.nt, grid.nx, n0,
                    ctx.jet_order, iset, dict(arrays))
