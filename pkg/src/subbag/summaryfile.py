"""Binary persistence of subsample summaries.

Layout (all little-endian)::

    header   "SBAG" | version u16 | family u8 | p u32 | k u64 | m u32 | master_seed u64
    record*m subsample_id u32 | seed u64 | loss_at_opt f64 | beta p*f64 | hessian upper p(p+1)/2*f64
    trailer  crc32 u32 over every preceding byte

The Hessian is stored row-major upper triangle and mirrored on read, so
writing a symmetric matrix and reading it back is bit-exact.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError
from .losses import Family
from .subsample import SubsampleSummary

MAGIC = b"SBAG"
VERSION = 1
_HEADER = struct.Struct("<4sHBIQIQ")
_RECORD_HEAD = struct.Struct("<IQd")


@dataclass(frozen=True)
class SummaryFile:
    family: Family
    p: int
    k: int
    master_seed: int
    summaries: list[SubsampleSummary]

    @property
    def m(self) -> int:
        return len(self.summaries)


def encode(sf: SummaryFile) -> bytes:
    p = sf.p
    iu = np.triu_indices(p)
    parts = [_HEADER.pack(MAGIC, VERSION, sf.family.value, p, sf.k, sf.m, sf.master_seed)]
    for s in sf.summaries:
        if s.p != p or s.k != sf.k:
            raise ConfigError("summary does not match file (p, k)")
        parts.append(_RECORD_HEAD.pack(s.subsample_id, s.seed, s.loss_at_opt))
        parts.append(np.asarray(s.beta_tilde, dtype="<f8").tobytes())
        parts.append(np.asarray(s.hessian, dtype="<f8")[iu].tobytes())
    payload = b"".join(parts)
    return payload + struct.pack("<I", zlib.crc32(payload))


def decode(blob: bytes) -> SummaryFile:
    if len(blob) < _HEADER.size + 4:
        raise DataError("summary file truncated")
    payload, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(payload) != crc:
        raise DataError("summary file CRC mismatch")
    magic, version, fam, p, k, m, seed = _HEADER.unpack_from(payload, 0)
    if magic != MAGIC:
        raise DataError("not a summary file (bad magic)")
    if version != VERSION:
        raise DataError(f"unsupported summary file version {version}")
    ntri = p * (p + 1) // 2
    rec_size = _RECORD_HEAD.size + 8 * (p + ntri)
    if len(payload) != _HEADER.size + m * rec_size:
        raise DataError("summary file length does not match header")
    iu = np.triu_indices(p)
    out = []
    off = _HEADER.size
    for _ in range(m):
        sid, sseed, loss = _RECORD_HEAD.unpack_from(payload, off)
        off += _RECORD_HEAD.size
        beta = np.frombuffer(payload, dtype="<f8", count=p, offset=off).astype(float)
        off += 8 * p
        tri = np.frombuffer(payload, dtype="<f8", count=ntri, offset=off)
        off += 8 * ntri
        H = np.zeros((p, p))
        H[iu] = tri
        H = H + np.triu(H, 1).T
        out.append(SubsampleSummary(k=k, beta_tilde=beta, hessian=H, loss_at_opt=loss,
                                    subsample_id=sid, seed=sseed))
    return SummaryFile(family=Family(fam), p=p, k=k, master_seed=seed, summaries=out)


def write(path, family: Family, summaries: Sequence[SubsampleSummary], master_seed: int,
          p: int | None = None, k: int | None = None) -> None:
    if summaries:
        p, k = summaries[0].p, summaries[0].k
    if p is None or k is None:
        raise ConfigError("empty summary list needs explicit p and k")
    Path(path).write_bytes(encode(SummaryFile(family, p, k, master_seed, list(summaries))))


def read(path) -> SummaryFile:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return decode(blob)
