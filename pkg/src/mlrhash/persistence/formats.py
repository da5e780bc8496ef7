"""
Binary model and codes files (little-endian, bit-exact).

Model file:  "MLRM" | version u32 | L u32 | d u32 | P as a MatrixFile blob |
             rbf flag u8 [| anchors MatrixFile blob | sigma f64] |
             alpha f64 | beta f64 | lambda f64 | seed u64 | sylvester_form u8
Codes file:  "MLRC" | n u32 | bits u32 | n * words_per_code u64 words
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..data import MatrixDtype, decode_matrix, encode_matrix
from ..errors import FormatError
from ..features import RbfMap
from ..index import PackedCodes, words_per_code
from ..trainer import Hyperparams, SylvesterForm, TrainedModel
from .atomic import atomic_write_bytes


MODEL_MAGIC = b"MLRM"
MODEL_VERSION = 1
MODEL_HEADER = struct.Struct("<4sIII")
HYPER_BLOCK = struct.Struct("<dddQB")
FLAG = struct.Struct("<B")
SIGMA = struct.Struct("<d")

CODES_MAGIC = b"MLRC"
CODES_HEADER = struct.Struct("<4sII")

_FORM_CODES = {SylvesterForm.EXACT: 0, SylvesterForm.PAPER: 1}


def encode_model(model: TrainedModel) -> bytes:
    d, bits = model.p.shape
    parts = [MODEL_HEADER.pack(MODEL_MAGIC, MODEL_VERSION, bits, d), encode_matrix(model.p, MatrixDtype.F32)]
    if model.rbf is None:
        parts.append(FLAG.pack(0))
    else:
        parts.append(FLAG.pack(1))
        parts.append(encode_matrix(model.rbf.anchors, MatrixDtype.F32))
        parts.append(SIGMA.pack(model.rbf.sigma))
    hp = model.hyperparams
    parts.append(HYPER_BLOCK.pack(hp.alpha, hp.beta, hp.lam, hp.seed, _FORM_CODES[hp.sylvester_form]))
    return b"".join(parts)


def decode_model(data: bytes) -> TrainedModel:
    if len(data) < MODEL_HEADER.size:
        raise FormatError("truncated model header", offset=len(data))
    magic, version, bits, d = MODEL_HEADER.unpack_from(data, 0)
    if magic != MODEL_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MODEL_MAGIC!r}", offset=0)
    if version != MODEL_VERSION:
        raise FormatError(f"unsupported model version {version}", offset=4)

    p, offset = decode_matrix(data, MODEL_HEADER.size)
    if p.shape != (d, bits):
        raise FormatError(f"projection is {p.shape}, header declares {(d, bits)}", offset=MODEL_HEADER.size)

    flag = _unpack(FLAG, data, offset)[0]
    offset += FLAG.size
    rbf = None
    if flag == 1:
        anchor_offset = offset
        anchors, offset = decode_matrix(data, offset)
        if anchors.shape[1] != d:
            raise FormatError(f"RBF map has {anchors.shape[1]} anchors, projection expects {d}", offset=anchor_offset)
        sigma = _unpack(SIGMA, data, offset)[0]
        offset += SIGMA.size
        rbf = RbfMap(anchors=anchors, sigma=sigma)
    elif flag != 0:
        raise FormatError(f"invalid RBF flag {flag}", offset=offset - FLAG.size)

    alpha, beta, lam, seed, form_code = _unpack(HYPER_BLOCK, data, offset)
    offset += HYPER_BLOCK.size
    if offset != len(data):
        raise FormatError(f"{len(data) - offset} trailing bytes after model", offset=offset)
    forms = {code: form for form, code in _FORM_CODES.items()}
    if form_code not in forms:
        raise FormatError(f"unknown sylvester_form code {form_code}", offset=offset - 1)
    hp = Hyperparams(alpha=alpha, beta=beta, lam=lam, bits=bits, seed=seed, sylvester_form=forms[form_code])
    return TrainedModel(p=p, bits=bits, hyperparams=hp, rbf=rbf)


def save_model(model: TrainedModel, path: Path) -> Path:
    return atomic_write_bytes(Path(path), encode_model(model))


def load_model(path: Path) -> TrainedModel:
    return decode_model(Path(path).read_bytes())


def encode_codes(codes: PackedCodes) -> bytes:
    header = CODES_HEADER.pack(CODES_MAGIC, codes.n, codes.bits)
    return header + np.ascontiguousarray(codes.words, dtype="<u8").tobytes()


def decode_codes(data: bytes) -> PackedCodes:
    if len(data) < CODES_HEADER.size:
        raise FormatError("truncated codes header", offset=len(data))
    magic, n, bits = CODES_HEADER.unpack_from(data, 0)
    if magic != CODES_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {CODES_MAGIC!r}", offset=0)
    if bits < 1:
        raise FormatError("codes must have at least one bit", offset=8)
    wpc = words_per_code(bits)
    expected = CODES_HEADER.size + n * wpc * 8
    if len(data) != expected:
        raise FormatError(f"codes payload is {len(data) - CODES_HEADER.size} bytes, expected {expected - CODES_HEADER.size}", offset=min(len(data), expected))
    words = np.frombuffer(data, dtype="<u8", offset=CODES_HEADER.size).astype(np.uint64).reshape(n, wpc)
    pad = bits % 64
    if pad and np.any(words[:, -1] >> np.uint64(pad)):
        raise FormatError("non-zero pad bits in codes payload", offset=CODES_HEADER.size)
    return PackedCodes(bits=bits, words=words)


def save_codes(codes: PackedCodes, path: Path) -> Path:
    return atomic_write_bytes(Path(path), encode_codes(codes))


def load_codes(path: Path) -> PackedCodes:
    return decode_codes(Path(path).read_bytes())


def _unpack(layout: struct.Struct, data: bytes, offset: int) -> tuple:
    if len(data) < offset + layout.size:
        raise FormatError("truncated model file", offset=len(data))
    return layout.unpack_from(data, offset)
