import struct

import numpy as np
import pytest

from mlrhash.data import MATRIX_HEADER, MatrixDtype, encode_matrix
from mlrhash.errors import FormatError, UsageError
from mlrhash.features import RbfMap
from mlrhash.index import PackedCodes, pack
from mlrhash.persistence.formats import (
    CODES_HEADER,
    FLAG,
    HYPER_BLOCK,
    MODEL_HEADER,
    SIGMA,
    decode_codes,
    decode_model,
    encode_codes,
    encode_model,
    load_codes,
    load_model,
    save_codes,
    save_model,
)
from mlrhash.trainer import Hyperparams, SylvesterForm, TrainedModel


def _model(rbf=None):
    p = np.arange(12, dtype=float).reshape(4, 3) / 4.0
    hp = Hyperparams(alpha=0.5, beta=1e-3, lam=2.0, bits=3, seed=77, sylvester_form=SylvesterForm.PAPER)
    return TrainedModel(p=p, bits=3, hyperparams=hp, rbf=rbf)


def test_model_file_layout(tmp_path):
    model = _model()
    blob = encode_model(model)
    assert blob[:4] == b"MLRM"
    assert struct.unpack_from("<III", blob, 4) == (1, 3, 4)
    assert blob[MODEL_HEADER.size : MODEL_HEADER.size + 4] == b"MLRH"

    path = save_model(model, tmp_path / "model.mlrm")
    loaded = load_model(path)
    np.testing.assert_array_equal(loaded.p, model.p)
    assert loaded.bits == 3
    assert loaded.rbf is None
    assert loaded.hyperparams.alpha == 0.5
    assert loaded.hyperparams.lam == 2.0
    assert loaded.hyperparams.seed == 77
    assert loaded.hyperparams.sylvester_form is SylvesterForm.PAPER


def test_model_file_carries_rbf_map():
    rbf = RbfMap(anchors=np.array([[0.0, 1.0, 2.0, 0.5], [1.0, 1.0, 0.5, 0.0], [0.0, 0.0, 1.0, 2.0]]), sigma=1.25)
    loaded = decode_model(encode_model(_model(rbf)))
    np.testing.assert_array_equal(loaded.rbf.anchors, rbf.anchors)
    assert loaded.rbf.sigma == 1.25
    sample = np.array([[0.5, 2.0], [1.0, 0.0], [0.0, 1.0]])
    np.testing.assert_array_equal(loaded.encode(sample), _model(rbf).encode(sample))


def test_rbf_anchor_count_must_match_projection():
    anchors = np.ones((3, 2))
    with pytest.raises(UsageError):
        _model(RbfMap(anchors=anchors, sigma=1.0))

    p = np.ones((4, 3))
    blob = b"".join(
        [
            MODEL_HEADER.pack(b"MLRM", 1, 3, 4),
            encode_matrix(p, MatrixDtype.F32),
            FLAG.pack(1),
            encode_matrix(anchors, MatrixDtype.F32),
            SIGMA.pack(1.0),
            HYPER_BLOCK.pack(1.0, 1e-5, 1.0, 0, 0),
        ]
    )
    with pytest.raises(FormatError) as mismatch:
        decode_model(blob)
    assert mismatch.value.offset == MODEL_HEADER.size + MATRIX_HEADER.size + 12 * 4 + FLAG.size


def test_model_decode_errors():
    blob = encode_model(_model())
    with pytest.raises(FormatError) as magic:
        decode_model(b"NOPE" + blob[4:])
    assert magic.value.offset == 0
    with pytest.raises(FormatError):
        decode_model(blob[:-3])
    with pytest.raises(FormatError):
        decode_model(blob + b"\x00")
    with pytest.raises(FormatError):
        decode_model(blob[:4] + struct.pack("<I", 9) + blob[8:])

    flag_offset = MODEL_HEADER.size + MATRIX_HEADER.size + 12 * 4
    with pytest.raises(FormatError) as flag:
        decode_model(blob[:flag_offset] + b"\x07" + blob[flag_offset + 1 :])
    assert flag.value.offset == flag_offset


def test_codes_file_layout(tmp_path):
    h = np.where(np.arange(130 * 3).reshape(130, 3) % 3 == 0, 1.0, -1.0)
    codes = pack(h)
    blob = encode_codes(codes)
    assert blob[:4] == b"MLRC"
    assert struct.unpack_from("<II", blob, 4) == (3, 130)
    assert len(blob) == CODES_HEADER.size + 3 * 3 * 8

    path = save_codes(codes, tmp_path / "db.mlrc")
    loaded = load_codes(path)
    assert loaded.bits == 130
    np.testing.assert_array_equal(loaded.words, codes.words)


def test_codes_decode_errors():
    codes = PackedCodes(bits=4, words=np.array([[0b1010]], dtype=np.uint64))
    blob = encode_codes(codes)
    with pytest.raises(FormatError):
        decode_codes(b"MLRX" + blob[4:])
    with pytest.raises(FormatError):
        decode_codes(blob[:-1])
    with pytest.raises(FormatError):
        decode_codes(blob[:4] + struct.pack("<I", 0) + blob[8:])

    padded = CODES_HEADER.pack(b"MLRC", 1, 4) + struct.pack("<Q", 1 << 10)
    with pytest.raises(FormatError):
        decode_codes(padded)
