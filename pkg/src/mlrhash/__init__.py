"""
MLR Hash - supervised discrete hashing with mutual linear regression.

This package exposes the trainer, the hash boosting ensemble, bit-packed Hamming
retrieval and the evaluation harness behind the ``mlrh`` command line.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("mlr-hash")
except PackageNotFoundError:  # pragma: no cover - fallback for editable installs
    __version__ = "0.0.0"

__all__ = ["__version__"]
