"""
Alternating optimizer for supervised discrete hashing with mutual linear regression.

The objective over the code matrix H (L x n, entries +/-1), the mutual projection
W (L x c) and the out-of-sample projection P (d x L) is

    ||Y - W^T H||^2 + alpha ||H - W Y||^2 + beta ||H - P^T V||^2 + lam (||P||^2 + ||W||^2)

and is minimised block by block: a Sylvester solve for W, discrete cyclic
coordinate descent over the rows of H, and a ridge regression for P.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from .config import NumericsConfig, RunConfig
from .data import check_labels
from .errors import NumericalError, UsageError
from .features import RbfMap, apply_rbf
from .linalg import (
    DEFAULT_NUMERICS,
    DenseMatrix,
    RidgeSolver,
    SeededRng,
    SymEigen,
    as_dense,
    frob_norm_sq,
    ridge_solve,
    sylvester_solve,
    sym_eigen,
)


LOGGER = logging.getLogger("mlrhash.trainer")


class SylvesterForm(str, Enum):
    """`exact`: true stationary point of the W subproblem. `paper`: the scaled variant, with B = alpha*(YY^T + lam I) and P regularised by lam."""

    EXACT = "exact"
    PAPER = "paper"


@dataclass(frozen=True)
class Hyperparams:
    alpha: float = 1.0
    beta: float = 1e-5
    lam: float = 1.0
    bits: int = 32
    max_outer: int = 30
    dcc_sweeps: int = 3
    rel_tol: float = 1e-6
    seed: int = 0
    sylvester_form: SylvesterForm = SylvesterForm.EXACT

    def __post_init__(self) -> None:
        object.__setattr__(self, "sylvester_form", SylvesterForm(self.sylvester_form))
        for name in ("alpha", "beta", "lam", "rel_tol"):
            if not getattr(self, name) > 0:
                raise UsageError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("bits", "max_outer", "dcc_sweeps"):
            if getattr(self, name) < 1:
                raise UsageError(f"{name} must be at least 1, got {getattr(self, name)}")
        if not 0 <= self.seed < 2**64:
            raise UsageError(f"seed must be an unsigned 64-bit integer, got {self.seed}")

    @classmethod
    def from_config(cls, config: RunConfig) -> "Hyperparams":
        return cls(
            alpha=config.alpha,
            beta=config.beta,
            lam=config.lam,
            bits=config.bits,
            max_outer=config.max_outer,
            dcc_sweeps=config.dcc_sweeps,
            rel_tol=config.rel_tol,
            seed=config.seed,
            sylvester_form=SylvesterForm(config.sylvester_form),
        )

    def with_seed(self, seed: int) -> "Hyperparams":
        return dataclasses.replace(self, seed=seed)

    @property
    def p_regulariser(self) -> float:
        """
        Ridge weight of the P step inside `train`.

        The full objective weighs the regression by beta and the norm by lam, so its
        exact minimiser in P uses lam / beta; the `paper` form uses lam unscaled.
        """
        if self.sylvester_form is SylvesterForm.EXACT:
            return self.lam / self.beta
        return self.lam


@dataclass
class ModelState:
    w: DenseMatrix
    p: DenseMatrix
    h: DenseMatrix

    def copy(self) -> "ModelState":
        return ModelState(w=self.w.copy(), p=self.p.copy(), h=self.h.copy())


@dataclass
class TrainedModel:
    """Everything needed to encode unseen samples: P, the optional RBF map and the hyperparameters."""

    p: DenseMatrix
    bits: int
    hyperparams: Hyperparams
    rbf: Optional[RbfMap] = None

    def __post_init__(self) -> None:
        if self.p.shape[1] != self.bits:
            raise UsageError(f"projection has {self.p.shape[1]} columns but the model declares {self.bits} bits")
        if self.rbf is not None and self.p.shape[0] != self.rbf.m:
            raise UsageError(f"projection expects {self.p.shape[0]} RBF outputs but the map has {self.rbf.m} anchors")

    def transform(self, x: DenseMatrix) -> DenseMatrix:
        return apply_rbf(self.rbf, x) if self.rbf is not None else as_dense(x, "features")

    def encode(self, x: DenseMatrix) -> DenseMatrix:
        return encode(self.p, self.transform(x))


@dataclass
class TrainReport:
    objective_trace: List[float] = field(default_factory=list)
    iterations_run: int = 0
    converged: bool = False


def sgn(x: DenseMatrix) -> DenseMatrix:
    """Elementwise sign with sgn(0) = +1."""
    return np.where(x >= 0.0, 1.0, -1.0)


def objective(state: ModelState, v: DenseMatrix, y: DenseMatrix, hp: Hyperparams) -> float:
    _check_shapes(state, v, y)
    label_fit = frob_norm_sq(y - state.w.T @ state.h)
    code_fit = frob_norm_sq(state.h - state.w @ y)
    feature_fit = frob_norm_sq(state.h - state.p.T @ v)
    penalty = frob_norm_sq(state.p) + frob_norm_sq(state.w)
    return label_fit + hp.alpha * code_fit + hp.beta * feature_fit + hp.lam * penalty


def label_coefficient(y: DenseMatrix, hp: Hyperparams) -> DenseMatrix:
    """Right coefficient B of the W equation; it depends on the labels only."""
    label_gram = y @ y.T
    identity = np.eye(y.shape[0])
    if hp.sylvester_form is SylvesterForm.EXACT:
        return hp.alpha * label_gram + hp.lam * identity
    return hp.alpha * (label_gram + hp.lam * identity)


def w_step(
    h: DenseMatrix,
    y: DenseMatrix,
    hp: Hyperparams,
    numerics: NumericsConfig = DEFAULT_NUMERICS,
    b_eigen: Optional[SymEigen] = None,
) -> DenseMatrix:
    """Solve H H^T W + W B = (1 + alpha) H Y^T, with B chosen by `hp.sylvester_form`."""
    if h.shape[1] != y.shape[1]:
        raise UsageError(f"H has {h.shape[1]} columns but Y has {y.shape[1]}")
    b = label_coefficient(y, hp)
    return sylvester_solve(h @ h.T, b, (1.0 + hp.alpha) * (h @ y.T), numerics, b_eigen)


def coupling_matrix(state: ModelState, v: DenseMatrix, y: DenseMatrix, hp: Hyperparams) -> DenseMatrix:
    """M = (1 + alpha) W Y + beta P^T V, the linear coupling of the H subproblem."""
    return (1.0 + hp.alpha) * (state.w @ y) + hp.beta * (state.p.T @ v)


def dcc_row_update(l: int, state: ModelState, m_mat: DenseMatrix) -> DenseMatrix:
    """
    Closed-form minimiser of the H subproblem over row l: sgn(m - H'^T W' q).

    Expanding the subproblem gives ||W^T H||^2 - 2 Tr(H^T M) + const, whose
    dependence on row l is 2 h^T (H'^T W' q) - 2 h^T m.
    """
    bits = state.h.shape[0]
    if not 0 <= l < bits:
        raise UsageError(f"row index {l} outside [0, {bits})")
    if m_mat.shape != state.h.shape:
        raise UsageError(f"M has shape {m_mat.shape}, expected {state.h.shape}")
    cross = state.w @ state.w[l]
    cross[l] = 0.0
    return sgn(m_mat[l] - state.h.T @ cross)


def h_step(
    state: ModelState,
    v: DenseMatrix,
    y: DenseMatrix,
    hp: Hyperparams,
) -> DenseMatrix:
    """Up to `dcc_sweeps` passes over the rows of H; stops after a pass that changes nothing."""
    m_mat = coupling_matrix(state, v, y, hp)
    working = ModelState(w=state.w, p=state.p, h=state.h.copy())
    for sweep in range(hp.dcc_sweeps):
        flipped = 0
        for l in range(working.h.shape[0]):
            row = dcc_row_update(l, working, m_mat)
            flipped += int(np.count_nonzero(row != working.h[l]))
            working.h[l] = row
        LOGGER.debug("DCC sweep %d flipped %d entries", sweep + 1, flipped)
        if flipped == 0:
            break
    return working.h


def p_step(
    h: DenseMatrix,
    v: DenseMatrix,
    lam: float,
    numerics: NumericsConfig = DEFAULT_NUMERICS,
    solver: Optional[RidgeSolver] = None,
) -> DenseMatrix:
    """P = (V V^T + lam I)^-1 V H^T; *solver* may carry a pre-factorised V V^T + lam I."""
    if h.shape[1] != v.shape[1]:
        raise UsageError(f"H has {h.shape[1]} columns but V has {v.shape[1]}")
    if solver is None:
        solver = RidgeSolver(v @ v.T, lam, numerics)
    return solver.solve(v @ h.T)


def initial_codes(bits: int, n: int, seed: int) -> DenseMatrix:
    return sgn(SeededRng(seed).standard_normal((bits, n)))


def train(
    v: DenseMatrix,
    y: DenseMatrix,
    hp: Hyperparams,
    numerics: NumericsConfig = DEFAULT_NUMERICS,
) -> Tuple[TrainedModel, ModelState, TrainReport]:
    """Alternate W -> H -> P until the relative objective decrease drops below `rel_tol`."""
    v = as_dense(v, "features")
    y = as_dense(y, "labels")
    if v.shape[1] != y.shape[1]:
        raise UsageError(f"features have {v.shape[1]} samples but labels have {y.shape[1]}")
    check_labels(y)
    n = v.shape[1]

    try:
        ridge = RidgeSolver(v @ v.T, hp.p_regulariser, numerics)
        b_eigen = sym_eigen(label_coefficient(y, hp), numerics)
        h = initial_codes(hp.bits, n, hp.seed)
        state = ModelState(w=w_step(h, y, hp, numerics, b_eigen), p=p_step(h, v, hp.p_regulariser, solver=ridge), h=h)
    except NumericalError as exc:
        raise NumericalError(f"initialisation: {exc}") from exc

    report = TrainReport(objective_trace=[objective(state, v, y, hp)])
    LOGGER.debug("Initial objective %.6f (n=%d, d=%d, c=%d, L=%d)", report.objective_trace[0], n, v.shape[0], y.shape[0], hp.bits)

    for iteration in range(1, hp.max_outer + 1):
        try:
            state.w = w_step(state.h, y, hp, numerics, b_eigen)
            state.h = h_step(state, v, y, hp)
            state.p = p_step(state.h, v, hp.p_regulariser, solver=ridge)
        except NumericalError as exc:
            raise NumericalError(f"outer iteration {iteration}: {exc}") from exc

        previous = report.objective_trace[-1]
        current = objective(state, v, y, hp)
        report.objective_trace.append(current)
        report.iterations_run = iteration
        decrease = (previous - current) / max(abs(previous), np.finfo(np.float64).tiny)
        LOGGER.debug("Iteration %d objective %.6f (relative decrease %.3e)", iteration, current, decrease)
        if decrease < hp.rel_tol:
            report.converged = True
            break

    LOGGER.info(
        "Training finished after %d iterations (objective %.6f, converged=%s)",
        report.iterations_run,
        report.objective_trace[-1],
        report.converged,
    )
    model = TrainedModel(p=state.p.copy(), bits=hp.bits, hyperparams=hp)
    return model, state, report


def encode(p: DenseMatrix, x: DenseMatrix) -> DenseMatrix:
    """Out-of-sample codes sgn(P^T X)."""
    x = as_dense(x, "features")
    if p.shape[0] != x.shape[0]:
        raise UsageError(f"projection expects {p.shape[0]}-D inputs, got {x.shape[0]}-D")
    return sgn(p.T @ x)


def solve_ph(h: DenseMatrix, y: DenseMatrix, lam: float) -> DenseMatrix:
    """Codes-to-labels regression: P_H = (H H^T + lam I)^-1 H Y^T."""
    _check_columns(h, y)
    return ridge_solve(h @ h.T, lam, h @ y.T)


def solve_py(h: DenseMatrix, y: DenseMatrix, lam: float) -> DenseMatrix:
    """Labels-to-codes regression: P_Y = H Y^T (Y Y^T + lam I)^-1."""
    _check_columns(h, y)
    return ridge_solve(y @ y.T, lam, y @ h.T).T


def mutual_inequality_witness(h: DenseMatrix, y: DenseMatrix) -> float:
    """
    ||Y^T Y - H^T H||_F, evaluated without forming the n x n Gram matrices.

    Uses ||Y^T Y - H^T H||^2 = ||Y Y^T||^2 + ||H H^T||^2 - 2 ||H Y^T||^2.
    """
    _check_columns(h, y)
    squared = frob_norm_sq(y @ y.T) + frob_norm_sq(h @ h.T) - 2.0 * frob_norm_sq(h @ y.T)
    return float(np.sqrt(max(squared, 0.0)))


def _check_columns(h: DenseMatrix, y: DenseMatrix) -> None:
    if h.shape[1] != y.shape[1]:
        raise UsageError(f"H has {h.shape[1]} columns but Y has {y.shape[1]}")


def _check_shapes(state: ModelState, v: DenseMatrix, y: DenseMatrix) -> None:
    bits, n = state.h.shape
    expected = {
        "W": (bits, y.shape[0]),
        "P": (v.shape[0], bits),
        "V": (v.shape[0], n),
        "Y": (y.shape[0], n),
    }
    actual = {"W": state.w.shape, "P": state.p.shape, "V": v.shape, "Y": y.shape}
    for name, shape in expected.items():
        if actual[name] != shape:
            raise UsageError(f"{name} has shape {actual[name]}, expected {shape}")
