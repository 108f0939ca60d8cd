"""User-identification solvers: pick which candidate object is the comm user.

Every solver fits on labeled samples and predicts a candidate index from
the candidate list plus the serving beam index. Model-based baselines map
the beam pointing angle into the radar frame (constant offset, linear
regression on angle, linear regression on the full state, per-beam lookup
table); the learned solver scores each candidate independently with the
feed-forward network and returns the argmax.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from isac_ident.mlp import (
    AdamState,
    MlpModel,
    ModelWidths,
    NormBounds,
    adam_step,
    init_weights,
    loss_and_grad_arrays,
    score_candidates,
)
from isac_ident.radar_detect import Candidate
from isac_ident.seeding import child_rng

SOLVER_NAMES = ("offset", "linreg-angle", "linreg-3d", "lookup", "dnn")


@dataclass(frozen=True)
class Sample:
    """One dataset row: candidate list, serving beam, and the user's index."""

    sample_id: int
    sequence_id: int
    candidates: tuple[Candidate, ...]
    b_star: int
    label: int | None = None

    def __post_init__(self):
        if len(self.candidates) < 1:
            raise ValueError("sample must contain at least one candidate")
        if self.b_star < 0:
            raise ValueError("beam index must be non-negative")
        if self.label is not None and not 0 <= self.label < len(self.candidates):
            raise ValueError("label must index into the candidate list")


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for the learned solver."""

    lr: float = 1e-3
    epochs: int = 100
    batch: int = 32
    seed: int = 0


def _require_labeled(samples, what: str) -> None:
    if not samples:
        raise ValueError(f"{what} set must be non-empty")
    if any(s.label is None for s in samples):
        raise ValueError(f"{what} set must be fully labeled")


def _target_angles(train) -> np.ndarray:
    return np.array([s.candidates[s.label].angle_deg for s in train])


def nearest_angle_index(candidates, target_deg: float) -> int:
    """Candidate whose angle is closest to the target; ties take the lowest index."""
    if not candidates:
        raise ValueError("candidate list must be non-empty")
    diffs = np.abs(np.array([c.angle_deg for c in candidates]) - target_deg)
    return int(np.argmin(diffs))


def estimate_offset(train, pointing_angles) -> float:
    """Mean residual between target radar angles and serving-beam angles.

    This is the squared-error-minimizing constant for the radar angle
    model psi_r = psi_0 + beam angle.
    """
    _require_labeled(train, "train")
    angles = np.asarray(pointing_angles)
    residuals = _target_angles(train) - angles[[s.b_star for s in train]]
    return float(residuals.mean())


def predict_offset(candidates, b_star: int, psi0: float, pointing_angles) -> int:
    return nearest_angle_index(candidates, float(pointing_angles[b_star]) + psi0)


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Least-squares intercept and slope for y = a + b*x."""
    sxx = float(((x - x.mean()) ** 2).sum())
    if sxx == 0.0:
        raise ValueError("degenerate design: all beam angles are equal")
    slope = float(((x - x.mean()) * (y - y.mean())).sum()) / sxx
    return float(y.mean() - slope * x.mean()), slope


def fit_linreg_angle(train, pointing_angles) -> tuple[float, float]:
    """(intercept, slope) of target radar angle against serving-beam angle."""
    _require_labeled(train, "train")
    x = np.asarray(pointing_angles)[[s.b_star for s in train]]
    return _ols(x, _target_angles(train))


def fit_linreg_3d(train, pointing_angles):
    """Per-axis linear fits of the target state from the serving-beam angle.

    Returns ((intercept, slope, residual_sigma) for range, angle, velocity);
    residual sigmas are floored so no axis degenerates in the z-scored
    distance used at prediction time.
    """
    _require_labeled(train, "train")
    x = np.asarray(pointing_angles)[[s.b_star for s in train]]
    fits = []
    for getter in (
        lambda c: c.range_m,
        lambda c: c.angle_deg,
        lambda c: c.vel_mps,
    ):
        y = np.array([getter(s.candidates[s.label]) for s in train])
        intercept, slope = _ols(x, y)
        sigma = float(np.sqrt(np.mean((y - intercept - slope * x) ** 2)))
        fits.append((intercept, slope, max(sigma, 1e-6)))
    return tuple(fits)


def predict_linreg_3d(candidates, b_star: int, fits, pointing_angles) -> int:
    if not candidates:
        raise ValueError("candidate list must be non-empty")
    phi = float(pointing_angles[b_star])
    predicted = [a + b * phi for a, b, _ in fits]
    sigmas = [s for _, _, s in fits]
    best, best_d = 0, None
    for k, c in enumerate(candidates):
        state = (c.range_m, c.angle_deg, c.vel_mps)
        d = sum(((p - v) / s) ** 2 for p, v, s in zip(predicted, state, sigmas))
        if best_d is None or d < best_d:
            best, best_d = k, d
    return best


def fit_lookup(train, pointing_angles) -> np.ndarray:
    """Per-beam mean target radar angle; unseen beams fall back to phi_b + offset."""
    _require_labeled(train, "train")
    angles = np.asarray(pointing_angles, dtype=float)
    psi0 = estimate_offset(train, angles)
    table = angles + psi0
    targets = _target_angles(train)
    beams = np.array([s.b_star for s in train])
    for b in np.unique(beams):
        table[b] = targets[beams == b].mean()
    return table


def predict_lookup(candidates, b_star: int, table) -> int:
    return nearest_angle_index(candidates, float(table[b_star]))


def expand_to_rows(samples):
    """Flatten samples into per-candidate training rows.

    Each candidate becomes one row of raw features (range, angle,
    velocity), the sample's beam index, and a 0/1 target marking the
    communication user.
    """
    feats, beams, targets = [], [], []
    for s in samples:
        for k, c in enumerate(s.candidates):
            feats.append((c.range_m, c.angle_deg, c.vel_mps))
            beams.append(s.b_star)
            targets.append(1.0 if k == s.label else 0.0)
    return np.array(feats), np.array(beams, dtype=float), np.array(targets)


def norm_bounds_from_rows(feats: np.ndarray, n_beams: int) -> NormBounds:
    return NormBounds(
        range_max=max(float(feats[:, 0].max()), 1.0),
        angle_span=max(2.0 * float(np.abs(feats[:, 1]).max()), 10.0),
        vel_max=max(float(np.abs(feats[:, 2]).max()), 1.0),
        n_beams=n_beams,
    )


def train_dnn(
    train,
    n_beams: int,
    hyper: TrainConfig = TrainConfig(),
    widths: ModelWidths = ModelWidths(),
    epoch_losses: list | None = None,
) -> MlpModel:
    """Train the per-candidate scorer with Adam on the expanded row set.

    Rows are reshuffled every epoch with a seeded generator; the weights
    after the final epoch are returned (no early stopping).
    """
    _require_labeled(train, "train")
    feats, beams, targets = expand_to_rows(train)
    if len(feats) == 0:
        raise ValueError("training expansion produced no rows")
    model = init_weights(widths, norm_bounds_from_rows(feats, n_beams),
                         seed=hyper.seed)
    params = model.parameters()
    state = AdamState.for_params(params, lr=hyper.lr)
    rng = child_rng(hyper.seed, "shuffle")
    n = len(feats)
    for _ in range(hyper.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, hyper.batch):
            idx = order[start:start + hyper.batch]
            loss, grads = loss_and_grad_arrays(model, feats[idx], beams[idx], targets[idx])
            params = adam_step(state, params, grads)
            model.set_parameters(params)
            total += loss * len(idx)
        if epoch_losses is not None:
            epoch_losses.append(total / n)
    return model


def predict_dnn(candidates, b_star: int, model: MlpModel) -> int:
    """Highest-scoring candidate; ties take the lowest index."""
    if not candidates:
        raise ValueError("candidate list must be non-empty")
    feats = [(c.range_m, c.angle_deg, c.vel_mps) for c in candidates]
    scores = score_candidates(model, feats, [b_star] * len(candidates))
    return int(np.argmax(scores))


class Solver(ABC):
    """Common fit/predict interface over the identification approaches."""

    name: str

    @abstractmethod
    def fit(self, train) -> None: ...

    @abstractmethod
    def predict(self, candidates, b_star: int) -> int: ...


class OffsetSolver(Solver):
    name = "offset"

    def __init__(self, pointing_angles):
        self.pointing_angles = np.asarray(pointing_angles, dtype=float)
        self.psi0: float | None = None

    def fit(self, train) -> None:
        self.psi0 = estimate_offset(train, self.pointing_angles)

    def predict(self, candidates, b_star: int) -> int:
        return predict_offset(candidates, b_star, self.psi0, self.pointing_angles)


class LinRegAngleSolver(Solver):
    name = "linreg-angle"

    def __init__(self, pointing_angles):
        self.pointing_angles = np.asarray(pointing_angles, dtype=float)
        self.intercept: float | None = None
        self.slope: float | None = None

    def fit(self, train) -> None:
        self.intercept, self.slope = fit_linreg_angle(train, self.pointing_angles)

    def predict(self, candidates, b_star: int) -> int:
        target = self.intercept + self.slope * float(self.pointing_angles[b_star])
        return nearest_angle_index(candidates, target)


class LinReg3dSolver(Solver):
    name = "linreg-3d"

    def __init__(self, pointing_angles):
        self.pointing_angles = np.asarray(pointing_angles, dtype=float)
        self.fits = None

    def fit(self, train) -> None:
        self.fits = fit_linreg_3d(train, self.pointing_angles)

    def predict(self, candidates, b_star: int) -> int:
        return predict_linreg_3d(candidates, b_star, self.fits, self.pointing_angles)


class LookupSolver(Solver):
    name = "lookup"

    def __init__(self, pointing_angles):
        self.pointing_angles = np.asarray(pointing_angles, dtype=float)
        self.table: np.ndarray | None = None

    def fit(self, train) -> None:
        self.table = fit_lookup(train, self.pointing_angles)

    def predict(self, candidates, b_star: int) -> int:
        return predict_lookup(candidates, b_star, self.table)


class DnnSolver(Solver):
    name = "dnn"

    def __init__(self, pointing_angles, hyper: TrainConfig = TrainConfig(),
                 widths: ModelWidths = ModelWidths()):
        self.pointing_angles = np.asarray(pointing_angles, dtype=float)
        self.hyper = hyper
        self.widths = widths
        self.model: MlpModel | None = None
        self.epoch_losses: list[float] = []

    def fit(self, train) -> None:
        self.epoch_losses = []
        self.model = train_dnn(train, n_beams=len(self.pointing_angles),
                               hyper=self.hyper, widths=self.widths,
                               epoch_losses=self.epoch_losses)

    def predict(self, candidates, b_star: int) -> int:
        return predict_dnn(candidates, b_star, self.model)


def make_solver(name: str, pointing_angles, hyper: TrainConfig | None = None) -> Solver:
    if name == "offset":
        return OffsetSolver(pointing_angles)
    if name == "linreg-angle":
        return LinRegAngleSolver(pointing_angles)
    if name == "linreg-3d":
        return LinReg3dSolver(pointing_angles)
    if name == "lookup":
        return LookupSolver(pointing_angles)
    if name == "dnn":
        return DnnSolver(pointing_angles, hyper or TrainConfig())
    raise ValueError(f"unknown solver {name!r}; valid names: {', '.join(SOLVER_NAMES)}")


def evaluate(solver: Solver, test) -> float:
    """Fraction of samples whose predicted index matches the label."""
    _require_labeled(test, "test")
    hits = sum(
        1 for s in test if solver.predict(s.candidates, s.b_star) == s.label
    )
    return hits / len(test)
