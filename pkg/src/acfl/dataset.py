"""Synthetic federated linear-regression instances and their exact optima.

An instance is ``N`` devices, device ``i`` holding features ``X_i``
(``m_i x d``) and labels ``Y_i`` (``m_i x o``), with the global objective

    f(W) = sum_i 0.5 * ||X_i W - Y_i||_F^2 .

The bundled generator draws features uniformly on ``[-1, 1]``, one shared
true weight matrix uniformly on ``[0, 1/30]``, and noiseless labels
``Y_i = X_i @ W_true``, so the optimum is the true weights and the optimal
loss is zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import NumericError, ParameterError
from .numerics import (
    RngStream,
    as_matrix,
    eig_min_sym,
    gaussian_matrix,
    spd_solve,
    uniform_matrix,
)

__all__ = [
    "DeviceData",
    "FederatedDataset",
    "ProblemFacts",
    "eig_min_sum",
    "generate",
    "load_csv",
    "loss",
    "optimum",
    "save_csv",
]

_RANK_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class DeviceData:
    """One device's features and labels.

    Requires more samples than feature dimensions, full column rank of the
    features, and all entries within ``[-1, 1]`` (the range the privacy
    analysis assumes).
    """

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = as_matrix(self.x, "x")
        y = as_matrix(self.y, "y")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        m, d = x.shape
        if y.shape[0] != m:
            raise ParameterError(f"x and y disagree on sample count: {m} vs {y.shape[0]}")
        if m <= d:
            raise ParameterError(
                f"full column rank unattainable: need more samples than features (m={m}, d={d})"
            )
        if float(np.abs(x).max()) > 1.0 or float(np.abs(y).max()) > 1.0:
            raise ParameterError("all entries of x and y must lie in [-1, 1]")
        if eig_min_sym(self.gram_x) <= _RANK_TOL:
            raise ParameterError(f"x is rank deficient (eig_min of X'X below {_RANK_TOL:.0e})")

    @property
    def m(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def o(self) -> int:
        return self.y.shape[1]

    @cached_property
    def gram_x(self) -> np.ndarray:
        """``X^T X`` (d x d), computed once."""
        return self.x.T @ self.x

    @cached_property
    def gram_xy(self) -> np.ndarray:
        """``X^T Y`` (d x o), computed once."""
        return self.x.T @ self.y


@dataclass(frozen=True, eq=False)
class FederatedDataset:
    """All device datasets plus, when known, the true weight matrix."""

    devices: tuple[DeviceData, ...]
    w_true: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "devices", tuple(self.devices))
        if len(self.devices) < 1:
            raise ParameterError("need at least one device")
        d, o = self.devices[0].d, self.devices[0].o
        for i, dev in enumerate(self.devices):
            if dev.d != d or dev.o != o:
                raise ParameterError(
                    f"device {i} has dimensions ({dev.d}, {dev.o}), expected ({d}, {o})"
                )
        if self.w_true is not None:
            w = as_matrix(self.w_true, "w_true")
            if w.shape != (d, o):
                raise ParameterError(f"w_true must be ({d}, {o}), got {w.shape}")
            object.__setattr__(self, "w_true", w)

    @property
    def n_devices(self) -> int:
        return len(self.devices)

    @property
    def d(self) -> int:
        return self.devices[0].d

    @property
    def o(self) -> int:
        return self.devices[0].o


@dataclass(frozen=True, eq=False)
class ProblemFacts:
    """Exact solution data for one instance.

    ``lam`` is the smallest eigenvalue of ``sum_i X_i^T X_i`` -- the sharpest
    constant with ``sum_i X_i^T X_i >= lam * I``, which is what the
    ``1/(lam t)`` step size wants.  See :func:`eig_min_sum` for the more
    conservative per-device figure.
    """

    w_star: np.ndarray
    lam: float
    loss_at_optimum: float

    def __post_init__(self):
        object.__setattr__(self, "w_star", as_matrix(self.w_star, "w_star"))
        if not self.lam > 0:
            raise ParameterError(f"lam must be positive, got {self.lam}")
        if self.loss_at_optimum < 0:
            raise ParameterError("loss_at_optimum must be nonnegative")


def generate(
    n_devices: int,
    m: int,
    d: int,
    o: int,
    stream: RngStream,
    *,
    label_noise_sd: float = 0.0,
) -> FederatedDataset:
    """Draw a fresh instance, noiseless by default.

    ``X_i ~ U[-1, 1]``, ``W_true ~ U[0, 1/30]``, ``Y_i = X_i @ W_true``
    (plus optional Gaussian label noise of standard deviation
    ``label_noise_sd``).  Feature matrices that fail the rank check (a
    measure-zero event) are redrawn, at most three times.  Label entries
    stay within ``[-1, 1]`` as long as ``d <= 30`` given the ``1/30``
    weight scale and the noise is small enough.
    """
    if d < 1 or o < 1:
        raise ParameterError(f"dimensions must be positive, got d={d}, o={o}")
    if m <= d:
        raise ParameterError(f"full column rank unattainable with m={m} <= d={d}")
    if n_devices < 1:
        raise ParameterError(f"n_devices must be positive, got {n_devices}")
    if label_noise_sd < 0:
        raise ParameterError(f"label_noise_sd must be nonnegative, got {label_noise_sd}")
    w_true = uniform_matrix(stream.child("w_true"), d, o, 0.0, 1.0 / 30.0)
    devices = []
    for i in range(n_devices):
        for attempt in range(4):
            x = uniform_matrix(stream.child("x", i, attempt), m, d, -1.0, 1.0)
            if eig_min_sym(x.T @ x) > _RANK_TOL:
                break
        else:
            raise NumericError(f"device {i}: no full-rank feature draw after 3 retries")
        y = x @ w_true
        if label_noise_sd > 0.0:
            y = y + gaussian_matrix(stream.child("y", i), m, o, label_noise_sd**2)
        devices.append(DeviceData(x, y))
    return FederatedDataset(tuple(devices), w_true)


def loss(w, ds: FederatedDataset) -> float:
    """Total objective ``sum_i 0.5 * ||X_i W - Y_i||_F^2``."""
    w = as_matrix(w, "w")
    if w.shape != (ds.d, ds.o):
        raise ParameterError(f"w must be ({ds.d}, {ds.o}), got {w.shape}")
    total = 0.0
    for dev in ds.devices:
        r = dev.x @ w - dev.y
        total += 0.5 * float(np.sum(r * r))
    return total


def optimum(ds: FederatedDataset) -> ProblemFacts:
    """Closed-form least-squares optimum of the instance.

    ``w_star`` solves ``(sum_i X_i^T X_i) W = sum_i X_i^T Y_i``; ``lam`` is
    the smallest eigenvalue of the Gram sum.
    """
    gram = ds.devices[0].gram_x.copy()
    rhs = ds.devices[0].gram_xy.copy()
    for dev in ds.devices[1:]:
        gram += dev.gram_x
        rhs += dev.gram_xy
    w_star = spd_solve(gram, rhs)
    return ProblemFacts(w_star, eig_min_sym(gram), loss(w_star, ds))


def eig_min_sum(ds: FederatedDataset) -> float:
    """Sum over devices of the smallest eigenvalue of ``X_i^T X_i``.

    Never exceeds ``optimum(ds).lam``; reported alongside it as the more
    conservative strong-convexity figure.
    """
    return float(sum(eig_min_sym(dev.gram_x) for dev in ds.devices))


def _fmt(x: float) -> str:
    return repr(float(x))


def save_csv(ds: FederatedDataset, directory) -> list[Path]:
    """Dump one ``device_NNNN.csv`` per device (columns ``x_1..x_d,y_1..y_o``).

    Also writes ``w_true.csv`` when the true weights are known.  Floats are
    written with ``repr`` so a round-trip through :func:`load_csv` is exact.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    d, o = ds.d, ds.o
    header = ",".join([f"x_{j + 1}" for j in range(d)] + [f"y_{k + 1}" for k in range(o)])
    for i, dev in enumerate(ds.devices):
        path = directory / f"device_{i:04d}.csv"
        with open(path, "w", newline="") as f:
            f.write(header + "\n")
            for row_x, row_y in zip(dev.x, dev.y):
                f.write(",".join(_fmt(v) for v in (*row_x, *row_y)) + "\n")
        paths.append(path)
    if ds.w_true is not None:
        path = directory / "w_true.csv"
        with open(path, "w", newline="") as f:
            f.write(",".join(f"w_{k + 1}" for k in range(o)) + "\n")
            for row in ds.w_true:
                f.write(",".join(_fmt(v) for v in row) + "\n")
        paths.append(path)
    return paths


def load_csv(directory) -> FederatedDataset:
    """Rebuild a dataset saved by :func:`save_csv`."""
    directory = Path(directory)
    device_paths = sorted(directory.glob("device_*.csv"))
    if not device_paths:
        raise ParameterError(f"no device_*.csv files under {directory}")
    devices = []
    for path in device_paths:
        with open(path, newline="") as f:
            names = f.readline().strip().split(",")
            d = sum(1 for n in names if n.startswith("x_"))
            rows = [[float(v) for v in line.strip().split(",")] for line in f if line.strip()]
        data = np.asarray(rows, dtype=np.float64)
        devices.append(DeviceData(data[:, :d], data[:, d:]))
    w_true = None
    w_path = directory / "w_true.csv"
    if w_path.exists():
        with open(w_path, newline="") as f:
            f.readline()
            w_true = np.asarray(
                [[float(v) for v in line.strip().split(",")] for line in f if line.strip()],
                dtype=np.float64,
            )
    return FederatedDataset(tuple(devices), w_true)
