"""Noiseless l1 reconstruction by Douglas-Rachford splitting, and PSNR."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .transforms import AcquisitionModel, wavelet_inverse

# relative RMS error below which two images count as identical
PSNR_EXACT_TOL = 1e-12


class ReconstructionError(ValueError):
    pass


@dataclass(frozen=True)
class ReconstructionConfig:
    gamma: float = 1.0
    relax: float = 1.0
    tol_fixed_point: float = 1e-9
    tol_feasibility: float = 1e-8
    max_iter: int = 20000

    def __post_init__(self):
        if not self.gamma > 0:
            raise ReconstructionError("gamma must be positive")
        if not 0 < self.relax < 2:
            raise ReconstructionError("relax must lie in (0, 2)")
        if not (self.tol_fixed_point > 0 and self.tol_feasibility > 0):
            raise ReconstructionError("tolerances must be positive")
        if self.max_iter < 1:
            raise ReconstructionError("max_iter must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class ReconstructionResult:
    coefficients: np.ndarray = field(repr=False)
    image: np.ndarray = field(repr=False)
    iterations: int
    feasibility_residual: float
    fixed_point_residual: float
    l1: float
    converged: bool

    def metadata(self) -> dict:
        return {"iterations": self.iterations,
                "feasibility_residual": self.feasibility_residual,
                "fixed_point_residual": self.fixed_point_residual,
                "l1": self.l1, "converged": self.converged}

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.metadata(), indent=2))


def soft_threshold(z, gamma: float) -> np.ndarray:
    """Prox of gamma * ||.||_1 for complex entries: shrink the modulus, keep the phase."""
    if gamma < 0:
        raise ReconstructionError("gamma must be nonnegative")
    z = np.asarray(z)
    mag = np.abs(z)
    scale = np.maximum(mag - gamma, 0.0) / np.where(mag > 0, mag, 1.0)
    return z * scale


def _check_omega(omega, n: int) -> np.ndarray:
    omega = np.asarray(omega, dtype=np.int64).ravel()
    if omega.size == 0:
        raise ReconstructionError("omega is empty")
    if omega.min() < 0 or omega.max() >= n:
        raise ReconstructionError("omega index out of range")
    if np.unique(omega).size != omega.size:
        raise ReconstructionError("omega contains duplicate indices")
    return omega


def measure(model: AcquisitionModel, z, omega) -> np.ndarray:
    """y = A_omega z."""
    return model.apply(z).ravel()[np.asarray(omega, dtype=np.int64)]


def project_affine(model: AcquisitionModel, z, omega, y) -> np.ndarray:
    """Euclidean projection onto {A_omega z = y}: z + A*_omega (y - A_omega z).

    Exact because the rows of A are orthonormal.
    """
    omega = _check_omega(omega, model.n)
    y = np.asarray(y).ravel()
    if y.shape != omega.shape:
        raise ReconstructionError("y must have one entry per index of omega")
    z = np.asarray(z, dtype=complex).reshape(model.dims.shape)
    resid = np.zeros(model.n, dtype=complex)
    resid[omega] = y - model.apply(z).ravel()[omega]
    return z + model.adjoint(resid.reshape(model.dims.shape))


def feasibility_residual(model: AcquisitionModel, z, omega, y) -> float:
    """||A_omega z - y|| / ||y|| (absolute when y = 0)."""
    y = np.asarray(y).ravel()
    diff = np.linalg.norm(measure(model, z, omega) - y)
    ny = np.linalg.norm(y)
    return float(diff / ny) if ny > 0 else float(diff)


def douglas_rachford(model: AcquisitionModel, omega, y,
                     config: ReconstructionConfig | None = None) -> ReconstructionResult:
    """min ||z||_1 subject to A_omega z = y.

    w <- w + relax * (prox(2 P(w) - w) - P(w)), output P(w), starting from
    w = A*_omega y.  Stops when ||w_k+1 - w_k|| / max(1, ||w_k||) falls
    below tol_fixed_point.
    """
    config = config or ReconstructionConfig()
    omega = _check_omega(omega, model.n)
    y = np.asarray(y, dtype=complex).ravel()
    if y.shape != omega.shape:
        raise ReconstructionError("y must have one entry per index of omega")
    full = np.zeros(model.n, dtype=complex)
    full[omega] = y
    w = model.adjoint(full.reshape(model.dims.shape))
    if omega.size == model.n:
        z_hat, it, fp, converged = w, 1, 0.0, True
    else:
        converged = False
        fp = math.inf
        for it in range(1, config.max_iter + 1):
            pw = project_affine(model, w, omega, y)
            step = soft_threshold(2 * pw - w, config.gamma) - pw
            w_new = w + config.relax * step
            fp = float(np.linalg.norm(w_new - w) / max(1.0, np.linalg.norm(w)))
            w = w_new
            if fp < config.tol_fixed_point:
                converged = True
                break
        z_hat = project_affine(model, w, omega, y)
    feas = feasibility_residual(model, z_hat, omega, y)
    if feas > config.tol_feasibility:
        converged = False
    image = wavelet_inverse(z_hat, model.wavelet, model.dims)
    return ReconstructionResult(z_hat, image, it, feas, fp, float(np.abs(z_hat).sum()), converged)


def relative_error(reference, estimate) -> float:
    reference = np.asarray(reference)
    return float(np.linalg.norm(estimate - reference) / np.linalg.norm(reference))


def psnr(reference, reconstructed) -> float:
    """10 log10(peak^2 / MSE), peak = max |reference|; +inf for identical images."""
    ref = np.asarray(reference)
    rec = np.asarray(reconstructed)
    if ref.shape != rec.shape:
        raise ReconstructionError("image shapes differ")
    peak = float(np.abs(ref).max())
    if peak == 0:
        raise ReconstructionError("reference image is identically zero")
    mse = float(np.mean(np.abs(ref - rec) ** 2))
    rms_ref = math.sqrt(float(np.mean(np.abs(ref) ** 2)))
    if math.sqrt(mse) <= PSNR_EXACT_TOL * rms_ref:
        return math.inf
    return 10.0 * math.log10(peak ** 2 / mse)
