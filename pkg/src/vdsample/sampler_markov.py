"""Metropolis random walks on the grid, jump mixing, spectral gaps and
the W_m recovery certificate."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numba
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .density import DensityGrid
from .grid import GridDims, as_dims
from .sampler_iid import InverseCDF, make_rng
from .schemes import SamplingScheme, unique_in_order
from .transforms import AcquisitionModel, dense_acquisition_matrix

KERNEL_TOL = 1e-12
DENSE_EIG_MAX = 4096
CERTIFICATE_MAX_N = 4096
# residuals below this are floating-point roundoff of an exact identity
CERTIFICATE_ZERO_TOL = 1e-12


class KernelError(ValueError):
    pass


class ChainBudgetExceeded(RuntimeError):
    """The step budget ran out before the distinct-sample target was met."""

    def __init__(self, message, scheme: SamplingScheme):
        super().__init__(message)
        self.scheme = scheme


@dataclass(frozen=True, eq=False)
class TransitionKernel:
    """``P = (1 - alpha) * local + alpha * 1 p^T``.

    ``local`` is a sparse row-stochastic matrix (the Metropolis walk); the
    rank-one jump part is never materialized.
    """

    local: sp.csr_matrix = field(repr=False)
    stationary: DensityGrid = field(repr=False)
    alpha: float = 0.0
    neighborhood: str = "von_neumann"
    periodic: bool = False

    @property
    def n(self) -> int:
        return self.local.shape[0]

    @property
    def dims(self) -> GridDims:
        return self.stationary.dims

    def to_dense(self) -> np.ndarray:
        p = self.stationary.flat
        return (1 - self.alpha) * self.local.toarray() + self.alpha * np.outer(np.ones(self.n), p)

    def left_apply(self, v) -> np.ndarray:
        """Row vector times kernel, ``v P``."""
        v = np.asarray(v, dtype=float)
        return (1 - self.alpha) * (self.local.T @ v) + self.alpha * v.sum() * self.stationary.flat

    def row_sum_residual(self) -> float:
        sums = np.asarray(self.local.sum(axis=1)).ravel()
        return float(np.abs(sums - 1).max())

    def detailed_balance_residual(self) -> float:
        flow = sp.diags(self.stationary.flat) @ self.local
        return float(abs(flow - flow.T).max()) * (1 - self.alpha)

    def stationarity_residual(self) -> float:
        p = self.stationary.flat
        return float(np.abs(self.left_apply(p) - p).max())

    def check(self, tol: float = KERNEL_TOL) -> None:
        if self.local.data.size and self.local.data.min() < 0:
            raise KernelError("negative transition probability")
        for name, value in (("row sum", self.row_sum_residual()),
                            ("detailed balance", self.detailed_balance_residual()),
                            ("stationarity", self.stationarity_residual())):
            if value > tol:
                raise KernelError(f"{name} residual {value:.3e} exceeds {tol:g}")


def proposal_kernel(dims, neighborhood: str = "von_neumann", periodic: bool = False) -> sp.csr_matrix:
    """Uniform proposal over the neighbours N(i) of every cell.

    ``von_neumann`` uses the 2d axis neighbours (4 in 2D, 6 in 3D);
    ``full`` proposes every other cell.
    """
    dims = as_dims(dims)
    n = dims.n
    if neighborhood == "full":
        dense = (np.ones((n, n)) - np.eye(n)) / (n - 1)
        return sp.csr_matrix(dense)
    if neighborhood != "von_neumann":
        raise KernelError(f"unknown neighborhood {neighborhood!r}")
    coords = np.indices(dims.shape).reshape(dims.d, -1)
    rows, cols = [], []
    for axis in range(dims.d):
        for step in (-1, 1):
            c = coords.copy()
            c[axis] += step
            if periodic:
                c[axis] %= dims.dims[axis]
                ok = np.ones(n, dtype=bool)
            else:
                ok = (c[axis] >= 0) & (c[axis] < dims.dims[axis])
            rows.append(np.flatnonzero(ok))
            cols.append(np.ravel_multi_index(tuple(c[:, ok]), dims.shape))
    rows, cols = np.concatenate(rows), np.concatenate(cols)
    degree = np.bincount(rows, minlength=n)
    mat = sp.coo_matrix((1.0 / degree[rows], (rows, cols)), shape=(n, n))
    return mat.tocsr()  # duplicate neighbours (axes of length 2) are summed


def metropolis_kernel(p: DensityGrid, neighborhood: str = "von_neumann",
                      periodic: bool = False) -> TransitionKernel:
    """Metropolis walk with stationary distribution ``p``.

    Off-diagonal entries are ``min(P*_ij, p_j P*_ji / p_i)``, the proposal
    times the acceptance probability; the diagonal takes the rejected mass.
    """
    mass = p.flat
    if mass.min() <= 0:
        raise KernelError("Metropolis kernel needs a strictly positive density")
    prop = proposal_kernel(p.dims, neighborhood, periodic).tocoo()
    prop_t = prop.T.tocsr()
    reverse = np.asarray(prop_t[prop.row, prop.col]).ravel()
    off = prop.row != prop.col
    rows, cols = prop.row[off], prop.col[off]
    vals = np.minimum(prop.data[off], mass[cols] * reverse[off] / mass[rows])
    offdiag = sp.coo_matrix((vals, (rows, cols)), shape=prop.shape).tocsr()
    diag = 1.0 - np.asarray(offdiag.sum(axis=1)).ravel()
    local = (offdiag + sp.diags(np.maximum(diag, 0.0))).tocsr()
    local.sort_indices()
    kernel = TransitionKernel(local, p, 0.0, neighborhood, periodic)
    kernel.check()
    return kernel


def mix_with_jumps(kernel: TransitionKernel, alpha: float, p: DensityGrid | None = None) -> TransitionKernel:
    """Convex combination ``(1 - alpha) P + alpha * P_jump`` with ``P_jump[i, j] = p_j``."""
    if not 0 <= alpha <= 1:
        raise KernelError("alpha must lie in [0, 1]")
    if p is not None and not np.array_equal(p.mass, kernel.stationary.mass):
        raise KernelError("jump density must equal the kernel's stationary density")
    combined = 1 - (1 - alpha) * (1 - kernel.alpha)
    return replace(kernel, alpha=combined)


# -- chain simulation ---------------------------------------------------------


@numba.njit(cache=True)
def _walk(indptr, indices, cum, state, alpha, u_jump, u_local, jump_to,
          seen, n_seen, target, out):
    """Advance the chain over one chunk of pre-drawn uniforms.

    Returns (steps taken, final state, distinct count).
    """
    steps = 0
    for t in range(u_jump.shape[0]):
        if n_seen >= target:
            break
        if u_jump[t] < alpha:
            state = jump_to[t]
        else:
            lo = indptr[state]
            hi = indptr[state + 1]
            r = u_local[t] * cum[hi - 1]
            nxt = indices[hi - 1]
            for k in range(lo, hi):
                if cum[k] > r:
                    nxt = indices[k]
                    break
            state = nxt
        out[t] = state
        steps += 1
        if not seen[state]:
            seen[state] = True
            n_seen += 1
    return steps, state, n_seen


def _row_cumsums(local: sp.csr_matrix) -> np.ndarray:
    cum = np.empty_like(local.data)
    for i in range(local.shape[0]):
        lo, hi = local.indptr[i], local.indptr[i + 1]
        cum[lo:hi] = np.cumsum(local.data[lo:hi])
    return cum


def run_chain(kernel: TransitionKernel, target: int | None = None, steps: int | None = None,
              seed=None, omega1=(), max_steps: int | None = None,
              chunk: int = 65536) -> SamplingScheme:
    """Simulate the chain from X_1 ~ p.

    Either stop once ``target`` distinct indices (counting ``omega1``) are
    collected, or after exactly ``steps`` visited states.  The budget
    defaults to ``1000 n`` states.
    """
    n = kernel.n
    if (target is None) == (steps is None):
        raise ValueError("give exactly one of target / steps")
    omega1 = np.asarray(omega1, dtype=np.int64)
    if target is not None and target > n:
        raise ValueError("target exceeds the grid size")
    budget = steps if steps is not None else (max_steps or 1000 * n)
    goal = target if target is not None else n + 1
    rng = make_rng(seed)
    sampler = InverseCDF(kernel.stationary.flat)
    local = kernel.local
    cum = _row_cumsums(local)
    seen = np.zeros(n, dtype=np.bool_)
    seen[omega1] = True
    n_seen = int(seen.sum())
    visits = np.empty(budget, dtype=np.int64)
    state = int(sampler(rng, 1)[0])
    visits[0] = state
    if not seen[state]:
        seen[state] = True
        n_seen += 1
    done = 1
    while done < budget and n_seen < goal:
        size = min(chunk, budget - done)
        u_jump = rng.random(size) if kernel.alpha > 0 else np.ones(size)
        u_local = rng.random(size)
        jump_to = sampler(rng, size) if kernel.alpha > 0 else np.zeros(size, dtype=np.int64)
        taken, state, n_seen = _walk(local.indptr, local.indices, cum, state, kernel.alpha,
                                     u_jump, u_local, jump_to, seen, n_seen, goal,
                                     visits[done:done + size])
        done += taken
    log = visits[:done].copy()
    omega = unique_in_order(np.concatenate([omega1, log]))
    scheme = SamplingScheme(kernel.dims, omega, omega1=omega1, draw_log=log,
                            seed=int(seed) if isinstance(seed, (int, np.integer)) else None,
                            provenance="Markov",
                            params={"alpha": kernel.alpha, "steps": done,
                                    "neighborhood": kernel.neighborhood})
    if target is not None and n_seen < target:
        raise ChainBudgetExceeded(
            f"{done} steps gave {n_seen} distinct indices, target {target}", scheme)
    return scheme


# -- spectral analysis --------------------------------------------------------


@dataclass(frozen=True)
class SpectralReport:
    lambda2: float
    gap: float
    method: str

    def to_dict(self) -> dict:
        return asdict(self)


def _symmetrized_local(kernel: TransitionKernel) -> sp.csr_matrix:
    root = np.sqrt(kernel.stationary.flat)
    sym = sp.diags(root) @ kernel.local @ sp.diags(1.0 / root)
    return ((sym + sym.T) * 0.5).tocsr()


def spectral_gap(kernel: TransitionKernel, method: str = "auto") -> SpectralReport:
    """Second largest eigenvalue of a reversible kernel and its gap ``1 - lambda2``.

    Eigenvalues are those of ``D^1/2 P D^-1/2`` (symmetric for reversible P).
    The jump part only rescales the spectrum off the top eigenvector
    ``sqrt(p)``: lambda_k -> (1 - alpha) lambda_k.
    """
    if kernel.detailed_balance_residual() > 1e-10:
        raise KernelError("spectral_gap needs a reversible kernel")
    n = kernel.n
    if method == "auto":
        method = "dense-symmetric-eig" if n <= DENSE_EIG_MAX else "lanczos"
    sym = _symmetrized_local(kernel)
    root = np.sqrt(kernel.stationary.flat)
    if method == "dense-symmetric-eig":
        mat = (1 - kernel.alpha) * sym.toarray() + kernel.alpha * np.outer(root, root)
        lam2 = float(np.linalg.eigvalsh(mat)[-2]) if n > 1 else -1.0
    elif method == "lanczos":
        a = kernel.alpha

        def matvec(v):
            v = np.ravel(v)
            proj = root @ v
            # top eigenvector sqrt(p) (eigenvalue 1) is pushed down to -2
            return (1 - a) * (sym @ v) + a * proj * root - 3.0 * proj * root

        op = spla.LinearOperator((n, n), matvec=matvec, dtype=float)
        lam2 = float(spla.eigsh(op, k=1, which="LA", tol=1e-12,
                                v0=np.ones(n) / np.sqrt(n))[0][0])
    else:
        raise ValueError(f"unknown method {method!r}")
    lam2 = min(max(lam2, -1.0), 1.0)
    return SpectralReport(lam2, 1.0 - lam2, method)


@dataclass(frozen=True)
class CheegerReport:
    dims: tuple[int, ...]
    gap: float
    bound: float
    holds: bool
    half_split_conductance: float

    def to_dict(self) -> dict:
        return asdict(self)


def torus_walk(dims) -> TransitionKernel:
    """Simple random walk on the periodic grid (uniform stationary law)."""
    return metropolis_kernel(DensityGrid.uniform(dims), "von_neumann", periodic=True)


def ergodic_flow(kernel: TransitionKernel, subset) -> float:
    """F(B) = sum_{i in B, j not in B} p_i P_ij."""
    inside = np.zeros(kernel.n, dtype=bool)
    inside[np.asarray(subset, dtype=np.int64)] = True
    p = kernel.stationary.flat
    dense_part = (1 - kernel.alpha) * (sp.diags(p * inside) @ kernel.local)[:, ~inside].sum()
    jump_part = kernel.alpha * p[inside].sum() * p[~inside].sum()
    return float(dense_part + jump_part)


def verify_cheeger_bound(dims) -> CheegerReport:
    """Compare the torus-walk gap with the conductance bound (4/d) n^(-1/d)."""
    dims = as_dims(dims)
    side = dims.dims[0]
    if any(v != side for v in dims.dims) or side % 2:
        raise KernelError("Cheeger check needs a cubic torus with even side")
    kernel = torus_walk(dims)
    gap = spectral_gap(kernel).gap
    bound = 4.0 / dims.d * dims.n ** (-1.0 / dims.d)
    half = np.flatnonzero(np.indices(dims.shape)[0].ravel() < side // 2)
    phi = ergodic_flow(kernel, half) / kernel.stationary.flat[half].sum()
    return CheegerReport(dims.dims, float(gap), float(bound), bool(gap <= bound), float(phi))


def weyl_check(kernel: TransitionKernel, alphas) -> list[tuple[float, float, bool]]:
    """(alpha, gap(P^(alpha)), gap >= alpha) for each alpha."""
    out = []
    for a in alphas:
        g = spectral_gap(mix_with_jumps(kernel, a)).gap
        out.append((float(a), g, g >= a - 1e-12))
    return out


# -- recovery certificate ----------------------------------------------------


@dataclass(frozen=True)
class CertificateReport:
    infnorm_residual: float
    max_certified_s: int
    m: int

    def to_dict(self) -> dict:
        return asdict(self)


def certified_sparsity(residual: float, s_max: int) -> int:
    """Largest s <= s_max with residual < 1 / (2 s), or 0."""
    if residual <= 0:
        return int(s_max)
    s = int(np.floor(1.0 / (2.0 * residual)))
    while s > 0 and residual >= 1.0 / (2 * s):
        s -= 1
    return int(min(s, s_max))


def certificate_matrix(A: np.ndarray, p, visits) -> np.ndarray:
    """W_m = (1/m) sum_l Theta_{X_l} on the real frame [Re a_i; Im a_i].

    Theta_i = Re(conj(a_i) a_i^T) / p_i, so that sum_i p_i Theta_i = Re(A^H A) = I.
    """
    p = np.asarray(p, dtype=float).ravel()
    visits = np.asarray(visits, dtype=np.int64).ravel()
    counts = np.bincount(visits, minlength=A.shape[0]).astype(float)
    used = counts > 0
    if np.any(p[used] <= 0):
        raise KernelError("visited index has zero probability")
    weights = counts[used] / p[used] / visits.size
    rows = A[used]
    return np.real(rows.conj().T @ (weights[:, None] * rows))


def juditsky_certificate(model: AcquisitionModel, p: DensityGrid, visits, s_max: int,
                         A: np.ndarray | None = None) -> CertificateReport:
    if model.n > CERTIFICATE_MAX_N:
        raise KernelError(f"certificate limited to n <= {CERTIFICATE_MAX_N}")
    if A is None:
        A = dense_acquisition_matrix(model.dims, model.wavelet)
    W = certificate_matrix(A, p.flat, visits)
    residual = float(np.abs(np.eye(model.n) - W).max())
    if residual < CERTIFICATE_ZERO_TOL:
        residual = 0.0
    return CertificateReport(residual, certified_sparsity(residual, s_max), int(np.size(visits)))


# -- kernel text export -------------------------------------------------------


def write_kernel(path, kernel: TransitionKernel) -> None:
    """Coordinate-list text: header comments, ``p i value`` and ``P i j value`` lines."""
    coo = kernel.local.tocoo()
    lines = [
        "# vdsample transition kernel",
        f"# dims {' '.join(map(str, kernel.dims.dims))}",
        f"# alpha {float(kernel.alpha)!r}",
        f"# neighborhood {kernel.neighborhood}",
        f"# periodic {int(kernel.periodic)}",
    ]
    lines += [f"p {i} {float(v)!r}" for i, v in enumerate(kernel.stationary.flat)]
    lines += [f"P {i} {j} {float(v)!r}" for i, j, v in zip(coo.row, coo.col, coo.data)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_kernel(path) -> TransitionKernel:
    header, mass, rows, cols, vals = {}, {}, [], [], []
    for line in Path(path).read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "#":
            if len(parts) >= 3:
                header[parts[1]] = parts[2:]
        elif parts[0] == "p":
            mass[int(parts[1])] = float(parts[2])
        elif parts[0] == "P":
            rows.append(int(parts[1]))
            cols.append(int(parts[2]))
            vals.append(float(parts[3]))
    dims = as_dims([int(v) for v in header["dims"]])
    p = np.array([mass[i] for i in range(dims.n)])
    local = sp.csr_matrix((vals, (rows, cols)), shape=(dims.n, dims.n))
    local.sort_indices()
    return TransitionKernel(local, DensityGrid(dims, p), float(header["alpha"][0]),
                            header["neighborhood"][0], bool(int(header["periodic"][0])))


def write_report(path, report) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=2))
