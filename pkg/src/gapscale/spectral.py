"""Dense and Krylov eigensolvers plus gap extraction."""
import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import CapacityError, NumericalError
from .models import DENSE_LIMIT

DEFAULT_DEGENERACY_TOL = 1e-9
SMALL_DIM = 64


@dataclass
class SpectrumResult:
    energies: np.ndarray
    vectors: np.ndarray | None = field(default=None, repr=False)
    residuals: np.ndarray | None = None
    basis_tag: str = "full"
    iterations: int = 0
    matvecs: int = 0
    norm_estimate: float = float("nan")


@dataclass(frozen=True)
class GapReport:
    e0: float
    e1: float
    gap_raw: float
    gap_distinct: float
    degeneracy: int


def _as_operator_dense(H):
    if hasattr(H, "to_dense"):
        return H.to_dense(), getattr(H, "basis_tag", "full")
    M = np.asarray(H)
    if M.shape[0] > DENSE_LIMIT:
        raise CapacityError(f"dense diagonalization limited to dimension {DENSE_LIMIT}")
    return M, "dense"


def dense_spectrum(H, vectors=True):
    """Full eigendecomposition of a Hermitian operator of dimension <= DENSE_LIMIT."""
    M, tag = _as_operator_dense(H)
    if vectors:
        e, V = np.linalg.eigh(M)
        res = np.linalg.norm(M @ V - V * e[None, :], axis=0)
        return SpectrumResult(e, V, res, tag)
    return SpectrumResult(np.linalg.eigvalsh(M), None, None, tag)


def start_vector(dimension, key="", dtype=np.float64):
    """Deterministic pseudo-random unit vector keyed by (key, dimension)."""
    digest = hashlib.sha256(f"{key}|{dimension}".encode()).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    v = rng.standard_normal(dimension)
    if np.issubdtype(dtype, np.complexfloating):
        v = v + 1j * rng.standard_normal(dimension)
    return v / np.linalg.norm(v)


def _apply(H, v):
    return H.apply(v) if hasattr(H, "apply") else H @ v


def lowest_eigenpairs(H, m=2, tol=1e-10, v0=None, ncv=None, max_restarts=2000,
                      key=None, deflate=True):
    """Lowest m eigenpairs by thick-restart (Krylov-Schur) Lanczos.

    Each new Krylov vector is orthogonalized against the whole basis, with a
    second pass whenever the first removed more than ~30% of its norm.  A
    pair is converged when ||H v - theta v|| <= tol * ||H||_est, with ||H||_est
    the largest Ritz value magnitude seen so far.

    A single start vector only ever sees one copy of an exactly degenerate
    eigenvalue.  With ``deflate`` the solver restarts in the orthogonal
    complement of the converged vectors until no missed level lies below the
    m-th one.
    """
    n = H.shape[0] if hasattr(H, "shape") else H.dimension
    if m < 1 or m > 16:
        raise ValueError("m must lie in 1..16")
    if n < m:
        raise ValueError(f"dimension {n} smaller than m={m}")
    dtype = np.complex128 if np.issubdtype(getattr(H, "dtype", np.float64), np.complexfloating) \
        else np.float64
    tag = getattr(H, "basis_tag", "full")
    if n <= max(2 * m + 2, SMALL_DIM):
        # Krylov space would be (nearly) the whole space
        M = np.column_stack([_apply(H, e) for e in np.eye(n, dtype=dtype)])
        e, V = np.linalg.eigh(M)
        res = np.linalg.norm(M @ V[:, :m] - V[:, :m] * e[None, :m], axis=0)
        return SpectrumResult(e[:m], V[:, :m], res, tag, 0, n, float(np.abs(e).max()))
    if key is None:
        key = tag
    if v0 is None:
        v0 = start_vector(n, key, dtype)
    spec = _krylov_schur(H, n, m, tol, v0, ncv, max_restarts, dtype, None)
    if not deflate:
        return spec
    locked = spec.vectors
    energies, vectors, res = spec.energies, spec.vectors, spec.residuals
    iterations, matvecs, norm_est = spec.iterations, spec.matvecs, spec.norm_estimate
    for rnd in range(n):
        if n - locked.shape[1] < SMALL_DIM // 2:
            break
        w0 = start_vector(n, f"{key}|deflate{rnd}", dtype)
        sigma = 2.0 * norm_est + 1.0
        extra = _krylov_schur(H, n, 1, tol, w0, ncv, max_restarts, dtype, (locked, sigma))
        iterations += extra.iterations
        matvecs += extra.matvecs
        norm_est = max(norm_est, extra.norm_estimate)
        if extra.energies[0] >= energies[-1] - 10.0 * tol * norm_est:
            break
        locked = np.column_stack([locked, extra.vectors])
        e_all = np.concatenate([energies, extra.energies])
        order = np.argsort(e_all, kind="stable")[:m]
        energies = e_all[order]
        vectors = np.column_stack([vectors, extra.vectors])[:, order]
        res = np.concatenate([res, extra.residuals])[order]
    return SpectrumResult(energies, vectors, res, tag, iterations, matvecs, norm_est)


def _krylov_schur(H, n, m, tol, v0, ncv, max_restarts, dtype, lock):
    """Core restarted Lanczos.

    `lock` is an optional (vectors, sigma) pair: the operator becomes
    H + sigma * X X^H, which lifts the already converged directions X above the
    top of the spectrum (Wielandt deflation) so the iteration cannot fall back
    onto them through rounding.
    """
    if ncv is None:
        ncv = max(2 * m + 18, 24)
    free = n if lock is None else n - lock[0].shape[1]
    ncv = min(ncv, free)
    real = dtype == np.float64

    def proj(A, x):
        return A.T @ x if real else A.conj().T @ x

    def deflect(x):
        if lock is None:
            return x
        x = x - lock[0] @ proj(lock[0], x)
        return x - lock[0] @ proj(lock[0], x)

    def op(x):
        y = _apply(H, x)
        if lock is not None:
            y = y + lock[1] * (lock[0] @ proj(lock[0], x))
        return y

    v0 = deflect(np.asarray(v0, dtype=dtype))
    v0 = v0 / np.linalg.norm(v0)

    V = np.zeros((n, ncv + 1), dtype=dtype, order="F")
    T = np.zeros((ncv, ncv), dtype=dtype)
    V[:, 0] = v0
    k = 0          # number of locked Ritz vectors carried over
    norm_est = 0.0
    matvecs = 0
    beta = 0.0
    for restart in range(max_restarts):
        for j in range(k, ncv):
            w = op(V[:, j])
            matvecs += 1
            Vj = V[:, : j + 1]
            w_norm = np.linalg.norm(w)
            c = proj(Vj, w)
            w = w - Vj @ c
            if np.linalg.norm(w) < 0.7071 * w_norm:
                c2 = proj(Vj, w)
                w = w - Vj @ c2
                c = c + c2
            T[: j + 1, j] = c
            T[j, : j + 1] = c.conj()
            beta = np.linalg.norm(w)
            if beta < 1e-14 * max(norm_est, abs(c[-1]), 1.0):
                # invariant subspace: restart direction from a fresh vector
                w = start_vector(n, f"restart{restart}.{j}", dtype)
                w = w - Vj @ proj(Vj, w)
                w = w - Vj @ proj(Vj, w)
                beta_new = np.linalg.norm(w)
                V[:, j + 1] = w / beta_new
                beta = 0.0
                if j + 1 < ncv:
                    continue
            else:
                V[:, j + 1] = w / beta
            if j + 1 < ncv:
                T[j + 1, j] = beta
                T[j, j + 1] = beta
        theta, Y = np.linalg.eigh(T)
        norm_est = max(norm_est, float(np.abs(theta).max()))
        resid = np.abs(beta * Y[-1, :])
        if np.all(resid[:m] <= tol * norm_est):
            X = V[:, :ncv] @ Y[:, :m]
            X = deflect(X)
            X /= np.linalg.norm(X, axis=0)[None, :]
            HX = np.column_stack([_apply(H, X[:, i]) for i in range(m)])
            matvecs += m
            energies = np.real(np.einsum("ij,ij->j", X.conj(), HX))
            true_res = np.linalg.norm(HX - X * energies[None, :], axis=0)
            if np.all(true_res <= tol * norm_est):
                order = np.argsort(energies)
                return SpectrumResult(energies[order], X[:, order], true_res[order],
                                      getattr(H, "basis_tag", "full"), restart + 1, matvecs,
                                      norm_est)
        # thick restart: keep the lowest k Ritz vectors plus the residual direction
        k = min(max(m + (ncv - m) // 2, m + 1), ncv - 2)
        V[:, :k] = V[:, :ncv] @ Y[:, :k]
        V[:, k] = V[:, ncv]
        T[:] = 0.0
        T[np.arange(k), np.arange(k)] = theta[:k]
        T[k, :k] = beta * Y[-1, :k]
        T[:k, k] = np.conj(T[k, :k])
    raise NumericalError(
        f"Lanczos did not converge after {max_restarts} restarts; "
        f"best residuals {resid[:m].tolist()} (norm estimate {norm_est:.3g})")


def extract_gap(spec, degeneracy_tol=DEFAULT_DEGENERACY_TOL):
    e = np.sort(np.asarray(getattr(spec, "energies", spec), dtype=np.float64))
    if e.shape[0] < 2:
        raise ValueError("gap extraction needs at least two energies")
    e0 = float(e[0])
    degenerate = e <= e0 + degeneracy_tol
    deg = int(degenerate.sum())
    above = e[~degenerate]
    gap_distinct = float(above[0] - e0) if above.size else float("nan")
    return GapReport(e0, float(e[1]), float(e[1] - e0), gap_distinct, deg)
