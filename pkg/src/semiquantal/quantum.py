"""Exact quantum reference for the Lipkin model in the |J, m> basis."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .model import MeanPoint, ModelParams, ObservableSet

__all__ = [
    "SpectralDecomp",
    "build_hamiltonian",
    "diagonalize",
    "jacobi_eigh",
    "spin_coherent",
    "spin_operators",
    "evolve_exact",
    "ExactSeries",
]


def _m_values(j: float) -> np.ndarray:
    dim = int(round(2 * j)) + 1
    return -j + np.arange(dim)


def spin_operators(j: float) -> tuple[np.ndarray, np.ndarray]:
    """Return (J_z, J_+) as dense arrays, basis m = -j..j ascending."""
    m = _m_values(j)
    jz = np.diag(m)
    jp = np.zeros((m.size, m.size))
    # <m+1| J_+ |m> = sqrt((j - m)(j + m + 1))
    jp[np.arange(1, m.size), np.arange(m.size - 1)] = np.sqrt((j - m[:-1]) * (j + m[:-1] + 1))
    return jz, jp


def build_hamiltonian(params: ModelParams) -> np.ndarray:
    """Dense H = eps J_z + (V/2)(J_+^2 + J_-^2) with V = chi / N."""
    j = params.j
    m = _m_values(j)
    dim = m.size
    h = np.diag(params.epsilon * m)
    k = m[:-2]
    # <m+2| J_+^2 |m>
    amp = np.sqrt((j - k) * (j + k + 1)) * np.sqrt((j - k - 1) * (j + k + 2))
    idx = np.arange(dim - 2)
    h[idx + 2, idx] = 0.5 * params.v * amp
    h[idx, idx + 2] = 0.5 * params.v * amp
    return h


@njit(cache=True)
def _jacobi(a, tol, max_sweeps):
    n = a.shape[0]
    a = a.copy()
    v = np.eye(n)
    norm = math.sqrt(np.sum(a * a))
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += 2.0 * a[p, q] * a[p, q]
        if math.sqrt(off) <= tol * max(norm, 1e-300):
            return a, v, sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + math.sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + math.sqrt(1.0 + theta * theta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
    return a, v, -1


def jacobi_eigh(a: np.ndarray, tol: float = 1e-13, max_sweeps: int = 100):
    """Cyclic Jacobi eigensolver for a real symmetric matrix.

    Sweeps stop once the off-diagonal Frobenius norm drops below
    ``tol * ||a||_F``. Eigenvalues are returned ascending; each eigenvector
    column is sign-fixed so that its largest-magnitude entry is positive.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    scale = max(np.max(np.abs(a)), 1.0)
    if np.max(np.abs(a - a.T)) > 1e-12 * scale:
        raise ValueError("matrix is not symmetric")
    d, v, sweeps = _jacobi(0.5 * (a + a.T), tol, max_sweeps)
    if sweeps < 0:
        raise RuntimeError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")
    w = np.diag(d).copy()
    order = np.argsort(w, kind="stable")
    w = w[order]
    v = v[:, order]
    pivot = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[pivot, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return w, v * signs


@dataclass(frozen=True)
class SpectralDecomp:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.size

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T


def diagonalize(matrix: np.ndarray) -> SpectralDecomp:
    w, v = jacobi_eigh(matrix)
    return SpectralDecomp(w, v)


def spin_coherent(mean: MeanPoint, j: float) -> np.ndarray:
    """SU(2) coherent state whose stereographic label matches ``mean``.

    With alpha = q_a + i p_a and beta = q_b + i p_b the amplitudes are
    sqrt(C(2j, j+m)) alpha^(j-m) beta^(j+m); the overall scale of the mean
    point drops out after normalization.
    """
    alpha = complex(mean.q_a, mean.p_a)
    beta = complex(mean.q_b, mean.p_b)
    r = math.hypot(abs(alpha), abs(beta))
    if r == 0.0:
        raise ValueError("coherent state needs a nonzero mean point")
    alpha /= r
    beta /= r
    n = int(round(2 * j))
    k = np.arange(n + 1)
    log_binom = (math.lgamma(n + 1) - np.array([math.lgamma(x + 1) for x in k])
                 - np.array([math.lgamma(n - x + 1) for x in k]))
    amp = np.exp(0.5 * log_binom).astype(complex)
    # integer powers keep 0**0 == 1 at the poles
    amp *= np.array([alpha ** (n - x) * beta ** x for x in k])
    return amp / np.linalg.norm(amp)


@dataclass(frozen=True)
class ExactSeries:
    """Exact expectation values on a time grid."""

    times: np.ndarray
    jz_over_j: np.ndarray
    jx_over_j: np.ndarray
    jy_over_j: np.ndarray
    norm: np.ndarray

    def observables(self) -> list[ObservableSet]:
        return [ObservableSet(jz_over_j=float(z), jx_over_j=float(x), jy_over_j=float(y),
                              energy_fig=float("nan"), n_scaled=1.0)
                for z, x, y in zip(self.jz_over_j, self.jx_over_j, self.jy_over_j)]


def evolve_exact(state0: np.ndarray, decomp: SpectralDecomp, times, j: float,
                 chunk: int = 4096) -> ExactSeries:
    """Propagate ``state0`` with eigenphases and return <J_z>/J, <J_x>/J, <J_y>/J."""
    psi0 = np.asarray(state0, dtype=complex)
    if psi0.shape != (decomp.dim,):
        raise ValueError(f"state has dimension {psi0.shape}, spectrum has {decomp.dim}")
    times = np.asarray(times, dtype=float)
    if times.size > 1 and np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    jz, jp = spin_operators(j)
    m = np.diag(jz)
    v = decomp.eigenvectors
    coef = v.T @ psi0
    zs, xs, ys, norms = [], [], [], []
    for start in range(0, times.size, chunk):
        t = times[start:start + chunk]
        phases = np.exp(-1j * np.outer(t, decomp.eigenvalues)) * coef
        psi = phases @ v.T
        prob = np.abs(psi) ** 2
        zs.append(prob @ m)
        # <J_+> = sum_m conj(psi_{m+1}) psi_m <m+1|J_+|m>
        jplus = np.einsum("tk,tk->t", psi[:, 1:].conj() * np.diag(jp, -1), psi[:, :-1])
        xs.append(jplus.real)
        ys.append(jplus.imag)
        norms.append(prob.sum(axis=1))
    return ExactSeries(times, np.concatenate(zs) / j, np.concatenate(xs) / j,
                       np.concatenate(ys) / j, np.concatenate(norms))
