"""Graph heat operator ``exp(-t L)`` applied to vertex signals.

The workhorse is :class:`HeatFilter`, a truncated Chebyshev expansion
evaluated with the three-term recurrence, so applying it costs ``K`` sparse
matrix-vector products. :class:`EulerFilter` is the backward-Euler
competitor and :func:`exact_heat_oracle` the dense reference used by tests
and the convergence study.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._kernels import chebyshev_apply
from .bessel import scaled_bessel_i
from .errors import LengthMismatch, NonPositiveTime, SolveFailure, TooLarge, ValidationError
from .graph import GraphLaplacian

DEFAULT_ORDER = 30
ORACLE_MAX_N = 2000


def chebyshev_heat_coefficients(t_eff: float, K: int) -> np.ndarray:
    """Coefficients ``b_k`` of ``exp(-t (y + 1))`` in Chebyshev polynomials of ``y``."""
    b = 2.0 * scaled_bessel_i(t_eff, K)
    b[1::2] *= -1.0
    return b


@dataclass(frozen=True)
class HeatFilter:
    """Degree-``K`` Chebyshev approximation of ``exp(-t L)``.

    ``L_scaled = scale * L`` has spectrum in ``[0, 2]``; the expansion is in
    ``T_k(L_scaled - I)`` with effective time ``t_eff = t / scale``.
    """

    L_scaled: sp.csr_matrix
    t: float
    K: int
    b: np.ndarray
    scale: float
    kind: str = "combinatorial"
    _shifted: sp.csr_matrix = field(repr=False, compare=False, default=None)

    @property
    def n(self) -> int:
        return self.L_scaled.shape[0]

    @property
    def t_eff(self) -> float:
        return self.t / self.scale

    def apply(self, f: np.ndarray) -> np.ndarray:
        """Return ``p_K(L, t) f``; ``f`` may be a vector or an ``n x B`` block."""
        f = np.asarray(f, dtype=float)
        if f.shape[0] != self.n:
            raise LengthMismatch(f"signal length {f.shape[0]} != graph size {self.n}")
        return chebyshev_apply(self._shifted, self.b, f)

    __call__ = apply


def build_filter(lap: GraphLaplacian, t: float, K: int = DEFAULT_ORDER) -> HeatFilter:
    if not t > 0:
        raise NonPositiveTime(f"diffusion time must be > 0, got {t}")
    if K < 1:
        raise ValidationError("Chebyshev order K must be >= 1")
    if lap.kind == "normalized":
        scale = 1.0
    elif lap.lambda_max_bound > 0:
        scale = 2.0 / lap.lambda_max_bound
    else:
        scale = 1.0
    L_scaled = (scale * lap.matrix).tocsr()
    shifted = (L_scaled - sp.identity(lap.n, format="csr")).tocsr()
    b = chebyshev_heat_coefficients(t / scale, K)
    return HeatFilter(L_scaled, float(t), int(K), b, scale, lap.kind, shifted)


def apply(filt: HeatFilter, f) -> np.ndarray:
    return filt.apply(f)


class EulerFilter:
    """``(I + (t/K) L)^-K`` via one sparse LU factorisation and ``K`` solves."""

    def __init__(self, lap: GraphLaplacian, t: float, K: int = DEFAULT_ORDER):
        if not t > 0:
            raise NonPositiveTime(f"diffusion time must be > 0, got {t}")
        if K < 1:
            raise ValidationError("number of Euler steps K must be >= 1")
        self.t, self.K, self.n = float(t), int(K), lap.n
        system = (sp.identity(lap.n, format="csc") + (t / K) * lap.matrix).tocsc()
        try:
            self._lu = spla.splu(system, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SolveFailure(str(exc)) from None

    def apply(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape[0] != self.n:
            raise LengthMismatch(f"signal length {f.shape[0]} != graph size {self.n}")
        out = f
        for _ in range(self.K):
            out = self._lu.solve(out)
        return out

    __call__ = apply


def apply_euler(lap: GraphLaplacian, t: float, K: int, f) -> np.ndarray:
    return EulerFilter(lap, t, K).apply(f)


def exact_heat_oracle(lap: GraphLaplacian, t: float) -> np.ndarray:
    """Dense ``exp(-t L)`` from a symmetric eigendecomposition."""
    n = lap.n
    if n > ORACLE_MAX_N:
        raise TooLarge(f"dense oracle limited to n <= {ORACLE_MAX_N}, got {n}")
    if t < 0:
        raise NonPositiveTime("diffusion time must be >= 0")
    lam, psi = np.linalg.eigh(lap.matrix.toarray())
    H = (psi * np.exp(-t * lam)) @ psi.T
    return 0.5 * (H + H.T)


def reconstruct(operator, n: int) -> np.ndarray:
    """Materialise a linear operator by applying it to every unit impulse."""
    return np.asarray(operator(np.eye(n)))


def convergence_study(lap: GraphLaplacian, t: float, orders) -> list[tuple[int, float, float]]:
    """Frobenius error of the Chebyshev and Euler heat kernels against the exact one."""
    exact = exact_heat_oracle(lap, t)
    rows = []
    for K in orders:
        cheb = reconstruct(build_filter(lap, t, K), lap.n)
        euler = reconstruct(EulerFilter(lap, t, K), lap.n)
        rows.append(
            (int(K), float(np.linalg.norm(cheb - exact)), float(np.linalg.norm(euler - exact)))
        )
    return rows


def study_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["order", "cheb_fro_error", "euler_fro_error"])
    for K, ec, ee in rows:
        writer.writerow([K, repr(ec), repr(ee)])
    return buf.getvalue()
