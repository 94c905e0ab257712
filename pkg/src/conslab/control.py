"""Consensus gain synthesis through the modified algebraic Riccati inequality (MARI).

For agents ``x_i(k+1) = A x_i(k) + B u_i(k)`` with the protocol
``u_i = K sum_j a_ij (x_j - x_i)``, consensus holds iff ``A - lambda_i B K``
is Schur for every nonzero Laplacian eigenvalue. With ``P`` solving

    P - A'PA + (1 - zeta^2) A'PBB'PA / (B'PB) > 0

the gain ``K = 2/(lambda_2 + lambda_N) * B'PA / B'PB`` achieves this whenever

    prod |unstable eig(A)| < 1/zeta < (1 + r)/(1 - r),   r = lambda_2/lambda_N.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InfeasibleError, NoConvergenceError, StabilizationError, UnconsensusableError
from .spectral import BoundReport, SpectralSummary, bound

SCHUR_SLACK = 1e-9
CONSENSUS_SLACK = 1e-9
MARGINAL_ZETA = 1 - 1e-6
BOUNDARY_BACKOFF = 1e-3
MARI_EPS_SCALE = 1e-6


@dataclass(frozen=True)
class Dynamics:
    """Agent model ``(A, B)`` with single input. ``zeta=None`` lets the design pick it."""

    A: np.ndarray
    B: np.ndarray
    zeta: float | None = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float).reshape(-1, 1)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise ValueError(f"B has {B.shape[0]} rows, A has {A.shape[0]}")
        if np.linalg.matrix_rank(controllability_matrix(A, B)) < A.shape[0]:
            raise ValueError("(A, B) is not controllable")
        if self.zeta is not None and not 0 < self.zeta <= 1:
            raise ValueError(f"zeta must lie in (0, 1], got {self.zeta}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.A)

    @property
    def unstable_product(self) -> float:
        """Product of ``|lambda|`` over eigenvalues on or outside the unit circle (1 if none)."""
        mags = np.abs(self.eigenvalues)
        return float(np.prod(mags[mags >= 1 - 1e-12]))

    @property
    def is_schur(self) -> bool:
        return spectral_radius(self.A) < 1 - SCHUR_SLACK

    def with_zeta(self, zeta: float) -> "Dynamics":
        return replace(self, zeta=zeta)


def controllability_matrix(A, B) -> np.ndarray:
    cols = [B]
    for _ in range(A.shape[0] - 1):
        cols.append(A @ cols[-1])
    return np.hstack(cols)


def spectral_radius(M) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def closed_loop_radii(A, B, K, mus) -> np.ndarray:
    """Spectral radius of ``A - mu B K`` for each ``mu``."""
    mus = np.asarray(mus, dtype=float).reshape(-1)
    if mus.size == 0:
        return mus
    BK = np.asarray(B).reshape(-1, 1) @ np.asarray(K).reshape(1, -1)
    stack = A[None, :, :] - mus[:, None, None] * BK[None, :, :]
    return np.max(np.abs(np.linalg.eigvals(stack)), axis=1)


def consensusability_margin(spec: SpectralSummary | float) -> float:
    """``(1 + r)/(1 - r)`` for the (grounded) eigenratio ``r``; infinite when ``r = 1``."""
    r = spec if isinstance(spec, (int, float)) else spec.eigenratio
    if r >= 1 - 1e-12:
        return float("inf")
    return (1 + r) / (1 - r)


@dataclass(frozen=True)
class Consensusability:
    consensusable: bool
    unstable_product: float
    margin: float

    def __bool__(self) -> bool:
        return self.consensusable


def is_consensusable(dyn: Dynamics, spec: SpectralSummary) -> Consensusability:
    prod = dyn.unstable_product
    margin = consensusability_margin(spec)
    ok = dyn.is_schur or prod < margin * (1 - CONSENSUS_SLACK)
    return Consensusability(bool(ok), prod, margin)


def choose_zeta(dyn: Dynamics, eigenratio: float | None = None) -> float:
    """Pick ``zeta`` inside ``(1/margin, 1/prod)``.

    With a known eigenratio this is the midpoint of the two limits. Without
    one, ``zeta`` sits just below ``1/prod``.
    """
    if dyn.zeta is not None:
        return dyn.zeta
    if dyn.is_schur:
        return 1.0
    upper = 1.0 / dyn.unstable_product
    if eigenratio is not None:
        lower = 1.0 / consensusability_margin(eigenratio)
        return float(np.clip((upper + lower) / 2, 1e-9, MARGINAL_ZETA))
    if upper >= 1 - 1e-12:
        return MARGINAL_ZETA
    return upper * (1 - BOUNDARY_BACKOFF)


def mari_lhs(A, B, P, zeta) -> np.ndarray:
    PB = P @ B
    gain_term = (A.T @ PB) @ (PB.T @ A) / (B.T @ PB).item()
    lhs = P - A.T @ P @ A + (1 - zeta**2) * gain_term
    return (lhs + lhs.T) / 2


def mari_residual(A, B, P, zeta) -> float:
    """Smallest eigenvalue of the MARI left-hand side; positive means satisfied."""
    return float(np.linalg.eigvalsh(mari_lhs(A, B, P, zeta))[0])


def iterate_mari(A, B, zeta, max_iter: int = 200_000, rtol: float = 1e-13, blowup: float = 1e14) -> np.ndarray:
    """Fixed point of ``P = A'PA - (1-zeta^2) A'PBB'PA/(B'PB) + I`` from ``P = I``.

    Raises :class:`NoConvergenceError` if the iterates blow up or stall.
    """
    n = A.shape[0]
    gamma = 1 - zeta**2
    P = np.eye(n)
    eye = np.eye(n)
    At = A.T
    for _ in range(max_iter):
        PA = P @ A
        BPA = B.T @ PA
        nxt = At @ PA - gamma * (BPA.T @ BPA) / (B.T @ P @ B).item() + eye
        nxt = (nxt + nxt.T) / 2
        size = np.abs(nxt).max()
        if not np.isfinite(size) or size > blowup:
            raise NoConvergenceError(f"modified Riccati iteration diverged (zeta={zeta:.6g})")
        if np.abs(nxt - P).max() <= rtol * size:
            return nxt
        P = nxt
    raise NoConvergenceError(f"modified Riccati iteration stalled after {max_iter} steps (zeta={zeta:.6g})")


def solve_mari(dyn: Dynamics, zeta: float | None = None) -> np.ndarray:
    """Positive-definite ``P`` satisfying the MARI for ``zeta`` (default: ``choose_zeta``).

    The strict inequality is turned into an equation with right-hand side
    ``eps * I``, ``eps = 1e-6 * trace(A'A)``; ``P`` is linear in ``eps`` so the
    gain it induces does not depend on it.
    """
    zeta = choose_zeta(dyn) if zeta is None else zeta
    if not 0 < zeta <= 1:
        raise ValueError(f"zeta must lie in (0, 1], got {zeta}")
    if not dyn.is_schur and dyn.unstable_product * zeta >= 1:
        raise InfeasibleError(
            f"unstable product {dyn.unstable_product:.6g} is not below 1/zeta = {1 / zeta:.6g}"
        )
    eps = MARI_EPS_SCALE * max(float(np.trace(dyn.A.T @ dyn.A)), 1e-12)
    P = eps * iterate_mari(dyn.A, dyn.B, zeta)
    if mari_residual(dyn.A, dyn.B, P, zeta) <= 0 or np.linalg.eigvalsh(P)[0] <= 0:
        raise NoConvergenceError("MARI residual is not positive at the fixed point")
    return P


@dataclass(frozen=True)
class GainDesign:
    P: np.ndarray
    K: np.ndarray
    lambda2: float
    lambdaN: float
    mari_residual: float
    zeta: float
    A: np.ndarray = field(repr=False)
    B: np.ndarray = field(repr=False)
    center: float | None = None

    @property
    def gain_center(self) -> float:
        """``mu`` at which ``A - mu BK`` gets the MARI gain; ``(lambda2 + lambdaN)/2`` by default."""
        return (self.lambda2 + self.lambdaN) / 2 if self.center is None else self.center

    def closed_loop(self, mu: float) -> np.ndarray:
        return self.A - mu * self.B @ self.K

    def radii(self, mus) -> np.ndarray:
        return closed_loop_radii(self.A, self.B, self.K, mus)

    def lyapunov_change(self, mu: float) -> float:
        """Largest eigenvalue of ``(A - mu BK)' P (A - mu BK) - P``; negative means decrease."""
        M = self.closed_loop(mu)
        Q = M.T @ self.P @ M - self.P
        return float(np.linalg.eigvalsh((Q + Q.T) / 2)[-1])

    def to_dict(self) -> dict:
        return {
            "P": self.P.reshape(-1).tolist(),
            "K": self.K.reshape(-1).tolist(),
            "lambda2": self.lambda2,
            "lambdaN": self.lambdaN,
            "mari_residual": self.mari_residual,
            "zeta": self.zeta,
            "center": self.gain_center,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def gain_for_center(dyn: Dynamics, P: np.ndarray, center: float) -> np.ndarray:
    """``K = B'PA / (center * B'PB)``; the MARI gain uses ``center = (lambda_2 + lambda_N)/2``."""
    B = dyn.B
    return (B.T @ P @ dyn.A) / (center * (B.T @ P @ B).item())


def design_gain(dyn: Dynamics, spec: SpectralSummary, zeta: float | None = None) -> GainDesign:
    """Gain for the network summarized by ``spec`` (grounded or not), Schur-verified."""
    verdict = is_consensusable(dyn, spec)
    if not verdict:
        raise UnconsensusableError(
            f"unstable product {verdict.unstable_product:.6g} >= margin {verdict.margin:.6g}"
        )
    if zeta is None:
        zeta = choose_zeta(dyn, spec.eigenratio)
    P = solve_mari(dyn, zeta)
    K = gain_for_center(dyn, P, (spec.lambda2 + spec.lambdaN) / 2)
    design = GainDesign(
        P=P,
        K=K,
        lambda2=spec.lambda2,
        lambdaN=spec.lambdaN,
        mari_residual=mari_residual(dyn.A, dyn.B, P, zeta),
        zeta=zeta,
        A=dyn.A,
        B=dyn.B,
    )
    radii = design.radii(spec.active)
    if radii.size and radii.max() >= 1 - SCHUR_SLACK:
        worst = int(np.argmax(radii))
        raise StabilizationError(
            f"A - lambda B K not Schur at lambda={spec.active[worst]:.6g} (radius {radii[worst]:.12g})"
        )
    return design


def grounded_stability_condition(design: GainDesign, grounded_spec: SpectralSummary) -> list[BoundReport]:
    """Check the sufficient band condition on every grounded eigenvalue,
    followed by the direct Schur verdict ``grounded.schur``.

    The band is ``(1-zeta)(l2+lN)/2 <= lambda_bar_i <= (1+zeta)(l2+lN)/2``.
    A violated band does not imply instability; read ``grounded.schur`` for that.
    """
    s = 2 * design.gain_center
    lo, hi = (1 - design.zeta) * s / 2, (1 + design.zeta) * s / 2
    out = []
    for i, mu in enumerate(grounded_spec.active):
        out.append(bound(f"band.lower[{i + 1}]", lo, mu))
        out.append(bound(f"band.upper[{i + 1}]", mu, hi))
    radii = design.radii(grounded_spec.active)
    out.append(bound("grounded.schur", float(radii.max()), 1 - SCHUR_SLACK, tol=0.0))
    return out


def band_holds(reports: list[BoundReport]) -> bool:
    return all(r.satisfied for r in reports if r.name.startswith("band."))


def schur_holds(reports: list[BoundReport]) -> bool:
    return next(r.satisfied for r in reports if r.name == "grounded.schur")
