"""Pullback tensors of a map: metric, principal stretches, second elementary
symmetric function, and the pulled-back fundamental 2-form on surface targets.

All spectral quantities are computed in orthonormal frames of the domain
tangent spaces, so they are frame choices away from being coordinate-free;
tests check the invariance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .maps import JetBatch, MapJet, SphereMap
from .targets import TargetGeometry

__all__ = ["PullbackPointData", "PullbackBatch", "pullback_data", "pullback_batch"]

RANK_TOL = 1e-9


@dataclass(frozen=True)
class PullbackBatch:
    """Pullback data at a batch of nodes (arrays indexed by node)."""

    metric: np.ndarray          # (N, m, m) pullback metric in the jet frame
    eigenvalues: np.ndarray     # (N, m) ascending
    eigenvectors: np.ndarray    # (N, m, m) columns = frame components
    energy_density: np.ndarray  # (N,) sum of eigenvalues = |dphi|^2
    sigma2: np.ndarray          # (N,) second elementary symmetric function
    omega: np.ndarray | None    # (N, m, m) pulled-back 2-form, surfaces only
    omega_sq: np.ndarray | None  # (N,) squared pointwise norm
    rank: np.ndarray            # (N,) integer rank with relative cutoff

    def __len__(self) -> int:
        return self.metric.shape[0]

    def point(self, i: int) -> "PullbackPointData":
        return PullbackPointData(
            metric=self.metric[i],
            eigenvalues=self.eigenvalues[i],
            energy_density=float(self.energy_density[i]),
            sigma2=float(self.sigma2[i]),
            omega=None if self.omega is None else self.omega[i],
            omega_sq=None if self.omega_sq is None else float(self.omega_sq[i]),
            rank=int(self.rank[i]),
        )


@dataclass(frozen=True)
class PullbackPointData:
    """Pullback data at one point."""

    metric: np.ndarray
    eigenvalues: np.ndarray
    energy_density: float
    sigma2: float
    omega: np.ndarray | None
    omega_sq: float | None
    rank: int


def pullback_batch(jets: JetBatch, target: TargetGeometry, frame: np.ndarray | None = None) -> PullbackBatch:
    """Pullback tensors from jets, optionally in a caller-supplied frame.

    The eigensolve runs on explicitly symmetrized matrices; in the (never yet
    observed) event that it fails, it is retried once with a tiny diagonal
    jitter before giving up.
    """
    dphi = jets.dphi
    if frame is not None:
        # re-express the differential in the supplied orthonormal frame
        change = np.einsum("nia,nja->nij", frame, jets.frame)
        dphi = np.einsum("nij,njk->nik", change, jets.dphi)
    metric = np.einsum("nik,njk->nij", dphi, dphi)
    metric = 0.5 * (metric + np.swapaxes(metric, 1, 2))
    try:
        eigvals, eigvecs = np.linalg.eigh(metric)
    except np.linalg.LinAlgError:
        jitter = 1e-13 * np.eye(metric.shape[1])[None]
        try:
            eigvals, eigvecs = np.linalg.eigh(metric + jitter)
        except np.linalg.LinAlgError as exc:
            raise RuntimeError("eigen-decomposition of the pullback metric failed") from exc
    eigvals = np.clip(eigvals, 0.0, None)
    trace = eigvals.sum(axis=1)
    sigma2 = 0.5 * (trace**2 - (eigvals**2).sum(axis=1))
    omega = omega_sq = None
    if target.is_surface:
        jd = target.j_apply(jets.values[:, None, :], dphi)
        omega = np.einsum("nik,njk->nij", dphi, jd)
        omega = 0.5 * (omega - np.swapaxes(omega, 1, 2))
        omega_sq = 0.5 * np.einsum("nij,nij->n", omega, omega)
    cutoff = RANK_TOL * np.maximum(trace, np.finfo(float).tiny)
    rank = (eigvals > cutoff[:, None]).sum(axis=1)
    return PullbackBatch(
        metric=metric,
        eigenvalues=eigvals,
        eigenvectors=eigvecs,
        energy_density=trace,
        sigma2=sigma2,
        omega=omega,
        omega_sq=omega_sq,
        rank=rank,
    )


def pullback_data(jet: MapJet, target: TargetGeometry) -> PullbackPointData:
    """Pullback data at a single point from an ambient-coordinate jet."""
    from ..sphere_geometry import tangent_frames

    frame = tangent_frames(jet.point[None, :])[0]
    dphi = np.einsum("ka,ia->ik", jet.dphi, frame)
    batch = JetBatch(
        points=jet.point[None, :],
        values=jet.value[None, :],
        frame=frame[None],
        dphi=dphi[None],
        sff=None,
    )
    return pullback_batch(batch, target).point(0)


def map_pullbacks(mapping: SphereMap, points, order: int = 1) -> PullbackBatch:
    """Convenience wrapper: jets + pullback tensors at the given points."""
    return pullback_batch(mapping.jets(points, order=order), mapping.target)
