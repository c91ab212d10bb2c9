"""Dissimilarity construction, spectral clustering, and group-count selection."""

from __future__ import annotations

import numpy as np

from .types import (
    ALREADY_SCALED,
    PER_OBSERVATION,
    CoefficientEstimate,
    DimensionMismatch,
    DissimilarityMatrix,
    EigenFailure,
    GroupAssignment,
    GroupCountSelection,
    NonPositiveCombined,
    NotSymmetric,
    SpectralDecomposition,
    UncertaintyEstimate,
)

EIGENGAP_DENOM_GUARD = 1e-12


def matrix_inverse_sqrt(S: np.ndarray) -> np.ndarray:
    """Symmetric inverse square root via eigendecomposition.

    Eigenvalues are floored at 1e-10 * max(eigenvalue) so that semi-definite
    inputs produce a finite result.
    """
    S = np.atleast_2d(np.asarray(S, dtype=float))
    scale = max(np.abs(S).max(), 1.0)
    if S.shape[0] != S.shape[1] or np.abs(S - S.T).max() > 1e-10 * scale:
        raise NotSymmetric("input must be a symmetric matrix")
    eigvals, Q = np.linalg.eigh(S)
    norm = max(eigvals[-1], 1e-300)
    if eigvals[0] < -1e-10 * norm:
        raise NonPositiveCombined(
            f"matrix has negative eigenvalue {eigvals[0]:.3e}")
    floored = np.maximum(eigvals, 1e-10 * norm)
    return (Q * floored ** -0.5) @ Q.T


def _extract_beta(estimate):
    if isinstance(estimate, CoefficientEstimate):
        return estimate.gamma
    return np.atleast_1d(np.asarray(estimate, dtype=float))


def build_dissimilarity(estimates, uncertainties, T: int,
                        weights=None) -> DissimilarityMatrix:
    """Pairwise sup-norm of the covariance-whitened coefficient differences.

    estimates: per-individual coefficient vectors (arrays or
    CoefficientEstimate objects). uncertainties: matching UncertaintyEstimate
    objects with a common scale. Under per_observation scale the pairwise
    covariance is (sigma_i + sigma_j) / T, or sigma_i / w_i + sigma_j / w_j
    when per-individual weights (sample sizes) are supplied. Under
    already_scaled it is sigma_i + sigma_j.
    """
    betas = [_extract_beta(e) for e in estimates]
    n = len(betas)
    if n != len(uncertainties):
        raise DimensionMismatch("estimates and uncertainties length differ")
    s = len(betas[0])
    if any(len(b) != s for b in betas):
        raise DimensionMismatch("coefficient vectors have mixed dimensions")
    sigmas = []
    scales = set()
    for u in uncertainties:
        if not isinstance(u, UncertaintyEstimate):
            raise TypeError("uncertainties must be UncertaintyEstimate objects")
        if u.sigma.shape != (s, s):
            raise DimensionMismatch("covariance dimension does not match beta")
        sigmas.append(u.sigma)
        scales.add(u.scale)
    if len(scales) != 1:
        raise DimensionMismatch("uncertainty scale flags disagree")
    scale = scales.pop()

    if weights is not None:
        if scale != PER_OBSERVATION:
            raise DimensionMismatch(
                "per-individual weights require per_observation scale")
        w = np.asarray(weights, dtype=float)
        scaled = [sigmas[i] / w[i] for i in range(n)]
    elif scale == PER_OBSERVATION:
        scaled = [sig / T for sig in sigmas]
    else:
        scaled = sigmas

    V = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            combined = scaled[i] + scaled[j]
            whitener = matrix_inverse_sqrt(combined)
            V[i, j] = V[j, i] = np.abs(whitener @ (betas[i] - betas[j])).max()
    return DissimilarityMatrix(V)


def kmeans(points, k: int, restarts: int = 50, seed: int = 0,
           max_iter: int = 300):
    """Lloyd iterations with greedy farthest-point seeding.

    The best objective over `restarts` independent seedings is returned.
    Empty clusters are repaired by promoting the point farthest from its
    center. Returns (labels, centers, objective) with 0-based labels.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = points.shape[0]
    if k > n:
        raise ValueError("more clusters than points")
    rng = np.random.Generator(np.random.Philox(key=seed))

    best = None
    for _ in range(restarts):
        centers = _farthest_point_seed(points, k, rng)
        labels, centers, objective = _lloyd(points, centers, max_iter)
        if best is None or objective < best[2]:
            best = (labels, centers, objective)
    return best


def _farthest_point_seed(points, k, rng):
    n = points.shape[0]
    centers = [points[rng.integers(n)]]
    for _ in range(1, k):
        d = np.min(
            [np.sum((points - c) ** 2, axis=1) for c in centers], axis=0)
        # RNG tie-breaking among (near-)farthest points
        cutoff = d.max() * (1.0 - 1e-12)
        candidates = np.flatnonzero(d >= cutoff)
        centers.append(points[rng.choice(candidates)])
    return np.array(centers)


def _lloyd(points, centers, max_iter):
    n, k = points.shape[0], centers.shape[0]
    prev_objective = np.inf
    labels = np.zeros(n, dtype=int)
    for _ in range(max_iter):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = d2.argmin(axis=1)
        objective = d2[np.arange(n), labels].sum()
        assert objective <= prev_objective + 1e-9, "Lloyd objective increased"
        for j in range(k):
            members = labels == j
            if members.any():
                centers[j] = points[members].mean(axis=0)
            else:
                farthest = d2[np.arange(n), labels].argmax()
                centers[j] = points[farthest]
                labels[farthest] = j
        if objective >= prev_objective - 1e-12:
            break
        prev_objective = objective
    d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = d2.argmin(axis=1)
    objective = float(d2[np.arange(n), labels].sum())
    return labels, centers, objective


def _laplacian(V: np.ndarray):
    A = np.exp(-V)
    np.fill_diagonal(A, 1.0)
    degrees = A.sum(axis=1)
    inv_sqrt_d = degrees ** -0.5
    L = inv_sqrt_d[:, None] * (np.diag(degrees) - A) * inv_sqrt_d[None, :]
    L = 0.5 * (L + L.T)
    return A, degrees, L


def spectral_cluster(V: DissimilarityMatrix, G: int, seed: int = 0,
                     restarts: int = 50):
    """Normalized-Laplacian spectral clustering into G groups.

    Returns (GroupAssignment, SpectralDecomposition); labels are 1-based.
    """
    Vm = V.V if isinstance(V, DissimilarityMatrix) else np.asarray(V, float)
    n = Vm.shape[0]
    if not 1 <= G <= n:
        raise ValueError("G must lie in 1..n")
    A, degrees, L = _laplacian(Vm)
    try:
        eigvals, eigvecs = np.linalg.eigh(L)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc
    Z = eigvecs[:, :G]
    row_norms = np.linalg.norm(Z, axis=1)
    U = Z / np.maximum(row_norms, 1e-300)[:, None]
    labels0, _, objective = kmeans(U, G, restarts=restarts, seed=seed)
    assignment = GroupAssignment(labels0 + 1, G, kmeans_objective=objective,
                                 restarts_used=restarts)
    decomposition = SpectralDecomposition(A, degrees, L, eigvals, Z, U)
    return assignment, decomposition


def select_num_groups(V: DissimilarityMatrix, n: int, T: int,
                      G_max: int = 10) -> GroupCountSelection:
    """Relative eigen-gap heuristic on the scaled Laplacian.

    The dissimilarity is shrunk by 2 / sqrt(log n * log T), the Laplacian
    spectrum is flipped to lambda_tilde = 1 - lambda, and the selected group
    count maximizes |gap| / max(next value, guard) over g up to
    min(G_max, n - 1).
    """
    Vm = V.V if isinstance(V, DissimilarityMatrix) else np.asarray(V, float)
    if n < 3 or T < 2:
        raise ValueError("selection requires n >= 3 and T >= 2")
    scaled = 2.0 / np.sqrt(np.log(n) * np.log(T)) * Vm
    _, _, L = _laplacian(scaled)
    try:
        eigvals = np.linalg.eigvalsh(L)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc
    lambda_tilde = 1.0 - eigvals
    gaps = np.abs(np.diff(lambda_tilde))
    ratios = gaps / np.maximum(lambda_tilde[1:], EIGENGAP_DENOM_GUARD)
    limit = min(G_max, n - 1)
    G_hat = int(np.argmax(ratios[:limit])) + 1
    return GroupCountSelection(G_hat, lambda_tilde, ratios)
