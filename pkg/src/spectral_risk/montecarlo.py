"""Sampled-matrix experiments: empirical generalization error, exactly.

A dataset is a feature matrix Phi (P x N): i.i.d. standard Gaussian entries
for the Gaussian-features model, or phi_0 = 1, phi_l(x) = sqrt(2) cos(l x)
with uniform x for the cosine model.  The estimator alpha = K^-1 h(K/N) y is
evaluated against the *population* through the exact Gram identities

    L = (1/2) [ alpha^T G alpha - 2 alpha^T b + sum c^2 ],
    G = Phi^T Lambda^2 Phi,  b = Phi^T Lambda c,

so the only randomness left is in the dataset and the observation noise --
no test-set sampling variance.

Randomness is fully deterministic under the master seed: per-repetition
streams come from numpy's splittable SeedSequence tree feeding the
counter-based Philox generator, so streams are independent and independent
of execution order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, EstimateError, SingularKernelError
from .profiles import SpectralProfile
from .spectrum import PowerLawSpectrum

MODELS = ("gaussian", "cosine")

#: row-chunk size for accumulating the N x N Gram matrices
CHUNK_ROWS = 2048

#: eigenvalues below this fraction of the largest flag rank deficiency
RANK_TOLERANCE = 1e-14


@dataclass(frozen=True)
class SampledDataset:
    """One realization of the feature matrix, plus its provenance."""

    feature_matrix: np.ndarray  # (P, N)
    model: str
    seed: int
    n_samples: int
    n_features: int


@dataclass(frozen=True)
class MCEstimate:
    """Monte-Carlo mean with its standard error."""

    mean: float
    stderr: float
    repetitions: int
    per_rep_values: tuple
    n_failed: int = 0


def _rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def sample_dataset(model: str, n_samples: int, n_features: int, seed) -> SampledDataset:
    """Draw one feature matrix; deterministic given the seed."""
    if model not in MODELS:
        raise DomainError(f"unknown data model {model!r}")
    n, p = int(n_samples), int(n_features)
    if n < 1 or p < 1:
        raise DomainError("need at least one sample and one feature")
    rng = _rng(seed)
    if model == "gaussian":
        phi = rng.standard_normal((p, n))
    else:
        x = rng.uniform(0.0, 2.0 * math.pi, size=n)
        phi = np.empty((p, n))
        phi[0] = 1.0
        if p > 1:
            harmonics = np.arange(1, p)
            phi[1:] = math.sqrt(2.0) * np.cos(harmonics[:, None] * x[None, :])
    seed_int = int(seed) if np.isscalar(seed) and not isinstance(seed, np.random.SeedSequence) else -1
    return SampledDataset(
        feature_matrix=phi, model=model, seed=seed_int, n_samples=n, n_features=p
    )


def _accumulate_grams(phi: np.ndarray, lams: np.ndarray, coefs: np.ndarray):
    """K = Phi^T Lam Phi, G = Phi^T Lam^2 Phi, b = Phi^T Lam c, f = Phi^T c."""
    p, n = phi.shape
    kmat = np.zeros((n, n))
    gmat = np.zeros((n, n))
    bvec = np.zeros(n)
    fvec = np.zeros(n)
    for start in range(0, p, CHUNK_ROWS):
        rows = slice(start, min(start + CHUNK_ROWS, p))
        block = phi[rows]
        lam_block = lams[rows]
        kmat += block.T @ (lam_block[:, None] * block)
        gmat += block.T @ (lam_block[:, None] ** 2 * block)
        bvec += block.T @ (lam_block * coefs[rows])
        fvec += block.T @ coefs[rows]
    kmat = 0.5 * (kmat + kmat.T)
    gmat = 0.5 * (gmat + gmat.T)
    return kmat, gmat, bvec, fvec


def population_loss_from_features(phi: np.ndarray, lams, coefs,
                                  profile: SpectralProfile, sigma_sq: float = 0.0,
                                  noise=None) -> float:
    """Exact population error of one realization through the Gram identities.

    ``noise`` is the standardized noise vector epsilon (length N), None for
    noiseless, or the string ``"analytic"`` to add the exact noise
    expectation (sigma^2/2) tr(M^T G M), M = K^-1 h(K/N).
    """
    lams = np.asarray(lams, dtype=float)
    coefs = np.asarray(coefs, dtype=float)
    n = phi.shape[1]
    kmat, gmat, bvec, fvec = _accumulate_grams(phi, lams, coefs)
    d, vecs = np.linalg.eigh(kmat / n)
    if d.min() <= RANK_TOLERANCE * d.max():
        raise SingularKernelError(
            f"empirical kernel is rank deficient (min/max eigenvalue "
            f"{d.min():.3e}/{d.max():.3e})"
        )
    filt = np.asarray(profile.evaluate(d), dtype=float) / (n * d)

    target_sq = float(coefs @ coefs)
    y = fvec.copy()
    if noise is not None and not isinstance(noise, str) and sigma_sq > 0.0:
        y = y + math.sqrt(sigma_sq) * np.asarray(noise, dtype=float)
    alpha = vecs @ (filt * (vecs.T @ y))
    loss = 0.5 * (alpha @ gmat @ alpha - 2.0 * alpha @ bvec + target_sq)
    if isinstance(noise, str):
        if noise != "analytic":
            raise DomainError(f"unknown noise mode {noise!r}")
        if sigma_sq > 0.0:
            m_mat = vecs @ (filt[:, None] * vecs.T)
            loss += 0.5 * sigma_sq * float(np.sum(m_mat * (gmat @ m_mat)))
    return float(loss)


def _leading_coefficients(spec: PowerLawSpectrum, count: int) -> np.ndarray:
    return np.sqrt(spec.leading_coefficients_sq(count))


def empirical_loss_once(data: SampledDataset, spec: PowerLawSpectrum,
                        profile: SpectralProfile, sigma_sq: float,
                        noise_seed) -> float:
    """Population error of one (dataset, noise) realization."""
    if sigma_sq < 0.0:
        raise DomainError("noise variance must be >= 0")
    p, n = data.feature_matrix.shape
    lams = spec.leading_eigenvalues(p)
    coefs = _leading_coefficients(spec, p)
    eps = _rng(noise_seed).standard_normal(n) if sigma_sq > 0.0 else None
    return population_loss_from_features(
        data.feature_matrix, lams, coefs, profile, sigma_sq, eps
    )


def mc_expected_loss(model: str, spec: PowerLawSpectrum, profile: SpectralProfile,
                     sigma_sq: float, n_samples: int, n_features: int, reps: int,
                     master_seed: int) -> MCEstimate:
    """Mean and standard error over independent (dataset, noise) draws."""
    out = mc_expected_loss_batch(
        model, [(spec, profile)], sigma_sq, n_samples, n_features, reps, master_seed
    )
    return out[0]


def mc_expected_loss_batch(model: str, cases, sigma_sq: float, n_samples: int,
                           n_features: int, reps: int, master_seed: int) -> list:
    """Batched Monte Carlo: the cases share each repetition's dataset.

    All (spectrum, profile) cases must share the eigenvalue sequence (same
    nu / flavor / truncation), so the kernel matrix and its spectral
    decomposition are computed once per repetition and reused.
    """
    reps = int(reps)
    if reps < 2:
        raise DomainError("need at least two repetitions for a standard error")
    cases = list(cases)
    base = cases[0][0]
    for spec, _ in cases[1:]:
        if (spec.nu, spec.flavor, spec.truncation, spec.scale2) != (
            base.nu, base.flavor, base.truncation, base.scale2
        ):
            raise DomainError("batched cases must share the eigenvalue sequence")

    n, p = int(n_samples), int(n_features)
    lams = base.leading_eigenvalues(p)
    per_case = [(_leading_coefficients(spec, p), profile) for spec, profile in cases]

    root = np.random.SeedSequence(int(master_seed))
    rep_seqs = root.spawn(reps)
    values = np.full((len(cases), reps), np.nan)
    failures = 0
    for idx, rep_seq in enumerate(rep_seqs):
        data_seq, noise_seq = rep_seq.spawn(2)
        try:
            data = sample_dataset(model, n, p, data_seq)
            kmat, gmat, _, _ = _accumulate_grams(data.feature_matrix, lams,
                                                 np.zeros(p))
            d, vecs = np.linalg.eigh(kmat / n)
            if d.min() <= RANK_TOLERANCE * d.max():
                raise SingularKernelError("rank-deficient kernel realization")
            eps = _rng(noise_seq).standard_normal(n) if sigma_sq > 0.0 else None
            for c_idx, (coefs, profile) in enumerate(per_case):
                fvec = data.feature_matrix.T @ coefs
                bvec = data.feature_matrix.T @ (lams * coefs)
                y = fvec if eps is None else fvec + math.sqrt(sigma_sq) * eps
                filt = np.asarray(profile.evaluate(d), dtype=float) / (n * d)
                alpha = vecs @ (filt * (vecs.T @ y))
                values[c_idx, idx] = 0.5 * (
                    alpha @ gmat @ alpha - 2.0 * alpha @ bvec + coefs @ coefs
                )
        except SingularKernelError:
            failures += 1
    if failures > 0.01 * reps:
        raise EstimateError(
            f"{failures} of {reps} repetitions hit a singular kernel"
        )

    estimates = []
    for c_idx in range(len(cases)):
        vals = values[c_idx][np.isfinite(values[c_idx])]
        estimates.append(
            MCEstimate(
                mean=float(np.mean(vals)),
                stderr=float(np.std(vals, ddof=1) / math.sqrt(vals.size)),
                repetitions=int(vals.size),
                per_rep_values=tuple(float(v) for v in vals),
                n_failed=failures,
            )
        )
    return estimates
