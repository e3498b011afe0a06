"""Sampling from the class-conditional models and label-noise couplings.

A clean draw is (x, y_tilde) with x = U q + y_tilde * mu, q zero-mean from the
model's product distribution. Noise never touches x or y_tilde; it only
produces observed labels y, and the noisy set is the disagreement set.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterator
from dataclasses import dataclass
from functools import cache, cached_property

import numpy as np
from scipy import linalg

from app.core.errors import ConfigurationError
from app.core.seeding import mix_seed, rng_for, uniform_stream
from app.schemas.models import (
    AssumptionCheck,
    AssumptionReport,
    ModelSpec,
    NoiseSpec,
)

logger = logging.getLogger(__name__)

_NOISE_STREAM = 0x6E6F697365


def _frozen(values: np.ndarray, dtype) -> np.ndarray:
    array = np.array(values, dtype=dtype, copy=True)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class Dataset:
    x: np.ndarray
    y: np.ndarray
    y_tilde: np.ndarray

    def __post_init__(self) -> None:
        x = _frozen(self.x, np.float64)
        if x.ndim != 2:
            raise ValueError("x must be an n x p matrix")
        y = _frozen(self.y, np.int8)
        y_tilde = _frozen(self.y_tilde, np.int8)
        if y.shape != (x.shape[0],) or y_tilde.shape != (x.shape[0],):
            raise ValueError("labels must have one entry per row of x")
        if not (np.isin(y, (-1, 1)).all() and np.isin(y_tilde, (-1, 1)).all()):
            raise ValueError("labels must be -1 or +1")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "y_tilde", y_tilde)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @cached_property
    def noisy_set(self) -> tuple[int, ...]:
        return tuple(int(k) for k in np.flatnonzero(self.y != self.y_tilde))

    @cached_property
    def clean_set(self) -> tuple[int, ...]:
        return tuple(int(k) for k in np.flatnonzero(self.y == self.y_tilde))

    @cached_property
    def z(self) -> np.ndarray:
        """Signed examples z_k = y_k x_k."""
        return _frozen(self.y[:, None] * self.x, np.float64)

    def with_labels(self, y: np.ndarray) -> "Dataset":
        return Dataset(x=self.x, y=y, y_tilde=self.y_tilde)

    def scaled(self, factor: float) -> "Dataset":
        return Dataset(x=self.x * factor, y=self.y, y_tilde=self.y_tilde)

    def permuted(self, order: np.ndarray) -> "Dataset":
        return Dataset(x=self.x[order], y=self.y[order], y_tilde=self.y_tilde[order])


@cache
def rotation_matrix(p: int, seed: int) -> np.ndarray:
    """Orthogonal factor of a seeded Gaussian matrix, sign-fixed so it is Haar distributed."""
    gaussian = rng_for(seed, p).standard_normal((p, p))
    q, r = linalg.qr(gaussian)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    rotation = q * signs
    rotation.flags.writeable = False
    return rotation


def rotation_of(spec: ModelSpec) -> np.ndarray | None:
    if spec.rotation.kind == "identity":
        return None
    return rotation_matrix(spec.p, spec.rotation.seed)


def latent_mean(spec: ModelSpec) -> np.ndarray:
    if spec.kind == "gaussian_cc":
        return np.asarray(spec.mu, dtype=np.float64)
    mu = np.zeros(spec.p)
    # Boolean attributes match the label with probability 1/2 + gamma, so their mean is 2 gamma.
    mu[: spec.s] = 2.0 * spec.gamma if spec.kind == "boolean_rare_weak" else spec.gamma
    return mu


def mu_of(spec: ModelSpec) -> np.ndarray:
    mu = latent_mean(spec)
    rotation = rotation_of(spec)
    return mu if rotation is None else rotation @ mu


def mu_norm_sq(spec: ModelSpec) -> float:
    if spec.kind == "rare_weak":
        return spec.gamma**2 * spec.s
    if spec.kind == "boolean_rare_weak":
        return 4.0 * spec.gamma**2 * spec.s
    mu = latent_mean(spec)
    return float(mu @ mu)


def latent_variances(spec: ModelSpec) -> np.ndarray:
    if spec.kind == "gaussian_cc":
        if spec.sigma_diag is None:
            return np.ones(spec.p)
        return np.asarray(spec.sigma_diag, dtype=np.float64)
    if spec.kind == "rare_weak":
        return np.ones(spec.p)
    variances = np.ones(spec.p)
    variances[: spec.s] = 1.0 - 4.0 * spec.gamma**2
    return variances


def expected_latent_norm_sq(spec: ModelSpec) -> float:
    return float(latent_variances(spec).sum())


def _draw_block(spec: ModelSpec, rng: np.random.Generator, count: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw `count` clean rows in the latent basis (before rotation)."""
    y_tilde = np.where(rng.random(count) < 0.5, -1, 1).astype(np.int8)
    if spec.kind == "boolean_rare_weak":
        agree = np.full(spec.p, 0.5)
        agree[: spec.s] = 0.5 + spec.gamma
        matches = rng.random((count, spec.p)) < agree
        x = np.where(matches, 1.0, -1.0) * y_tilde[:, None]
        return x, y_tilde

    q = rng.standard_normal((count, spec.p))
    if spec.kind == "gaussian_cc" and spec.sigma_diag is not None:
        q *= np.sqrt(np.asarray(spec.sigma_diag))
    x = q + y_tilde[:, None] * latent_mean(spec)
    return x, y_tilde


def sample_clean(spec: ModelSpec, n: int, seed: int) -> Dataset:
    """n independent clean rows; row i uses its own stream derived from (seed, i)."""
    if n < 1:
        raise ConfigurationError("n must be at least 1")
    rows = []
    labels = np.empty(n, dtype=np.int8)
    for index in range(n):
        x_row, y_row = _draw_block(spec, rng_for(seed, index), 1)
        rows.append(x_row[0])
        labels[index] = y_row[0]
    x = np.vstack(rows)
    rotation = rotation_of(spec)
    if rotation is not None:
        x = x @ rotation.T
    return Dataset(x=x, y=labels, y_tilde=labels)


def _flip_count(eta: float, n: int) -> int:
    return int(math.floor(eta * n + 1e-9))


def margin_targeted_indices(z_clean: np.ndarray, mu: np.ndarray, count: int) -> np.ndarray:
    """Indices of the `count` clean examples with the largest mu . z, lowest index first on ties."""
    if count <= 0:
        return np.empty(0, dtype=np.int64)
    scores = z_clean @ mu
    order = np.lexsort((np.arange(scores.size), -scores))
    return np.sort(order[:count])


def apply_noise(
    clean: Dataset,
    noise: NoiseSpec,
    seed: int,
    *,
    mu: np.ndarray | None = None,
) -> Dataset:
    if not np.array_equal(clean.y, clean.y_tilde):
        raise ConfigurationError("apply_noise expects a clean dataset")
    if noise.is_noiseless():
        return clean

    y = clean.y_tilde.astype(np.int8)
    if noise.kind == "random_flip":
        u = uniform_stream(mix_seed(seed, _NOISE_STREAM), np.arange(clean.n))
        flips = np.flatnonzero(u < noise.eta)
    else:
        if mu is None:
            raise ConfigurationError("margin_targeted_flip needs the model mean")
        z_clean = clean.y_tilde[:, None] * clean.x
        flips = margin_targeted_indices(z_clean, np.asarray(mu), _flip_count(noise.eta, clean.n))
    y[flips] = -y[flips]
    logger.debug("labels flipped kind=%s eta=%s flipped=%s n=%s", noise.kind, noise.eta, flips.size, clean.n)
    return clean.with_labels(y)


def draw_labeled(
    spec: ModelSpec,
    noise: NoiseSpec,
    m: int,
    seed: int,
    *,
    chunk_size: int = 1024,
) -> Iterator[Dataset]:
    """Fresh labeled samples in independent chunks; chunk j uses streams (seed, j)."""
    rotation = rotation_of(spec)
    mu = mu_of(spec)
    for chunk, start in enumerate(range(0, m, chunk_size)):
        count = min(chunk_size, m - start)
        x, y_tilde = _draw_block(spec, rng_for(seed, chunk), count)
        if rotation is not None:
            x = x @ rotation.T
        clean = Dataset(x=x, y=y_tilde, y_tilde=y_tilde)
        yield apply_noise(clean, noise, mix_seed(seed, chunk, 1), mu=mu)


def check_assumptions(
    spec: ModelSpec,
    n: int,
    delta: float,
    eta: float,
    C: float,
    kappa: float,
) -> AssumptionReport:
    """Both sides of every assumption. Only inputs that make the arithmetic undefined raise."""
    if n < 1 or delta <= 0.0 or C <= 0.0 or kappa <= 0.0:
        raise ConfigurationError("need n >= 1 and positive delta, C and kappa")
    norm_sq = mu_norm_sq(spec)
    log_n_delta = math.log(n / delta)
    dimension_rhs = C * max(norm_sq * n, n**2 * log_n_delta)
    energy = expected_latent_norm_sq(spec)
    return AssumptionReport(
        n=n,
        p=spec.p,
        delta=delta,
        eta=eta,
        C=C,
        kappa=kappa,
        a1_failure_probability=AssumptionCheck(lhs=delta, rhs=1.0 / C, holds=delta < 1.0 / C),
        a2_sample_size=AssumptionCheck(
            lhs=float(n), rhs=C * math.log(1.0 / delta), holds=n >= C * math.log(1.0 / delta)
        ),
        a3_dimension=AssumptionCheck(lhs=float(spec.p), rhs=dimension_rhs, holds=spec.p >= dimension_rhs),
        a4_mean_norm=AssumptionCheck(
            lhs=norm_sq, rhs=C * log_n_delta, holds=norm_sq >= C * log_n_delta
        ),
        noise_level=AssumptionCheck(lhs=eta, rhs=1.0 / C, holds=0.0 <= eta <= 1.0 / C),
        latent_energy=AssumptionCheck(lhs=energy, rhs=kappa * spec.p, holds=energy >= kappa * spec.p),
        delta_range=AssumptionCheck(lhs=delta, rhs=1.0, holds=delta < 1.0),
        kappa_range=AssumptionCheck(lhs=kappa, rhs=1.0, holds=kappa < 1.0),
    )
