"""Bernoulli-logit GLM with Student-t priors: log posterior and gradient.

The evidence term is never computed; samplers only need the log posterior up
to an additive constant.  All likelihood terms use log1p-stable forms, so
evaluations stay finite for any finite coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .preprocess import DimensionMismatch, LabeledMatrix


def sigmoid(t):
    """Numerically stable logistic function; no overflow for |t| up to ~1e3."""
    t = np.asarray(t, dtype=np.float64)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out if out.ndim else float(out)


def log_sigmoid(t):
    """log(sigmoid(t)) via the log1p path: exact deep into the tails."""
    t = np.asarray(t, dtype=np.float64)
    out = -np.logaddexp(0.0, -t)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class PriorSpec:
    """Independent Student-t priors, one (df, location, scale) per parameter.

    Parameter order matches ParamVector: intercept first, then coefficients.
    """

    df: np.ndarray
    location: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        for name in ("df", "location", "scale"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            object.__setattr__(self, name, arr)
        if not (self.df.shape == self.location.shape == self.scale.shape):
            raise DimensionMismatch("prior arrays must be congruent")
        if self.df.ndim != 1:
            raise DimensionMismatch("prior arrays must be 1-D")
        if not (self.df > 0).all() or not (self.scale > 0).all():
            raise ValueError("prior df and scale must be strictly positive")

    @property
    def n_params(self) -> int:
        return self.df.shape[0]

    @classmethod
    def default(cls, n_params: int, df=7.0, location=0.0, scale=2.5) -> "PriorSpec":
        """Student-t(7, 0, 2.5) on every parameter unless overridden."""
        return cls(
            df=np.full(n_params, float(df)),
            location=np.full(n_params, float(location)),
            scale=np.full(n_params, float(scale)),
        )


def log_prior(beta: np.ndarray, priors: PriorSpec) -> float:
    beta = np.asarray(beta, dtype=np.float64)
    if beta.shape != (priors.n_params,):
        raise DimensionMismatch(
            f"beta has shape {beta.shape}, priors cover {priors.n_params} parameters"
        )
    df, scale = priors.df, priors.scale
    z = (beta - priors.location) / scale
    log_norm = gammaln((df + 1.0) / 2.0) - gammaln(df / 2.0) - 0.5 * np.log(df * np.pi)
    return float(np.sum(log_norm - np.log(scale) - (df + 1.0) / 2.0 * np.log1p(z * z / df)))


def grad_log_prior(beta: np.ndarray, priors: PriorSpec) -> np.ndarray:
    z = (beta - priors.location) / priors.scale
    return -(priors.df + 1.0) * z / (priors.scale * (priors.df + z * z))


class GlmModel:
    """Immutable GLM over a scaled design matrix: p = n_features + 1 parameters.

    ParamVector layout: ``[intercept, coefficients in feature order]``.
    Instances are safe to share across concurrently running chains.
    """

    def __init__(self, data: LabeledMatrix, priors: PriorSpec | None = None):
        if priors is None:
            priors = PriorSpec.default(data.n_features + 1)
        if priors.n_params != data.n_features + 1:
            raise DimensionMismatch(
                f"priors cover {priors.n_params} parameters, model needs "
                f"{data.n_features + 1}"
            )
        self.data = data
        self.priors = priors
        self.p = data.n_features + 1
        self.param_names = ("(Intercept)",) + data.feature_ids

    # dimension of the sampling space, used by the sampler
    @property
    def dim(self) -> int:
        return self.p

    def _eta(self, beta: np.ndarray) -> np.ndarray:
        beta = np.asarray(beta, dtype=np.float64)
        if beta.shape != (self.p,):
            raise DimensionMismatch(f"beta has shape {beta.shape}, expected ({self.p},)")
        return beta[0] + self.data.X @ beta[1:]

    def log_likelihood(self, beta: np.ndarray) -> float:
        eta = self._eta(beta)
        sign = 1.0 - 2.0 * self.data.y
        return float(-np.logaddexp(0.0, sign * eta).sum())

    def log_prior(self, beta: np.ndarray) -> float:
        return log_prior(np.asarray(beta, dtype=np.float64), self.priors)

    def log_posterior(self, beta: np.ndarray) -> float:
        return self.log_likelihood(beta) + self.log_prior(beta)

    def grad_log_posterior(self, beta: np.ndarray) -> np.ndarray:
        return self.logp_and_grad(beta)[1]

    def logp_and_grad(self, beta: np.ndarray) -> tuple[float, np.ndarray]:
        """One-pass evaluation; the sampler calls this once per leapfrog step."""
        beta = np.asarray(beta, dtype=np.float64)
        eta = self._eta(beta)
        y = self.data.y
        sign = 1.0 - 2.0 * y
        logp = -np.logaddexp(0.0, sign * eta).sum() + log_prior(beta, self.priors)
        resid = y - sigmoid(eta)
        grad = np.empty(self.p)
        grad[0] = resid.sum()
        grad[1:] = self.data.X.T @ resid
        grad += grad_log_prior(beta, self.priors)
        return float(logp), grad


def pointwise_log_lik(beta: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-row Bernoulli log densities at ``beta`` (intercept-first layout)."""
    beta = np.asarray(beta, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or beta.shape != (X.shape[1] + 1,) or y.shape != (X.shape[0],):
        raise DimensionMismatch(
            f"incompatible shapes: beta {beta.shape}, X {X.shape}, y {y.shape}"
        )
    eta = beta[0] + X @ beta[1:]
    return -np.logaddexp(0.0, (1.0 - 2.0 * y) * eta)
