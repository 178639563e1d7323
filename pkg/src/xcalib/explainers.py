"""Local linear surrogates over masked perturbations.

Fits g(z) = phi0 + sum_i phi_i z_i to black-box scores by weighted ridge
regression.  Two perturbation kernels are provided: an exponential kernel on
cosine distance (favoring near-complete masks) and the Shapley kernel, whose
infinite endpoint weights are realized as equality constraints so the fitted
coefficients are Shapley values.  A brute-force Shapley oracle is included
for verification on small instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .blackbox import Predictor, PredictRequest, TargetSpec
from .perturbation import DEFAULT_MASK_TOKEN, Mask, PerturbationConfig, enumerate_masks, sample_masks
from .types import AnnotatedInstance, Attribution, ExplainerKind
from .util import canonical_digest, derive_seed

DEFAULT_SIGMA = 0.25
DEFAULT_RIDGE_LAMBDA = 1e-3
EXACT_SHAPLEY_LIMIT = 12


class TargetKind(str, Enum):
    PREDICTED_CLASS_PROB = "predicted_class_prob"
    PREDICTED_SPAN_PROB = "predicted_span_prob"


class DegenerateDesignError(ValueError):
    """Raised when the perturbation design is rank-deficient and unregularized."""


class InsufficientPerturbationsError(RuntimeError):
    """Raised when fewer than n+1 perturbation scores are available."""


@dataclass(frozen=True)
class ExplainerConfig:
    kernel: ExplainerKind = ExplainerKind.LIME
    sigma: float = DEFAULT_SIGMA
    ridge_lambda: float = DEFAULT_RIDGE_LAMBDA
    perturbation: PerturbationConfig = field(default_factory=PerturbationConfig)
    target: TargetKind = TargetKind.PREDICTED_SPAN_PROB

    def __post_init__(self) -> None:
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.ridge_lambda < 0:
            raise ValueError("ridge_lambda must be nonnegative")

    def digest(self) -> str:
        p = self.perturbation
        return canonical_digest(
            {
                "kernel": self.kernel.value,
                "sigma": self.sigma,
                "ridge_lambda": self.ridge_lambda,
                "target": self.target.value,
                "perturbation": {
                    "count": p.count,
                    "mask_token": p.mask_token,
                    "strategy": p.strategy.value,
                    "bernoulli_p": p.bernoulli_p,
                    "seed": p.seed,
                    "include_endpoints": p.include_endpoints,
                },
            }
        )


@dataclass(frozen=True)
class SurrogateFit:
    attribution: Attribution
    weighted_sse: float
    n_perturbations_used: int


def lime_weight(mask: Mask, sigma: float) -> float:
    """Exponential kernel exp(-d/sigma^2) on the cosine distance between the
    mask and the all-ones vector; for binary vectors d = 1 - sqrt(|z|/n).
    The all-zeros mask takes d = 1 by convention."""
    n = len(mask)
    k = mask.active
    d = 1.0 if k == 0 else 1.0 - math.sqrt(k / n)
    return math.exp(-d / (sigma * sigma))


def shap_weight(mask: Mask) -> float:
    """Shapley kernel (n-1) / (C(n,|z|) |z| (n-|z|)); infinite at the endpoints,
    which fitting must absorb as equality constraints."""
    n = len(mask)
    k = mask.active
    if k == 0 or k == n:
        return math.inf
    return (n - 1) / (math.comb(n, k) * k * (n - k))


def _weighted_lstsq(design: np.ndarray, target: np.ndarray, weights: np.ndarray,
                    lam: float, n_penalized: int) -> np.ndarray:
    """Solve min_w sum w_i (y_i - X_i b)^2 + lam * ||b_penalized||^2 where the
    last ``n_penalized`` coefficients carry the ridge penalty."""
    sw = np.sqrt(weights)
    a = design * sw[:, None]
    b = target * sw
    n_cols = design.shape[1]
    if lam > 0:
        pen = np.zeros((n_penalized, n_cols))
        pen[:, n_cols - n_penalized:] = math.sqrt(lam) * np.eye(n_penalized)
        a = np.vstack([a, pen])
        b = np.concatenate([b, np.zeros(n_penalized)])
    elif np.linalg.matrix_rank(a) < n_cols:
        raise DegenerateDesignError("rank-deficient and unregularized")
    coef, *_ = np.linalg.lstsq(a, b, rcond=None)
    return coef


def fit_surrogate(
    targets: list[float] | np.ndarray,
    masks: list[Mask],
    weights: list[float] | np.ndarray,
    ridge_lambda: float = 0.0,
    constraints: tuple[float, float] | None = None,
    explainer: ExplainerKind = ExplainerKind.EXACT,
    config_digest: str = "",
) -> SurrogateFit:
    """Weighted ridge fit of the additive surrogate.

    ``constraints``, when given as (f_empty, f_full), pins phi0 = f_empty and
    sum(phi) = f_full - f_empty by eliminating phi0 and one coefficient;
    rows with infinite weight are satisfied exactly and dropped from the
    regression.  The returned weighted_sse excludes the ridge term.
    """
    if not (len(targets) == len(masks) == len(weights)):
        raise ValueError("targets, masks and weights must have equal length")
    if not masks:
        raise ValueError("no perturbations supplied")
    n = len(masks[0])
    z = np.array([m.bits for m in masks], dtype=float)
    y = np.asarray(targets, dtype=float)
    w = np.asarray(weights, dtype=float)

    if constraints is None:
        if np.isinf(w).any():
            raise ValueError("infinite weights require endpoint constraints")
        design = np.hstack([np.ones((len(y), 1)), z])
        coef = _weighted_lstsq(design, y, w, ridge_lambda, n_penalized=n)
        phi0, phis = float(coef[0]), coef[1:]
        used = len(y)
    else:
        v_empty, v_full = constraints
        finite = np.isfinite(w)
        zf, yf, wf = z[finite], y[finite], w[finite]
        used = int(finite.sum())
        phi0 = float(v_empty)
        if n == 1:
            phis = np.array([v_full - v_empty])
        else:
            y_adj = yf - v_empty - zf[:, -1] * (v_full - v_empty)
            x_adj = zf[:, :-1] - zf[:, -1:]
            free = _weighted_lstsq(x_adj, y_adj, wf, ridge_lambda, n_penalized=n - 1)
            phis = np.append(free, (v_full - v_empty) - free.sum())

    finite = np.isfinite(w)
    residuals = y[finite] - phi0 - z[finite] @ phis
    sse = float(np.sum(w[finite] * residuals**2))
    attribution = Attribution(
        phi0=phi0, phis=tuple(float(p) for p in phis), explainer=explainer, config_digest=config_digest
    )
    return SurrogateFit(attribution=attribution, weighted_sse=sse, n_perturbations_used=used)


def _target_spec(instance: AnnotatedInstance, target: TargetKind) -> TargetSpec:
    if target == TargetKind.PREDICTED_CLASS_PROB:
        return TargetSpec(kind="label", label=instance.prediction.label)
    return TargetSpec(kind="span", span=instance.prediction.span)


def _query(instance: AnnotatedInstance, predictor: Predictor, masks: list[Mask],
           mask_token: str, target: TargetSpec) -> np.ndarray:
    from .perturbation import apply_mask

    sequences = tuple(tuple(apply_mask(instance, m, mask_token)) for m in masks)
    response = predictor.predict(
        PredictRequest(sequences=sequences, task=instance.task, target=target)
    )
    return np.asarray(response.scores, dtype=float)


def explain(instance: AnnotatedInstance, predictor: Predictor, cfg: ExplainerConfig) -> Attribution:
    """Sample perturbations, query the predictor for the probability of the
    committed prediction, and fit the configured surrogate.

    The perturbation seed is folded with the instance id so each instance gets
    its own deterministic mask sequence under a single run seed.
    """
    n = len(instance)
    pert = replace(cfg.perturbation, seed=derive_seed(cfg.perturbation.seed, instance.id))
    masks = sample_masks(n, pert)
    target = _target_spec(instance, cfg.target)
    scores = _query(instance, predictor, masks, pert.mask_token, target)
    if len(scores) < n + 1:
        raise InsufficientPerturbationsError(
            f"{len(scores)} perturbation scores for {n} tokens; need at least {n + 1}"
        )

    digest = cfg.digest()
    if cfg.kernel == ExplainerKind.LIME:
        weights = [lime_weight(m, cfg.sigma) for m in masks]
        fit = fit_surrogate(
            scores, masks, weights, ridge_lambda=cfg.ridge_lambda,
            explainer=ExplainerKind.LIME, config_digest=digest,
        )
        return fit.attribution

    if cfg.kernel == ExplainerKind.SHAP:
        idx_full = next((i for i, m in enumerate(masks) if m.active == n), None)
        idx_empty = next((i for i, m in enumerate(masks) if m.active == 0), None)
        if idx_full is None or idx_empty is None:
            raise ValueError("Shapley kernel requires the endpoint masks; enable include_endpoints")
        weights = [shap_weight(m) for m in masks]
        fit = fit_surrogate(
            scores, masks, weights, ridge_lambda=cfg.ridge_lambda,
            constraints=(float(scores[idx_empty]), float(scores[idx_full])),
            explainer=ExplainerKind.SHAP, config_digest=digest,
        )
        return fit.attribution

    raise ValueError(f"unsupported kernel: {cfg.kernel}")


def exact_shapley(instance: AnnotatedInstance, predictor: Predictor,
                  target: TargetKind) -> Attribution:
    """Brute-force Shapley values over all 2^n coalitions; n <= 12."""
    n = len(instance)
    if n > EXACT_SHAPLEY_LIMIT:
        raise ValueError("oracle limited to small instances")
    masks = enumerate_masks(n)
    spec = _target_spec(instance, target)
    values = _query(instance, predictor, masks, DEFAULT_MASK_TOKEN, spec)

    fact = [math.factorial(k) for k in range(n + 1)]
    phis = np.zeros(n)
    for subset in range(2**n):
        size = bin(subset).count("1")
        coef = fact[size] * fact[n - size - 1] / fact[n]
        v_s = values[subset]
        for i in range(n):
            if subset & (1 << i):
                continue
            phis[i] += coef * (values[subset | (1 << i)] - v_s)
    return Attribution(
        phi0=float(values[0]),
        phis=tuple(float(p) for p in phis),
        explainer=ExplainerKind.EXACT,
        config_digest="exact",
    )
