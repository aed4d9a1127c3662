"""Convergence diagnostics and posterior summaries.

R-hat and ESS follow the rank-normalized split-chain recipe: pooled ranks
(average ties), inverse-normal transform with the 3/8 offset, chains split in
half, then the classic between/within variance comparison, with Geyer's
initial monotone positive sequence truncating the autocorrelation sum for
ESS.  Summaries (median, equal-tailed CI, pd, ROPE coverage) are computed on
pooled draws; R-hat/ESS never are.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri
from scipy.stats import rankdata

from .nuts import PosteriorDraws

# logistic-scale convention for a negligible effect: 0.1 * pi / sqrt(3)
ROPE_DEFAULT = 0.1 * math.pi / math.sqrt(3.0)


class DegenerateDraws(ValueError):
    pass


class EmptyDraws(ValueError):
    pass


@dataclass(frozen=True)
class RopeSpec:
    low: float = -ROPE_DEFAULT
    high: float = ROPE_DEFAULT
    ci_level: float = 0.89

    def __post_init__(self):
        if not self.low < self.high:
            raise ValueError("rope bounds must satisfy low < high")
        if not 0.0 < self.ci_level < 1.0:
            raise ValueError("ci_level must lie in (0, 1)")


@dataclass(frozen=True)
class ParameterSummary:
    """One row of the posterior summary table."""

    name: str
    median: float
    ci_low: float
    ci_high: float
    pd: float
    rope_pct: float
    rhat: float
    ess: float
    significant: bool

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "median": self.median,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "pd": self.pd,
            "rope_pct": self.rope_pct,
            "rhat": self.rhat,
            "ess": self.ess,
            "significant": self.significant,
        }


def _check_chains(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("expected a chains x draws array")
    if x.shape[1] < 4:
        raise ValueError("need at least 4 draws per chain")
    if np.ptp(x) == 0.0:
        raise DegenerateDraws("all draws are identical")
    return x


def _split_chains(x: np.ndarray) -> np.ndarray:
    half = x.shape[1] // 2
    return np.vstack([x[:, :half], x[:, x.shape[1] - half:]])


def _rank_normalize(x: np.ndarray) -> np.ndarray:
    ranks = rankdata(x, method="average").reshape(x.shape)
    return ndtri((ranks - 0.375) / (x.size + 0.25))


def split_rhat(draws: np.ndarray) -> float:
    """Rank-normalized split potential-scale-reduction factor."""
    z = _rank_normalize(_split_chains(_check_chains(draws)))
    n = z.shape[1]
    within = z.var(axis=1, ddof=1).mean()
    between = n * z.mean(axis=1).var(ddof=1)
    var_plus = (n - 1) / n * within + between / n
    if within == 0.0:
        return math.inf
    return float(math.sqrt(var_plus / within))


def _autocovariance(chain: np.ndarray) -> np.ndarray:
    """Biased (divide by n) autocovariance for all lags, via FFT."""
    n = chain.shape[0]
    centered = chain - chain.mean()
    size = 2 ** int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(centered, size)
    acov = np.fft.irfft(f * np.conjugate(f), size)[:n].real
    return acov / n


def ess(draws: np.ndarray) -> float:
    """Bulk effective sample size on rank-normalized split chains."""
    z = _rank_normalize(_split_chains(_check_chains(draws)))
    m, n = z.shape
    acov = np.vstack([_autocovariance(z[i]) for i in range(m)])
    chain_means = z.mean(axis=1)
    mean_var = acov[:, 0].mean() * n / (n - 1)
    var_plus = mean_var * (n - 1) / n
    if m > 1:
        var_plus += chain_means.var(ddof=1)
    if var_plus == 0.0:
        raise DegenerateDraws("zero variance after rank normalization")

    # Geyer initial monotone positive sequence over paired lags
    rho = 1.0 - (mean_var - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0
    max_pairs = (n - 1) // 2
    pair_sums = []
    for k in range(max_pairs):
        p = rho[2 * k] + rho[2 * k + 1]
        if p <= 0.0:
            break
        if pair_sums and p > pair_sums[-1]:
            p = pair_sums[-1]
        pair_sums.append(p)
    tau = max(-1.0 + 2.0 * sum(pair_sums), 1.0 / math.log10(m * n + 10.0))
    return float(m * n / tau)


def rhat_and_ess(draws: PosteriorDraws) -> tuple[np.ndarray, np.ndarray]:
    """Per-parameter split R-hat and bulk ESS for a sampler result."""
    rhats = np.empty(draws.n_params)
    esses = np.empty(draws.n_params)
    for j in range(draws.n_params):
        per_chain = draws.parameter(j)
        rhats[j] = split_rhat(per_chain)
        esses[j] = ess(per_chain)
    return rhats, esses


def probability_of_direction(pooled: np.ndarray) -> float:
    frac_pos = float(np.mean(pooled > 0.0))
    frac_neg = float(np.mean(pooled < 0.0))
    return max(frac_pos, frac_neg, 0.5)


def rope_percentage(pooled: np.ndarray, rope: RopeSpec, ci_low: float, ci_high: float) -> float:
    """Share of the equal-tailed CI mass that falls inside the ROPE."""
    in_ci = (pooled >= ci_low) & (pooled <= ci_high)
    in_rope = (pooled >= rope.low) & (pooled <= rope.high)
    denom = int(in_ci.sum())
    if denom == 0:
        return 0.0
    return 100.0 * float((in_ci & in_rope).sum()) / denom


def summarize_parameter(
    name: str, per_chain: np.ndarray, rope: RopeSpec
) -> ParameterSummary:
    pooled = per_chain.reshape(-1)
    if pooled.size == 0:
        raise EmptyDraws("no draws to summarize")
    alpha = (1.0 - rope.ci_level) / 2.0
    ci_low, median, ci_high = np.quantile(pooled, [alpha, 0.5, 1.0 - alpha])
    rpct = rope_percentage(pooled, rope, ci_low, ci_high)
    return ParameterSummary(
        name=name,
        median=float(median),
        ci_low=float(ci_low),
        ci_high=float(ci_high),
        pd=probability_of_direction(pooled),
        rope_pct=rpct,
        rhat=split_rhat(per_chain),
        ess=ess(per_chain),
        significant=(rpct == 0.0),
    )


def summarize(draws: PosteriorDraws, rope: RopeSpec | None = None) -> list[ParameterSummary]:
    if rope is None:
        rope = RopeSpec()
    if draws.n_draws == 0 or draws.n_chains == 0:
        raise EmptyDraws("posterior draws are empty")
    return [
        summarize_parameter(draws.param_names[j], draws.parameter(j), rope)
        for j in range(draws.n_params)
    ]


def significance_label(rope_pct: float) -> str:
    """Decision rule: CI fully outside the ROPE is significant, fully inside
    (97.5%+) is practically null, anything between stays undecided."""
    if rope_pct == 0.0:
        return "significant"
    if rope_pct >= 97.5:
        return "practically_null"
    return "undecided"


def render_summary_table(summaries: list[ParameterSummary], rope: RopeSpec) -> str:
    """Aligned text table: Parameter / Median / CI / pd / ROPE / % in ROPE / Rhat / ESS."""
    level = f"{100 * rope.ci_level:.0f}%"
    header = [
        "Parameter", "Median", f"{level} CI", "pd",
        f"{level} ROPE", "% in ROPE", "Rhat", "ESS",
    ]
    rope_str = f"[{rope.low:.3f}, {rope.high:.3f}]"
    rows = []
    for s in summaries:
        rows.append([
            s.name,
            f"{s.median:.3f}",
            f"[{s.ci_low:.3f}, {s.ci_high:.3f}]",
            f"{s.pd:.3f}",
            rope_str,
            f"{s.rope_pct:.3f}",
            f"{s.rhat:.3f}",
            f"{s.ess:.3f}",
        ])
    widths = [max(len(header[i]), *(len(r[i]) for r in rows)) for i in range(len(header))]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(header, widths)),
        "  ".join("-" * w for w in widths),
    ]
    for r in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)))
    return "\n".join(lines)


def summaries_to_json(summaries: list[ParameterSummary], rope: RopeSpec) -> dict:
    return {
        "rope": {"low": rope.low, "high": rope.high, "ci_level": rope.ci_level},
        "parameters": [s.to_dict() for s in summaries],
    }
