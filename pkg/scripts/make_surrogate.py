#!/usr/bin/env python3
"""Generate the committed synthetic bankruptcy dataset.

The generator mimics the statistical shape of public corporate-bankruptcy
ratio data (64 financial ratios, ~2% bankruptcy rate, heavy collinearity
between short-term-liability and margin ratios) without redistributing any
real records.  Companies are driven by a small set of latent factors:

  u          broad distress factor, loaded by many ratios
  z_s        short-term-liability turnover factor (attr33/attr63 pair)
  z_m        operating-margin factor (attr42/attr49 pair)
  z_c        quick-liquidity factor (attr46/attr40 pair)
  g, d, r    small, heavy-tailed gaps separating the paired ratios
  w-slow     slow-burn distress syndrome, visible in the long-horizon
             ratios (attr24/attr25/attr26/attr34) but not the short-term ones

True bankruptcy odds follow a logistic model on the standardized ratios plus
the slow-burn term, thinned by a constant rescue probability: even firms with
catastrophic ratios are often restructured rather than declared bankrupt.
The thinning keeps the model well specified in the rare-event bulk while
capping achievable precision for any classifier, which is what produces the
realistic false-positive-heavy confusion pattern.

All knobs below are frozen: the shipped acceptance expectations were
computed against exactly this configuration.

Run from the repository root:  python scripts/make_surrogate.py
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from bankbayes.ingest import RawTable, write_arff  # noqa: E402

TRAIN_COUNTS = (5487, 113)   # (non-bankrupt, bankrupt)
TEST_COUNTS = (2105, 47)


@dataclass
class Params:
    seed: int = 20260811
    population: int = 60000

    # true (generator-scale) coefficients on the standardized model2 ratios,
    # intercept first; layout matches the model2 preset order
    b0: float = -5.70
    beta: dict = field(default_factory=lambda: {
        "attr8": -0.07, "attr10": 0.04, "attr12": 0.21, "attr20": -0.21,
        "attr33": 12.2, "attr40": 3.25, "attr42": -21.7, "attr46": -4.87,
        "attr49": 22.2, "attr59": -0.20, "attr63": -13.3, "attr64": 0.11,
    })

    # factor loadings of the paired ratios
    u_s: float = 0.35        # u loading of the attr33/attr63 pair
    u_m: float = -0.35       # u loading of the attr42/attr49 pair
    u_c: float = -0.30       # u loading of the attr46/attr40 pair
    a_c: float = 0.45        # z_c weight in the liquidity pair
    noise_big: float = 0.018  # idiosyncratic noise scale on the six big ratios

    # small-variance gap channels separating the paired ratios
    sig_g: float = 0.024
    sig_d: float = 0.024
    sig_r: float = 0.06

    # acute-distress syndrome: rare incidence, severity straddling the knee;
    # visible in the g/d gaps.  Its effect on true log-odds is linear up to
    # `knee` and flat beyond, so extreme ratios stop adding risk (rescues,
    # restructuring cap the realized bankruptcy risk)
    pi_v: float = 0.08
    v_base: float = 0.7
    v_spread: float = 1.1
    v_trunc: float = 4.5
    knee: float = 2.0
    gam_g: float = 0.066
    gam_d: float = 0.066

    # model1's long-horizon ratios see the acute-syndrome indicator (a firm
    # in acute distress has visibly broken long-horizon ratios too) but not
    # its severity, which lives only in the short-term gap ratios
    m1_hit_vis: float = 0.40

    # slow-burn syndrome (visible only in model1's long-horizon ratios)
    pi_slow: float = 0.10
    w_mean: float = 0.8
    w_sd: float = 0.4
    kappa_slow: float = 2.4

    # fraction of cells masked as missing in the eligible filler columns
    missing_rate: float = 0.012


MODEL2 = ("attr8", "attr10", "attr12", "attr20", "attr33", "attr40",
          "attr42", "attr46", "attr49", "attr59", "attr63", "attr64")
MODEL1 = ("attr5", "attr24", "attr25", "attr26", "attr34")
ALTMAN = ("attr3", "attr6", "attr7", "attr8", "attr9")

# raw-space affine transforms (mean, sd) for columns with a meaningful scale;
# the Altman five are sized so most companies score in the distress zone
RAW_SCALE = {
    "attr3": (0.06, 0.18), "attr6": (0.04, 0.15), "attr7": (0.03, 0.10),
    "attr8": (0.55, 0.45), "attr9": (0.85, 0.45),
    "attr10": (0.45, 0.22), "attr12": (0.25, 0.40), "attr20": (55.0, 40.0),
    "attr29": (4.2, 0.55), "attr33": (3.2, 1.8), "attr40": (0.35, 0.40),
    "attr42": (0.05, 0.09), "attr46": (1.05, 0.65), "attr49": (0.08, 0.11),
    "attr55": (1200.0, 900.0), "attr59": (0.35, 0.50), "attr63": (3.6, 2.0),
    "attr64": (4.5, 3.0), "attr5": (-45.0, 120.0), "attr24": (0.12, 0.30),
    "attr25": (0.30, 0.25), "attr26": (0.18, 0.28), "attr34": (1.35, 0.90),
}


def _norm(*weights: float) -> float:
    """Residual weight that tops total variance up to one."""
    rest = 1.0 - sum(w * w for w in weights)
    if rest <= 0:
        raise ValueError("loadings exceed unit variance")
    return float(np.sqrt(rest))


def generate_population(p: Params, n: int, rng: np.random.Generator):
    """Draw ``n`` companies; returns standardized 64-column matrix, labels,
    and the latent diagnostics used during calibration."""
    u = rng.standard_normal(n)
    z_s = rng.standard_normal(n)
    z_m = rng.standard_normal(n)
    z_c = rng.standard_normal(n)

    hit = (rng.random(n) < p.pi_v).astype(float)
    v = np.where(
        hit > 0,
        np.minimum(p.v_base + p.v_spread * np.abs(rng.standard_normal(n)), p.v_trunc),
        0.0,
    )
    slow = (rng.random(n) < p.pi_slow).astype(float)
    w = slow * np.abs(rng.normal(p.w_mean, p.w_sd, n))

    g = p.sig_g * rng.standard_normal(n) - p.gam_g * v
    d = p.sig_d * rng.standard_normal(n) + p.gam_d * v
    r = p.sig_r * rng.standard_normal(n)

    e = {name: rng.standard_normal(n) for name in
         ("x33", "x63", "x42", "x49", "x46", "x40", "x8", "x10", "x12",
          "x20", "x59", "x64")}
    w8 = rng.standard_normal(n)

    nb = p.noise_big
    cols: dict[str, np.ndarray] = {}
    cols["attr33"] = p.u_s * u + z_s + nb * e["x33"]
    cols["attr63"] = p.u_s * u + z_s + g + nb * e["x63"]
    cols["attr42"] = p.u_m * u + z_m + nb * e["x42"]
    cols["attr49"] = p.u_m * u + z_m + d + nb * e["x49"]
    cols["attr46"] = p.u_c * u + p.a_c * z_c + nb * e["x46"]
    cols["attr40"] = p.u_c * u + p.a_c * z_c - r + nb * e["x40"]
    cols["attr8"] = -0.40 * u + 0.65 * w8 + _norm(0.40, 0.65) * e["x8"]
    cols["attr10"] = -0.35 * u + 0.60 * w8 + _norm(0.35, 0.60) * e["x10"]
    cols["attr12"] = 0.45 * z_s + 0.35 * z_m + _norm(0.45, 0.35) * e["x12"]
    cols["attr20"] = 0.20 * u + _norm(0.20) * e["x20"]
    cols["attr59"] = 0.30 * u + _norm(0.30) * e["x59"]
    cols["attr64"] = 0.15 * u + _norm(0.15) * e["x64"]

    # standardize the model2 block and form the linear predictor
    eta = np.full(n, p.b0)
    x_std = {}
    sds = {}
    for name in MODEL2:
        col = cols[name]
        sds[name] = col.std()
        x_std[name] = (col - col.mean()) / sds[name]
        eta += p.beta[name] * x_std[name]

    # the syndrome's linear log-odds slope, as embedded in the ratios
    k_lin = (p.beta["attr63"] * (-p.gam_g / sds["attr63"])
             + p.beta["attr49"] * (p.gam_d / sds["attr49"]))
    eta_true = eta - k_lin * np.maximum(0.0, v - p.knee) + p.kappa_slow * w
    prob = 1.0 / (1.0 + np.exp(-eta_true))
    y = (rng.random(n) < prob).astype(float)

    # model1 block: long-horizon ratios seeing u, the slow-burn syndrome,
    # and the acute-syndrome indicator (but not its severity)
    hit_sd = hit.std()
    hit_std = (hit - hit.mean()) / hit_sd if hit_sd > 0 else np.zeros_like(hit)
    hv = p.m1_hit_vis
    cols["attr5"] = (-0.25 * u + 0.40 * z_c - 0.30 * w
                     + _norm(0.25, 0.40, 0.30) * rng.standard_normal(n))
    cols["attr24"] = (-0.45 * u - 0.45 * w - hv * hit_std
                      + _norm(0.45, 0.45, hv) * rng.standard_normal(n))
    cols["attr25"] = (-0.35 * u + 0.45 * w8 - 0.25 * w
                      + _norm(0.35, 0.45, 0.25) * rng.standard_normal(n))
    cols["attr26"] = (-0.50 * u + 0.30 * z_m - 0.50 * w - hv * hit_std
                      + _norm(0.50, 0.30, 0.50, hv) * rng.standard_normal(n))
    cols["attr34"] = (0.30 * u + 0.60 * z_s + 0.30 * w + 0.5 * hv * hit_std
                      + _norm(0.30, 0.60, 0.30, 0.5 * hv) * rng.standard_normal(n))

    # Altman block (attr8 already built above)
    cols["attr3"] = -0.50 * u + _norm(0.50) * rng.standard_normal(n)
    cols["attr6"] = -0.50 * u + _norm(0.50) * rng.standard_normal(n)
    cols["attr7"] = (-0.55 * u + 0.30 * z_m
                     + _norm(0.55, 0.30) * rng.standard_normal(n))
    cols["attr9"] = -0.30 * u + _norm(0.30) * rng.standard_normal(n)

    # filler ratios: seeded random mixes of the latent pool
    fill_rng = np.random.default_rng(np.random.SeedSequence(p.seed, spawn_key=(9,)))
    pool = {"u": u, "z_s": z_s, "z_m": z_m, "z_c": z_c, "w8": w8, "w": w}
    pool_names = list(pool)
    for k in range(1, 65):
        name = f"attr{k}"
        if name in cols:
            continue
        picks = fill_rng.choice(len(pool_names), size=2, replace=False)
        weights = fill_rng.uniform(0.2, 0.55, size=2) * fill_rng.choice((-1.0, 1.0), 2)
        mix = sum(wt * pool[pool_names[i]] for i, wt in zip(picks, weights))
        cols[name] = mix + _norm(*weights) * rng.standard_normal(n)

    debug = {"eta": eta, "eta_true": eta_true, "prob": prob, "u": u, "w": w,
             "v": v, "k_lin": k_lin, "slow": slow, "x_std": x_std}
    return cols, y, debug


def _to_raw(name: str, std_col: np.ndarray, scale_rng: np.random.Generator) -> np.ndarray:
    if name in RAW_SCALE:
        mean, sd = RAW_SCALE[name]
    else:
        mean = float(scale_rng.uniform(-0.5, 1.5))
        sd = float(scale_rng.uniform(0.2, 2.5))
    return mean + sd * std_col


def build_dataset(p: Params):
    """Returns (train, test) RawTables with exact class counts per split."""
    rng = np.random.default_rng(np.random.SeedSequence(p.seed, spawn_key=(1,)))
    cols, y, debug = generate_population(p, p.population, rng)

    names = [f"attr{k}" for k in range(1, 65)]
    scale_rng = np.random.default_rng(np.random.SeedSequence(p.seed, spawn_key=(2,)))
    raw = np.column_stack([_to_raw(name, cols[name], scale_rng) for name in names])

    neg_idx = np.flatnonzero(y == 0.0)
    pos_idx = np.flatnonzero(y == 1.0)
    need_neg = TRAIN_COUNTS[0] + TEST_COUNTS[0]
    need_pos = TRAIN_COUNTS[1] + TEST_COUNTS[1]
    if len(neg_idx) < need_neg or len(pos_idx) < need_pos:
        raise RuntimeError(
            f"population too small: {len(pos_idx)} positives for {need_pos} needed"
        )

    def take(split_rng, rows):
        order = split_rng.permutation(len(rows))
        return rows[order]

    split_rng = np.random.default_rng(np.random.SeedSequence(p.seed, spawn_key=(3,)))
    train_rows = np.concatenate([neg_idx[:TRAIN_COUNTS[0]], pos_idx[:TRAIN_COUNTS[1]]])
    test_rows = np.concatenate([
        neg_idx[TRAIN_COUNTS[0]:need_neg], pos_idx[TRAIN_COUNTS[1]:need_pos],
    ])
    train_rows = take(split_rng, train_rows)
    test_rows = take(split_rng, test_rows)

    eligible = [
        j for j, name in enumerate(names)
        if name not in set(MODEL2) | set(MODEL1) | set(ALTMAN)
    ]
    mask_rng = np.random.default_rng(np.random.SeedSequence(p.seed, spawn_key=(4,)))

    def assemble(rows) -> RawTable:
        values = raw[rows]
        mask = mask_rng.random(values.shape) < p.missing_rate
        keep = np.ones(values.shape[1], dtype=bool)
        keep[eligible] = False
        mask[:, keep] = False
        values = values.copy()
        values[mask] = np.nan
        labels = y[rows]
        return RawTable(tuple(names) + ("class",), np.column_stack([values, labels]))

    return assemble(train_rows), assemble(test_rows), debug


def main() -> None:
    out_dir = Path(__file__).resolve().parent.parent / "data"
    out_dir.mkdir(exist_ok=True)
    params = Params()
    train, test, _ = build_dataset(params)
    (out_dir / "bankruptcy_train.arff").write_text(
        write_arff(train, "bankruptcy-train"), "utf-8"
    )
    (out_dir / "bankruptcy_test.arff").write_text(
        write_arff(test, "bankruptcy-test"), "utf-8"
    )
    for name, table in (("train", train), ("test", test)):
        labels = table.column("class")
        print(f"{name}: {table.n_rows} rows, {int(labels.sum())} bankrupt, "
              f"{table.n_missing} missing cells")


if __name__ == "__main__":
    main()
