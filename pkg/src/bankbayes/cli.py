"""Command-line surface: fit, report, evaluate, compare, baselines, catalog.

Configuration is a flat ``key = value`` text file ('#' starts a comment);
command-line flags override file keys.  Every command is deterministic given
its config: the seed is mandatory and there is no wall-clock fallback.

Exit codes: 0 success, 1 user/config error, 2 computation failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__, diagnostics, evaluate
from .diagnostics import RopeSpec, significance_label, summarize
from .glm_core import GlmModel, PriorSpec
from .ingest import ImputationStats, IngestError, impute_missing, parse_arff, parse_csv
from .nuts import ChainFailed, PosteriorDraws, SamplerConfig, run_chains
from .preprocess import (
    LabeledMatrix,
    ModelSpec,
    PreprocessError,
    Scaler,
    apply_scaler,
    build_matrix,
    describe,
    fit_scaler,
    load_catalog,
    model_preset,
)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Resolved run settings; every field maps to one config-file key."""

    seed: int
    train: str | None = None
    test: str | None = None
    format: str = "arff"
    label: str = "class"
    preset: str = "model2"
    features: tuple[str, ...] = ()
    prior_df: float = 7.0
    prior_location: float = 0.0
    prior_scale: float = 2.5
    chains: int = 4
    warmup: int = 2000
    draws: int = 2000
    target_accept: float = 0.8
    max_treedepth: int = 10
    init_radius: float = 2.0
    rope_low: float = -diagnostics.ROPE_DEFAULT
    rope_high: float = diagnostics.ROPE_DEFAULT
    ci_level: float = 0.89
    threshold: float = 0.5
    positive_label: int = 1
    kfold_k: int = 10
    impute: str = "median"
    out: str = "bankbayes_out"

    def __post_init__(self):
        if self.format not in ("arff", "csv"):
            raise ConfigError(f"format must be 'arff' or 'csv', got {self.format!r}")
        if self.preset not in ("model1", "model2", "custom"):
            raise ConfigError(f"preset must be model1|model2|custom, got {self.preset!r}")
        if self.preset == "custom" and not self.features:
            raise ConfigError("preset=custom requires a 'features' list")
        if self.positive_label not in (0, 1):
            raise ConfigError("positive_label must be 0 or 1")
        if self.impute not in ("median", "mean", "drop_rows"):
            raise ConfigError(f"unknown impute strategy {self.impute!r}")

    def model_spec(self) -> ModelSpec:
        if self.preset == "custom":
            return ModelSpec("custom", self.features, preset="custom")
        return model_preset(self.preset)

    def sampler_config(self) -> SamplerConfig:
        return SamplerConfig(
            seed=self.seed,
            chains=self.chains,
            warmup=self.warmup,
            draws=self.draws,
            target_accept=self.target_accept,
            max_treedepth=self.max_treedepth,
            init_radius=self.init_radius,
        )

    def rope(self) -> RopeSpec:
        return RopeSpec(self.rope_low, self.rope_high, self.ci_level)

    def priors(self, n_params: int) -> PriorSpec:
        return PriorSpec.default(
            n_params, df=self.prior_df, location=self.prior_location,
            scale=self.prior_scale,
        )

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = list(value) if isinstance(value, tuple) else value
        return out


_INT_KEYS = {"seed", "chains", "warmup", "draws", "max_treedepth", "positive_label", "kfold_k"}
_FLOAT_KEYS = {
    "prior_df", "prior_location", "prior_scale", "target_accept", "init_radius",
    "rope_low", "rope_high", "ci_level", "threshold",
}


def parse_config_text(text: str, base_dir: Path) -> dict:
    """Parse the flat key = value grammar into typed config values."""
    known = {f.name for f in fields(RunConfig)}
    values: dict = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {line_no}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in known:
            raise ConfigError(f"config line {line_no}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"config line {line_no}: duplicate key {key!r}")
        try:
            if key in _INT_KEYS:
                values[key] = int(value)
            elif key in _FLOAT_KEYS:
                values[key] = float(value)
            elif key == "features":
                values[key] = tuple(v.strip() for v in value.split(",") if v.strip())
            elif key in ("train", "test"):
                values[key] = str((base_dir / value).resolve())
            elif key == "out":
                values[key] = str((base_dir / value).resolve())
            else:
                values[key] = value
        except ValueError as exc:
            raise ConfigError(f"config line {line_no}: bad value for {key!r}: {exc}") from exc
    return values


def load_config(path: str | None, overrides: dict) -> RunConfig:
    values: dict = {}
    if path is not None:
        cfg_path = Path(path)
        if not cfg_path.is_file():
            raise ConfigError(f"config file not found: {path}")
        values = parse_config_text(cfg_path.read_text("utf-8"), cfg_path.parent.resolve())
    values.update({k: v for k, v in overrides.items() if v is not None})
    if "seed" not in values:
        raise ConfigError("seed is mandatory (set it in the config file or via --seed)")
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _read_table(path: str | None, fmt: str, role: str):
    if path is None:
        raise ConfigError(f"no {role} data path configured")
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"{role} data file not found: {path}")
    text = p.read_text("utf-8")
    return parse_arff(text) if fmt == "arff" else parse_csv(text)


def _sha256(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", "utf-8")


def _load_json(path: Path, role: str) -> dict:
    if not path.is_file():
        raise ConfigError(f"{role} not found: {path} (run 'fit' first)")
    try:
        return json.loads(path.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{role} is not valid JSON: {exc}") from exc


def _fit_pipeline(config: RunConfig):
    """Shared ingest -> impute -> select -> scale stage of every fit."""
    table = _read_table(config.train, config.format, "training")
    table, impute_stats = impute_missing(table, config.impute)
    spec = config.model_spec()
    data = build_matrix(table, spec, config.label)
    scaler = fit_scaler(data)
    scaled = apply_scaler(scaler, data)
    return spec, data, scaler, scaled, impute_stats


def _test_matrix(config: RunConfig, spec: ModelSpec, scaler: Scaler,
                 impute_stats: ImputationStats):
    table = _read_table(config.test, config.format, "test")
    if impute_stats.strategy == "drop_rows":
        table, _ = impute_missing(table, "drop_rows")
    else:
        table, _ = impute_missing(table, impute_stats.strategy, fit_stats=impute_stats)
    data = build_matrix(table, spec, config.label)
    return apply_scaler(scaler, data), table


def cmd_fit(config: RunConfig) -> int:
    started = time.monotonic()
    spec, _, scaler, scaled, impute_stats = _fit_pipeline(config)
    model = GlmModel(scaled, config.priors(scaled.n_features + 1))
    draws = run_chains(model, config.sampler_config())

    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "draws.json", draws.to_json_dict())
    _write_json(out_dir / "scaler.json", {
        "feature_ids": list(scaled.feature_ids),
        "means": scaler.means.tolist(),
        "sds": scaler.sds.tolist(),
    })
    _write_json(out_dir / "imputation.json", {
        "strategy": impute_stats.strategy,
        "per_column_fill": list(impute_stats.per_column_fill),
        "n_cells_imputed": impute_stats.n_cells_imputed,
        "n_rows_dropped": impute_stats.n_rows_dropped,
    })
    manifest = {
        "artifact_version": __version__,
        "config": config.to_dict(),
        "inputs": {"train": {"path": config.train, "sha256": _sha256(config.train)}},
        "duration_seconds": round(time.monotonic() - started, 3),
        "divergences_per_chain": draws.divergences_per_chain().tolist(),
    }
    if config.test and Path(config.test).is_file():
        manifest["inputs"]["test"] = {"path": config.test, "sha256": _sha256(config.test)}
    _write_json(out_dir / "manifest.json", manifest)

    total_div = int(draws.divergent.sum())
    print(f"fit: {spec.name} ({scaled.n_features} features, "
          f"{scaled.n_rows} rows) -> {out_dir}")
    print(f"chains={config.chains} warmup={config.warmup} draws={config.draws} "
          f"divergences={total_div}")
    return 0


def _narrative(summary, rope: RopeSpec) -> str:
    direction = "positive" if summary.median >= 0 else "negative"
    label = significance_label(summary.rope_pct)
    if label == "significant":
        phrase = "large and significant"
    elif label == "practically_null":
        phrase = "practically negligible"
    else:
        phrase = "not significant"
    name = summary.name
    if name.startswith("attr"):
        name = f"{name} ({describe(name)})"
    return (
        f"The effect of {name} has a probability of {summary.pd * 100:.2f}% of "
        f"being {direction} and can be considered as {phrase} "
        f"(median = {summary.median:.3f}, {rope.ci_level * 100:.0f}% CI "
        f"[{summary.ci_low:.3f}, {summary.ci_high:.3f}], "
        f"{summary.rope_pct:.3f}% in ROPE). "
        f"Rhat = {summary.rhat:.3f}, ESS = {summary.ess:.0f}."
    )


def cmd_report(config: RunConfig) -> int:
    out_dir = Path(config.out)
    draws = PosteriorDraws.from_json_dict(_load_json(out_dir / "draws.json", "draws file"))
    rope = config.rope()
    summaries = summarize(draws, rope)

    table = diagnostics.render_summary_table(summaries, rope)
    lines = [table, ""]
    for s in summaries:
        marker = "[significant] " if s.significant else ""
        lines.append(marker + _narrative(s, rope))
    text = "\n".join(lines)
    print(text)
    _write_json(out_dir / "summary.json", diagnostics.summaries_to_json(summaries, rope))
    (out_dir / "report.md").write_text(text + "\n", "utf-8")
    return 0


def cmd_evaluate(config: RunConfig) -> int:
    out_dir = Path(config.out)
    draws = PosteriorDraws.from_json_dict(_load_json(out_dir / "draws.json", "draws file"))
    scaler_doc = _load_json(out_dir / "scaler.json", "scaler file")
    impute_doc = _load_json(out_dir / "imputation.json", "imputation file")

    scaler = Scaler(np.array(scaler_doc["means"]), np.array(scaler_doc["sds"]))
    spec = ModelSpec("fitted", tuple(scaler_doc["feature_ids"]))
    stats = ImputationStats(
        strategy=impute_doc["strategy"],
        per_column_fill=tuple(impute_doc["per_column_fill"]),
        n_cells_imputed=impute_doc["n_cells_imputed"],
        n_rows_dropped=impute_doc["n_rows_dropped"],
    )
    scaled_test, _ = _test_matrix(config, spec, scaler, stats)

    probs = evaluate.posterior_predictive_prob(draws, scaled_test.X)
    pred = evaluate.classify(probs, config.threshold)
    report = evaluate.evaluation_report(
        pred, scaled_test.y.astype(int), config.threshold, config.positive_label
    )
    markdown = report.render_markdown("Posterior predictive evaluation")
    print(markdown)
    _write_json(out_dir / "evaluation.json", report.to_json_dict())
    (out_dir / "evaluation.md").write_text(markdown + "\n", "utf-8")
    return 0


def cmd_compare(config_a: RunConfig, config_b: RunConfig) -> int:
    if config_a.train != config_b.train:
        raise ConfigError("compare requires both configs to use the same training data")
    if (config_a.seed, config_a.kfold_k) != (config_b.seed, config_b.kfold_k):
        raise ConfigError("compare requires identical seed and kfold_k so folds align")

    results = {}
    for config in (config_a, config_b):
        spec, data, _, _, _ = _fit_pipeline(config)
        results[spec.name] = evaluate.kfold_elpd(
            data,
            config.kfold_k,
            config.sampler_config(),
            priors=config.priors(data.n_features + 1),
        )
    (name_a, res_a), (name_b, res_b) = results.items()
    table = evaluate.render_elpd_comparison(name_a, res_a, name_b, res_b)
    diff, se = evaluate.elpd_diff(res_a, res_b)
    print(table)

    out_dir = Path(config_a.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "comparison.json", {
        "models": {
            name_a: res_a.to_dict(),
            name_b: res_b.to_dict(),
        },
        "diff_a_minus_b": diff,
        "diff_se": se,
        "kfold_k": config_a.kfold_k,
        "seed": config_a.seed,
    })
    (out_dir / "comparison.md").write_text(table + "\n", "utf-8")
    return 0


def cmd_baselines(config: RunConfig) -> int:
    spec, _, scaler, scaled_train, impute_stats = _fit_pipeline(config)
    scaled_test, raw_test = _test_matrix(config, spec, scaler, impute_stats)
    actual = scaled_test.y.astype(int)
    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    irls = evaluate.irls_fit(scaled_train)
    eta = irls.beta[0] + scaled_test.X @ irls.beta[1:]
    pred_irls = evaluate.classify(
        np.clip(evaluate.sigmoid(eta), 0.0, 1.0), config.threshold
    )
    report_irls = evaluate.evaluation_report(
        pred_irls, actual, config.threshold, config.positive_label
    )
    md_irls = report_irls.render_markdown("Maximum-likelihood GLM baseline (IRLS)")
    doc_irls = report_irls.to_json_dict()
    doc_irls["coefficients"] = dict(zip(
        ("(Intercept)",) + scaled_train.feature_ids, irls.beta.tolist()
    ))
    doc_irls["converged"] = irls.converged
    doc_irls["separation"] = irls.separation

    z, pred_altman, zones = evaluate.altman_classify(raw_test)
    report_altman = evaluate.evaluation_report(
        pred_altman, actual, 0.5, config.positive_label
    )
    md_altman = report_altman.render_markdown("Altman Z-score baseline")
    md_altman += (
        f"\n\nGrey-zone companies (1.81 <= Z < 2.99): {zones.count('grey')}"
        f" of {len(zones)}"
    )
    doc_altman = report_altman.to_json_dict()
    doc_altman["grey_zone_count"] = zones.count("grey")
    doc_altman["z_mean"] = float(np.mean(z))

    print(md_irls)
    print()
    print(md_altman)
    _write_json(out_dir / "baselines_irls.json", doc_irls)
    _write_json(out_dir / "baselines_altman.json", doc_altman)
    (out_dir / "baselines.md").write_text(md_irls + "\n\n" + md_altman + "\n", "utf-8")
    return 0


def cmd_catalog(as_json: bool) -> int:
    entries = load_catalog()
    if as_json:
        print(json.dumps(list(entries), indent=2))
    else:
        width = max(len(e["id"]) for e in entries)
        for e in entries:
            print(f"{e['id']:<{width}}  {e['description']}")
    return 0


def _add_override_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="path to a flat key = value config file")
    parser.add_argument("--seed", type=int, help="RNG seed (mandatory, here or in config)")
    parser.add_argument("--preset", choices=("model1", "model2", "custom"))
    parser.add_argument("--format", choices=("arff", "csv"))
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--threshold", type=float)
    parser.add_argument("--positive-label", type=int, choices=(0, 1), dest="positive_label")


def _overrides(args: argparse.Namespace) -> dict:
    keys = ("seed", "preset", "format", "out", "threshold", "positive_label")
    return {k: getattr(args, k, None) for k in keys}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bankbayes",
        description="Bayesian GLM bankruptcy forecasting pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("fit", "sample the posterior and write draws + manifest"),
        ("report", "posterior summary table and significance narrative"),
        ("evaluate", "posterior predictive evaluation on the test data"),
        ("baselines", "Altman Z-score and maximum-likelihood GLM baselines"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_override_flags(p)

    p_compare = sub.add_parser("compare", help="K-fold ELPD comparison of two configs")
    p_compare.add_argument("--config-a", required=True, dest="config_a")
    p_compare.add_argument("--config-b", required=True, dest="config_b")

    p_catalog = sub.add_parser("catalog", help="dump the 64-ratio feature catalog")
    p_catalog.add_argument("--json", action="store_true", dest="as_json")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "catalog":
            return cmd_catalog(args.as_json)
        if args.command == "compare":
            return cmd_compare(
                load_config(args.config_a, {}), load_config(args.config_b, {})
            )
        config = load_config(args.config, _overrides(args))
        if args.command == "fit":
            return cmd_fit(config)
        if args.command == "report":
            return cmd_report(config)
        if args.command == "evaluate":
            return cmd_evaluate(config)
        if args.command == "baselines":
            return cmd_baselines(config)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, IngestError, PreprocessError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ChainFailed, evaluate.FoldFitFailed, evaluate.SingularSystem) as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
