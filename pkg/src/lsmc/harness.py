"""Experiment orchestration: configs, repetitions, statistics and tables.

An experiment is described by a JSON document (see ``configs/``) and run as R
independent repetitions of simulate -> backward induction -> price. Each
repetition draws a fresh path set from a seed derived from (base seed,
repetition index), so results are identical for any worker count and any
scheduling order.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import engine, models, neural
from .rng import repetition_seeds

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


@dataclass
class ExperimentConfig:
    """Declarative description of one pricing experiment."""

    name: str
    model: dict
    payoff: dict
    grid: dict
    paths: int
    regressor: dict
    repetitions: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.paths < 1:
            raise ConfigError("paths must be >= 1")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        for key, sub in (("model", self.model), ("payoff", self.payoff),
                         ("grid", self.grid), ("regressor", self.regressor)):
            if not isinstance(sub, dict):
                raise ConfigError(f"{key} must be a mapping")

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        version = doc.pop("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version}")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json_file(cls, path):
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON in {path}: {exc}") from None
        return cls.from_dict(doc)

    def to_dict(self):
        doc = {"schema_version": SCHEMA_VERSION}
        doc.update(asdict(self))
        return doc


def build_grid(config):
    grid = config.grid
    try:
        return models.ExerciseGrid.equally_spaced(
            float(grid["maturity"]), int(grid["dates"]), int(grid.get("substeps", 1)))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad grid: {exc}") from None


def build_model(config):
    doc = dict(config.model)
    kind = doc.pop("type", None)
    try:
        if kind == "black_scholes":
            return models.BlackScholesSpec(
                dim=int(doc.pop("dim", 1)),
                spot=doc.pop("spot"),
                vol=doc.pop("vol"),
                dividend=doc.pop("dividend", 0.0),
                rate=float(doc.pop("rate")),
                correlation=float(doc.pop("correlation", 0.0)),
            )
        if kind == "heston":
            return models.HestonSpec(
                spot=float(doc.pop("spot")),
                variance0=float(doc.pop("variance0")),
                kappa=float(doc.pop("kappa")),
                theta=float(doc.pop("theta")),
                xi=float(doc.pop("xi")),
                correlation=float(doc.pop("correlation", 0.0)),
                rate=float(doc.pop("rate")),
            )
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad model: {exc}") from None
    raise ConfigError(f"unknown model type {kind!r}")


def build_payoff(config):
    doc = dict(config.payoff)
    try:
        return models.PayoffSpec(kind=doc["kind"], strike=float(doc["strike"]),
                                 weights=doc.get("weights"))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad payoff: {exc}") from None


def build_factory(config, train_seed):
    doc = dict(config.regressor)
    kind = doc.pop("kind", None)
    try:
        if kind == "neural":
            train = neural.TrainConfig(
                epochs=int(doc.pop("epochs")),
                minibatch=int(doc.pop("minibatch", 256)),
                learning_rate=float(doc.pop("learning_rate", 1e-3)),
                beta1=float(doc.pop("beta1", 0.9)),
                beta2=float(doc.pop("beta2", 0.999)),
                epsilon=float(doc.pop("epsilon", 1e-8)),
                standardize_inputs=bool(doc.pop("standardize_inputs", True)),
                max_norm=doc.pop("max_norm", None),
                seed=train_seed,
            )
            return engine.NeuralRegressorFactory(
                hidden_width=int(doc.pop("width")),
                depth=int(doc.pop("layers")),
                train_config=train,
                first_fit_epochs=doc.pop("first_fit_epochs", None),
            )
        if kind == "polynomial":
            return engine.PolynomialRegressorFactory(
                degree=int(doc.pop("degree")),
                ridge=float(doc.pop("ridge", 1e-10)),
            )
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad regressor: {exc}") from None
    raise ConfigError(f"unknown regressor kind {kind!r}")


def simulate_paths(config, path_seed):
    """One fresh PathSet with payoffs evaluated, for a single repetition."""
    grid = build_grid(config)
    model = build_model(config)
    payoff = build_payoff(config)
    if isinstance(model, models.HestonSpec):
        paths = models.simulate_heston(model, grid, config.paths, path_seed)
    else:
        paths = models.simulate_black_scholes(model, grid, config.paths, path_seed)
    return models.evaluate_payoffs(paths, payoff, model.rate)


@dataclass
class RunDiagnostics:
    """Per-repetition record emitted by the engine run."""

    price: float
    continuation_mean: float
    standard_error: float
    itm_counts: list
    train_mse: list
    exercise_rate: list
    wall_seconds: float

    def to_dict(self):
        return asdict(self)


@dataclass
class RunStats:
    """Aggregate over the R repetition prices.

    Three candidate half-widths are reported because table conventions vary:
    the sample std, 1.96 std, and 1.96 std / sqrt(R).
    """

    prices: np.ndarray
    wall_seconds: np.ndarray
    diagnostics: list = field(default_factory=list)

    @property
    def repetitions(self):
        return self.prices.size

    @property
    def mean(self):
        return float(self.prices.mean())

    @property
    def std(self):
        return float(self.prices.std(ddof=1)) if self.prices.size > 1 else 0.0

    @property
    def half_widths(self):
        sd = self.std
        return {"std": sd, "1.96std": 1.96 * sd, "1.96std/sqrtR": 1.96 * sd / np.sqrt(self.repetitions)}

    def to_dict(self):
        return {
            "prices": self.prices.tolist(),
            "mean": self.mean,
            "std": self.std,
            "half_widths": self.half_widths,
            "wall_seconds": self.wall_seconds.tolist(),
            "repetitions": [d.to_dict() for d in self.diagnostics],
        }


def run_repetition(config, path_seed, train_seed):
    """simulate -> backward induction -> price for one derived seed pair."""
    start = time.perf_counter()
    paths = simulate_paths(config, path_seed)
    factory = build_factory(config, train_seed)
    result = engine.backward_induction(paths, factory)
    estimate = engine.price_at_zero(result, paths.payoffs[0, 0])
    histogram = np.bincount(result.stop_index, minlength=paths.grid.dates_count + 1)
    return RunDiagnostics(
        price=estimate.price,
        continuation_mean=estimate.continuation_mean,
        standard_error=estimate.standard_error,
        itm_counts=result.itm_counts.tolist(),
        train_mse=[None if np.isnan(v) else float(v) for v in result.train_mse],
        exercise_rate=(histogram / paths.paths_count).tolist(),
        wall_seconds=time.perf_counter() - start,
    )


def _run_repetition_star(args):
    return run_repetition(*args)


def run_experiment(config, workers=1, seeds=None):
    """Run R repetitions and aggregate; deterministic given config.seed.

    ``seeds`` (a list of (path_seed, train_seed) pairs) overrides the derived
    seeds; it exists so tests can force repeated or known streams.
    """
    if seeds is None:
        seeds = repetition_seeds(config.seed, config.repetitions)
    elif len(seeds) != config.repetitions:
        raise ConfigError("seed override must provide one pair per repetition")
    jobs = [(config, ps, ts) for ps, ts in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            diagnostics = list(pool.map(_run_repetition_star, jobs))
    else:
        diagnostics = [run_repetition(*job) for job in jobs]
    prices = np.array([d.price for d in diagnostics])
    walls = np.array([d.wall_seconds for d in diagnostics])
    return RunStats(prices, walls, diagnostics)


def format_cell(price, half_width):
    """The tables' cell format: price to 2 decimals, half-width to 3."""
    return f"{price:.2f} (± {half_width:.3f})"


def emit_table(rows, half_width="1.96std"):
    """Render labelled RunStats rows as markdown and CSV strings.

    ``rows`` is a nonempty list of (label, RunStats). Returns a dict with
    keys ``markdown`` and ``csv``.
    """
    if not rows:
        raise ValueError("no rows to render")
    for label, _ in rows:
        if not label:
            raise ValueError("empty row label")
    md_lines = ["| configuration | price | reps |", "|---|---|---|"]
    csv_lines = ["label,price,half_width,repetitions"]
    for label, stats in rows:
        hw = stats.half_widths[half_width]
        md_lines.append(f"| {label} | {format_cell(stats.mean, hw)} | {stats.repetitions} |")
        csv_lines.append(f"{label},{stats.mean:.2f},{hw:.3f},{stats.repetitions}")
    return {"markdown": "\n".join(md_lines) + "\n", "csv": "\n".join(csv_lines) + "\n"}


def parse_table_csv(text):
    """Inverse of the CSV rendering: [(label, price, half_width, reps)]."""
    rows = []
    lines = [line for line in text.strip().splitlines() if line]
    for line in lines[1:]:
        label, price, hw, reps = line.split(",")
        rows.append((label, float(price), float(hw), int(reps)))
    return rows


def load_manifest(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"manifest not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from None
    if "experiments" not in doc or not isinstance(doc["experiments"], list):
        raise ConfigError("manifest needs an 'experiments' list")
    return doc


def run_suite(manifest_path, out_dir, workers=1, seed=None):
    """Run every manifest entry, write artifacts, return (exit_code, results).

    Each entry holds a config (inline under ``config`` or referenced by
    ``config_path`` relative to the manifest) and an optional ``expected``
    band ``{"min": lo, "max": hi}`` checked against the run mean. Exit code 0
    if all bands hold, 1 otherwise.
    """
    manifest_path = Path(manifest_path)
    manifest = load_manifest(manifest_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    rows = []
    results = []
    failed = []
    for entry in manifest["experiments"]:
        if "config" in entry:
            config = ExperimentConfig.from_dict(entry["config"])
        elif "config_path" in entry:
            config = ExperimentConfig.from_json_file(manifest_path.parent / entry["config_path"])
        else:
            raise ConfigError("manifest entry needs 'config' or 'config_path'")
        name = entry.get("name", config.name)
        if seed is not None:
            config.seed = seed
        stats = run_experiment(config, workers=workers)
        ok = True
        band = entry.get("expected")
        if band is not None:
            ok = float(band["min"]) <= stats.mean <= float(band["max"])
            if not ok:
                failed.append(name)
        rows.append((name, stats))
        results.append({"name": name, "stats": stats, "passed": ok, "expected": band})
        record = {"name": name, "config": config.to_dict(), "passed": ok,
                  "expected": band, **stats.to_dict()}
        with open(out / f"{name}.json", "w") as fh:
            json.dump(record, fh, indent=2)

    tables = emit_table(rows)
    (out / "table.md").write_text(tables["markdown"])
    (out / "table.csv").write_text(tables["csv"])
    summary = {"passed": not failed, "failed": failed}
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    return (0 if not failed else 1), results
