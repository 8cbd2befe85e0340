"""Experiment orchestration: config parsing, cell execution, report files.

A run is a grid of cells, one per (game, target, mechanism, feature set)
combination the config asks for, each self-contained and seeded from the
master seed by its position in the grid. That makes results independent of
worker scheduling: the same config and seed give byte-identical reports
whatever --jobs says.

Config is a single JSON document:

    {
      "seed": 7,
      "output_dir": "out",
      "population": {"toy": {...}, "size": 2000}
                  | {"csv": "records.csv", "schema": "schema.json"},
      "targets": [0, "random:2", "outlier:1"],
      "mechanisms": [
        {"name": "Raw", "kind": "raw"},
        {"name": "San", "kind": "sanitiser", "sanitiser": {"k": 5}},
        {"name": "IndHist", "kind": "generator", "generator": {"kind": "ind_hist"}}
      ],
      "feature_sets": ["naive"],
      "games": ["linkability"],
      "n": 1000, "m": 1000, "l": 2000,
      "n_shadows": 10, "synth_per_shadow": 5, "iters": 200,
      "sampling": "stratified", "shadow_mode": "mirror",
      "attribute_inference": {"sensitive_attr": "income", "truth_mode": "lookup"},
      "utility": {"predict_attr": "label", "test_record": "random", "holdout_size": 500}
    }

Relative paths resolve against the config file's directory. Outputs land in
output_dir: report.json (everything), outcomes.csv (per-iteration rows),
provenance.json (seeds, versions, every default a result depends on) and
plotdata/*.csv (long-format tables, one per result family).
"""

from __future__ import annotations

import csv
import json
import logging
import os
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from synthaudit import __version__
from synthaudit.attacks import SHADOW_MODES, PriorKnowledge, train_mia
from synthaudit.data import Dataset, SchemaMetadata, load_csv, load_schema
from synthaudit.dp import PrivacyBudget
from synthaudit.errors import AuditError, InvalidConfig, TooFewRecords
from synthaudit.features import FEATURE_SETS
from synthaudit.games import (
    MIN_ITERATIONS,
    SAMPLING_MODES,
    ChallengerConfig,
    aggregate_utility,
    run_attribute_inference,
    run_linkability,
    run_utility_game,
    select_outlier_targets,
)
from synthaudit.generators import NON_PRIVATE_EPSILON
from synthaudit.kernels import backend as kernel_backend
from synthaudit.learners import ForestParams
from synthaudit.mechanisms import MechanismSpec, publish
from synthaudit.toy import ToyPopulationConfig, sample_toy_population

logger = logging.getLogger("synthaudit")

GAMES = ("linkability", "attribute_inference", "utility", "aggregate_utility")

EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_PARTIAL_FAILURE = 2


# ---------------------------------------------------------------------------
# parsed config


@dataclass(frozen=True)
class ParsedExperiment:
    seed: int
    output_dir: Path
    population_kind: str  # 'toy' | 'csv'
    toy_config: ToyPopulationConfig | None
    toy_size: int | None
    csv_path: Path | None
    schema_path: Path | None
    schema: SchemaMetadata
    target_selectors: tuple
    mechanisms: tuple
    feature_sets: tuple
    games: tuple
    n: int
    m: int
    l: int
    n_shadows: int
    synth_per_shadow: int
    iters: int
    sampling: str
    shadow_mode: str
    sensitive_attr: str | None
    truth_mode: str
    predict_attr: str | None
    test_record: object  # 'target' | 'random' | int
    holdout_size: int
    raw: dict


def _require(raw: dict, key: str, path: str):
    if key not in raw:
        raise InvalidConfig(f"{path}.{key}: required field missing")
    return raw[key]


def _parse_population(raw: dict, base: Path):
    pop = _require(raw, "population", "config")
    if not isinstance(pop, dict):
        raise InvalidConfig("population: must be an object")
    if "toy" in pop:
        try:
            cfg = ToyPopulationConfig.from_json_dict(pop["toy"])
        except (AuditError, KeyError, TypeError, ValueError) as e:
            raise InvalidConfig(f"population.toy: {e}") from e
        size = int(pop.get("size", 0))
        if size < 1:
            raise InvalidConfig("population.size: must be a positive integer")
        return "toy", cfg, size, None, None, cfg.schema()
    if "csv" in pop:
        csv_path = (base / pop["csv"]).resolve()
        schema_raw = pop.get("schema")
        if schema_raw is None:
            raise InvalidConfig("population.schema: required with population.csv")
        schema_path = (base / schema_raw).resolve()
        if not csv_path.exists():
            raise InvalidConfig(f"population.csv: file not found: {csv_path}")
        if not schema_path.exists():
            raise InvalidConfig(f"population.schema: file not found: {schema_path}")
        try:
            schema = load_schema(schema_path)
        except (AuditError, KeyError, TypeError, ValueError, json.JSONDecodeError) as e:
            raise InvalidConfig(f"population.schema: {e}") from e
        return "csv", None, None, csv_path, schema_path, schema
    raise InvalidConfig("population: needs either a 'toy' spec or a 'csv' path")


def _parse_targets(raw: dict):
    sel = raw.get("targets", [])
    if not isinstance(sel, list) or not sel:
        raise InvalidConfig("targets: must be a non-empty list")
    parsed = []
    for i, item in enumerate(sel):
        if isinstance(item, bool):
            raise InvalidConfig(f"targets[{i}]: must be an index or 'random:k'/'outlier:k'")
        if isinstance(item, int):
            if item < 0:
                raise InvalidConfig(f"targets[{i}]: negative index")
            parsed.append(("explicit", item))
            continue
        if isinstance(item, str):
            kind, _, count = item.partition(":")
            if kind in ("random", "outlier") and count.isdigit() and int(count) > 0:
                parsed.append((kind, int(count)))
                continue
        raise InvalidConfig(
            f"targets[{i}]: expected an index, 'random:k' or 'outlier:k', got {item!r}"
        )
    return tuple(parsed)


def _parse_mechanisms(raw: dict):
    entries = raw.get("mechanisms", [])
    if not isinstance(entries, list) or not entries:
        raise InvalidConfig("mechanisms: must be a non-empty list")
    mechanisms = []
    names = set()
    for i, entry in enumerate(entries):
        try:
            mech = MechanismSpec.from_json_dict(entry)
        except (AuditError, KeyError, TypeError, ValueError) as e:
            raise InvalidConfig(f"mechanisms[{i}]: {e}") from e
        if mech.name in names:
            raise InvalidConfig(f"mechanisms[{i}].name: duplicate name {mech.name!r}")
        names.add(mech.name)
        mechanisms.append(mech)
    return tuple(mechanisms)


def parse_experiment(raw: dict, base: Path) -> ParsedExperiment:
    if "seed" not in raw:
        raise InvalidConfig("seed: required field missing")
    if isinstance(raw["seed"], bool) or not isinstance(raw["seed"], int):
        raise InvalidConfig("seed: must be an integer")
    seed = raw["seed"]
    output_dir = (base / raw.get("output_dir", "out")).resolve()

    pop_kind, toy_cfg, toy_size, csv_path, schema_path, schema = _parse_population(raw, base)
    targets = _parse_targets(raw)
    mechanisms = _parse_mechanisms(raw)

    feature_sets = tuple(raw.get("feature_sets", ["naive"]))
    for fs in feature_sets:
        if fs not in FEATURE_SETS:
            raise InvalidConfig(f"feature_sets: unknown feature set {fs!r}")
    if not feature_sets:
        raise InvalidConfig("feature_sets: must not be empty")

    games = tuple(raw.get("games", ["linkability"]))
    for g in games:
        if g not in GAMES:
            raise InvalidConfig(f"games: unknown game {g!r}")
    if not games:
        raise InvalidConfig("games: must not be empty")

    n = int(raw.get("n", 1000))
    m = int(raw.get("m", 1000))
    l = int(raw.get("l", 2 * n))
    n_shadows = int(raw.get("n_shadows", 10))
    synth_per_shadow = int(raw.get("synth_per_shadow", 5))
    iters = int(raw.get("iters", 200))
    if n < 2:
        raise InvalidConfig("n: must be >= 2")
    if m < 1:
        raise InvalidConfig("m: must be >= 1")
    if l < n:
        raise InvalidConfig("l: reference size must be >= n")
    if n_shadows < 1 or synth_per_shadow < 1:
        raise InvalidConfig("n_shadows and synth_per_shadow must be >= 1")
    if iters < MIN_ITERATIONS:
        raise InvalidConfig(f"iters: must be >= {MIN_ITERATIONS}")

    sampling = raw.get("sampling", "stratified")
    if sampling not in SAMPLING_MODES:
        raise InvalidConfig(f"sampling: unknown mode {sampling!r}")
    shadow_mode = raw.get("shadow_mode", "mirror")
    if shadow_mode not in SHADOW_MODES:
        raise InvalidConfig(f"shadow_mode: unknown mode {shadow_mode!r}")

    ai = raw.get("attribute_inference", {})
    sensitive_attr = ai.get("sensitive_attr")
    truth_mode = ai.get("truth_mode", "lookup")
    if truth_mode not in ("lookup", "conditional"):
        raise InvalidConfig(f"attribute_inference.truth_mode: unknown mode {truth_mode!r}")
    if "attribute_inference" in games:
        if sensitive_attr is None:
            raise InvalidConfig(
                "attribute_inference.sensitive_attr: required by the attribute_inference game"
            )
        if sensitive_attr not in schema.names:
            raise InvalidConfig(
                f"attribute_inference.sensitive_attr: {sensitive_attr!r} not in schema"
            )

    ut = raw.get("utility", {})
    predict_attr = ut.get("predict_attr")
    test_record = ut.get("test_record", "random")
    holdout_size = int(ut.get("holdout_size", n))
    if "utility" in games or "aggregate_utility" in games:
        if predict_attr is None:
            raise InvalidConfig("utility.predict_attr: required by the utility games")
        if predict_attr not in schema.names:
            raise InvalidConfig(f"utility.predict_attr: {predict_attr!r} not in schema")
        if not schema.attribute(predict_attr).is_categorical:
            raise InvalidConfig("utility.predict_attr: must be categorical")
        ok_modes = test_record in ("target", "random")
        if not ok_modes and not (isinstance(test_record, int) and not isinstance(test_record, bool)):
            raise InvalidConfig(
                "utility.test_record: expected 'target', 'random' or a row index"
            )
        if holdout_size < 1:
            raise InvalidConfig("utility.holdout_size: must be >= 1")

    known_pop = toy_size if pop_kind == "toy" else None
    if known_pop is not None:
        if n > known_pop:
            raise InvalidConfig(f"n: {n} exceeds population size {known_pop}")
        if l > known_pop:
            raise InvalidConfig(f"l: {l} exceeds population size {known_pop}")
        for kind, value in targets:
            if kind == "explicit" and value >= known_pop:
                raise InvalidConfig(f"targets: index {value} exceeds population size")

    return ParsedExperiment(
        seed=seed,
        output_dir=output_dir,
        population_kind=pop_kind,
        toy_config=toy_cfg,
        toy_size=toy_size,
        csv_path=csv_path,
        schema_path=schema_path,
        schema=schema,
        target_selectors=targets,
        mechanisms=mechanisms,
        feature_sets=feature_sets,
        games=games,
        n=n,
        m=m,
        l=l,
        n_shadows=n_shadows,
        synth_per_shadow=synth_per_shadow,
        iters=iters,
        sampling=sampling,
        shadow_mode=shadow_mode,
        sensitive_attr=sensitive_attr,
        truth_mode=truth_mode,
        predict_attr=predict_attr,
        test_record=test_record,
        holdout_size=holdout_size,
        raw=raw,
    )


def load_experiment(config_path, seed_override: int | None = None) -> ParsedExperiment:
    path = Path(config_path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise InvalidConfig(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise InvalidConfig(f"config is not valid JSON: {e}")
    if not isinstance(raw, dict):
        raise InvalidConfig("config root must be a JSON object")
    if seed_override is not None:
        raw["seed"] = seed_override
    return parse_experiment(raw, path.parent)


# ---------------------------------------------------------------------------
# validation


def _error_diagnostic(e: InvalidConfig) -> dict:
    """InvalidConfig messages start with the offending field path when one
    exists; split it out so diagnostics stay structured."""
    msg = str(e)
    path, sep, rest = msg.partition(": ")
    if not sep or " " in path:
        return {"level": "error", "path": "config", "message": msg}
    return {"level": "error", "path": path, "message": rest}


def validate_config(config_path, seed_override: int | None = None) -> list:
    """Static checks without running anything.

    Returns diagnostics as {level, path, message} dicts; an empty list means
    the config is clean. Structural problems that would stop a run are
    level 'error'; privacy-relevant but legal settings are 'warning'.
    """
    try:
        exp = load_experiment(config_path, seed_override)
    except InvalidConfig as e:
        return [_error_diagnostic(e)]
    return semantic_diagnostics(exp)


def semantic_diagnostics(exp: ParsedExperiment) -> list:
    diags = []
    for i, mech in enumerate(exp.mechanisms):
        gen = mech.generator
        if gen is None:
            continue
        where = f"mechanisms[{i}].generator"
        if gen.metadata_mode == "learned":
            diags.append(
                {
                    "level": "warning",
                    "path": f"{where}.metadata_mode",
                    "message": "metadata learned from training data violates DP assumptions",
                }
            )
        if gen.kind == "priv_bay" and gen.budget is not None:
            if gen.budget.epsilon_total >= 1e6:
                diags.append(
                    {
                        "level": "warning",
                        "path": f"{where}.epsilon",
                        "message": (
                            f"epsilon {gen.budget.epsilon_total:g} is effectively "
                            "non-private"
                        ),
                    }
                )
    return diags


def format_diagnostic(d: dict) -> str:
    return f"{d['level']}: {d['path']}: {d['message']}"


# ---------------------------------------------------------------------------
# runtime context and cells


@dataclass(frozen=True)
class TargetRef:
    index: int
    kind: str  # explicit | random | outlier


@dataclass(frozen=True)
class CellSpec:
    idx: int  # position in the enumeration, keys the cell's seed
    game: str
    target: TargetRef | None
    mech_idx: int
    feature_set: str | None


@dataclass(frozen=True)
class RunContext:
    seed: int
    population: Dataset
    schema: SchemaMetadata
    reference: Dataset
    mechanisms: tuple
    n: int
    m: int
    n_shadows: int
    synth_per_shadow: int
    iters: int
    sampling: str
    shadow_mode: str
    sensitive_attr: str | None
    truth_mode: str
    predict_attr: str | None
    test_record_mode: object
    fixed_test_record: np.ndarray | None
    holdout_size: int


def build_population(exp: ParsedExperiment) -> Dataset:
    if exp.population_kind == "toy":
        rng = np.random.default_rng(np.random.SeedSequence(exp.seed, spawn_key=(0,)))
        return sample_toy_population(exp.toy_config, exp.toy_size, rng)
    return load_csv(exp.csv_path, exp.schema, policy="reject")


def resolve_targets(exp: ParsedExperiment, population: Dataset) -> tuple:
    rng = np.random.default_rng(np.random.SeedSequence(exp.seed, spawn_key=(1,)))
    refs = []
    seen = set()
    for kind, value in exp.target_selectors:
        if kind == "explicit":
            if value >= population.n_records:
                raise InvalidConfig(f"targets: index {value} exceeds population size")
            picks = [value]
        elif kind == "random":
            if value > population.n_records:
                raise InvalidConfig("targets: random draw larger than population")
            picks = [int(i) for i in rng.choice(population.n_records, size=value, replace=False)]
        else:
            picks = [int(i) for i in select_outlier_targets(population, value)]
        for index in picks:
            if index in seen:
                continue
            seen.add(index)
            refs.append(TargetRef(index=index, kind=kind))
    return tuple(refs)


def enumerate_cells(exp: ParsedExperiment, targets: tuple) -> list:
    cells = []
    for game in exp.games:
        if game == "linkability":
            for t in targets:
                for mi in range(len(exp.mechanisms)):
                    for fs in exp.feature_sets:
                        cells.append(CellSpec(len(cells), game, t, mi, fs))
        elif game in ("attribute_inference", "utility"):
            for t in targets:
                for mi in range(len(exp.mechanisms)):
                    cells.append(CellSpec(len(cells), game, t, mi, None))
        else:  # aggregate_utility
            for mi in range(len(exp.mechanisms)):
                cells.append(CellSpec(len(cells), game, None, mi, None))
    return cells


def _estimate_dict(est) -> dict:
    return {
        "p_success_given_1": est.p_success_given_1,
        "p_success_given_0": est.p_success_given_0,
        "n1": est.n1,
        "n0": est.n0,
        "advantage": est.advantage,
        "se": est.se,
    }


def _outcome_rows(cell: CellSpec, ctx: RunContext, outcomes, arm: str) -> list:
    mech = ctx.mechanisms[cell.mech_idx]
    return [
        {
            "game": cell.game,
            "target": cell.target.index if cell.target else "",
            "target_kind": cell.target.kind if cell.target else "",
            "mechanism": mech.name,
            "feature_set": cell.feature_set or "",
            "arm": arm,
            "iteration": o.index,
            "secret": o.secret,
            "success": o.success,
            "flags": "|".join(o.flags),
        }
        for o in outcomes
    ]


def run_cell(ctx: RunContext, cell: CellSpec) -> tuple:
    """Execute one grid cell; returns (report entry, outcomes.csv rows)."""
    mech = ctx.mechanisms[cell.mech_idx]
    entry = {
        "game": cell.game,
        "mechanism": mech.name,
        "feature_set": cell.feature_set,
        "target": (
            {"index": cell.target.index, "kind": cell.target.kind} if cell.target else None
        ),
        "status": "ok",
    }
    rows = []
    ss = np.random.SeedSequence(ctx.seed, spawn_key=(2, cell.idx))
    ss_attacker, ss_game = ss.spawn(2)
    try:
        if cell.game == "linkability":
            target_row = ctx.population.values[cell.target.index]
            prior = PriorKnowledge(
                reference=ctx.reference,
                mechanism=mech,
                metadata=ctx.schema,
                n=ctx.n,
                m=ctx.m,
            )
            attacker = train_mia(
                target_row,
                prior,
                cell.feature_set,
                ctx.n_shadows,
                ctx.synth_per_shadow,
                np.random.default_rng(ss_attacker),
                shadow_mode=ctx.shadow_mode,
            )
            cfg = ChallengerConfig(ctx.population, ctx.n, ctx.m, mech, ctx.schema)
            res = run_linkability(
                target_row,
                cfg,
                attacker,
                ctx.iters,
                np.random.default_rng(ss_game),
                sampling=ctx.sampling,
            )
            entry["result"] = {
                "estimate": _estimate_dict(res.estimate),
                "advantage_raw_arm": res.advantage_raw_arm,
                "privacy_gain_raw": res.privacy_gain_raw,
                "privacy_gain": res.privacy_gain,
                "attacker_flags": list(attacker.flags),
            }
            rows = _outcome_rows(cell, ctx, res.outcomes, arm="published")
        elif cell.game == "attribute_inference":
            target_row = ctx.population.values[cell.target.index]
            cfg = ChallengerConfig(ctx.population, ctx.n, ctx.m, mech, ctx.schema)
            res = run_attribute_inference(
                target_row,
                ctx.sensitive_attr,
                cfg,
                ctx.iters,
                np.random.default_rng(ss_game),
                sampling=ctx.sampling,
                truth_mode=ctx.truth_mode,
            )
            entry["result"] = {
                "raw_estimate": _estimate_dict(res.raw_estimate),
                "published_estimate": _estimate_dict(res.published_estimate),
                "privacy_gain_raw": res.privacy_gain_raw,
                "privacy_gain": res.privacy_gain,
                "se": res.se,
            }
            rows = _outcome_rows(cell, ctx, res.outcomes_raw, arm="raw")
            rows += _outcome_rows(cell, ctx, res.outcomes_published, arm="published")
        elif cell.game == "utility":
            target_row = ctx.population.values[cell.target.index]
            if ctx.test_record_mode == "target":
                test_row = target_row
            else:
                test_row = ctx.fixed_test_record
            cfg = ChallengerConfig(ctx.population, ctx.n, ctx.m, mech, ctx.schema)
            res = run_utility_game(
                target_row,
                test_row,
                ctx.predict_attr,
                cfg,
                ctx.iters,
                np.random.default_rng(ss_game),
                sampling=ctx.sampling,
            )
            entry["result"] = {"estimate": _estimate_dict(res.estimate)}
            rows = _outcome_rows(cell, ctx, res.outcomes, arm="published")
        else:  # aggregate_utility
            rng = np.random.default_rng(ss_game)
            pop_n = ctx.population.n_records
            if ctx.n + ctx.holdout_size > pop_n:
                raise TooFewRecords(
                    f"population of {pop_n} cannot supply n={ctx.n} training and "
                    f"{ctx.holdout_size} holdout records"
                )
            perm = rng.permutation(pop_n)
            training = ctx.population.take(perm[: ctx.n])
            holdout = ctx.population.take(perm[ctx.n : ctx.n + ctx.holdout_size])
            published = publish(
                mech,
                training,
                ctx.schema,
                ctx.m,
                np.random.default_rng(int(rng.integers(0, 2**63))),
            )
            entry["result"] = aggregate_utility(
                training, published, holdout, ctx.predict_attr, rng
            )
    except Exception as e:  # noqa: BLE001 - a cell failure must not sink the run
        entry["status"] = "failed"
        entry["error"] = f"{type(e).__name__}: {e}"
        entry.pop("result", None)
        rows = []
    return entry, rows


_WORKER_CTX = None


def _worker_init(ctx):
    global _WORKER_CTX
    _WORKER_CTX = ctx


def _worker_run(cell):
    return cell.idx, run_cell(_WORKER_CTX, cell)


# ---------------------------------------------------------------------------
# output files


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {k: _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_to_jsonable(v) for v in obj.tolist()]
    return obj


def _write_json(path: Path, obj):
    path.write_text(json.dumps(_to_jsonable(obj), indent=2, sort_keys=True) + "\n")


def _write_csv_rows(path: Path, fieldnames: list, rows: list):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)


def default_provenance(exp: ParsedExperiment) -> dict:
    """Every knob a result depends on, including the ones left at defaults."""
    fp = ForestParams()
    return {
        "package": {"name": "synthaudit", "version": __version__},
        "runtime": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "kernel_backend": kernel_backend(),
        },
        "seed": exp.seed,
        "defaults": {
            "forest": {
                "n_trees": fp.n_trees,
                "min_leaf": fp.min_leaf,
                "bootstrap": fp.bootstrap,
                "mtry": "max(1, floor(sqrt(n_features)))",
                "vote_tie": "lowest class index",
            },
            "privacy_budget_structure_fraction": PrivacyBudget(1.0).structure_fraction,
            "mi_smoothing": 1e-9,
            "mi_sensitivity_default": "(ln(n) + 1) / n",
            "non_private_epsilon_sentinel": NON_PRIVATE_EPSILON,
            "binning_rule": (
                "uniform over the metadata range; index floor((v - lo) / width) "
                "clamped to [0, bins - 1]"
            ),
            "sampling": exp.sampling,
            "shadow_mode": exp.shadow_mode,
            "truth_mode": exp.truth_mode,
            "min_iterations": MIN_ITERATIONS,
            "advantage_convention": {
                "linkability": "tpr_minus_fpr; raw arm analytic Adv=1",
                "attribute_inference": "success_diff per arm; gain raw minus published",
                "utility": "success_diff",
            },
            "continuous_success_rule": (
                "posterior density at truth over density at mode, clipped to [0, 1]"
            ),
            "laplace_sampler": "inverse CDF from a single uniform per draw",
        },
        "config": exp.raw,
    }


def _plot_tables(entries: list) -> dict:
    link, attr, util_adv, util_acc, util_stats, util_marg = [], [], [], [], [], []
    for e in entries:
        if e["status"] != "ok":
            continue
        t = e.get("target") or {}
        if e["game"] == "linkability":
            est = e["result"]["estimate"]
            link.append(
                {
                    "target": t.get("index"),
                    "target_kind": t.get("kind"),
                    "mechanism": e["mechanism"],
                    "feature_set": e["feature_set"],
                    "advantage": est["advantage"],
                    "se": est["se"],
                    "privacy_gain": e["result"]["privacy_gain"],
                    "privacy_gain_raw": e["result"]["privacy_gain_raw"],
                }
            )
        elif e["game"] == "attribute_inference":
            attr.append(
                {
                    "target": t.get("index"),
                    "target_kind": t.get("kind"),
                    "mechanism": e["mechanism"],
                    "advantage_raw": e["result"]["raw_estimate"]["advantage"],
                    "advantage_published": e["result"]["published_estimate"]["advantage"],
                    "se": e["result"]["se"],
                    "privacy_gain": e["result"]["privacy_gain"],
                    "privacy_gain_raw": e["result"]["privacy_gain_raw"],
                }
            )
        elif e["game"] == "utility":
            est = e["result"]["estimate"]
            util_adv.append(
                {
                    "target": t.get("index"),
                    "target_kind": t.get("kind"),
                    "mechanism": e["mechanism"],
                    "p_success_given_1": est["p_success_given_1"],
                    "p_success_given_0": est["p_success_given_0"],
                    "advantage": est["advantage"],
                    "se": est["se"],
                }
            )
        else:
            r = e["result"]
            util_acc.append(
                {
                    "mechanism": e["mechanism"],
                    "accuracy_raw": r["accuracy_raw"],
                    "accuracy_published": r["accuracy_published"],
                    "accuracy_drop": r["accuracy_drop"],
                }
            )
            for attr_name, metrics in r["attributes"].items():
                if "marginal_l1" in metrics:
                    util_marg.append(
                        {
                            "mechanism": e["mechanism"],
                            "attribute": attr_name,
                            "marginal_l1": metrics["marginal_l1"],
                        }
                    )
                else:
                    for metric, value in metrics.items():
                        util_stats.append(
                            {
                                "mechanism": e["mechanism"],
                                "attribute": attr_name,
                                "metric": metric,
                                "value": value,
                            }
                        )
    return {
        "linkability_gain": (
            ["target", "target_kind", "mechanism", "feature_set",
             "advantage", "se", "privacy_gain", "privacy_gain_raw"],
            link,
        ),
        "attribute_gain": (
            ["target", "target_kind", "mechanism", "advantage_raw",
             "advantage_published", "se", "privacy_gain", "privacy_gain_raw"],
            attr,
        ),
        "utility_advantage": (
            ["target", "target_kind", "mechanism", "p_success_given_1",
             "p_success_given_0", "advantage", "se"],
            util_adv,
        ),
        "utility_accuracy": (
            ["mechanism", "accuracy_raw", "accuracy_published", "accuracy_drop"],
            util_acc,
        ),
        "utility_stats": (["mechanism", "attribute", "metric", "value"], util_stats),
        "utility_marginals": (["mechanism", "attribute", "marginal_l1"], util_marg),
    }


_GAME_TABLES = {
    "linkability": ("linkability_gain",),
    "attribute_inference": ("attribute_gain",),
    "utility": ("utility_advantage",),
    "aggregate_utility": ("utility_accuracy", "utility_stats", "utility_marginals"),
}

_OUTCOME_FIELDS = [
    "game", "target", "target_kind", "mechanism", "feature_set",
    "arm", "iteration", "secret", "success", "flags",
]


def write_outputs(exp: ParsedExperiment, targets, entries, outcome_rows):
    out = exp.output_dir
    out.mkdir(parents=True, exist_ok=True)
    (out / "plotdata").mkdir(exist_ok=True)

    n_failed = sum(1 for e in entries if e["status"] != "ok")
    report = {
        "seed": exp.seed,
        "targets": [{"index": t.index, "kind": t.kind} for t in targets],
        "n_cells": len(entries),
        "n_failed": n_failed,
        "cells": entries,
        "config": exp.raw,
    }
    _write_json(out / "report.json", report)
    _write_json(out / "provenance.json", default_provenance(exp))
    _write_csv_rows(out / "outcomes.csv", _OUTCOME_FIELDS, outcome_rows)

    tables = _plot_tables(entries)
    wanted = set()
    for g in exp.games:
        wanted.update(_GAME_TABLES[g])
    for name, (fields, rows) in tables.items():
        if name in wanted:
            _write_csv_rows(out / "plotdata" / f"{name}.csv", fields, rows)
    return n_failed


# ---------------------------------------------------------------------------
# the driver


def run_experiment(config_path, seed: int | None = None, jobs: int = 1,
                   keep_workdirs: bool = False) -> int:
    """Full run: population, targets, the cell grid, the report files.

    Returns a process exit code: 0 clean, 1 when the config (or run setup)
    is unusable, 2 when some cells failed but the report was written.
    """
    try:
        exp = load_experiment(config_path, seed)
    except InvalidConfig as e:
        logger.error(format_diagnostic(_error_diagnostic(e)))
        return EXIT_CONFIG_ERROR
    for d in semantic_diagnostics(exp):
        logger.warning(format_diagnostic(d))
    if keep_workdirs:
        os.environ["SYNTHAUDIT_KEEP_WORKDIRS"] = "1"

    try:
        population = build_population(exp)
        targets = resolve_targets(exp, population)
        ref_rng = np.random.default_rng(np.random.SeedSequence(exp.seed, spawn_key=(3,)))
        if exp.l > population.n_records:
            raise InvalidConfig(f"l: {exp.l} exceeds population size {population.n_records}")
        ref_idx = ref_rng.choice(population.n_records, size=exp.l, replace=False)
        reference = population.take(ref_idx)

        fixed_test = None
        if exp.predict_attr is not None and exp.test_record != "target":
            sel_rng = np.random.default_rng(np.random.SeedSequence(exp.seed, spawn_key=(4,)))
            if exp.test_record == "random":
                fixed_test = population.values[int(sel_rng.integers(0, population.n_records))]
            else:
                idx = int(exp.test_record)
                if idx >= population.n_records:
                    raise InvalidConfig(f"utility.test_record: index {idx} out of range")
                fixed_test = population.values[idx]

        ctx = RunContext(
            seed=exp.seed,
            population=population,
            schema=exp.schema,
            reference=reference,
            mechanisms=exp.mechanisms,
            n=exp.n,
            m=exp.m,
            n_shadows=exp.n_shadows,
            synth_per_shadow=exp.synth_per_shadow,
            iters=exp.iters,
            sampling=exp.sampling,
            shadow_mode=exp.shadow_mode,
            sensitive_attr=exp.sensitive_attr,
            truth_mode=exp.truth_mode,
            predict_attr=exp.predict_attr,
            test_record_mode=exp.test_record,
            fixed_test_record=fixed_test,
            holdout_size=exp.holdout_size,
        )
        cells = enumerate_cells(exp, targets)
    except AuditError as e:
        logger.error("run setup failed: %s", e)
        return EXIT_CONFIG_ERROR

    results = {}
    all_rows = {}
    if jobs <= 1:
        for cell in cells:
            entry, rows = run_cell(ctx, cell)
            results[cell.idx] = entry
            all_rows[cell.idx] = rows
            logger.info("cell %d/%d done: %s", cell.idx + 1, len(cells), entry["status"])
    else:
        with ProcessPoolExecutor(
            max_workers=jobs, initializer=_worker_init, initargs=(ctx,)
        ) as pool:
            for idx, (entry, rows) in pool.map(_worker_run, cells):
                results[idx] = entry
                all_rows[idx] = rows
                logger.info("cell %d/%d done: %s", idx + 1, len(cells), entry["status"])

    entries = [results[c.idx] for c in cells]
    outcome_rows = [row for c in cells for row in all_rows[c.idx]]
    n_failed = write_outputs(exp, targets, entries, outcome_rows)
    if n_failed:
        logger.error("%d of %d cells failed", n_failed, len(entries))
        return EXIT_PARTIAL_FAILURE
    return EXIT_OK
