"""Synthetic data generators behind one fit/sample surface.

Kinds:

  ind_hist   independent per-attribute histograms.
  bay_net    greedy Bayes network: attributes enter the network in order of
             the mutual information between the candidate and its best
             parent set (up to `degree` already-added attributes, chosen by
             pairwise MI); conditionals are smoothed contingency tables.
  priv_bay   same network family made noisy: the next-attribute choice goes
             through the exponential mechanism on the same MI scores and the
             conditional tables receive Laplace noise, half the budget each
             (structure share configurable). An epsilon of 1e9 or more is
             the conventional non-private sentinel and flows through the
             identical code path.
  external   a command-line bridge; see fit_sample_external.

Metadata modes: 'provided' treats the metadata argument as authoritative
and refuses data outside it; 'learned' derives metadata from the training
data itself, which leaks the training set through category lists and
ranges. The learned mode exists so that leak can be measured, not used.

All counting happens on a discrete view: categories as given, continuous
attributes binned uniformly over the metadata range (nbins override, else
the attribute's schema bins). Mutual information uses additive 1e-9
smoothing. Sampling decodes bins to uniform draws within the bin.
"""

from __future__ import annotations

import logging
import math
import os
import shlex
import shutil
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from synthaudit.data import (
    CONTINUOUS,
    Dataset,
    SchemaMetadata,
    derive_metadata,
    load_csv,
    save_schema,
    write_csv,
)
from synthaudit.dp import PrivacyBudget, exponential_mechanism, laplace_noise
from synthaudit.errors import (
    AuditError,
    EmptyDataset,
    ExternalProcessFailed,
    InvalidConfig,
    MetadataViolation,
    OutputSchemaMismatch,
    SchemaMismatch,
)

GENERATOR_KINDS = ("ind_hist", "bay_net", "priv_bay", "external")
MI_SMOOTHING = 1e-9
NON_PRIVATE_EPSILON = 1e9


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    nbins: int | None = None
    degree: int = 1
    budget: PrivacyBudget | None = None
    metadata_mode: str = "provided"
    external_cmd: str | None = None
    mi_sensitivity: float | None = None

    def __post_init__(self):
        if self.kind not in GENERATOR_KINDS:
            raise InvalidConfig(f"unknown generator kind {self.kind!r}")
        if self.metadata_mode not in ("provided", "learned"):
            raise InvalidConfig(f"unknown metadata_mode {self.metadata_mode!r}")
        if self.nbins is not None and self.nbins < 1:
            raise InvalidConfig("nbins must be >= 1")
        if self.degree < 1:
            raise InvalidConfig("degree must be >= 1")
        if self.kind == "priv_bay" and self.budget is None:
            raise InvalidConfig("priv_bay requires a PrivacyBudget")
        if self.kind == "external" and not self.external_cmd:
            raise InvalidConfig("external generator requires external_cmd")
        if self.mi_sensitivity is not None and not self.mi_sensitivity > 0:
            raise InvalidConfig("mi_sensitivity must be positive")

    def to_json_dict(self) -> dict:
        d = {"kind": self.kind, "metadata_mode": self.metadata_mode}
        if self.nbins is not None:
            d["nbins"] = self.nbins
        if self.kind in ("bay_net", "priv_bay"):
            d["degree"] = self.degree
        if self.budget is not None:
            d["epsilon"] = self.budget.epsilon_total
            d["structure_fraction"] = self.budget.structure_fraction
        if self.external_cmd:
            d["external_cmd"] = self.external_cmd
        if self.mi_sensitivity is not None:
            d["mi_sensitivity"] = self.mi_sensitivity
        return d

    @staticmethod
    def from_json_dict(d: dict) -> "GeneratorSpec":
        budget = None
        if "epsilon" in d:
            budget = PrivacyBudget(
                float(d["epsilon"]), float(d.get("structure_fraction", 0.5))
            )
        return GeneratorSpec(
            kind=d["kind"],
            nbins=d.get("nbins"),
            degree=int(d.get("degree", 1)),
            budget=budget,
            metadata_mode=d.get("metadata_mode", "provided"),
            external_cmd=d.get("external_cmd"),
            mi_sensitivity=d.get("mi_sensitivity"),
        )


@dataclass
class TrainedGenerator:
    spec: GeneratorSpec
    schema: SchemaMetadata  # output schema (the training data's)
    metadata: SchemaMetadata  # fit metadata, provided or learned
    order: tuple[int, ...]  # network add order; schema order for ind_hist
    parents: dict  # attr index -> tuple of parent attr indices
    tables: dict  # attr index -> conditional table, parent combos x domain
    cat_maps: list  # model category index -> schema category index, or None
    provenance: dict = field(default_factory=dict)


def _model_domain(spec: GeneratorSpec, attr) -> int:
    if attr.is_categorical:
        return len(attr.categories)
    return spec.nbins if spec.nbins is not None else attr.bins


def _encode(spec: GeneratorSpec, data: Dataset, metadata: SchemaMetadata):
    """Map data cells to model-space indices; strict under provided mode.

    Returns (encoded int matrix, per-attribute category maps model->schema).
    """
    n = data.n_records
    k = data.schema.n_columns
    if metadata.n_columns != k:
        raise SchemaMismatch(
            f"metadata has {metadata.n_columns} attributes, data has {k}"
        )
    enc = np.empty((n, k), dtype=np.intp)
    cat_maps = []
    for j, (dspec, mspec) in enumerate(zip(data.schema.attributes, metadata.attributes)):
        if dspec.name != mspec.name or dspec.kind != mspec.kind:
            raise SchemaMismatch(
                f"metadata attribute {mspec.name!r}/{mspec.kind} does not match "
                f"data attribute {dspec.name!r}/{dspec.kind}"
            )
        col = data.values[:, j]
        if dspec.is_categorical:
            # translate via category strings; indices may differ between schemas
            to_model = np.full(len(dspec.categories), -1, dtype=np.intp)
            for i, c in enumerate(dspec.categories):
                if c in mspec.categories:
                    to_model[i] = mspec.categories.index(c)
            idx = col.astype(np.intp)
            enc_col = to_model[idx]
            if (enc_col < 0).any():
                bad = int(idx[enc_col < 0][0])
                raise MetadataViolation(
                    dspec.name, f"category {dspec.categories[bad]!r} not in metadata"
                )
            enc[:, j] = enc_col
            to_schema = np.full(len(mspec.categories), -1, dtype=np.intp)
            for i, c in enumerate(mspec.categories):
                if c not in dspec.categories:
                    raise MetadataViolation(
                        dspec.name, f"metadata category {c!r} unknown to the data schema"
                    )
                to_schema[i] = dspec.categories.index(c)
            cat_maps.append(to_schema)
        else:
            lo, hi = mspec.lo, mspec.hi
            if col.min() < lo or col.max() > hi:
                bad = float(col[(col < lo) | (col > hi)][0])
                raise MetadataViolation(dspec.name, f"value {bad!r} outside [{lo}, {hi}]")
            bins = _model_domain(spec, mspec)
            width = (hi - lo) / bins
            idx = np.floor((col - lo) / width).astype(np.intp)
            enc[:, j] = np.clip(idx, 0, bins - 1)
            cat_maps.append(None)
    return enc, cat_maps


def _mutual_information(joint: np.ndarray) -> float:
    """MI in nats from a (possibly multi-way) contingency table.

    The table is flattened to two axes by the caller. Additive smoothing
    keeps empty cells finite; independent columns come out at ~0.
    """
    p = joint.astype(np.float64) + MI_SMOOTHING
    p = p / p.sum()
    pa = p.sum(axis=1, keepdims=True)
    pb = p.sum(axis=0, keepdims=True)
    return float(np.sum(p * (np.log(p) - np.log(pa) - np.log(pb))))


def _contingency(enc: np.ndarray, cols_a: tuple[int, ...], cols_b: tuple[int, ...], domains) -> np.ndarray:
    da = int(np.prod([domains[c] for c in cols_a]))
    db = int(np.prod([domains[c] for c in cols_b]))
    ia = np.zeros(len(enc), dtype=np.int64)
    for c in cols_a:
        ia = ia * domains[c] + enc[:, c]
    ib = np.zeros(len(enc), dtype=np.int64)
    for c in cols_b:
        ib = ib * domains[c] + enc[:, c]
    flat = np.bincount(ia * db + ib, minlength=da * db)
    return flat.reshape(da, db)


def _default_mi_sensitivity(n: int) -> float:
    # Scale of one record's influence on an empirical MI score; the classic
    # (log n + 1) / n envelope, natural log to match the MI estimator.
    return (math.log(n) + 1.0) / n


def _greedy_network(
    spec: GeneratorSpec,
    enc: np.ndarray,
    domains: list[int],
    rng: np.random.Generator,
):
    """Shared structure search for bay_net and priv_bay.

    Candidates at each step pair an unadded attribute with its best parent
    set (the up-to-degree added attributes of highest pairwise MI, ties to
    schema order); the candidate score is the MI between attribute and the
    joint of its parents. bay_net takes the argmax (first on ties), priv_bay
    draws the step through the exponential mechanism. The first attribute
    carries no data signal (every score is zero) and is taken in schema
    order without spending budget.
    """
    k = len(domains)
    n = len(enc)
    noisy = spec.kind == "priv_bay"
    if noisy:
        eps_step = spec.budget.epsilon_structure / max(k - 1, 1)
        sens = spec.mi_sensitivity or _default_mi_sensitivity(n)
    pair_mi = {}

    def mi_pair(a: int, b: int) -> float:
        key = (min(a, b), max(a, b))
        if key not in pair_mi:
            pair_mi[key] = _mutual_information(_contingency(enc, (key[0],), (key[1],), domains))
        return pair_mi[key]

    order = [0]
    parents: dict[int, tuple[int, ...]] = {0: ()}
    while len(order) < k:
        candidates = []
        scores = []
        for a in range(k):
            if a in order:
                continue
            ranked = sorted(order, key=lambda b: (-mi_pair(a, b), b))
            pset = tuple(sorted(ranked[: min(spec.degree, len(order))]))
            score = _mutual_information(_contingency(enc, pset, (a,), domains))
            candidates.append((a, pset))
            scores.append(score)
        if noisy:
            pick = exponential_mechanism(scores, sens, eps_step, rng)
        else:
            pick = int(np.argmax(scores))
        a, pset = candidates[pick]
        order.append(a)
        parents[a] = pset
    return tuple(order), parents


def _conditional_table(
    spec: GeneratorSpec,
    enc: np.ndarray,
    attr: int,
    pset: tuple[int, ...],
    domains: list[int],
    rng: np.random.Generator,
    n_tables: int,
) -> np.ndarray:
    counts = _contingency(enc, pset, (attr,), domains).astype(np.float64)
    if spec.kind == "priv_bay":
        eps_each = spec.budget.epsilon_tables / n_tables
        counts = counts + laplace_noise(1.0 / eps_each, rng, size=counts.shape)
        counts = np.maximum(counts, 0.0)
    else:
        counts = counts + MI_SMOOTHING
    row_sums = counts.sum(axis=1, keepdims=True)
    uniform = np.full(counts.shape[1], 1.0 / counts.shape[1])
    out = np.where(row_sums > 0, counts / np.where(row_sums == 0, 1.0, row_sums), uniform)
    return out


def fit(
    spec: GeneratorSpec,
    data: Dataset,
    metadata: SchemaMetadata | None,
    rng: np.random.Generator,
) -> TrainedGenerator:
    """Fit an internal generator kind; external kinds go through
    fit_sample_external."""
    if spec.kind == "external":
        raise InvalidConfig("external generators have no persistent model; use synthesize")
    if data.n_records == 0:
        raise EmptyDataset("cannot fit on an empty dataset")
    if spec.metadata_mode == "learned":
        metadata = derive_metadata(data, pad_fraction=0.0)
    elif metadata is None:
        raise InvalidConfig("metadata_mode='provided' requires metadata")
    enc, cat_maps = _encode(spec, data, metadata)
    domains = [_model_domain(spec, a) for a in metadata.attributes]
    k = len(domains)

    if spec.kind == "ind_hist":
        order = tuple(range(k))
        parents = {j: () for j in range(k)}
    else:
        order, parents = _greedy_network(spec, enc, domains, rng)

    tables = {}
    for j in order:
        tables[j] = _conditional_table(spec, enc, j, parents[j], domains, rng, n_tables=k)

    prov = {
        "kind": spec.kind,
        "metadata_mode": spec.metadata_mode,
        "n_train": data.n_records,
        "domains": list(domains),
        "mi_smoothing": MI_SMOOTHING,
    }
    if spec.kind in ("bay_net", "priv_bay"):
        prov["degree"] = spec.degree
        prov["order"] = [metadata.attributes[j].name for j in order]
        prov["parents"] = {
            metadata.attributes[j].name: [metadata.attributes[p].name for p in parents[j]]
            for j in order
        }
    if spec.kind == "priv_bay":
        prov["epsilon"] = spec.budget.epsilon_total
        prov["structure_fraction"] = spec.budget.structure_fraction
        prov["mi_sensitivity"] = spec.mi_sensitivity or _default_mi_sensitivity(data.n_records)
        prov["non_private_sentinel"] = spec.budget.epsilon_total >= NON_PRIVATE_EPSILON
    return TrainedGenerator(
        spec=spec,
        schema=data.schema,
        metadata=metadata,
        order=order,
        parents=parents,
        tables=tables,
        cat_maps=cat_maps,
        provenance=prov,
    )


def _decode_column(
    model: TrainedGenerator, j: int, idx: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    mspec = model.metadata.attributes[j]
    if mspec.is_categorical:
        return model.cat_maps[j][idx].astype(np.float64)
    bins = _model_domain(model.spec, mspec)
    width = (mspec.hi - mspec.lo) / bins
    u = rng.random(idx.size)
    return mspec.lo + (idx + u) * width


def sample(model: TrainedGenerator, m: int, rng: np.random.Generator) -> Dataset:
    """Draw m records; output schema equals the training data's schema."""
    if m < 1:
        raise InvalidConfig("m must be >= 1")
    k = len(model.order)
    enc = np.empty((m, k), dtype=np.intp)
    domains = [_model_domain(model.spec, a) for a in model.metadata.attributes]
    for j in model.order:
        table = model.tables[j]
        pset = model.parents[j]
        if not pset:
            enc[:, j] = rng.choice(domains[j], size=m, p=table[0] if table.ndim > 1 else table)
            continue
        combo = np.zeros(m, dtype=np.int64)
        for c in pset:
            combo = combo * domains[c] + enc[:, c]
        # draw per unique parent combo; np.unique order keeps this deterministic
        for cv in np.unique(combo):
            mask = combo == cv
            enc[mask, j] = rng.choice(domains[j], size=int(mask.sum()), p=table[cv])
    cols = [_decode_column(model, j, enc[:, j], rng) for j in range(k)]
    return Dataset(model.schema, np.column_stack(cols))


def fit_sample_external(
    spec: GeneratorSpec,
    data: Dataset,
    metadata: SchemaMetadata | None,
    m: int,
    rng: np.random.Generator,
    workdir: str | None = None,
    keep_workdir: bool = False,
) -> Dataset:
    """Run an external generator command and read its output.

    The command template receives {train_csv}, {schema_json}, {out_csv},
    {m} and {seed} via str.format, is split with shlex and executed without
    a shell. The output CSV is parsed against the training schema under the
    reject policy; any violation surfaces as OutputSchemaMismatch. The
    working directory is deleted afterwards unless keep_workdir is set or
    the SYNTHAUDIT_KEEP_WORKDIRS environment variable is 1 (how the CLI's
    --keep-workdirs reaches calls buried under the game loops).
    """
    keep_workdir = keep_workdir or os.environ.get("SYNTHAUDIT_KEEP_WORKDIRS") == "1"
    if spec.kind != "external":
        raise InvalidConfig("fit_sample_external requires an external generator spec")
    if data.n_records == 0:
        raise EmptyDataset("cannot synthesize from an empty dataset")
    if m < 1:
        raise InvalidConfig("m must be >= 1")
    if spec.metadata_mode == "learned":
        metadata = derive_metadata(data, pad_fraction=0.0)
    elif metadata is None:
        raise InvalidConfig("metadata_mode='provided' requires metadata")
    else:
        # strictness parity with internal kinds
        _encode(spec, data, metadata)
    seed = int(rng.integers(0, 2**31))
    own_dir = workdir is None
    wd = Path(workdir) if workdir is not None else Path(tempfile.mkdtemp(prefix="synthaudit_ext_"))
    wd.mkdir(parents=True, exist_ok=True)
    try:
        train_csv = wd / "train.csv"
        schema_json = wd / "schema.json"
        out_csv = wd / "synthetic.csv"
        write_csv(data, train_csv)
        save_schema(metadata, schema_json)
        cmd = spec.external_cmd.format(
            train_csv=train_csv, schema_json=schema_json, out_csv=out_csv, m=m, seed=seed
        )
        proc = subprocess.run(shlex.split(cmd), capture_output=True, text=True)
        if proc.returncode != 0:
            tail = proc.stderr.strip().splitlines()[-5:]
            raise ExternalProcessFailed(
                f"command exited {proc.returncode}: {' | '.join(tail) if tail else 'no stderr'}"
            )
        if not out_csv.exists():
            raise ExternalProcessFailed(f"command produced no output file {out_csv}")
        try:
            out = load_csv(out_csv, data.schema, policy="reject")
        except AuditError as e:
            raise OutputSchemaMismatch(f"external output rejected: {e}") from e
        if out.n_records != m:
            raise OutputSchemaMismatch(
                f"external output has {out.n_records} rows, expected {m}"
            )
        return out
    finally:
        if own_dir and not keep_workdir:
            shutil.rmtree(wd, ignore_errors=True)
        elif keep_workdir:
            logging.getLogger("synthaudit").info("kept external workdir %s", wd)


def synthesize(
    spec: GeneratorSpec,
    data: Dataset,
    metadata: SchemaMetadata | None,
    m: int,
    rng: np.random.Generator,
    keep_workdir: bool = False,
) -> Dataset:
    """One-shot train-and-sample for any generator kind."""
    if spec.kind == "external":
        return fit_sample_external(spec, data, metadata, m, rng, keep_workdir=keep_workdir)
    return sample(fit(spec, data, metadata, rng), m, rng)
