"""Adversary side of the games: shadow-model training and guess procedures.

The membership adversary never touches the challenger's training draw. It
owns a reference sample of the population, knows the publishing mechanism
and its configuration, and manufactures its own labelled world: shadow
training sets with and without the target, pushed through the mechanism,
summarised by a feature map, and fed to a random forest.

Shadow set construction mirrors the challenger: n-1 reference records plus
a random filler (label 0) or plus the target (label 1), so shadow and
challenger training sets have identical size n. The alternative reading,
where the target is appended to n records and set sizes differ by one, is
kept behind shadow_mode='append'.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from synthaudit.data import Dataset, SchemaMetadata
from synthaudit.errors import (
    AuditError,
    InsufficientRows,
    InvalidConfig,
    RankDeficient,
    ReferenceTooSmall,
)
from synthaudit.features import FEATURE_SETS, extract
from synthaudit.learners import (
    ForestParams,
    RandomForest,
    fit_forest,
    fit_linear,
    posterior_density,
)
from synthaudit.learners.linear import mode_density
from synthaudit.mechanisms import MechanismSpec, publish
from synthaudit.sanitiser import unique_link

SHADOW_MODES = ("mirror", "append")


@dataclass(frozen=True)
class PriorKnowledge:
    """What the adversary is assumed to hold before the game starts."""

    reference: Dataset  # independent sample of the population, size l
    mechanism: MechanismSpec
    metadata: SchemaMetadata | None  # fit metadata under provided mode
    n: int  # challenger training size
    m: int  # published synthetic size

    def __post_init__(self):
        if self.n < 2:
            raise InvalidConfig("n must be >= 2")
        if self.m < 1:
            raise InvalidConfig("m must be >= 1")
        if self.reference.n_records < self.n:
            raise ReferenceTooSmall(
                f"reference holds {self.reference.n_records} records, need >= {self.n}"
            )


@dataclass
class MiaAttacker:
    target: np.ndarray
    feature_set: str
    model: RandomForest
    schema: SchemaMetadata
    n_train_vectors: int
    flags: tuple[str, ...] = ()


def train_mia(
    target: np.ndarray,
    prior: PriorKnowledge,
    feature_set: str,
    n_shadows: int,
    synth_per_shadow: int,
    rng: np.random.Generator,
    shadow_mode: str = "mirror",
    forest_params: ForestParams = ForestParams(),
) -> MiaAttacker:
    """Fit the membership classifier from shadow worlds.

    Produces exactly 2 * n_shadows * synth_per_shadow labelled feature
    vectors, half per label. Deterministic mechanisms (raw, sanitiser) make
    the synth_per_shadow copies of a shadow identical; they are kept so the
    label balance and vector count stay the stated invariant.
    """
    if feature_set not in FEATURE_SETS:
        raise InvalidConfig(f"unknown feature set {feature_set!r}")
    if shadow_mode not in SHADOW_MODES:
        raise InvalidConfig(f"unknown shadow_mode {shadow_mode!r}")
    if n_shadows < 1 or synth_per_shadow < 1:
        raise InvalidConfig("n_shadows and synth_per_shadow must be >= 1")
    target = np.asarray(target, dtype=np.float64)
    pool = np.nonzero(~prior.reference.equal_rows_mask(target))[0]
    need = prior.n  # mirror: n-1 base + filler; append: n base
    if pool.size < need:
        raise ReferenceTooSmall(
            f"reference holds {pool.size} records distinct from the target, need >= {need}"
        )
    vectors = []
    labels = []
    flags = set()
    for _ in range(n_shadows):
        pick = pool[rng.choice(pool.size, size=need, replace=False)]
        if shadow_mode == "mirror":
            base = prior.reference.values[pick[:-1]]
            filler = prior.reference.values[pick[-1]]
            out_rows = np.vstack([base, filler[None, :]])
            in_rows = np.vstack([base, target[None, :]])
        else:
            base = prior.reference.values[pick]
            out_rows = base
            in_rows = np.vstack([base, target[None, :]])
        for rows, label in ((out_rows, 0), (in_rows, 1)):
            training = Dataset(prior.reference.schema, rows)
            mech_rng = np.random.default_rng(int(rng.integers(0, 2**63)))
            if prior.mechanism.deterministic:
                published = publish(
                    prior.mechanism, training, prior.metadata, prior.m, mech_rng
                )
                try:
                    vec = extract(published, feature_set)
                except AuditError:
                    vec = np.zeros(_vector_length_fallback(prior, feature_set))
                    flags.add("empty_shadow_publication")
                for _ in range(synth_per_shadow):
                    vectors.append(vec)
                    labels.append(label)
            else:
                for _ in range(synth_per_shadow):
                    published = publish(
                        prior.mechanism, training, prior.metadata, prior.m, mech_rng
                    )
                    vectors.append(extract(published, feature_set))
                    labels.append(label)
    X = np.vstack(vectors)
    y = np.asarray(labels, dtype=np.int64)
    model = fit_forest(X, y, forest_params, rng)
    if model.degenerate:
        flags.add("degenerate_shadow_labels")
    return MiaAttacker(
        target=target,
        feature_set=feature_set,
        model=model,
        schema=prior.reference.schema,
        n_train_vectors=len(labels),
        flags=tuple(sorted(flags)),
    )


def _vector_length_fallback(prior: PriorKnowledge, feature_set: str) -> int:
    from synthaudit.features import feature_length

    return feature_length(prior.reference.schema, feature_set)


def mia_guess(attacker: MiaAttacker, published: Dataset, published_kind: str) -> int:
    """Membership bit for one published dataset.

    raw        presence by exact record equality.
    synthetic  feature vector through the shadow classifier.
    sanitised  a unique literal match settles it; otherwise classify.
    """
    if published_kind == "raw":
        return int(published.equal_rows_mask(attacker.target).any())
    if published_kind == "sanitised":
        if int(published.equal_rows_mask(attacker.target).sum()) == 1:
            return 1
        if published.n_records == 0:
            return 0
        return int(attacker.model.predict(extract(published, attacker.feature_set))[0])
    if published_kind == "synthetic":
        return int(attacker.model.predict(extract(published, attacker.feature_set))[0])
    raise InvalidConfig(f"unknown published_kind {published_kind!r}")


@dataclass
class AttrGuess:
    """One attribute-inference guess plus what is needed to score it."""

    value: float
    via: str  # "link" | "forest" | "constant" | "linear" | "failed"
    is_categorical: bool
    linear_model: object = None
    probe_features: np.ndarray | None = None
    flags: tuple[str, ...] = ()

    def success_probability(self, truth: float) -> float:
        """Exact-match for categoricals and links; density ratio for the
        regression path, clipped to [0, 1]."""
        if self.via == "failed":
            return 0.0
        if self.is_categorical or self.via == "link":
            return 1.0 if self.value == truth else 0.0
        dens = posterior_density(self.linear_model, self.probe_features, truth)
        peak = mode_density(self.linear_model)
        return min(max(dens / peak, 0.0), 1.0)


def attr_inference_guess(
    published: Dataset,
    published_kind: str,
    known: dict,
    sensitive_attr: str,
    rng: np.random.Generator,
    forest_params: ForestParams = ForestParams(),
) -> AttrGuess:
    """Guess the sensitive value of the individual described by `known`.

    Raw and sanitised publications first try literal linkage on the known
    cells: a unique match hands over its sensitive cell with certainty.
    Otherwise (and always for synthetic data) a model is fitted on the
    published records: least squares for continuous targets, a forest for
    categorical ones. Failures to fit surface as a 'failed' guess, never an
    exception, so game loops stay total.
    """
    schema = published.schema
    j_sens = schema.index_of(sensitive_attr)
    spec = schema.attributes[j_sens]
    other = [a.name for a in schema.attributes if a.name != sensitive_attr]
    missing = [a for a in other if a not in known]
    if missing:
        raise InvalidConfig(f"known cells must cover all non-sensitive attributes; missing {missing}")

    if published_kind in ("raw", "sanitised"):
        if published.n_records > 0:
            hit = unique_link(published, {a: known[a] for a in other})
            if hit is not None:
                return AttrGuess(
                    value=float(published.values[hit, j_sens]),
                    via="link",
                    is_categorical=spec.is_categorical,
                )
    elif published_kind != "synthetic":
        raise InvalidConfig(f"unknown published_kind {published_kind!r}")

    if published.n_records == 0:
        return AttrGuess(value=np.nan, via="failed", is_categorical=spec.is_categorical,
                         flags=("empty_publication",))
    cols = [schema.index_of(a) for a in other]
    X = published.values[:, cols]
    y = published.values[:, j_sens]
    probe = np.asarray([float(known[a]) for a in other], dtype=np.float64)
    if spec.is_categorical:
        model = fit_forest(X, y.astype(np.int64), forest_params, rng)
        value = float(model.predict(probe[None, :])[0])
        via = "constant" if model.degenerate else "forest"
        flags = ("degenerate_labels",) if model.degenerate else ()
        return AttrGuess(value=value, via=via, is_categorical=True, flags=flags)
    try:
        model = fit_linear(X, y)
    except (InsufficientRows, RankDeficient) as e:
        return AttrGuess(
            value=np.nan, via="failed", is_categorical=False, flags=(type(e).__name__,)
        )
    return AttrGuess(
        value=model.predict(probe),
        via="linear",
        is_categorical=False,
        linear_model=model,
        probe_features=probe,
    )
