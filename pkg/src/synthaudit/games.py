"""Monte-Carlo privacy and utility games.

Each game repeatedly rebuilds the challenger's world: a training set of n-1
population records plus either the target (secret bit 1) or a random filler
record (secret bit 0), pushed through the publishing mechanism. In the
default stratified sampling the two arms come in matched pairs sharing the
training base, the filler draw and the mechanism seed, so the only
difference inside a pair is the swapped record; 'coin' sampling flips a
fair coin per iteration instead.

Advantage conventions, fixed here once:

  linkability          Adv = P[guess 1 | in] - P[guess 1 | out], the
                       true-positive/false-positive gap. The raw publication
                       yields Adv = 1 exactly (presence is checkable), so
                       privacy gain reduces to 1 - Adv(published).
  attribute/utility    Adv = P[success | in] - P[success | out], a success
                       gap, since guesses there are values, not bits.

Estimates carry a binomial-normal standard error. Linkability privacy gain
leaves [0, 1] only through estimation noise; results keep the raw value and
a [0, 1]-clipped display value side by side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from synthaudit.attacks import MiaAttacker, attr_inference_guess, mia_guess
from synthaudit.data import Dataset, SchemaMetadata, bin_index
from synthaudit.errors import (
    AuditError,
    EmptyDataset,
    InsufficientIterations,
    InvalidConfig,
    TooFewRecords,
)
from synthaudit.learners import ForestParams, fit_forest
from synthaudit.mechanisms import MechanismSpec, publish

MIN_ITERATIONS = 20
SAMPLING_MODES = ("stratified", "coin")


@dataclass(frozen=True)
class ChallengerConfig:
    """The challenger's side of every game: who it samples from, how many
    records it trains the mechanism on, and what it publishes."""

    population: Dataset
    n: int
    m: int
    mechanism: MechanismSpec
    metadata: SchemaMetadata | None = None  # provided-mode fit metadata

    def __post_init__(self):
        if self.n < 2:
            raise InvalidConfig("training size n must be >= 2")
        if self.n > self.population.n_records:
            raise InvalidConfig(
                f"training size n={self.n} exceeds population of "
                f"{self.population.n_records}"
            )
        if self.m < 1:
            raise InvalidConfig("published size m must be >= 1")


@dataclass(frozen=True)
class GameOutcome:
    """One iteration: which arm ran and how the adversary scored."""

    index: int
    secret: int
    success: float
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class AdvantageEstimate:
    p_success_given_1: float
    p_success_given_0: float
    n1: int
    n0: int
    advantage: float
    se: float

    @staticmethod
    def from_outcomes(outcomes, mode: str) -> "AdvantageEstimate":
        s1 = [o.success for o in outcomes if o.secret == 1]
        s0 = [o.success for o in outcomes if o.secret == 0]
        n1, n0 = len(s1), len(s0)
        p1 = float(np.mean(s1)) if n1 else 0.0
        p0 = float(np.mean(s0)) if n0 else 0.0
        if mode == "tpr_fpr":
            adv = p1 - (1.0 - p0)
        elif mode == "success_diff":
            adv = p1 - p0
        else:
            raise InvalidConfig(f"unknown advantage mode {mode!r}")
        var1 = p1 * (1.0 - p1) / n1 if n1 else 0.0
        var0 = p0 * (1.0 - p0) / n0 if n0 else 0.0
        return AdvantageEstimate(p1, p0, n1, n0, adv, math.sqrt(var1 + var0))


def _clip01(x: float) -> float:
    return min(max(x, 0.0), 1.0)


def _check_iters(iters: int):
    if iters < MIN_ITERATIONS:
        raise InsufficientIterations(
            f"need at least {MIN_ITERATIONS} iterations, got {iters}"
        )


def _secret_schedule(iters: int, sampling: str, rng: np.random.Generator):
    """(secret, pair_id) per iteration. Stratified: ceil(iters/2) ones and
    floor(iters/2) zeros in matched pairs; coin: a fair flip each, unpaired."""
    if sampling == "stratified":
        schedule = []
        for p in range(iters // 2):
            schedule.append((1, p))
            schedule.append((0, p))
        if iters % 2:
            schedule.append((1, iters // 2))
        return schedule
    if sampling == "coin":
        return [(int(rng.integers(0, 2)), p) for p in range(iters)]
    raise InvalidConfig(f"unknown sampling mode {sampling!r}")


def _draw_world(population: Dataset, target: np.ndarray, n: int, rng: np.random.Generator):
    """Training base of n-1 rows plus a filler row, target-equal rows excluded."""
    pool = np.nonzero(~population.equal_rows_mask(target))[0]
    if pool.size < n:
        raise TooFewRecords(
            f"population holds {pool.size} records distinct from the target, need >= {n}"
        )
    pick = pool[rng.choice(pool.size, size=n, replace=False)]
    base = population.values[pick[:-1]]
    filler = population.values[pick[-1]]
    return base, filler


class _PairedWorlds:
    """Per-pair world cache so matched arms share base, filler and seeds."""

    def __init__(self, cfg: ChallengerConfig, target):
        self.cfg = cfg
        self.target = np.asarray(target, dtype=np.float64)
        self.cache = {}

    def arm(self, pair_id: int, secret: int, rng: np.random.Generator):
        if pair_id not in self.cache:
            base, filler = _draw_world(self.cfg.population, self.target, self.cfg.n, rng)
            mech_seed = int(rng.integers(0, 2**63))
            aux_seed = int(rng.integers(0, 2**63))
            self.cache[pair_id] = (base, filler, mech_seed, aux_seed)
        base, filler, mech_seed, aux_seed = self.cache[pair_id]
        inserted = self.target if secret == 1 else filler
        training = Dataset(
            self.cfg.population.schema, np.vstack([base, inserted[None, :]])
        )
        return training, mech_seed, aux_seed

    def publish_arm(self, pair_id: int, secret: int, rng: np.random.Generator):
        training, mech_seed, aux_seed = self.arm(pair_id, secret, rng)
        published = publish(
            self.cfg.mechanism,
            training,
            self.cfg.metadata,
            self.cfg.m,
            np.random.default_rng(mech_seed),
        )
        return training, published, aux_seed


@dataclass
class LinkabilityResult:
    estimate: AdvantageEstimate
    advantage_raw_arm: float  # analytic: presence in raw data is checkable
    privacy_gain_raw: float
    privacy_gain: float
    outcomes: list = field(default_factory=list)


def run_linkability(
    target: np.ndarray,
    cfg: ChallengerConfig,
    attacker: MiaAttacker,
    iters: int,
    rng: np.random.Generator,
    sampling: str = "stratified",
) -> LinkabilityResult:
    """Membership game against the published arm.

    The adversary's advantage on the raw records is 1 by construction, so
    the game spends every iteration on the mechanism's output and reports
    privacy gain as 1 - Adv(published).
    """
    _check_iters(iters)
    worlds = _PairedWorlds(cfg, target)
    outcomes = []
    for i, (secret, pair_id) in enumerate(_secret_schedule(iters, sampling, rng)):
        _, published, _ = worlds.publish_arm(pair_id, secret, rng)
        guess = mia_guess(attacker, published, cfg.mechanism.published_kind)
        outcomes.append(GameOutcome(index=i, secret=secret, success=float(guess == secret)))
    est = AdvantageEstimate.from_outcomes(outcomes, mode="tpr_fpr")
    pg_raw = 1.0 - est.advantage
    return LinkabilityResult(
        estimate=est,
        advantage_raw_arm=1.0,
        privacy_gain_raw=pg_raw,
        privacy_gain=_clip01(pg_raw),
        outcomes=outcomes,
    )


@dataclass
class AttributeInferenceResult:
    raw_estimate: AdvantageEstimate
    published_estimate: AdvantageEstimate
    privacy_gain_raw: float
    privacy_gain: float
    se: float
    outcomes_raw: list = field(default_factory=list)
    outcomes_published: list = field(default_factory=list)


def run_attribute_inference(
    target: np.ndarray,
    sensitive_attr: str,
    cfg: ChallengerConfig,
    iters: int,
    rng: np.random.Generator,
    sampling: str = "stratified",
    truth_mode: str = "lookup",
    forest_params: ForestParams = ForestParams(),
) -> AttributeInferenceResult:
    """Sensitive-value recovery, scored on matched raw and published arms.

    The adversary knows every attribute of the target except the sensitive
    one. Per iteration the same training set is evaluated twice, once as
    raw records and once through the mechanism, which turns privacy gain
    into Adv(raw) - Adv(published) over identical worlds. The truth is the
    target's recorded value; truth_mode 'conditional' instead redraws it
    each iteration from population records agreeing with the target on the
    known attributes (categoricals exactly, continuous by schema bin).
    """
    _check_iters(iters)
    if truth_mode not in ("lookup", "conditional"):
        raise InvalidConfig(f"unknown truth_mode {truth_mode!r}")
    schema = cfg.population.schema
    j_sens = schema.index_of(sensitive_attr)
    target = np.asarray(target, dtype=np.float64)
    known = {
        a.name: float(target[j])
        for j, a in enumerate(schema.attributes)
        if j != j_sens
    }
    truth_pool = None
    if truth_mode == "conditional":
        truth_pool = _conditional_truth_pool(cfg.population, target, j_sens)
    worlds = _PairedWorlds(cfg, target)
    outcomes_raw, outcomes_pub = [], []
    for i, (secret, pair_id) in enumerate(_secret_schedule(iters, sampling, rng)):
        training, published, aux_seed = worlds.publish_arm(pair_id, secret, rng)
        truth = float(target[j_sens])
        if truth_pool is not None:
            truth = float(truth_pool[rng.integers(0, truth_pool.size)])
        guess_rng = np.random.default_rng(aux_seed)
        for arm_data, arm_kind, sink in (
            (training, "raw", outcomes_raw),
            (published, cfg.mechanism.published_kind, outcomes_pub),
        ):
            guess = attr_inference_guess(
                arm_data, arm_kind, known, sensitive_attr, guess_rng, forest_params
            )
            sink.append(
                GameOutcome(
                    index=i,
                    secret=secret,
                    success=guess.success_probability(truth),
                    flags=guess.flags,
                )
            )
    est_raw = AdvantageEstimate.from_outcomes(outcomes_raw, mode="success_diff")
    est_pub = AdvantageEstimate.from_outcomes(outcomes_pub, mode="success_diff")
    pg_raw = est_raw.advantage - est_pub.advantage
    se = math.sqrt(est_raw.se**2 + est_pub.se**2)
    return AttributeInferenceResult(
        raw_estimate=est_raw,
        published_estimate=est_pub,
        privacy_gain_raw=pg_raw,
        privacy_gain=_clip01(pg_raw),
        se=se,
        outcomes_raw=outcomes_raw,
        outcomes_published=outcomes_pub,
    )


def _conditional_truth_pool(population: Dataset, target: np.ndarray, j_sens: int) -> np.ndarray:
    """Sensitive values of population rows matching the target's known cells."""
    schema = population.schema
    mask = np.ones(population.n_records, dtype=bool)
    for j, spec in enumerate(schema.attributes):
        if j == j_sens:
            continue
        col = population.values[:, j]
        if spec.is_categorical:
            mask &= col == target[j]
        else:
            tbin = bin_index(float(target[j]), spec)
            mask &= np.array([bin_index(float(v), spec) for v in col]) == tbin
    vals = population.values[mask, j_sens]
    return vals if vals.size else np.asarray([target[j_sens]])


@dataclass
class UtilityGameResult:
    estimate: AdvantageEstimate
    outcomes: list = field(default_factory=list)


def run_utility_game(
    target: np.ndarray,
    test_record: np.ndarray,
    predict_attr: str,
    cfg: ChallengerConfig,
    iters: int,
    rng: np.random.Generator,
    sampling: str = "stratified",
    analyst_params: ForestParams = ForestParams(),
) -> UtilityGameResult:
    """How much one record's presence sways an analyst's prediction.

    Per iteration an analyst fits a forest on the published data to predict
    predict_attr and is scored on a single held-out test record. Matched
    arms share the analyst's seed, isolating the effect of the target's
    presence on the downstream prediction.
    """
    _check_iters(iters)
    schema = cfg.population.schema
    j_pred = schema.index_of(predict_attr)
    if not schema.attributes[j_pred].is_categorical:
        raise InvalidConfig("predict_attr must be categorical")
    feat_cols = [j for j in range(schema.n_columns) if j != j_pred]
    test_record = np.asarray(test_record, dtype=np.float64)
    test_x = test_record[feat_cols][None, :]
    test_y = int(test_record[j_pred])
    worlds = _PairedWorlds(cfg, target)
    outcomes = []
    for i, (secret, pair_id) in enumerate(_secret_schedule(iters, sampling, rng)):
        flags = []
        try:
            _, published, aux_seed = worlds.publish_arm(pair_id, secret, rng)
            if published.n_records == 0:
                raise EmptyDataset("mechanism published zero records")
            analyst = fit_forest(
                published.values[:, feat_cols],
                published.values[:, j_pred].astype(np.int64),
                analyst_params,
                np.random.default_rng(aux_seed),
            )
            if analyst.degenerate:
                flags.append("degenerate_labels")
            success = float(int(analyst.predict(test_x)[0]) == test_y)
        except AuditError as e:
            flags.append(type(e).__name__)
            success = 0.0
        outcomes.append(
            GameOutcome(index=i, secret=secret, success=success, flags=tuple(flags))
        )
    est = AdvantageEstimate.from_outcomes(outcomes, mode="success_diff")
    return UtilityGameResult(estimate=est, outcomes=outcomes)


def aggregate_utility(
    raw: Dataset,
    published: Dataset,
    holdout: Dataset,
    predict_attr: str,
    rng: np.random.Generator,
    analyst_params: ForestParams = ForestParams(),
) -> dict:
    """Dataset-level utility: holdout accuracy raw vs published, plus
    per-attribute marginal discrepancies. Equal analyst seeds on both fits."""
    schema = raw.schema
    if published.schema.names != schema.names or holdout.schema.names != schema.names:
        raise InvalidConfig("aggregate_utility needs a shared schema")
    if raw.n_records == 0 or published.n_records == 0 or holdout.n_records == 0:
        raise EmptyDataset("aggregate_utility needs non-empty datasets")
    j_pred = schema.index_of(predict_attr)
    if not schema.attributes[j_pred].is_categorical:
        raise InvalidConfig("predict_attr must be categorical")
    feat_cols = [j for j in range(schema.n_columns) if j != j_pred]
    seed = int(rng.integers(0, 2**63))
    accs = {}
    for name, ds in (("raw", raw), ("published", published)):
        model = fit_forest(
            ds.values[:, feat_cols],
            ds.values[:, j_pred].astype(np.int64),
            analyst_params,
            np.random.default_rng(seed),
        )
        pred = model.predict(holdout.values[:, feat_cols])
        accs[name] = float(np.mean(pred == holdout.values[:, j_pred].astype(np.int64)))
    attributes = {}
    for j, spec in enumerate(schema.attributes):
        rc, pc = raw.values[:, j], published.values[:, j]
        if spec.is_categorical:
            fr = np.bincount(rc.astype(np.intp), minlength=len(spec.categories)) / rc.size
            fp = np.bincount(pc.astype(np.intp), minlength=len(spec.categories)) / pc.size
            attributes[spec.name] = {"marginal_l1": float(np.abs(fr - fp).sum())}
        else:
            attributes[spec.name] = {
                "mean_abs_diff": float(abs(rc.mean() - pc.mean())),
                "median_abs_diff": float(abs(np.median(rc) - np.median(pc))),
            }
    return {
        "accuracy_raw": accs["raw"],
        "accuracy_published": accs["published"],
        "accuracy_drop": accs["raw"] - accs["published"],
        "attributes": attributes,
    }


def select_outlier_targets(population: Dataset, count: int) -> np.ndarray:
    """Rank records by how unusual their cells are; return the top `count`.

    A cell scores a point when its category's population frequency falls
    below the 5th percentile of that attribute's observed category
    frequencies, or when its numeric value exceeds the attribute's 95th
    percentile. Ties resolve toward the lower row index.
    """
    if count < 0:
        raise InvalidConfig("count must be >= 0")
    if population.n_records == 0:
        raise EmptyDataset("cannot select targets from an empty population")
    n = population.n_records
    scores = np.zeros(n, dtype=np.int64)
    for j, spec in enumerate(population.schema.attributes):
        col = population.values[:, j]
        if spec.is_categorical:
            counts = np.bincount(col.astype(np.intp), minlength=len(spec.categories))
            freqs = counts / n
            observed = freqs[counts > 0]
            threshold = float(np.percentile(observed, 5.0))
            scores += (freqs[col.astype(np.intp)] < threshold).astype(np.int64)
        else:
            threshold = float(np.percentile(col, 95.0))
            scores += (col > threshold).astype(np.int64)
    order = np.argsort(-scores, kind="stable")
    return order[: min(count, n)]
