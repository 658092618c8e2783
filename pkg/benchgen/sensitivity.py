"""
Sensitivity of policy outcomes to environment variation.

Given rollouts ``(theta_i, x_i)`` collected under some sampling distribution
of variation parameters, this module estimates the posterior
``p(theta | x = x_o)`` under a uniform prior on the normalized parameter box.
The sampling (proposal) density is estimated with a Gaussian KDE and
corrected for with importance weights. The posterior factorizes into a
weighted categorical over discrete parameters and, per category, a weighted
Gaussian KDE over continuous parameters.

All continuous densities live on the unit box ``[0, 1]^m`` and use reflection
at the box faces, so densities integrate to one on the box and samples never
leave it.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .config import SensitivityConfig
from .exceptions import InvalidInputError, PlanParseError, SensitivityError
from .geometry import Pose, pose_distance
from .trajectory_metrics import EpisodeRecord

logger = logging.getLogger(__name__)

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_CHUNK = 1024

Density = Callable[[np.ndarray], np.ndarray]


# ---------------------------------------------------------------------------
# Variation space
# ---------------------------------------------------------------------------

class ContinuousDim(BaseModel):
    """
    A bounded scalar variation factor.

    When ``nominal`` is given the factor is pose-valued: raw values are
    7-vectors ``[x, y, z, qw, qx, qy, qz]`` reduced to their pose distance
    from the nominal pose (translation plus ``beta`` times rotation angle).
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str = Field(min_length=1)
    lower: float
    upper: float
    nominal: Optional[Tuple[float, float, float, float, float, float, float]] = None
    beta: float = Field(default=1.0, ge=0.0)

    @model_validator(mode="after")
    def _bounds(self):
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise ValueError(f"bounds of '{self.name}' must be finite")
        if not self.lower < self.upper:
            raise ValueError(f"lower must be < upper for '{self.name}'")
        return self

    @property
    def is_pose(self) -> bool:
        return self.nominal is not None

    def scalar(self, value: Union[float, Sequence[float]]) -> float:
        """Reduce a raw value to the scalar that is bounded and normalized."""
        if self.is_pose and not isinstance(value, (int, float)):
            if len(value) != 7:
                raise InvalidInputError(f"'{self.name}' expects [x, y, z, qw, qx, qy, qz], got {list(value)}")
            ref = Pose(tuple(self.nominal[:3]), tuple(self.nominal[3:]))
            return pose_distance(Pose(tuple(value[:3]), tuple(value[3:])), ref, self.beta)
        if isinstance(value, (str, list, tuple)):
            raise InvalidInputError(f"'{self.name}' expects a number, got {value!r}")
        return float(value)


class DiscreteDim(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str = Field(min_length=1)
    categories: List[str] = Field(min_length=1)

    @model_validator(mode="after")
    def _unique(self):
        if len(set(self.categories)) != len(self.categories):
            raise ValueError(f"categories of '{self.name}' must be unique")
        return self


class VariationSpace(BaseModel):
    """Continuous and discrete variation factors of an experiment."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    continuous: List[ContinuousDim] = Field(default_factory=list)
    discrete: List[DiscreteDim] = Field(default_factory=list)

    @model_validator(mode="after")
    def _names(self):
        names = [d.name for d in self.continuous] + [d.name for d in self.discrete]
        if not names:
            raise ValueError("a variation space needs at least one dimension")
        if len(set(names)) != len(names):
            raise ValueError("dimension names must be unique")
        return self

    @property
    def lower(self) -> np.ndarray:
        return np.array([d.lower for d in self.continuous], dtype=float)

    @property
    def upper(self) -> np.ndarray:
        return np.array([d.upper for d in self.continuous], dtype=float)

    @property
    def combos(self) -> List[Tuple[int, ...]]:
        """Every joint category assignment, in row-major order."""
        return list(product(*(range(len(d.categories)) for d in self.discrete)))


def parse_variation_space(text: Union[str, bytes, dict]) -> VariationSpace:
    try:
        if isinstance(text, dict):
            return VariationSpace.model_validate(text)
        return VariationSpace.model_validate_json(text)
    except ValidationError as e:
        first = e.errors()[0]
        loc = ".".join(str(p) for p in first.get("loc", ()))
        raise PlanParseError(f"Invalid variation space at {loc or '<root>'}: {first['msg']}",
                             path=loc or None) from e


def normalize(space: VariationSpace,
              theta_raw: Mapping[str, Union[float, str, Sequence[float]]]) -> Dict[str, Union[float, int]]:
    """
    Map a raw parameter assignment onto the unit box.

    Continuous dims are mapped affinely to [0, 1]; pose dims are first reduced
    to their pose distance. Discrete dims become category indices.

    Raises:
        InvalidInputError: If a value is missing, out of bounds or an unknown category
    """
    out: Dict[str, Union[float, int]] = {}
    for d in space.continuous:
        if d.name not in theta_raw:
            raise InvalidInputError(f"Missing value for '{d.name}'")
        v = d.scalar(theta_raw[d.name])
        if not (d.lower <= v <= d.upper):
            raise InvalidInputError(f"'{d.name}' = {v} outside [{d.lower}, {d.upper}]")
        out[d.name] = (v - d.lower) / (d.upper - d.lower)
    for d in space.discrete:
        if d.name not in theta_raw:
            raise InvalidInputError(f"Missing value for '{d.name}'")
        label = theta_raw[d.name]
        if label not in d.categories:
            raise InvalidInputError(f"'{d.name}' has no category {label!r}")
        out[d.name] = d.categories.index(label)
    return out


def denormalize(space: VariationSpace,
                theta: Mapping[str, Union[float, int]]) -> Dict[str, Union[float, str]]:
    """Inverse of normalize; pose dims come back as pose distances."""
    out: Dict[str, Union[float, str]] = {}
    for d in space.continuous:
        out[d.name] = d.lower + float(theta[d.name]) * (d.upper - d.lower)
    for d in space.discrete:
        out[d.name] = d.categories[int(theta[d.name])]
    return out


@dataclass(frozen=True)
class Dataset:
    """
    Normalized experiment records.

    Attributes:
        space: The variation space
        cont: (n, m) continuous parameters in [0, 1]
        disc: (n, k) category indices
        outcomes: (n,) binary outcomes
    """

    space: VariationSpace
    cont: np.ndarray
    disc: np.ndarray
    outcomes: np.ndarray

    def __post_init__(self):
        n = len(self.outcomes)
        m, k = len(self.space.continuous), len(self.space.discrete)
        cont = np.asarray(self.cont, dtype=float).reshape(n, m)
        disc = np.asarray(self.disc, dtype=int).reshape(n, k)
        outcomes = np.asarray(self.outcomes, dtype=int)
        if np.any((cont < 0) | (cont > 1)) or not np.all(np.isfinite(cont)):
            raise InvalidInputError("Continuous parameters must lie in [0, 1]")
        for j, d in enumerate(self.space.discrete):
            if np.any((disc[:, j] < 0) | (disc[:, j] >= len(d.categories))):
                raise InvalidInputError(f"Category index out of range for '{d.name}'")
        if not np.all((outcomes == 0) | (outcomes == 1)):
            raise InvalidInputError("Outcomes must be 0 or 1")
        object.__setattr__(self, "cont", cont)
        object.__setattr__(self, "disc", disc)
        object.__setattr__(self, "outcomes", outcomes)

    @classmethod
    def from_records(cls, space: VariationSpace,
                     records: Sequence[Tuple[Mapping[str, object], int]]) -> "Dataset":
        """Build from ``(raw theta, outcome)`` pairs."""
        cont, disc, outcomes = [], [], []
        for theta, x in records:
            point = normalize(space, theta)
            cont.append([point[d.name] for d in space.continuous])
            disc.append([point[d.name] for d in space.discrete])
            outcomes.append(x)
        n = len(outcomes)
        return cls(space, np.array(cont, dtype=float).reshape(n, len(space.continuous)),
                   np.array(disc, dtype=int).reshape(n, len(space.discrete)), np.array(outcomes, dtype=int))

    @classmethod
    def from_episodes(cls, space: VariationSpace, episodes: Sequence[EpisodeRecord]) -> "Dataset":
        return cls.from_records(space, [(ep.variation, ep.outcome) for ep in episodes])

    def __len__(self) -> int:
        return len(self.outcomes)

    def subset(self, mask: np.ndarray) -> "Dataset":
        return Dataset(self.space, self.cont[mask], self.disc[mask], self.outcomes[mask])


# ---------------------------------------------------------------------------
# Kernel density estimation
# ---------------------------------------------------------------------------

class KernelDensity:
    """
    Weighted product-kernel Gaussian KDE on the unit box.

    Each dimension gets bandwidth ``factor * sigma_j`` where ``sigma_j`` is
    the weighted standard deviation and ``factor`` follows Scott's rule
    ``n_eff ** (-1 / (m + 4))`` (or Silverman's, or a constant). Kernels are
    reflected at 0 and 1.
    """

    def __init__(self, points: np.ndarray, weights: Optional[np.ndarray] = None,
                 bandwidth: Union[str, float] = "scott", floor: float = 1e-3):
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        self.points = points
        self.n, self.d = points.shape
        if self.n < 1 or self.d < 1:
            raise SensitivityError("KDE needs at least one point and one dimension")
        if weights is None:
            self.weights = np.full(self.n, 1.0 / self.n)
        else:
            w = np.asarray(weights, dtype=float)
            if w.shape != (self.n,) or np.any(w < 0) or not w.sum() > 0:
                raise SensitivityError("KDE weights must be non-negative with a positive sum")
            self.weights = w / w.sum()
        self.neff = ess(self.weights)

        if bandwidth == "scott":
            factor = self.neff ** (-1.0 / (self.d + 4))
        elif bandwidth == "silverman":
            factor = (self.neff * (self.d + 2.0) / 4.0) ** (-1.0 / (self.d + 4))
        elif isinstance(bandwidth, (int, float)) and bandwidth > 0:
            factor = float(bandwidth)
        else:
            raise ValueError("bandwidth should be 'scott', 'silverman' or a positive number")

        mean = self.weights @ points
        sigma = np.sqrt(self.weights @ (points - mean) ** 2)
        h = factor * sigma
        if np.any(h < floor):
            low = [j for j in range(self.d) if h[j] < floor]
            logger.warning("KDE bandwidth below %.0e in dims %s; using the floor", floor, low)
            h = np.maximum(h, floor)
        self.bandwidth = h

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Density at each row of ``x`` (shape (q, d) or (q,) for 1-D)."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None] if self.d == 1 else x[None, :]
        if x.shape[1] != self.d:
            raise SensitivityError(f"points have dimension {x.shape[1]}, KDE has dimension {self.d}")
        out = np.empty(len(x))
        for start in range(0, len(x), _CHUNK):
            chunk = x[start:start + _CHUNK]
            kern = np.ones((len(chunk), self.n))
            for j in range(self.d):
                h = self.bandwidth[j]
                xi = self.points[:, j][None, :]
                xq = chunk[:, j][:, None]
                k = (np.exp(-0.5 * ((xq - xi) / h) ** 2)
                     + np.exp(-0.5 * ((xq + xi) / h) ** 2)
                     + np.exp(-0.5 * ((xq - (2.0 - xi)) / h) ** 2))
                kern *= k / (h * _SQRT_2PI)
            out[start:start + _CHUNK] = kern @ self.weights
        return out

    __call__ = evaluate

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``size`` points, folding overshoot back into [0, 1]."""
        idx = rng.choice(self.n, size=size, p=self.weights)
        draws = self.points[idx] + rng.standard_normal((size, self.d)) * self.bandwidth
        return reflect(draws)


def reflect(x: np.ndarray) -> np.ndarray:
    """Fold values into [0, 1] by mirror reflection at the faces."""
    folded = np.mod(x, 2.0)
    return np.where(folded > 1.0, 2.0 - folded, folded)


def uniform_prior(x: np.ndarray) -> np.ndarray:
    """Uniform density on the unit box."""
    x = np.asarray(x, dtype=float)
    return np.ones(len(x))


def proposal_density(data: Union[Dataset, np.ndarray],
                     bandwidth: Union[str, float] = "scott",
                     floor: float = 1e-3) -> KernelDensity:
    """
    Estimate the density the variation parameters were sampled from.

    Args:
        data: Dataset (its continuous parameters are used) or an (n, m) array in [0, 1]
        bandwidth: "scott", "silverman" or a constant factor
        floor: Minimum per-dimension bandwidth

    Returns:
        KernelDensity: Callable density over the continuous parameters

    Raises:
        SensitivityError: With fewer than 2 records or no continuous dims
    """
    points = data.cont if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    if len(points) < 2 or points.shape[1] == 0:
        raise SensitivityError("Proposal density needs at least 2 records with continuous parameters")
    return KernelDensity(points, bandwidth=bandwidth, floor=floor)


@dataclass(frozen=True)
class ImportanceWeights:
    """Raw prior/proposal ratios and their self-normalized form."""

    raw: np.ndarray
    normalized: np.ndarray

    @property
    def ess(self) -> float:
        return ess(self.raw)


def importance_weights(samples: np.ndarray, prior: Density, proposal: Density) -> ImportanceWeights:
    """
    Weights ``prior(theta_i) / proposal(theta_i)``.

    Raises:
        SensitivityError: If the proposal density is zero at some sample
    """
    samples = np.asarray(samples, dtype=float)
    p = np.asarray(prior(samples), dtype=float)
    q = np.asarray(proposal(samples), dtype=float)
    bad = np.nonzero(~(q > 0))[0]
    if len(bad):
        i = int(bad[0])
        raise SensitivityError(f"Proposal density is zero at sample {i} ({samples[i].tolist()})")
    raw = p / q
    return ImportanceWeights(raw, raw / math.fsum(raw))


def ess(weights: Sequence[float]) -> float:
    """
    Kish effective sample size ``(sum w)^2 / sum w^2``.

    Equals ``1 / sum(w_i^2)`` for self-normalized weights; N equal weights
    give exactly N.
    """
    w = np.asarray(weights, dtype=float)
    if len(w) == 0:
        return 0.0
    if np.all(w == w[0]):
        return float(len(w))
    return math.fsum(w) ** 2 / math.fsum(w * w)


# ---------------------------------------------------------------------------
# Posterior
# ---------------------------------------------------------------------------

@dataclass
class PosteriorModel:
    """
    ``q(theta_disc | x) * q(theta_cont | theta_disc, x)``.

    Attributes:
        space: The variation space
        outcome: Conditioning outcome
        combos: Joint category assignments
        probs: Categorical probability of each combo
        kdes: Continuous density per combo (None without continuous dims)
        records: Number of records with the conditioning outcome
        weights: Importance weights over the whole dataset
    """

    space: VariationSpace
    outcome: int
    combos: List[Tuple[int, ...]]
    probs: np.ndarray
    kdes: List[Optional[KernelDensity]]
    records: int
    weights: ImportanceWeights

    def density(self, cont: np.ndarray, combo: Tuple[int, ...] = ()) -> np.ndarray:
        """Joint density of continuous points (normalized) under one category combo."""
        k = self.combos.index(tuple(combo))
        kde = self.kdes[k]
        base = kde.evaluate(cont) if kde is not None else np.ones(len(np.atleast_1d(cont)))
        return self.probs[k] * base

    def sample(self, n: int, rng: np.random.Generator) -> "PosteriorSamples":
        return sample_posterior(self, n, rng)


def _combo_index(space: VariationSpace, disc: np.ndarray) -> np.ndarray:
    sizes = [len(d.categories) for d in space.discrete]
    idx = np.zeros(len(disc), dtype=int)
    for j, size in enumerate(sizes):
        idx = idx * size + disc[:, j]
    return idx


def fit_posterior(dataset: Dataset,
                  outcome: int = 1,
                  proposal: Optional[Density] = None,
                  cfg: Optional[SensitivityConfig] = None) -> PosteriorModel:
    """
    Fit the posterior of the variation parameters given an outcome.

    Importance weights correct every record for the proposal density
    (estimated from all records when not given) against a uniform prior.
    The discrete factor is the weighted category frequency among records with
    the outcome, with add-one smoothing over every joint category. The
    continuous factor is a weighted KDE per category, or the pooled KDE for
    categories with fewer than ``min_category_records`` records.

    Args:
        dataset: Normalized records
        outcome: 0 for failures, 1 for successes
        proposal: Sampling density over the continuous parameters
        cfg: Sensitivity settings

    Returns:
        PosteriorModel: Fitted model exposing density and sampling

    Raises:
        SensitivityError: If too few records carry the outcome
    """
    cfg = cfg or SensitivityConfig()
    if outcome not in (0, 1):
        raise InvalidInputError(f"outcome must be 0 or 1, got {outcome}")
    mask = dataset.outcomes == outcome
    n_cond = int(mask.sum())
    if n_cond == 0:
        raise SensitivityError(f"No records with outcome {outcome}")
    if n_cond < cfg.min_records:
        raise SensitivityError(f"Need at least {cfg.min_records} records with outcome {outcome}, got {n_cond}")

    has_cont = dataset.cont.shape[1] > 0
    if has_cont:
        if proposal is None:
            proposal = proposal_density(dataset, floor=cfg.bandwidth_floor)
        weights = importance_weights(dataset.cont, uniform_prior, proposal)
    else:
        ones = np.ones(len(dataset))
        weights = ImportanceWeights(ones, ones / len(ones))
    logger.debug("Importance correction: ESS %.1f of %d records", weights.ess, len(dataset))

    w = weights.raw[mask]
    w_counts = w * (n_cond / math.fsum(w))
    combos = dataset.space.combos
    member = _combo_index(dataset.space, dataset.disc[mask])
    counts = np.bincount(member, weights=w_counts, minlength=len(combos))
    probs = (counts + 1.0) / (n_cond + len(combos))

    kdes: List[Optional[KernelDensity]] = []
    if has_cont:
        cont = dataset.cont[mask]
        pooled = KernelDensity(cont, w, floor=cfg.bandwidth_floor)
        for k in range(len(combos)):
            sel = member == k
            if int(sel.sum()) >= cfg.min_category_records:
                kdes.append(KernelDensity(cont[sel], w[sel], floor=cfg.bandwidth_floor))
            else:
                kdes.append(pooled)
    else:
        kdes = [None] * len(combos)
    return PosteriorModel(dataset.space, outcome, combos, probs, kdes, n_cond, weights)


@dataclass(frozen=True)
class PosteriorSamples:
    """Normalized continuous draws and category indices."""

    cont: np.ndarray
    disc: np.ndarray


def sample_posterior(model: PosteriorModel, n: int = 5000,
                     rng: Optional[np.random.Generator] = None) -> PosteriorSamples:
    """
    Ancestral sampling: a category combo from the categorical factor, then a
    draw from that combo's KDE.
    """
    if n <= 0:
        raise InvalidInputError("n must be > 0")
    rng = rng if rng is not None else np.random.default_rng(0)
    picks = rng.choice(len(model.combos), size=n, p=model.probs)
    m = len(model.space.continuous)
    cont = np.zeros((n, m))
    disc = np.zeros((n, len(model.space.discrete)), dtype=int)
    for k, combo in enumerate(model.combos):
        sel = np.nonzero(picks == k)[0]
        if not len(sel):
            continue
        disc[sel] = combo
        kde = model.kdes[k]
        if kde is not None:
            cont[sel] = kde.sample(len(sel), rng)
    return PosteriorSamples(cont, disc)


@dataclass(frozen=True)
class DimStats:
    """Posterior mean and central 95% credible interval of one dimension."""

    mean: float
    lower: float
    upper: float

    @property
    def width(self) -> float:
        return self.upper - self.lower


def posterior_stats(samples: np.ndarray, level: float = 0.95) -> List[DimStats]:
    """
    Per-dimension mean and credible interval.

    Interval endpoints are empirical quantiles with linear interpolation
    between order statistics.

    Args:
        samples: (n,) or (n, m) samples
        level: Central credible mass

    Returns:
        List[DimStats]: One entry per dimension

    Raises:
        SensitivityError: With fewer than 2 samples
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if len(x) < 2:
        raise SensitivityError("Posterior statistics need at least 2 samples")
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(x, [tail, 1.0 - tail], axis=0, method="linear")
    means = x.mean(axis=0)
    return [DimStats(float(m), float(a), float(b)) for m, a, b in zip(means, lo, hi)]


@dataclass
class PosteriorResult:
    """
    Sensitivity analysis output.

    Statistics of continuous dims are reported in normalized units; ``raw``
    holds the same statistics mapped back to the declared bounds.
    """

    space: VariationSpace
    outcome: int
    samples: PosteriorSamples
    stats: Dict[str, DimStats]
    raw: Dict[str, DimStats]
    categories: Dict[str, Dict[str, float]]
    ess: float
    records: int
    total_records: int
    weight_min: float
    weight_max: float
    seed: Optional[int] = None
    histograms: Dict[str, List[int]] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, object]:
        def stat(s: DimStats) -> Dict[str, float]:
            return {"mean": s.mean, "ci_lower": s.lower, "ci_upper": s.upper}

        return {
            "outcome": self.outcome,
            "records": self.records,
            "total_records": self.total_records,
            "n_samples": int(len(self.samples.cont)),
            "ess": self.ess,
            "weights": {"min": self.weight_min, "max": self.weight_max},
            "continuous": {name: {"normalized": stat(s), "raw": stat(self.raw[name])}
                           for name, s in self.stats.items()},
            "discrete": self.categories,
            "histograms": self.histograms,
            "metadata": {"seed": self.seed},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def analyze(dataset: Dataset,
            outcome: int = 1,
            cfg: Optional[SensitivityConfig] = None,
            seed: int = 0,
            proposal: Optional[Density] = None) -> PosteriorResult:
    """
    Fit, sample and summarize the posterior for one outcome.

    Args:
        dataset: Normalized records
        outcome: Conditioning outcome
        cfg: Sensitivity settings
        seed: Seed of the sampling generator
        proposal: Known sampling density; estimated when omitted

    Returns:
        PosteriorResult: Statistics, samples and diagnostics
    """
    cfg = cfg or SensitivityConfig()
    model = fit_posterior(dataset, outcome, proposal, cfg)
    samples = sample_posterior(model, cfg.n_samples, np.random.default_rng(seed))

    space = dataset.space
    stats: Dict[str, DimStats] = {}
    raw: Dict[str, DimStats] = {}
    histograms: Dict[str, List[int]] = {}
    if space.continuous:
        for d, s, column in zip(space.continuous, posterior_stats(samples.cont), samples.cont.T):
            span = d.upper - d.lower
            stats[d.name] = s
            raw[d.name] = DimStats(d.lower + s.mean * span, d.lower + s.lower * span, d.lower + s.upper * span)
            counts, _ = np.histogram(column, bins=cfg.histogram_bins, range=(0.0, 1.0))
            histograms[d.name] = counts.tolist()

    categories: Dict[str, Dict[str, float]] = {}
    for j, d in enumerate(space.discrete):
        freq = np.bincount(samples.disc[:, j], minlength=len(d.categories)) / len(samples.disc)
        categories[d.name] = {label: float(f) for label, f in zip(d.categories, freq)}

    w = model.weights.raw
    return PosteriorResult(space, outcome, samples, stats, raw, categories, model.weights.ess,
                           model.records, len(dataset), float(w.min()), float(w.max()), seed, histograms)


def render_histograms(result: PosteriorResult, width: int = 40) -> str:
    """Text histogram of posterior samples per continuous dim over [0, 1]."""
    lines: List[str] = []
    for name, counts in result.histograms.items():
        s = result.stats[name]
        lines.append(f"{name}  mean {s.mean:.3f}  95% CI [{s.lower:.3f}, {s.upper:.3f}]")
        bins = len(counts)
        peak = max(counts) or 1
        for i, c in enumerate(counts):
            bar = "#" * int(round(width * c / peak))
            lines.append(f"  [{i / bins:.1f}, {(i + 1) / bins:.1f})  {c:6d}  {bar}".rstrip())
        lines.append("")
    return "\n".join(lines)
