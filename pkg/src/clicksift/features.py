"""Seven structural counts per click site, normalization, entropy weights.

Counts come straight from the two dependency graphs: API nodes bucketed by
catalog category, literal nodes, and the axis graph's node census. Min-max
bounds and entropy weights are fitted on the training corpus only; at
inference a vector is scaled into the training range (clamped) and
multiplied by the weights before it reaches the detector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ir import ApiCatalog, ApiKind
from .slicer import ApiNode, ClickSite, ConstNode, Ddg

FEATURE_NAMES = (
    "axis_api",
    "view_size_api",
    "const_count",
    "rand_axis",
    "ddg_size",
    "rand_condition",
    "sys_api",
)
N_FEATURES = len(FEATURE_NAMES)


@dataclass
class FeatureVector:
    site: ClickSite
    axis_api: int
    view_size_api: int
    const_count: int
    rand_axis: int
    ddg_size: int
    rand_condition: int
    sys_api: int
    oversized: bool = False

    def to_array(self) -> np.ndarray:
        return np.array(
            [getattr(self, name) for name in FEATURE_NAMES], dtype=np.float64
        )


def _api_count(ddg: Ddg, catalog: ApiCatalog, kind: ApiKind) -> int:
    return sum(
        1
        for n in ddg.nodes
        if isinstance(n, ApiNode) and catalog.classify(n.api_name) is kind
    )


def extract_features(site: ClickSite, axis_ddg: Ddg, cond_ddg: Ddg,
                     catalog: ApiCatalog) -> FeatureVector:
    """Count the seven signals over a site's axis and condition graphs."""
    return FeatureVector(
        site=site,
        axis_api=_api_count(axis_ddg, catalog, ApiKind.AxisGetter),
        view_size_api=_api_count(axis_ddg, catalog, ApiKind.ViewSize),
        const_count=sum(1 for n in axis_ddg.nodes if isinstance(n, ConstNode)),
        rand_axis=_api_count(axis_ddg, catalog, ApiKind.Rng),
        ddg_size=axis_ddg.size(),
        rand_condition=_api_count(cond_ddg, catalog, ApiKind.Rng),
        sys_api=_api_count(cond_ddg, catalog, ApiKind.Sys),
        oversized=axis_ddg.truncated or cond_ddg.truncated,
    )


@dataclass
class NormalizationParams:
    mins: np.ndarray
    maxs: np.ndarray
    weights: np.ndarray

    def scale(self, raw: np.ndarray) -> np.ndarray:
        span = self.maxs - self.mins
        with np.errstate(divide="ignore", invalid="ignore"):
            scaled = np.where(span > 0, (raw - self.mins) / np.where(span > 0, span, 1.0), 0.0)
        return np.clip(scaled, 0.0, 1.0)


def entropy_weights(scaled: np.ndarray) -> np.ndarray:
    """Dispersion-based column weights for a min-max-scaled matrix.

    Columns are turned into sample shares p_ij; a column's entropy
    (normalized by ln n) measures how evenly its mass spreads, and the
    weight is the renormalized complement. Zero-sum columns carry no
    information and get entropy 1, hence weight 0; if every column is
    degenerate the weights fall back to uniform.
    """
    n, k = scaled.shape
    weights = np.zeros(k)
    d = np.zeros(k)
    for j in range(k):
        col = scaled[:, j]
        total = col.sum()
        if total <= 0.0:
            e = 1.0
        else:
            p = col / total
            nz = p[p > 0]
            e = -float(np.sum(nz * np.log(nz))) / math.log(n)
        d[j] = 1.0 - e
    if d.sum() == 0.0:
        return np.full(k, 1.0 / k)
    weights = d / d.sum()
    return weights


def fit_normalization(training: np.ndarray) -> NormalizationParams:
    """Min-max bounds plus entropy weights over the training matrix."""
    training = np.asarray(training, dtype=np.float64)
    if training.ndim != 2 or training.shape[0] < 2:
        raise ValueError("need a 2-d matrix with at least 2 training rows")
    mins = training.min(axis=0)
    maxs = training.max(axis=0)
    params = NormalizationParams(mins=mins, maxs=maxs, weights=None)
    scaled = params.scale(training)
    params.weights = entropy_weights(scaled)
    return params


def apply_normalization(params: NormalizationParams, raw) -> np.ndarray:
    """Weighted, clamped feature vector ready for the detector."""
    raw = raw.to_array() if isinstance(raw, FeatureVector) else np.asarray(raw, dtype=np.float64)
    return params.scale(raw) * params.weights


def vectors_to_matrix(vectors) -> np.ndarray:
    return np.array([v.to_array() for v in vectors], dtype=np.float64)


CSV_HEADER = (
    ["site_id"]
    + [f"raw_{n}" for n in FEATURE_NAMES]
    + [f"weighted_{n}" for n in FEATURE_NAMES]
    + ["oversized"]
)


def to_csv_rows(vectors, params: NormalizationParams) -> list:
    """Feature vectors as CSV rows under `CSV_HEADER`."""
    rows = []
    for v in vectors:
        raw = v.to_array()
        weighted = apply_normalization(params, raw)
        rows.append(
            [v.site.site_id()]
            + [str(int(x)) for x in raw]
            + [repr(float(x)) for x in weighted]
            + [str(int(v.oversized))]
        )
    return rows
