"""Preprocessing gate: decides whether a package enters analysis at all.

Three checks, in order: network permissions, presence of a known ad
library, and at least one view that looks like an ad carrier (string,
class-type, or banner-placement cues). Packages failing any check are
skipped with the first failing reason; ad views found by the last check
feed the slicer.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field

from .ir import Package

NETWORK_PERMISSIONS = ("INTERNET", "ACCESS_NETWORK_STATE")

DEFAULT_AD_LIBRARIES = frozenset({
    "com.ads.mobnet",
    "com.adkit.core",
    "org.adnet.sdk",
    "com.bannerly.ads",
})

DEFAULT_MARKER_TOKENS = ("ad", "ads", "banner", "interstitial")

DEFAULT_AD_CLASSES = frozenset({
    "com.ads.Banner",
    "com.ads.Interstitial",
    "com.adkit.BannerView",
    "com.bannerly.AdFrame",
})


class Verdict(enum.Enum):
    Analyze = "Analyze"
    Skip = "Skip"


class Reason(enum.Enum):
    NoNetworkPermission = "NoNetworkPermission"
    NoAdLibrary = "NoAdLibrary"
    NoAdViews = "NoAdViews"
    Pass = "Pass"


@dataclass
class AdViewRules:
    marker_tokens: tuple = DEFAULT_MARKER_TOKENS
    ad_classes: frozenset = DEFAULT_AD_CLASSES
    banner_min_width: int = 300
    banner_height_range: tuple = (40, 120)


@dataclass
class GateConfig:
    ad_libraries: frozenset = DEFAULT_AD_LIBRARIES
    rules: AdViewRules = field(default_factory=AdViewRules)


@dataclass
class GateDecision:
    verdict: Verdict
    reason: Reason
    ad_views: set


class GateConfigError(Exception):
    pass


def load_gate_config(path) -> GateConfig:
    """Gate config from JSON; unknown keys rejected, defaults fill gaps."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise GateConfigError(f"cannot load gate config {path}: {exc}") from exc
    known = {
        "ad_libraries", "marker_tokens", "ad_classes",
        "banner_min_width", "banner_height_range",
    }
    extra = set(raw) - known
    if extra:
        raise GateConfigError(f"unknown gate config keys: {sorted(extra)}")
    try:
        rules = AdViewRules(
            marker_tokens=tuple(raw.get("marker_tokens", DEFAULT_MARKER_TOKENS)),
            ad_classes=frozenset(raw.get("ad_classes", DEFAULT_AD_CLASSES)),
            banner_min_width=int(raw.get("banner_min_width", 300)),
            banner_height_range=tuple(raw.get("banner_height_range", (40, 120))),
        )
        if len(rules.banner_height_range) != 2:
            raise ValueError("banner_height_range needs exactly two bounds")
        return GateConfig(
            ad_libraries=frozenset(raw.get("ad_libraries", DEFAULT_AD_LIBRARIES)),
            rules=rules,
        )
    except (TypeError, ValueError) as exc:
        raise GateConfigError(f"malformed gate config {path}: {exc}") from exc


_WORD_RE = re.compile(r"[A-Z]?[a-z0-9]+|[A-Z]+(?![a-z])")


def _tokens(text: str) -> set:
    """Lower-cased word tokens; camel humps and separators both split."""
    return {t.lower() for t in _WORD_RE.findall(text)}


def _is_ad_view(view, rules: AdViewRules) -> bool:
    markers = {t.lower() for t in rules.marker_tokens}
    words = _tokens(view.name)
    for label in view.text_labels:
        words |= _tokens(label)
    if words & markers:
        return True
    if view.class_type in rules.ad_classes:
        return True
    lo, hi = rules.banner_height_range
    return view.width_dp >= rules.banner_min_width and lo <= view.height_dp <= hi


def apply_gate(pkg: Package, ad_library_allowlist=None, ad_view_rules=None) -> GateDecision:
    """Run the three checks and collect ad views on success."""
    allowlist = DEFAULT_AD_LIBRARIES if ad_library_allowlist is None else ad_library_allowlist
    rules = ad_view_rules or AdViewRules()

    if not any(p in pkg.manifest.permissions for p in NETWORK_PERMISSIONS):
        return GateDecision(Verdict.Skip, Reason.NoNetworkPermission, set())
    if not (pkg.manifest.libraries & set(allowlist)):
        return GateDecision(Verdict.Skip, Reason.NoAdLibrary, set())
    ad_views = {v.name for v in pkg.views if _is_ad_view(v, rules)}
    if not ad_views:
        return GateDecision(Verdict.Skip, Reason.NoAdViews, set())
    return GateDecision(Verdict.Analyze, Reason.Pass, ad_views)
