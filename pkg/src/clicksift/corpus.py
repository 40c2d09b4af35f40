"""Deterministic synthetic corpus: benign and fraudulent click-site packages.

Benign samples forward real event coordinates into the dispatched event,
optionally transforming them (offsets, scaling, clamping to the view).
Fraud samples implement one of four construction strategies:

  randomcoords      coordinates = rng * view size (plus optional offsets)
  randomtiming      view-center coordinates behind an rng trigger guard
  followuserclick   re-dispatch inside onClick, user coords + rng jitter
  serverconfigured  coordinates and trigger read from remote-config APIs

Every sample passes the preprocessing gate (network permission, a known
ad library, one ad view). Structural noise — dead statements, wrapper
call depth, decoy views — never touches the slice, so a strategy's
feature signature is stable by construction. Generation is a pure
function of the seed.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path

from .gate import DEFAULT_AD_LIBRARIES
from .ir import parse_package

BENIGN = "benign"
RANDOM_COORDS = "randomcoords"
RANDOM_TIMING = "randomtiming"
FOLLOW_USER_CLICK = "followuserclick"
SERVER_CONFIGURED = "serverconfigured"

STRATEGIES = (RANDOM_COORDS, RANDOM_TIMING, FOLLOW_USER_CLICK, SERVER_CONFIGURED)

# Feature predicates each strategy's sites must satisfy end-to-end
# (checked by the property tests against the real pipeline).
SIGNATURES = {
    BENIGN: lambda f: f.axis_api >= 1 and f.rand_axis == 0,
    RANDOM_COORDS: lambda f: f.axis_api == 0 and f.rand_axis >= 1 and f.view_size_api >= 1,
    RANDOM_TIMING: lambda f: f.rand_condition >= 1 and f.axis_api == 0,
    FOLLOW_USER_CLICK: lambda f: f.axis_api >= 1 and f.rand_axis >= 1,
    SERVER_CONFIGURED: lambda f: f.axis_api == 0 and f.sys_api >= 1,
}

MANIFEST_NAME = "labels.manifest"


@dataclass
class GenSpec:
    seed: int = 0
    n_benign: int = 0
    n_fraud: int = 0
    mix: dict = field(default_factory=lambda: {s: 0.25 for s in STRATEGIES})
    max_dead_stmts: int = 12
    max_wrapper_depth: int = 2
    max_decoy_views: int = 2
    sites_per_package: int = 1

    def validate(self) -> None:
        if self.n_benign < 0 or self.n_fraud < 0:
            raise ValueError("sample counts must be non-negative")
        if self.sites_per_package < 1:
            raise ValueError("sites_per_package must be at least 1")
        unknown = set(self.mix) - set(STRATEGIES)
        if unknown:
            raise ValueError(f"unknown strategies in mix: {sorted(unknown)}")
        total = sum(self.mix.values())
        if self.n_fraud and abs(total - 1.0) > 1e-9:
            raise ValueError(f"mix proportions must sum to 1, got {total}")
        if not (0 <= self.max_dead_stmts <= 30):
            raise ValueError("max_dead_stmts must be in 0..30")
        if not (0 <= self.max_wrapper_depth <= 3):
            raise ValueError("max_wrapper_depth must be in 0..3")


def _strategy_counts(spec: GenSpec) -> dict:
    """Largest-remainder apportionment of n_fraud over the mix."""
    if spec.n_fraud == 0:
        return {s: 0 for s in STRATEGIES}
    shares = {s: spec.mix.get(s, 0.0) * spec.n_fraud for s in STRATEGIES}
    counts = {s: int(shares[s]) for s in STRATEGIES}
    leftover = spec.n_fraud - sum(counts.values())
    by_remainder = sorted(STRATEGIES, key=lambda s: (-(shares[s] - counts[s]), s))
    for s in by_remainder[:leftover]:
        counts[s] += 1
    return counts


class _Emitter:
    """Accumulates one package's IR lines."""

    def __init__(self, package_id: str, rng: random.Random):
        self.rng = rng
        self.lines = [f"package {package_id}"]
        self.n_label = 0
        self.n_tmp = 0

    def fresh_label(self) -> str:
        self.n_label += 1
        return f"L{self.n_label}"

    def fresh(self, stem: str) -> str:
        self.n_tmp += 1
        return f"{stem}{self.n_tmp}"

    def line(self, text: str) -> None:
        self.lines.append(text)

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


_AD_VIEW_CHOICES = (
    # (name, class, w, h, text) — each passes a different ad-view rule
    ("adBanner", "com.ads.Banner", 320, 50, "sponsored"),
    ("promoFrame", "com.ads.Banner", 200, 30, "offers"),
    ("wideStrip", "widget.Frame", 320, 50, "top picks"),
    ("adView", "widget.Frame", 160, 160, "hot deals"),
)

_DECOY_VIEWS = (
    ("mainList", "widget.ListView", 360, 520, "items"),
    ("navBar", "widget.Toolbar", 360, 56, "home"),
    ("photoPane", "widget.ImageView", 240, 240, "gallery"),
)


def _emit_header(em: _Emitter, max_decoy_views: int) -> str:
    """Manifest, libraries, one ad view plus decoys; returns the ad view name."""
    rng = em.rng
    if rng.random() < 0.1:
        em.line("permission ACCESS_NETWORK_STATE")
    else:
        em.line("permission INTERNET")
        if rng.random() < 0.5:
            em.line("permission ACCESS_NETWORK_STATE")
    if rng.random() < 0.3:
        em.line("permission WAKE_LOCK")
    em.line(f"library {rng.choice(sorted(DEFAULT_AD_LIBRARIES))}")
    if rng.random() < 0.3:
        em.line("library org.json.parser")

    name, cls, w, h, text = rng.choice(_AD_VIEW_CHOICES)
    em.line(f'view {name} class={cls} w={w} h={h} text="{text}"')
    max_decoys = min(max_decoy_views, len(_DECOY_VIEWS))
    for decoy in rng.sample(_DECOY_VIEWS, k=rng.randint(0, max_decoys)):
        dn, dc, dw, dh, dt = decoy
        em.line(f'view {dn} class={dc} w={dw} h={dh} text="{dt}"')
    return name


def _dead_block(em: _Emitter, n: int) -> list:
    """Straight-line statements no slice can reach."""
    if n <= 0:
        return []
    rng = em.rng
    out = []
    prev = None
    for _ in range(n):
        v = em.fresh("dead")
        roll = rng.random()
        if prev is None or roll < 0.4:
            out.append(f"  {v} = const {rng.randint(1, 99)}")
        elif roll < 0.7:
            op = rng.choice(("add", "sub", "mul"))
            out.append(f"  {v} = {op} {prev} {rng.randint(1, 9)}")
        elif roll < 0.85:
            out.append(f"  {v} = call Random.nextInt({rng.randint(2, 50)})")
        else:
            out.append(f"  {v} = call System.currentTimeMillis()")
        prev = v
    return out


def _guard_lines(em: _Emitter, kind: str, ctx: dict) -> tuple:
    """(prelude lines, guard line, skip label) for a dispatch guard."""
    skip = em.fresh_label()
    rng = em.rng
    if kind == "rng":
        g = em.fresh("g")
        pre = [f"  {g} = call Random.nextFloat()"]
        guard = f"  if {g} > {round(rng.uniform(0.3, 0.8), 2)} goto {skip}"
    elif kind == "sys":
        g = em.fresh("ns")
        api = rng.choice(("Connectivity.getNetworkState", "Battery.getLevel"))
        pre = [f"  {g} = call {api}()"]
        guard = f"  if {g} < {rng.randint(1, 3)} goto {skip}"
    elif kind == "sys2":
        g1 = em.fresh("ns")
        g2 = em.fresh("bl")
        pre = [
            f"  {g1} = call Connectivity.getNetworkState()",
            f"  {g2} = call Battery.getLevel()",
        ]
        guard = f"  if {g1} < {g2} goto {skip}"
        # second sys value feeds the comparison, both land in the slice
    elif kind == "axisvar":
        guard = f"  if {ctx['xvar']} < {rng.randint(0, 2)} goto {skip}"
        pre = []
    else:
        raise ValueError(kind)
    return pre, guard, skip


def _site_tail(em: _Emitter, recv: str, xvar: str, yvar: str, guard: str | None,
               ctx: dict) -> list:
    """obtain + (optionally guarded) dispatch + return."""
    rng = em.rng
    fake = em.fresh("fake")
    lines = []
    if rng.random() < 0.4:
        t = em.fresh("t")
        lines.append(f"  {t} = call System.currentTimeMillis()")
        head = f"{t}, {t}"
    else:
        head = "0, 0"
    lines.append(f"  {fake} = call MotionEvent.obtain({head}, 0, {xvar}, {yvar}, 0)")
    if guard is not None:
        pre, cond, skip = _guard_lines(em, guard, {**ctx, "xvar": xvar})
        lines = pre + lines
        lines.append(cond)
        ok = em.fresh("ok")
        lines.append(f"  {ok} = call {recv} View.dispatchTouchEvent({fake})")
        lines.append(f"  label {skip}")
    else:
        ok = em.fresh("ok")
        lines.append(f"  {ok} = call {recv} View.dispatchTouchEvent({fake})")
    lines.append("  return")
    return lines


# --- coordinate recipes ----------------------------------------------------
# Each returns (lines, xvar, yvar). `recv` resolves to the ad view; `ev`
# is the incoming event variable for user-triggered methods. Benign
# recipes read the user's coordinates and at most lightly reshape them;
# fraud recipes fabricate coordinates, and always consult the view size
# (to land the click inside the ad), which is what separates them from
# plain relays of equal slice size.


def _coords_forward(em, recv, ev, raw=False):
    sx = "getRawX" if raw else "getX"
    sy = "getRawY" if raw else "getY"
    x, y = em.fresh("x"), em.fresh("y")
    return [f"  {x} = call {ev} MotionEvent.{sx}()",
            f"  {y} = call {ev} MotionEvent.{sy}()"], x, y


def _coords_relay(em, recv, ev, hops):
    # copies only: grows the slice without adding constants or view reads
    lines, x, y = _coords_forward(em, recv, ev)
    for _ in range(hops):
        nx, ny = em.fresh("x"), em.fresh("y")
        lines.append(f"  {nx} = copy {x}")
        lines.append(f"  {ny} = copy {y}")
        x, y = nx, ny
    return lines, x, y


def _coords_offset_light(em, recv, ev):
    # one constant offset on one axis
    lines, x, y = _coords_forward(em, recv, ev)
    nx = em.fresh("x")
    op = em.rng.choice(("add", "sub"))
    lines.append(f"  {nx} = {op} {x} {em.rng.randint(1, 8)}")
    return lines, nx, y


def _coords_single_axis(em, recv, ev):
    x, y = em.fresh("x"), em.fresh("y")
    return [f"  {x} = call {ev} MotionEvent.getX()",
            f"  {y} = const {em.rng.randint(20, 600)}"], x, y


def _coords_clamp(em, recv, ev, both):
    lines, x, y = _coords_forward(em, recv, ev)
    w = em.fresh("w")
    cx = em.fresh("x")
    lines += [
        f"  {w} = call {recv} View.getWidth()",
        f"  {cx} = mod {x} {w}",
    ]
    if both:
        h = em.fresh("h")
        cy = em.fresh("y")
        lines += [
            f"  {h} = call {recv} View.getHeight()",
            f"  {cy} = mod {y} {h}",
        ]
        return lines, cx, cy
    return lines, cx, y


def _pad(em, lines, v, hops):
    for _ in range(hops):
        nv = em.fresh("p")
        lines.append(f"  {nv} = copy {v}")
        v = nv
    return v


def _coords_random_size(em, recv, ev, shape):
    rng = em.rng
    r1, r2 = em.fresh("r"), em.fresh("r")
    w, h = em.fresh("w"), em.fresh("h")
    x, y = em.fresh("x"), em.fresh("y")
    api = rng.choice(("Random.nextFloat", "Random.nextDouble", "Math.random"))
    lines = [
        f"  {r1} = call {api}()",
        f"  {r2} = call {api}()",
        f"  {w} = call {recv} View.getWidth()",
        f"  {h} = call {recv} View.getHeight()",
        f"  {x} = mul {r1} {w}",
        f"  {y} = mul {r2} {h}",
    ]
    if shape == "bare":
        return lines, x, y
    if shape == "offsets":
        ox, oy = em.fresh("x"), em.fresh("y")
        lines.append(f"  {ox} = add {x} {rng.randint(1, 12)}")
        lines.append(f"  {oy} = add {y} {rng.randint(1, 12)}")
        return lines, ox, oy
    x = _pad(em, lines, x, 2)
    y = _pad(em, lines, y, 2)
    return lines, x, y


def _coords_view_center(em, recv, ev):
    w, h = em.fresh("w"), em.fresh("h")
    x, y = em.fresh("x"), em.fresh("y")
    lines = [
        f"  {w} = call {recv} View.getWidth()",
        f"  {h} = call {recv} View.getHeight()",
        f"  {x} = div {w} 2",
        f"  {y} = div {h} 2",
    ]
    x = _pad(em, lines, x, 2)
    y = _pad(em, lines, y, 2)
    return lines, x, y


def _coords_jitter(em, recv, ev, both_clamped):
    # user's coordinates plus rng jitter, pulled back inside the ad view
    rng = em.rng
    lines, gx, gy = _coords_forward(em, recv, ev)
    api = rng.choice(("Random.nextGaussian", "Random.nextFloat"))
    const_amp = rng.random() < 0.5  # else amplitude is a second rng read
    w = em.fresh("w")
    lines.append(f"  {w} = call {recv} View.getWidth()")

    def jitter_axis(gv, clamp_to):
        r = em.fresh("r")
        j = em.fresh("j")
        v1 = em.fresh("x")
        lines.append(f"  {r} = call {api}()")
        if const_amp:
            lines.append(f"  {j} = mul {r} {rng.randint(2, 9)}")
        else:
            r2 = em.fresh("r")
            lines.append(f"  {r2} = call {api}()")
            lines.append(f"  {j} = mul {r} {r2}")
        lines.append(f"  {v1} = add {gv} {j}")
        if clamp_to is None:
            return v1
        v2 = em.fresh("x")
        lines.append(f"  {v2} = mod {v1} {clamp_to}")
        return v2

    x = jitter_axis(gx, w)
    if both_clamped:
        h = em.fresh("h")
        lines.append(f"  {h} = call {recv} View.getHeight()")
        y = jitter_axis(gy, h)
    else:
        y = jitter_axis(gy, None)
    return lines, x, y


def _coords_remote(em, recv, ev, both_clamped):
    # coordinates from remote-config reads, pulled inside the ad view
    rng = em.rng
    const_offsets = rng.random() < 0.5
    lines = []
    w = em.fresh("w")
    lines.append(f"  {w} = call {recv} View.getWidth()")

    def remote_axis(api, clamp_to, pad):
        ns = em.fresh("cf")
        lines.append(f"  {ns} = call {api}()")
        if const_offsets:
            v1 = em.fresh("x")
            lines.append(f"  {v1} = add {ns} {rng.randint(5, 60)}")
        else:
            v1 = _pad(em, lines, ns, pad)
        if clamp_to is None:
            return v1
        v2 = em.fresh("x")
        lines.append(f"  {v2} = mod {v1} {clamp_to}")
        return v2

    x = remote_axis("Connectivity.getNetworkState", w, pad=2)
    if both_clamped:
        h = em.fresh("h")
        lines.append(f"  {h} = call {recv} View.getHeight()")
        y = remote_axis("Battery.getLevel", h, pad=2)
    else:
        y = remote_axis("Battery.getLevel", None, pad=2)
    return lines, x, y


def _emit_sample(em: _Emitter, label: str, strategy: str | None,
                 spec: GenSpec) -> None:
    rng = em.rng
    view = _emit_header(em, spec.max_decoy_views)

    em.line("class Main")

    user_triggered = label == BENIGN or strategy == FOLLOW_USER_CLICK
    site_methods = []
    for s in range(spec.sites_per_package):
        suffix = "" if s == 0 else str(s)
        if user_triggered:
            name = f"onClick{suffix}"
            params = [view, "ev"]
            recv, ev = view, "ev"
        else:
            name = f"{rng.choice(('autoClick', 'tick', 'run'))}{suffix}"
            params = []
            recv, ev = None, None
        site_methods.append((name, params, recv, ev))

    wrapper_depth = rng.randint(0, spec.max_wrapper_depth)

    for idx, (name, params, recv, ev) in enumerate(site_methods):
        body_name = name if wrapper_depth == 0 else f"{name}Impl"
        # entry method (and wrappers) delegate to the body
        if wrapper_depth > 0:
            chain = [name] + [f"{name}Hop{d}" for d in range(1, wrapper_depth)] + [body_name]
            guard_callers = rng.random() < 0.4
            for d in range(wrapper_depth):
                em.line(f"method {chain[d]}({','.join(params)})")
                args = ",".join(params)
                if d == 0 and guard_callers and ev is not None:
                    px = em.fresh("px")
                    skip = em.fresh_label()
                    em.line(f"  {px} = call {ev} MotionEvent.getX()")
                    em.line(f"  if {px} < 0 goto {skip}")
                    em.line(f"  call {chain[d + 1]}({args})")
                    em.line(f"  label {skip}")
                else:
                    em.line(f"  call {chain[d + 1]}({args})")
                em.line("  return")
                em.line("endmethod")

        em.line(f"method {body_name}({','.join(params)})")
        dead = rng.randint(0, spec.max_dead_stmts)
        for dl in _dead_block(em, dead // 2):
            em.line(dl)

        if recv is None:
            recv = em.fresh("av")
            em.line(f'  {recv} = const "{view}"')

        if label == BENIGN:
            template = rng.choices(
                ("forward", "forward_raw", "single_axis", "offset_light",
                 "relay2", "relay3", "relay4", "clamp1", "clampboth"),
                weights=(20, 8, 8, 8, 8, 10, 10, 14, 14),
            )[0]
            # rng below is the benign A/B-sampling guard: random conditions
            # occur in legitimate apps too — but never on the view-reading
            # (clamp) templates, whose profile plus a random guard would be
            # exactly the bare fraudulent shape.
            guard = None
            if template == "forward":
                lines, x, y = _coords_forward(em, recv, ev)
                guard = rng.choices((None, "sys", "axisvar", "rng"),
                                    weights=(2, 3, 1, 3))[0]
            elif template == "forward_raw":
                lines, x, y = _coords_forward(em, recv, ev, raw=True)
                guard = rng.choices((None, "sys", "rng"), weights=(4, 3, 3))[0]
            elif template == "single_axis":
                lines, x, y = _coords_single_axis(em, recv, ev)
                guard = rng.choices((None, "rng"), weights=(8, 2))[0]
            elif template == "offset_light":
                lines, x, y = _coords_offset_light(em, recv, ev)
                guard = rng.choices((None, "rng"), weights=(17, 3))[0]
            elif template == "relay2":
                lines, x, y = _coords_relay(em, recv, ev, hops=2)
                guard = rng.choices((None, "rng"), weights=(8, 2))[0]
            elif template == "relay3":
                lines, x, y = _coords_relay(em, recv, ev, hops=3)
                guard = rng.choices((None, "rng"), weights=(8, 2))[0]
            elif template == "relay4":
                lines, x, y = _coords_relay(em, recv, ev, hops=4)
                guard = rng.choices((None, "rng"), weights=(8, 2))[0]
            elif template == "clamp1":
                lines, x, y = _coords_clamp(em, recv, ev, both=False)
            else:
                lines, x, y = _coords_clamp(em, recv, ev, both=True)
        elif strategy == RANDOM_COORDS:
            shape = rng.choices(("bare", "offsets", "copies"), weights=(3, 3, 4))[0]
            lines, x, y = _coords_random_size(em, recv, ev, shape)
            # the bare rng*size shape always randomizes its trigger too
            guard = "rng" if (shape == "bare" or rng.random() < 0.2) else None
        elif strategy == RANDOM_TIMING:
            lines, x, y = _coords_view_center(em, recv, ev)
            guard = "rng"
        elif strategy == FOLLOW_USER_CLICK:
            lines, x, y = _coords_jitter(em, recv, ev, both_clamped=True)
            guard = "rng" if rng.random() < 0.6 else None
        elif strategy == SERVER_CONFIGURED:
            lines, x, y = _coords_remote(em, recv, ev,
                                         both_clamped=rng.random() < 0.5)
            guard = "sys2" if rng.random() < 0.4 else "sys"
        else:
            raise ValueError(f"unknown strategy {strategy!r}")

        for ln in lines:
            em.line(ln)
        for ln in _site_tail(em, recv, x, y, guard, {}):
            em.line(ln)
        em.line("endmethod")

    # occasional handler dispatching to a decoy (non-ad) view: never a site
    decoy_names = [v[0] for v in _DECOY_VIEWS]
    if rng.random() < 0.25:
        em.line(f"method onScroll({decoy_names[0]},ev)")
        x2, y2 = em.fresh("x"), em.fresh("y")
        f2, ok2 = em.fresh("fake"), em.fresh("ok")
        em.line(f"  {x2} = call ev MotionEvent.getX()")
        em.line(f"  {y2} = call ev MotionEvent.getY()")
        em.line(f"  {f2} = call MotionEvent.obtain(0, 0, 0, {x2}, {y2}, 0)")
        em.line(f"  {ok2} = call {decoy_names[0]} View.dispatchTouchEvent({f2})")
        em.line("  return")
        em.line("endmethod")

    if rng.random() < 0.4:
        em.line("method housekeeping()")
        for dl in _dead_block(em, rng.randint(1, max(1, spec.max_dead_stmts))):
            em.line(dl)
        em.line("  return")
        em.line("endmethod")

    em.line("endclass")
    em.line("endpackage")


def generate(spec: GenSpec, out_dir) -> list:
    """Write the corpus and labels manifest; returns (filename, label, strategy) rows."""
    spec.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(spec.seed)
    rows = []

    def emit(package_id: str, label: str, strategy: str | None) -> str:
        em = _Emitter(package_id, random.Random(rng.getrandbits(64)))
        _emit_sample(em, label, strategy, spec)
        text = em.text()
        parse_package(text)  # generated samples must always be valid IR
        filename = f"{package_id}.ir"
        (out / filename).write_text(text, encoding="utf-8")
        return filename

    for i in range(spec.n_benign):
        filename = emit(f"benign_{i:04d}", BENIGN, None)
        rows.append((filename, BENIGN, "-"))
    counts = _strategy_counts(spec)
    i = 0
    for strategy in STRATEGIES:
        for _ in range(counts[strategy]):
            filename = emit(f"fraud_{i:04d}", "fraud", strategy)
            rows.append((filename, "fraud", strategy))
            i += 1

    manifest = "".join(f"{name} {label} {strat}\n" for name, label, strat in rows)
    (out / MANIFEST_NAME).write_text(manifest, encoding="utf-8")
    return rows


def load_manifest(path) -> list:
    """Rows of (filename, label, strategy) from a labels manifest."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3 or parts[1] not in ("benign", "fraud"):
                raise ValueError(f"{path}:{ln}: malformed manifest line {line!r}")
            rows.append(tuple(parts))
    return rows
