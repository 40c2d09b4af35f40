"""Control-flow graphs, call edges, and def-use / use-def chains.

Reaching definitions run per method over bitsets of definition sites;
method parameters are definitions live at entry. The fixed point itself
is delegated to one of two interchangeable backends: a compiled kernel
(`_fixpoint`, Cython) and a pure-Python fallback (`_fixpoint_py`). Both
compute identical sets; selection happens at import, and CLICKSIFT_PURE=1
forces the fallback.

Cross-method dataflow is *not* folded into the chains — the slicer walks
call boundaries explicitly, so chains stay intra-method by design.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import _fixpoint_py
from .ir import Call, Goto, IfGoto, Package, Return, StmtId, defined_var, used_vars

try:
    from . import _fixpoint  # compiled extension, optional
except ImportError:
    _fixpoint = None

_FORCE_PURE = os.environ.get("CLICKSIFT_PURE", "").strip().lower() in {"1", "true", "yes"}
_ACTIVE_BACKEND = "pure" if (_FORCE_PURE or _fixpoint is None) else "compiled"


def solver_backend() -> str:
    """Which fixed-point backend this process selected at import."""
    return _ACTIVE_BACKEND


# Parameter k of a method is modelled as a pseudo-definition with
# statement index -(k+1); real statements use their body index.


def param_def_id(cls: str, method: str, position: int) -> StmtId:
    return StmtId(cls, method, -(position + 1))


def is_param_def(sid: StmtId) -> bool:
    return sid.index < 0


def param_position(sid: StmtId) -> int:
    return -sid.index - 1


@dataclass
class MethodCfg:
    cls: str
    method: str
    n: int
    succs: list
    preds: list


@dataclass
class Icfg:
    pkg: Package
    cfgs: dict  # (cls, method) -> MethodCfg
    call_edges: dict  # call-site StmtId -> callee (cls, method)
    callers: dict = field(default_factory=dict)  # callee key -> [call-site StmtId]


def resolve_callee(pkg: Package, api_name: str):
    """Map a call's API name to a package method, if one matches exactly.

    Dotted names resolve as Class.method; bare names resolve when exactly
    one method in the package carries the name. Anything else is treated
    as an external API and carries no call edge.
    """
    if "." in api_name:
        cls_name, meth_name = api_name.rsplit(".", 1)
        if pkg.find_method(cls_name, meth_name) is not None:
            return (cls_name, meth_name)
        return None
    matches = [
        (cls.name, m.name)
        for cls, m in pkg.iter_methods()
        if m.name == api_name
    ]
    if len(matches) == 1:
        return matches[0]
    return None


def build_icfg(pkg: Package) -> Icfg:
    """Per-method CFGs plus call edges resolved by exact callee name."""
    cfgs = {}
    call_edges = {}
    callers = {}
    for cls, method in pkg.iter_methods():
        n = len(method.body)
        succs = [[] for _ in range(n)]
        for i, stmt in enumerate(method.body):
            if isinstance(stmt, Return):
                continue
            if isinstance(stmt, Goto):
                succs[i].append(method.labels[stmt.label])
                continue
            if isinstance(stmt, IfGoto):
                succs[i].append(method.labels[stmt.label])
                if i + 1 < n:
                    succs[i].append(i + 1)
                continue
            if i + 1 < n:
                succs[i].append(i + 1)
        preds = [[] for _ in range(n)]
        for i, ss in enumerate(succs):
            for s in ss:
                preds[s].append(i)
        cfgs[(cls.name, method.name)] = MethodCfg(cls.name, method.name, n, succs, preds)

        for i, stmt in enumerate(method.body):
            if isinstance(stmt, Call):
                callee = resolve_callee(pkg, stmt.api_name)
                if callee is not None:
                    site = StmtId(cls.name, method.name, i)
                    call_edges[site] = callee
                    callers.setdefault(callee, []).append(site)

    for key in callers:
        callers[key].sort(key=lambda s: (s.cls, s.method, s.index))
    return Icfg(pkg=pkg, cfgs=cfgs, call_edges=call_edges, callers=callers)


@dataclass
class DefUseChains:
    """UD: (use stmt, var) -> defs reaching it. DU: the exact inverse."""

    ud: dict
    du: dict

    def defs_reaching(self, sid: StmtId, var: str) -> frozenset:
        return self.ud.get((sid, var), frozenset())


def _solve(cfg: MethodCfg, gen, kill, entry_mask, n_defs, backend):
    if backend == "pure":
        return _fixpoint_py.solve_reaching(
            cfg.n, cfg.preds, cfg.succs, gen, kill, entry_mask
        )
    n = cfg.n
    n_words = max(1, (n_defs + 63) // 64)
    nbytes = n_words * 8

    def to_words(masks):
        arr = np.zeros((len(masks), n_words), dtype=np.uint64)
        for i, m in enumerate(masks):
            if m:
                arr[i] = np.frombuffer(m.to_bytes(nbytes, "little"), dtype=np.uint64)
        return arr

    def csr(adj):
        off = np.zeros(n + 1, dtype=np.int32)
        for i, nbrs in enumerate(adj):
            off[i + 1] = off[i] + len(nbrs)
        idx = np.zeros(off[-1], dtype=np.int32)
        pos = 0
        for nbrs in adj:
            for v in nbrs:
                idx[pos] = v
                pos += 1
        return idx, off

    pred_idx, pred_off = csr(cfg.preds)
    succ_idx, succ_off = csr(cfg.succs)
    entry = np.frombuffer(entry_mask.to_bytes(nbytes, "little"), dtype=np.uint64).copy()
    inn = _fixpoint.solve_reaching_words(
        n, n_words, pred_idx, pred_off, succ_idx, succ_off,
        to_words(gen), to_words(kill), entry,
    )
    return [int.from_bytes(inn[i].tobytes(), "little") for i in range(n)]


class _DefTables:
    """Per-method definition-site numbering and gen/kill bitmasks."""

    __slots__ = ("def_sites", "def_vars", "var_mask", "gen", "kill", "entry_mask", "n_defs")

    def __init__(self, cls_name: str, method):
        self.def_sites = [param_def_id(cls_name, method.name, k)
                          for k in range(len(method.params))]
        self.def_vars = list(method.params)
        for i, stmt in enumerate(method.body):
            v = defined_var(stmt)
            if v is not None:
                self.def_sites.append(StmtId(cls_name, method.name, i))
                self.def_vars.append(v)
        self.n_defs = len(self.def_sites)
        self.var_mask = {}
        for bit, v in enumerate(self.def_vars):
            self.var_mask[v] = self.var_mask.get(v, 0) | (1 << bit)
        self.gen = [0] * len(method.body)
        self.kill = [0] * len(method.body)
        bit = len(method.params)
        for i, stmt in enumerate(method.body):
            v = defined_var(stmt)
            if v is not None:
                self.gen[i] = 1 << bit
                self.kill[i] = self.var_mask[v]
                bit += 1
        self.entry_mask = (1 << len(method.params)) - 1


def _solve_method(cfg: MethodCfg, tables: _DefTables, backend: str):
    return _solve(cfg, tables.gen, tables.kill, tables.entry_mask,
                  tables.n_defs, backend)


def compute_chains(icfg: Icfg, backend: str | None = None) -> DefUseChains:
    """Reaching-definitions fixed point per method, folded into UD/DU maps.

    `backend` overrides the import-time selection ("pure" or "compiled");
    used by the parity tests and the benchmark.
    """
    if backend is None:
        backend = _ACTIVE_BACKEND
    if backend == "compiled" and _fixpoint is None:
        raise RuntimeError("compiled fixed-point kernel is not available")

    ud = {}
    du = {}
    for cls, method in icfg.pkg.iter_methods():
        cfg = icfg.cfgs[(cls.name, method.name)]
        tables = _DefTables(cls.name, method)
        inn = _solve_method(cfg, tables, backend)

        for sid, v in zip(tables.def_sites, tables.def_vars):
            du[(sid, v)] = set()
        for i, stmt in enumerate(method.body):
            use_site = StmtId(cls.name, method.name, i)
            for v in set(used_vars(stmt)):
                bits = inn[i] & tables.var_mask.get(v, 0)
                defs = set()
                while bits:
                    low = bits & -bits
                    defs.add(tables.def_sites[low.bit_length() - 1])
                    bits ^= low
                ud[(use_site, v)] = frozenset(defs)
                for d in defs:
                    du[(d, v)].add(use_site)

    du = {k: frozenset(v) for k, v in du.items()}
    return DefUseChains(ud=ud, du=du)


# ---------------------------------------------------------------------------
# Debug dumps (CLI `dump` subcommand)


def dump_cfg(icfg: Icfg) -> str:
    lines = []
    for (cls_name, meth_name), cfg in sorted(icfg.cfgs.items()):
        lines.append(f"cfg {cls_name}::{meth_name} ({cfg.n} statements)")
        for i in range(cfg.n):
            succ = ",".join(str(s) for s in cfg.succs[i]) or "-"
            lines.append(f"  {i} -> {succ}")
    for site in sorted(icfg.call_edges, key=lambda s: (s.cls, s.method, s.index)):
        callee = icfg.call_edges[site]
        lines.append(f"call {site} -> {callee[0]}::{callee[1]}")
    return "\n".join(lines) + "\n"


def dump_chains(chains: DefUseChains) -> str:
    lines = []
    for (sid, var) in sorted(chains.ud, key=lambda k: (k[0].cls, k[0].method, k[0].index, k[1])):
        defs = sorted(chains.ud[(sid, var)], key=lambda d: d.index)
        rendered = ", ".join(repr(d) for d in defs) or "-"
        lines.append(f"ud {sid} {var}: {rendered}")
    return "\n".join(lines) + "\n"
