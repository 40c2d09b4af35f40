"""Click-site location and backward dependency slicing.

A click site pairs a synthetic-event constructor call with the dispatch
call its value flows into, provided the dispatch receiver resolves to an
ad view. Each site gets two dependency graphs: one rooted at the
constructor's x/y coordinate arguments, one at the operands of the
branches guarding the dispatch (intra-method control dependence plus the
immediate caller's guards).

Graph construction is a breadth-first fixed point over four expansion
rules: constants terminate in literal nodes, external/platform API calls
collapse to a single API node per call site, variables pull in their
definition sites through the UD chains, and method parameters fan out to
the argument operands of every caller. Call-boundary crossings (either
into a callee's return value or out to callers) raise the context depth;
depth and node budgets guarantee termination on recursive call graphs,
in which case the graph is flagged truncated instead of failing.
"""

from __future__ import annotations

from dataclasses import dataclass

from .dataflow import DefUseChains, Icfg, is_param_def, param_position
from .ir import (
    ApiCatalog,
    ApiKind,
    BinOp,
    Call,
    Const,
    ConstAssign,
    Copy,
    Package,
    Return,
    StmtId,
)

# ---------------------------------------------------------------------------
# Graph node kinds. Identity is the construction site, so two calls to the
# same API are two nodes and each literal occurrence counts once.


@dataclass(frozen=True)
class ConstNode:
    site: StmtId
    slot: int  # -1 for a const assignment's literal, else operand position
    value: object


@dataclass(frozen=True)
class ApiNode:
    site: StmtId
    api_name: str


@dataclass(frozen=True)
class VarDefNode:
    site: StmtId


@dataclass(frozen=True)
class ParamNode:
    cls: str
    method: str
    position: int


@dataclass
class Ddg:
    nodes: set
    edges: set  # (dependent, dependency) pairs
    roots: set
    truncated: bool = False

    @staticmethod
    def empty() -> "Ddg":
        return Ddg(nodes=set(), edges=set(), roots=set())

    def size(self) -> int:
        return len(self.nodes)


@dataclass(frozen=True)
class SliceLimits:
    max_depth: int = 10
    max_nodes: int = 10_000


@dataclass
class ClickSite:
    obtain_stmt: StmtId
    dispatch_stmt: StmtId
    target_view: str
    axis_roots: list  # (operand, use-site StmtId)
    condition_roots: list

    def site_id(self) -> str:
        return f"{self.obtain_stmt.cls}::{self.obtain_stmt.method}#{self.obtain_stmt.index}"

    def location(self) -> str:
        return self.obtain_stmt.location()


# Canonical synthetic-event constructor argument order:
# (downTime, eventTime, action, x, y, metaState).
AXIS_X_ARG = 3
AXIS_Y_ARG = 4
DISPATCH_EVENT_ARG = 0


# ---------------------------------------------------------------------------
# Graph construction


class _Builder:
    def __init__(self, icfg: Icfg, chains: DefUseChains, catalog: ApiCatalog, limits: SliceLimits):
        self.pkg = icfg.pkg
        self.icfg = icfg
        self.chains = chains
        self.catalog = catalog
        self.limits = limits

    def def_node(self, d: StmtId):
        """The node standing for a definition site."""
        if is_param_def(d):
            return ParamNode(d.cls, d.method, param_position(d))
        stmt = self.pkg.statement(d)
        if isinstance(stmt, Call) and d not in self.icfg.call_edges:
            return ApiNode(d, stmt.api_name)
        return VarDefNode(d)

    def operand_nodes(self, op, use_site: StmtId, slot: int) -> list:
        """Nodes an operand's value flows from (one per reaching def)."""
        if isinstance(op, Const):
            return [ConstNode(use_site, slot, op.value)]
        defs = sorted(
            self.chains.defs_reaching(use_site, op),
            key=lambda d: (d.cls, d.method, d.index),
        )
        return [self.def_node(d) for d in defs]

    def children(self, node) -> "list[tuple]":
        """(child node, depth increment) pairs for one expansion step."""
        if isinstance(node, (ConstNode, ApiNode)):
            return []
        if isinstance(node, ParamNode):
            out = []
            for call_site in self.icfg.callers.get((node.cls, node.method), []):
                call = self.pkg.statement(call_site)
                if node.position < len(call.args):
                    arg = call.args[node.position]
                    for child in self.operand_nodes(arg, call_site, node.position):
                        out.append((child, 1))
            return out
        stmt = self.pkg.statement(node.site)
        if isinstance(stmt, ConstAssign):
            return [(ConstNode(node.site, -1, stmt.literal.value), 0)]
        if isinstance(stmt, Copy):
            return [(c, 0) for c in self.operand_nodes(stmt.source, node.site, 0)]
        if isinstance(stmt, BinOp):
            out = [(c, 0) for c in self.operand_nodes(stmt.lhs, node.site, 0)]
            out += [(c, 0) for c in self.operand_nodes(stmt.rhs, node.site, 1)]
            return out
        if isinstance(stmt, Call):
            # Resolved developer call: inline the callee's return values.
            callee_key = self.icfg.call_edges[node.site]
            method = self.pkg.find_method(*callee_key)
            out = []
            for i, s in enumerate(method.body):
                if isinstance(s, Return) and s.value is not None:
                    ret_site = StmtId(callee_key[0], callee_key[1], i)
                    for child in self.operand_nodes(s.value, ret_site, 0):
                        out.append((child, 1))
            return out
        return []


def build_ddg(icfg: Icfg, chains: DefUseChains, roots, catalog: ApiCatalog,
              limits: SliceLimits = SliceLimits()) -> Ddg:
    """Backward slice from root operand occurrences to a dependency graph.

    roots: iterable of (operand, use-site) pairs; duplicates collapse.
    Expansion runs breadth-first, so every node is reached at its minimal
    call depth; a node is expanded at most once. Exceeding either budget
    stops expansion and marks the graph truncated.
    """
    builder = _Builder(icfg, chains, catalog, limits)
    root_occurrences = list(dict.fromkeys(roots))
    if not root_occurrences:
        raise ValueError("roots must be non-empty")

    ddg = Ddg(nodes=set(), edges=set(), roots=set())
    queue = []

    def admit(node, depth) -> bool:
        """Add a node if budgets allow; queue it for expansion once."""
        if node in ddg.nodes:
            return True
        if len(ddg.nodes) >= builder.limits.max_nodes:
            ddg.truncated = True
            return False
        ddg.nodes.add(node)
        queue.append((node, depth))
        return True

    slot = 0
    for op, use_site in root_occurrences:
        for node in builder.operand_nodes(op, use_site, slot):
            if admit(node, 0):
                ddg.roots.add(node)
        slot += 1

    head = 0
    while head < len(queue):
        node, depth = queue[head]
        head += 1
        for child, inc in builder.children(node):
            child_depth = depth + inc
            if child_depth > builder.limits.max_depth:
                ddg.truncated = True
                continue
            if admit(child, child_depth):
                ddg.edges.add((node, child))
    return ddg


# ---------------------------------------------------------------------------
# Control dependence (intra-method, postdominator based)


def _postdominators(cfg) -> list:
    """pdom[i] = set of statements postdominating i (including i)."""
    n = cfg.n
    exit_id = n  # virtual exit joins every terminal statement
    full = set(range(n + 1))
    pdom = [set(full) for _ in range(n)] + [{exit_id}]
    succs = [list(cfg.succs[i]) if cfg.succs[i] else [exit_id] for i in range(n)]
    changed = True
    while changed:
        changed = False
        for i in range(n - 1, -1, -1):
            acc = set(full)
            for s in succs[i]:
                acc &= pdom[s]
            acc = {i} | acc
            if acc != pdom[i]:
                pdom[i] = acc
                changed = True
    return pdom


def control_dependencies(cfg) -> dict:
    """stmt index -> indexes of the two-way branches it is control-dependent on."""
    pdom = _postdominators(cfg)
    deps = {i: set() for i in range(cfg.n)}
    for b in range(cfg.n):
        if len(cfg.succs[b]) != 2:
            continue
        for s in range(cfg.n):
            if s == b:
                continue
            if s in pdom[b]:
                continue
            if any(s in pdom[u] for u in cfg.succs[b]):
                deps[s].add(b)
    return deps


# ---------------------------------------------------------------------------
# Receiver-to-view binding


def resolve_receiver_view(pkg: Package, icfg: Icfg, chains: DefUseChains,
                          use_site: StmtId, var: str, depth: int = 3,
                          view_names=None):
    """Resolve a receiver variable to a view name from `view_names`.

    Binding walks copies and constant strings through the UD chains; a
    method parameter binds either by carrying a view's name or through
    the arguments of the method's callers (bounded depth). `view_names`
    defaults to the package's declared views.
    """
    views = pkg.view_names() if view_names is None else view_names

    def walk(site: StmtId, v: str, remaining: int):
        if remaining < 0:
            return None
        for d in sorted(chains.defs_reaching(site, v), key=lambda s: (s.cls, s.method, s.index)):
            if is_param_def(d):
                if v in views:
                    return v
                pos = param_position(d)
                for call_site in icfg.callers.get((d.cls, d.method), []):
                    call = pkg.statement(call_site)
                    if pos < len(call.args):
                        arg = call.args[pos]
                        if isinstance(arg, Const):
                            if isinstance(arg.value, str) and arg.value in views:
                                return arg.value
                        else:
                            found = walk(call_site, arg, remaining - 1)
                            if found is not None:
                                return found
                continue
            stmt = pkg.statement(d)
            if isinstance(stmt, ConstAssign):
                val = stmt.literal.value
                if isinstance(val, str) and val in views:
                    return val
            elif isinstance(stmt, Copy):
                found = walk(d, stmt.source, remaining)
                if found is not None:
                    return found
        return None

    return walk(use_site, var, depth)


# ---------------------------------------------------------------------------
# Click-site location


def _carriers_of(pkg: Package, chains: DefUseChains, obtain_site: StmtId) -> set:
    """Definition sites whose value is the constructed event (via copies)."""
    carriers = {obtain_site}
    obtain = pkg.statement(obtain_site)
    frontier = [(obtain_site, obtain.target)]
    while frontier:
        d, var = frontier.pop()
        for use_site in chains.du.get((d, var), ()):
            stmt = pkg.statement(use_site)
            if isinstance(stmt, Copy) and stmt.source == var and use_site not in carriers:
                carriers.add(use_site)
                frontier.append((use_site, stmt.target))
    return carriers


def locate_click_sites(pkg: Package, icfg: Icfg, chains: DefUseChains,
                       catalog: ApiCatalog, ad_views: set) -> list:
    """Pair constructor and dispatch calls targeting ad views.

    A pair qualifies when the constructor's result reaches the dispatch
    call's event argument (possibly across copies, within one method) and
    the dispatch receiver binds to a view in `ad_views`. Condition roots
    collect the operands of every branch the dispatch is control-dependent
    on, plus the branches guarding each immediate caller's call site.
    """
    sites = []
    for cls, method in pkg.iter_methods():
        key = (cls.name, method.name)
        cfg = icfg.cfgs[key]
        obtains = []
        dispatches = []
        for i, stmt in enumerate(method.body):
            if isinstance(stmt, Call):
                kind = catalog.classify(stmt.api_name)
                sid = StmtId(cls.name, method.name, i)
                if kind is ApiKind.Obtain and stmt.target is not None and len(stmt.args) > AXIS_Y_ARG:
                    obtains.append(sid)
                elif kind is ApiKind.Dispatch:
                    dispatches.append(sid)
        if not obtains or not dispatches:
            continue

        cdeps = control_dependencies(cfg)
        for ob in obtains:
            carriers = _carriers_of(pkg, chains, ob)
            for dp in dispatches:
                dispatch = pkg.statement(dp)
                if len(dispatch.args) <= DISPATCH_EVENT_ARG:
                    continue
                event = dispatch.args[DISPATCH_EVENT_ARG]
                if isinstance(event, Const):
                    continue
                if carriers.isdisjoint(chains.defs_reaching(dp, event)):
                    continue
                if dispatch.receiver is None:
                    continue
                view = resolve_receiver_view(
                    pkg, icfg, chains, dp, dispatch.receiver,
                    view_names=pkg.view_names() | set(ad_views),
                )
                if view is None or view not in ad_views:
                    continue

                obtain = pkg.statement(ob)
                axis_roots = [
                    (obtain.args[AXIS_X_ARG], ob),
                    (obtain.args[AXIS_Y_ARG], ob),
                ]
                condition_roots = []
                for b in sorted(cdeps[dp.index]):
                    guard = method.body[b]
                    bid = StmtId(cls.name, method.name, b)
                    condition_roots.append((guard.lhs, bid))
                    condition_roots.append((guard.rhs, bid))
                # One caller level: branches guarding the call into this method.
                for call_site in icfg.callers.get(key, []):
                    caller_cfg = icfg.cfgs[(call_site.cls, call_site.method)]
                    caller_deps = control_dependencies(caller_cfg)
                    caller_method = pkg.find_method(call_site.cls, call_site.method)
                    for b in sorted(caller_deps[call_site.index]):
                        guard = caller_method.body[b]
                        bid = StmtId(call_site.cls, call_site.method, b)
                        condition_roots.append((guard.lhs, bid))
                        condition_roots.append((guard.rhs, bid))

                sites.append(
                    ClickSite(
                        obtain_stmt=ob,
                        dispatch_stmt=dp,
                        target_view=view,
                        axis_roots=axis_roots,
                        condition_roots=condition_roots,
                    )
                )
    sites.sort(key=lambda s: (s.obtain_stmt.cls, s.obtain_stmt.method,
                              s.obtain_stmt.index, s.dispatch_stmt.index))
    return sites


def site_ddgs(icfg: Icfg, chains: DefUseChains, site: ClickSite, catalog: ApiCatalog,
              limits: SliceLimits = SliceLimits()) -> tuple:
    """(axis graph, condition graph) for one site."""
    axis = build_ddg(icfg, chains, site.axis_roots, catalog, limits)
    if site.condition_roots:
        cond = build_ddg(icfg, chains, site.condition_roots, catalog, limits)
    else:
        cond = Ddg.empty()
    return axis, cond


# ---------------------------------------------------------------------------
# Dumps


def _node_label(node) -> str:
    if isinstance(node, ConstNode):
        return f"const {node.value!r} @{node.site}/{node.slot}"
    if isinstance(node, ApiNode):
        return f"api {node.api_name} @{node.site}"
    if isinstance(node, VarDefNode):
        return f"def @{node.site}"
    return f"param {node.cls}::{node.method}[{node.position}]"


def dump_ddg(ddg: Ddg) -> str:
    lines = [f"nodes {len(ddg.nodes)} edges {len(ddg.edges)} truncated {ddg.truncated}"]
    for node in sorted(ddg.nodes, key=_node_label):
        marker = "*" if node in ddg.roots else " "
        lines.append(f" {marker} {_node_label(node)}")
    for a, b in sorted(ddg.edges, key=lambda e: (_node_label(e[0]), _node_label(e[1]))):
        lines.append(f"  {_node_label(a)} -> {_node_label(b)}")
    return "\n".join(lines) + "\n"


def dump_ddg_dot(ddg: Ddg, name: str = "ddg") -> str:
    ids = {n: f"n{i}" for i, n in enumerate(sorted(ddg.nodes, key=_node_label))}
    lines = [f"digraph {name} {{"]
    for node, nid in ids.items():
        shape = "doublecircle" if node in ddg.roots else "box"
        label = _node_label(node).replace('"', "'")
        lines.append(f'  {nid} [label="{label}", shape={shape}];')
    for a, b in sorted(ddg.edges, key=lambda e: (ids[e[0]], ids[e[1]])):
        lines.append(f"  {ids[a]} -> {ids[b]};")
    lines.append("}")
    return "\n".join(lines) + "\n"
