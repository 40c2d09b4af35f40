"""Mini three-address IR for click-path analysis.

A package bundles a declarative manifest (permissions, bundled libraries),
view declarations with placement metadata, and classes whose methods are
flat statement lists. The IR is deliberately small: constant/copy/binop
assignments, calls, conditional and unconditional gotos, labels, returns.
No heap, no arrays, no exceptions — def/use relations are exact.

Text format (one directive per line, `#` starts a comment):

    package <id>
    permission <NAME>
    library <id>
    view <name> class=<type> w=<int> h=<int> text="<s>"
    class <name>
    method <name>(<p1>,<p2>,...)
      <t> = const <literal>
      <t> = copy <v>
      <t> = <op> <a> <b>          # op: add sub mul div mod
      [<t> =] call [<recv>] <Api.Name>(<a1>,...)
      if <a> <cmp> <b> goto <L>
      goto <L>
      label <L>
      return [<v>]
    endmethod
    endclass
    endpackage
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field

BINOPS = ("add", "sub", "mul", "div", "mod")
COMPARATORS = ("<", "<=", ">", ">=", "==", "!=")

_IDENT = r"[A-Za-z_][A-Za-z0-9_]*"
_API = r"[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)*"


class ParseError(Exception):
    """Raised on malformed IR text; carries the offending line number."""

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


@dataclass(frozen=True)
class Const:
    """A literal operand (int, float, or string)."""

    value: object

    def __repr__(self) -> str:
        return f"Const({self.value!r})"


# Throughout this module an operand is either a variable name (plain str)
# or a literal (Const).


@dataclass(frozen=True)
class ConstAssign:
    target: str
    literal: Const


@dataclass(frozen=True)
class Copy:
    target: str
    source: str


@dataclass(frozen=True)
class BinOp:
    target: str
    op: str
    lhs: object  # Operand
    rhs: object  # Operand


@dataclass(frozen=True)
class Call:
    target: str | None
    receiver: str | None
    api_name: str
    args: tuple


@dataclass(frozen=True)
class IfGoto:
    lhs: object  # Operand
    cmp: str
    rhs: object  # Operand
    label: str


@dataclass(frozen=True)
class Goto:
    label: str


@dataclass(frozen=True)
class Label:
    name: str


@dataclass(frozen=True)
class Return:
    value: object | None = None  # Operand or None


Statement = (ConstAssign, Copy, BinOp, Call, IfGoto, Goto, Label, Return)


def defined_var(stmt) -> str | None:
    """The variable this statement defines, if any."""
    if isinstance(stmt, (ConstAssign, Copy, BinOp)):
        return stmt.target
    if isinstance(stmt, Call):
        return stmt.target
    return None


def used_operands(stmt) -> list:
    """Operands read by the statement, in syntactic order.

    A call reads its receiver and all arguments; the receiver is an
    operand for def/use purposes even though slicing treats it separately.
    """
    if isinstance(stmt, ConstAssign):
        return [stmt.literal]
    if isinstance(stmt, Copy):
        return [stmt.source]
    if isinstance(stmt, BinOp):
        return [stmt.lhs, stmt.rhs]
    if isinstance(stmt, Call):
        ops = []
        if stmt.receiver is not None:
            ops.append(stmt.receiver)
        ops.extend(stmt.args)
        return ops
    if isinstance(stmt, IfGoto):
        return [stmt.lhs, stmt.rhs]
    if isinstance(stmt, Return):
        return [stmt.value] if stmt.value is not None else []
    return []


def used_vars(stmt) -> list:
    return [op for op in used_operands(stmt) if isinstance(op, str)]


@dataclass(frozen=True)
class StmtId:
    """Unique statement identity: (class, method, index in body)."""

    cls: str
    method: str
    index: int

    def method_key(self) -> tuple:
        return (self.cls, self.method)

    def location(self) -> str:
        return f"{self.cls}::{self.method}"

    def __repr__(self) -> str:
        return f"{self.cls}::{self.method}[{self.index}]"


@dataclass
class MethodDecl:
    name: str
    params: list
    body: list
    labels: dict = field(default_factory=dict)  # label name -> stmt index


@dataclass
class ClassDecl:
    name: str
    methods: list


@dataclass
class ViewDecl:
    name: str
    class_type: str
    width_dp: int
    height_dp: int
    text_labels: list


@dataclass
class Manifest:
    permissions: set
    libraries: set


@dataclass
class Package:
    package_id: str
    manifest: Manifest
    classes: list
    views: list

    def iter_methods(self):
        for cls in self.classes:
            for m in cls.methods:
                yield cls, m

    def find_method(self, cls_name: str, method_name: str) -> "MethodDecl | None":
        for cls in self.classes:
            if cls.name == cls_name:
                for m in cls.methods:
                    if m.name == method_name:
                        return m
        return None

    def statement(self, sid: StmtId):
        m = self.find_method(sid.cls, sid.method)
        return m.body[sid.index]

    def view_names(self) -> set:
        return {v.name for v in self.views}


# ---------------------------------------------------------------------------
# API catalog


class ApiKind(enum.Enum):
    AxisGetter = "AxisGetter"
    ViewSize = "ViewSize"
    Rng = "Rng"
    Sys = "Sys"
    Obtain = "Obtain"
    Dispatch = "Dispatch"
    Other = "Other"


_CATALOG_KEYS = {
    "axis_getters": ApiKind.AxisGetter,
    "view_size": ApiKind.ViewSize,
    "rng": ApiKind.Rng,
    "sys": ApiKind.Sys,
    "obtain": ApiKind.Obtain,
    "dispatch": ApiKind.Dispatch,
}


@dataclass
class ApiCatalog:
    """Semantic classification of platform API names.

    Category sets must be pairwise disjoint; the catalog is plain data so
    new API surfaces can be added from a config file without code changes.
    """

    axis_getters: set
    view_size: set
    rng: set
    sys: set
    obtain: set
    dispatch: set

    def __post_init__(self):
        seen = {}
        for key in _CATALOG_KEYS:
            for api in getattr(self, key):
                if api in seen and seen[api] != key:
                    raise ValueError(
                        f"api {api!r} listed in both {seen[api]!r} and {key!r}"
                    )
                seen[api] = key

    def classify(self, api_name: str) -> ApiKind:
        for key, kind in _CATALOG_KEYS.items():
            if api_name in getattr(self, key):
                return kind
        return ApiKind.Other


def default_catalog() -> ApiCatalog:
    return ApiCatalog(
        axis_getters={
            "MotionEvent.getX",
            "MotionEvent.getY",
            "MotionEvent.getRawX",
            "MotionEvent.getRawY",
        },
        view_size={"View.getWidth", "View.getHeight"},
        rng={
            "Random.nextInt",
            "Random.nextFloat",
            "Random.nextDouble",
            "Random.nextGaussian",
            "Math.random",
        },
        sys={
            "System.currentTimeMillis",
            "Build.getModel",
            "Connectivity.getNetworkState",
            "Battery.getLevel",
            "Locale.getCountry",
        },
        obtain={"MotionEvent.obtain"},
        dispatch={"View.dispatchTouchEvent"},
    )


def load_catalog(path) -> ApiCatalog:
    """Load a catalog file: a category header line, then one API per line."""
    sets = {key: set() for key in _CATALOG_KEYS}
    current = None
    with open(path, encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line in _CATALOG_KEYS:
                current = line
            elif current is None:
                raise ParseError(ln, f"API name {line!r} before any category header")
            elif not re.fullmatch(_API, line):
                raise ParseError(ln, f"bad API name {line!r}")
            else:
                sets[current].add(line)
    return ApiCatalog(**sets)


def classify_api(catalog: ApiCatalog, api_name: str) -> ApiKind:
    return catalog.classify(api_name)


# ---------------------------------------------------------------------------
# Parsing

_VIEW_RE = re.compile(
    rf"view\s+(?P<name>{_IDENT})\s+class=(?P<type>\S+)"
    rf"\s+w=(?P<w>\d+)\s+h=(?P<h>\d+)(?:\s+text=\"(?P<text>[^\"]*)\")?$"
)
_METHOD_RE = re.compile(rf"method\s+(?P<name>{_IDENT})\((?P<params>[^)]*)\)$")
_CONST_RE = re.compile(rf"(?P<t>{_IDENT})\s*=\s*const\s+(?P<lit>.+)$")
_COPY_RE = re.compile(rf"(?P<t>{_IDENT})\s*=\s*copy\s+(?P<v>{_IDENT})$")
_BINOP_RE = re.compile(
    rf"(?P<t>{_IDENT})\s*=\s*(?P<op>add|sub|mul|div|mod)\s+(?P<a>\S+)\s+(?P<b>\S+)$"
)
_CALL_RE = re.compile(
    rf"(?:(?P<t>{_IDENT})\s*=\s*)?call\s+(?:(?P<recv>{_IDENT})\s+)?"
    rf"(?P<api>{_API})\((?P<args>[^)]*)\)$"
)
_IF_RE = re.compile(
    rf"if\s+(?P<a>\S+)\s+(?P<cmp><=|>=|==|!=|<|>)\s+(?P<b>\S+)\s+goto\s+(?P<l>{_IDENT})$"
)
_STRING_LIT_RE = re.compile(r'"([^"]*)"$')


def _parse_literal(text: str, line_no: int) -> Const:
    text = text.strip()
    m = _STRING_LIT_RE.fullmatch(text)
    if m:
        return Const(m.group(1))
    try:
        return Const(int(text))
    except ValueError:
        pass
    try:
        return Const(float(text))
    except ValueError:
        raise ParseError(line_no, f"bad literal {text!r}") from None


def _parse_operand(text: str, line_no: int):
    text = text.strip()
    if re.fullmatch(_IDENT, text):
        return text
    return _parse_literal(text, line_no)


def _parse_statement(line: str, line_no: int):
    if line == "return":
        return Return(None)
    if line.startswith("return "):
        return Return(_parse_operand(line[len("return "):], line_no))
    if line.startswith("goto "):
        lbl = line[len("goto "):].strip()
        if not re.fullmatch(_IDENT, lbl):
            raise ParseError(line_no, f"bad label {lbl!r}")
        return Goto(lbl)
    if line.startswith("label "):
        lbl = line[len("label "):].strip()
        if not re.fullmatch(_IDENT, lbl):
            raise ParseError(line_no, f"bad label {lbl!r}")
        return Label(lbl)
    m = _IF_RE.fullmatch(line)
    if m:
        return IfGoto(
            _parse_operand(m.group("a"), line_no),
            m.group("cmp"),
            _parse_operand(m.group("b"), line_no),
            m.group("l"),
        )
    m = _CALL_RE.fullmatch(line)
    if m:
        args_text = m.group("args").strip()
        args = (
            tuple(_parse_operand(a, line_no) for a in args_text.split(","))
            if args_text
            else ()
        )
        return Call(m.group("t"), m.group("recv"), m.group("api"), args)
    m = _CONST_RE.fullmatch(line)
    if m:
        return ConstAssign(m.group("t"), _parse_literal(m.group("lit"), line_no))
    m = _COPY_RE.fullmatch(line)
    if m:
        return Copy(m.group("t"), m.group("v"))
    m = _BINOP_RE.fullmatch(line)
    if m:
        return BinOp(
            m.group("t"),
            m.group("op"),
            _parse_operand(m.group("a"), line_no),
            _parse_operand(m.group("b"), line_no),
        )
    raise ParseError(line_no, f"unrecognized statement {line!r}")


def parse_package(text: str) -> Package:
    """Parse and validate one package from IR text."""
    package_id = None
    manifest = Manifest(permissions=set(), libraries=set())
    classes: list = []
    views: list = []
    cur_class = None
    cur_method = None
    ended = False

    for line_no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ended:
            raise ParseError(line_no, "content after endpackage")

        if package_id is None:
            m = re.fullmatch(rf"package\s+(?P<id>\S+)", line)
            if not m:
                raise ParseError(line_no, "expected 'package <id>'")
            package_id = m.group("id")
            continue

        if cur_method is not None:
            if line == "endmethod":
                cur_class.methods.append(cur_method)
                cur_method = None
            else:
                cur_method.body.append(_parse_statement(line, line_no))
            continue

        if cur_class is not None:
            if line == "endclass":
                classes.append(cur_class)
                cur_class = None
                continue
            m = _METHOD_RE.fullmatch(line)
            if not m:
                raise ParseError(line_no, "expected method or endclass")
            params_text = m.group("params").strip()
            params = (
                [p.strip() for p in params_text.split(",")] if params_text else []
            )
            for p in params:
                if not re.fullmatch(_IDENT, p):
                    raise ParseError(line_no, f"bad parameter name {p!r}")
            if any(mm.name == m.group("name") for mm in cur_class.methods):
                raise ParseError(
                    line_no, f"duplicate method {m.group('name')!r} in class"
                )
            cur_method = MethodDecl(name=m.group("name"), params=params, body=[])
            continue

        if line == "endpackage":
            ended = True
            continue
        m = re.fullmatch(rf"permission\s+(?P<p>\S+)", line)
        if m:
            manifest.permissions.add(m.group("p"))
            continue
        m = re.fullmatch(rf"library\s+(?P<l>\S+)", line)
        if m:
            manifest.libraries.add(m.group("l"))
            continue
        m = _VIEW_RE.fullmatch(line)
        if m:
            if any(v.name == m.group("name") for v in views):
                raise ParseError(line_no, f"duplicate view {m.group('name')!r}")
            labels = [t for t in (m.group("text") or "").split() if t]
            views.append(
                ViewDecl(
                    name=m.group("name"),
                    class_type=m.group("type"),
                    width_dp=int(m.group("w")),
                    height_dp=int(m.group("h")),
                    text_labels=labels,
                )
            )
            continue
        m = re.fullmatch(rf"class\s+(?P<name>{_IDENT})", line)
        if m:
            if any(c.name == m.group("name") for c in classes):
                raise ParseError(line_no, f"duplicate class {m.group('name')!r}")
            cur_class = ClassDecl(name=m.group("name"), methods=[])
            continue
        raise ParseError(line_no, f"unrecognized directive {line!r}")

    if package_id is None:
        raise ParseError(0, "empty input")
    if cur_class is not None or cur_method is not None:
        raise ParseError(0, "unterminated class or method")
    if not ended:
        raise ParseError(0, "missing endpackage")

    pkg = Package(package_id=package_id, manifest=manifest, classes=classes, views=views)
    _validate(pkg)
    return pkg


def _validate(pkg: Package) -> None:
    for cls in pkg.classes:
        for method in cls.methods:
            method.labels = {}
            for i, stmt in enumerate(method.body):
                if isinstance(stmt, Label):
                    if stmt.name in method.labels:
                        raise ParseError(
                            0, f"duplicate label {stmt.name!r} in {cls.name}.{method.name}"
                        )
                    method.labels[stmt.name] = i
            defined = set(method.params)
            for stmt in method.body:
                d = defined_var(stmt)
                if d is not None:
                    defined.add(d)
            for i, stmt in enumerate(method.body):
                if isinstance(stmt, (IfGoto, Goto)) and stmt.label not in method.labels:
                    raise ParseError(
                        0,
                        f"undefined label {stmt.label!r} in {cls.name}.{method.name}",
                    )
                for v in used_vars(stmt):
                    if v not in defined:
                        raise ParseError(
                            0,
                            f"variable {v!r} used in {cls.name}.{method.name} "
                            f"but never defined",
                        )


# ---------------------------------------------------------------------------
# Serialization


def _fmt_operand(op) -> str:
    if isinstance(op, Const):
        if isinstance(op.value, str):
            return f'"{op.value}"'
        return repr(op.value)
    return op


def _fmt_statement(stmt) -> str:
    if isinstance(stmt, ConstAssign):
        return f"{stmt.target} = const {_fmt_operand(stmt.literal)}"
    if isinstance(stmt, Copy):
        return f"{stmt.target} = copy {stmt.source}"
    if isinstance(stmt, BinOp):
        return f"{stmt.target} = {stmt.op} {_fmt_operand(stmt.lhs)} {_fmt_operand(stmt.rhs)}"
    if isinstance(stmt, Call):
        head = f"{stmt.target} = call" if stmt.target else "call"
        recv = f" {stmt.receiver}" if stmt.receiver else ""
        args = ", ".join(_fmt_operand(a) for a in stmt.args)
        return f"{head}{recv} {stmt.api_name}({args})"
    if isinstance(stmt, IfGoto):
        return (
            f"if {_fmt_operand(stmt.lhs)} {stmt.cmp} {_fmt_operand(stmt.rhs)} "
            f"goto {stmt.label}"
        )
    if isinstance(stmt, Goto):
        return f"goto {stmt.label}"
    if isinstance(stmt, Label):
        return f"label {stmt.name}"
    if isinstance(stmt, Return):
        return "return" if stmt.value is None else f"return {_fmt_operand(stmt.value)}"
    raise TypeError(f"unknown statement {stmt!r}")


def serialize(pkg: Package) -> str:
    """Emit IR text; parse(serialize(parse(t))) is structurally parse(t)."""
    out = [f"package {pkg.package_id}"]
    for p in sorted(pkg.manifest.permissions):
        out.append(f"permission {p}")
    for lib in sorted(pkg.manifest.libraries):
        out.append(f"library {lib}")
    for v in pkg.views:
        text = f' text="{" ".join(v.text_labels)}"' if v.text_labels else ""
        out.append(f"view {v.name} class={v.class_type} w={v.width_dp} h={v.height_dp}{text}")
    for cls in pkg.classes:
        out.append(f"class {cls.name}")
        for m in cls.methods:
            out.append(f"method {m.name}({','.join(m.params)})")
            for stmt in m.body:
                out.append(f"  {_fmt_statement(stmt)}")
            out.append("endmethod")
        out.append("endclass")
    out.append("endpackage")
    return "\n".join(out) + "\n"
