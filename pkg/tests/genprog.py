"""Random program builders for oracle-equivalence testing."""

from __future__ import annotations

import random

from clicksift.ir import parse_package

VARS = [f"v{i}" for i in range(8)]
OPS = ("add", "sub", "mul")


def random_loopfree_method(rng: random.Random, n_stmts: int, n_branches: int) -> list:
    """Statement lines for one method: forward branches only, so acyclic.

    Every variable is const-defined up front, which satisfies the parser's
    defined-somewhere check while leaving path-dependent reaching defs.
    """
    lines = [f"  {v} = const {rng.randint(0, 9)}" for v in VARS]
    branch_points = sorted(rng.sample(range(n_stmts), k=min(n_branches, n_stmts)))
    labels = {}
    for bi, at in enumerate(branch_points):
        labels[at] = f"B{bi}"
    body = []
    pending_labels = []
    for i in range(n_stmts):
        if i in labels:
            target_after = rng.randint(i, n_stmts - 1)
            pending_labels.append((target_after, labels[i]))
            body.append(
                f"  if {rng.choice(VARS)} {rng.choice(('<', '>', '=='))} "
                f"{rng.randint(0, 9)} goto {labels[i]}"
            )
        roll = rng.random()
        t = rng.choice(VARS)
        if roll < 0.45:
            body.append(f"  {t} = {rng.choice(OPS)} {rng.choice(VARS)} {rng.choice(VARS)}")
        elif roll < 0.75:
            body.append(f"  {t} = copy {rng.choice(VARS)}")
        elif roll < 0.9:
            body.append(f"  {t} = const {rng.randint(0, 9)}")
        else:
            body.append(f"  {t} = add {rng.choice(VARS)} {rng.randint(0, 9)}")
        # place any labels whose position has arrived (forward only)
        placed = [pl for pl in pending_labels if pl[0] <= i]
        for _, lbl in placed:
            body.append(f"  label {lbl}")
        pending_labels = [pl for pl in pending_labels if pl[0] > i]
    for _, lbl in pending_labels:
        body.append(f"  label {lbl}")
    body.append("  return")
    return lines + body


def random_loopfree_package(rng: random.Random, n_stmts: int = 30, n_branches: int = 3):
    lines = ["package rndpkg", "class C", "method main()"]
    lines += random_loopfree_method(rng, n_stmts, n_branches)
    lines += ["endmethod", "endclass", "endpackage"]
    return parse_package("\n".join(lines) + "\n")


def random_looping_package(rng: random.Random, n_stmts: int = 25):
    """Backward branches allowed: cyclic CFGs for duality/termination tests."""
    lines = ["package rndloop", "class C", "method main(p0,p1)"]
    lines += [f"  {v} = const {rng.randint(0, 9)}" for v in VARS[:4]]
    n_labels = rng.randint(1, 3)
    label_at = sorted(rng.sample(range(n_stmts), k=n_labels))
    body = []
    vars_all = VARS[:4] + ["p0", "p1"]
    for i in range(n_stmts):
        if i in label_at:
            body.append(f"  label L{label_at.index(i)}")
        roll = rng.random()
        t = rng.choice(VARS[:4])
        if roll < 0.4:
            body.append(f"  {t} = {rng.choice(OPS)} {rng.choice(vars_all)} {rng.choice(vars_all)}")
        elif roll < 0.6:
            body.append(f"  {t} = copy {rng.choice(vars_all)}")
        elif roll < 0.75:
            body.append(f"  {t} = const {rng.randint(0, 9)}")
        else:
            lbl = rng.randrange(n_labels)
            body.append(
                f"  if {rng.choice(vars_all)} < {rng.randint(0, 9)} goto L{lbl}"
            )
    body.append("  return")
    lines += body + ["endmethod", "endclass", "endpackage"]
    return parse_package("\n".join(lines) + "\n")


def random_interproc_package(rng: random.Random, n_methods: int = 3,
                             stmts_per_method: int = 10):
    """Recursion-free multi-method package; calls flow strictly downward.

    Method mk may call only m(k+1).., so the call graph is a DAG; bodies
    are loop-free.
    """
    method_names = [f"m{k}" for k in range(n_methods)]
    arities = {name: (rng.randint(0, 2) if k > 0 else 0)
               for k, name in enumerate(method_names)}
    lines = ["package rndcalls", "class C"]
    for k, name in enumerate(method_names):
        params = [f"a{j}" for j in range(arities[name])]
        lines.append(f"method {name}({','.join(params)})")
        local = [f"t{k}_{i}" for i in range(4)]
        for v in local:
            lines.append(f"  {v} = const {rng.randint(0, 9)}")
        pool = local + params
        n_stmts = rng.randint(3, stmts_per_method)
        for _ in range(n_stmts):
            roll = rng.random()
            t = rng.choice(local)
            if roll < 0.35:
                lines.append(f"  {t} = {rng.choice(OPS)} {rng.choice(pool)} {rng.choice(pool)}")
            elif roll < 0.55:
                lines.append(f"  {t} = copy {rng.choice(pool)}")
            elif roll < 0.7 and k + 1 < n_methods:
                callee = method_names[rng.randrange(k + 1, n_methods)]
                args = ", ".join(rng.choice(pool) for _ in range(arities[callee]))
                lines.append(f"  {t} = call {callee}({args})")
            elif roll < 0.85:
                lines.append(f"  {t} = call Ext.opaque({rng.choice(pool)})")
            else:
                lines.append(f"  {t} = const {rng.randint(0, 9)}")
        lines.append(f"  return {rng.choice(pool)}")
        lines.append("endmethod")
    lines += ["endclass", "endpackage"]
    return parse_package("\n".join(lines) + "\n")
