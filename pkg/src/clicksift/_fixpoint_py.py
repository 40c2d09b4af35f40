"""Pure-Python reaching-definitions fixed point.

Fallback for the compiled kernel in `_fixpoint.pyx`. Bitsets are Python
ints (one bit per definition site), so word width is unbounded and the
result is exactly the kernel's: both backends compute the same IN sets.
"""

from collections import deque


def solve_reaching(n, preds, succs, gen, kill, entry_mask):
    """IN set per statement for the reaching-definitions equations.

    n: statement count; preds/succs: adjacency lists of statement indices;
    gen/kill: per-statement bitmasks over definition sites; entry_mask:
    definitions live at method entry (parameters). Returns a list of IN
    bitmasks. The fixed point is unique, so worklist order is irrelevant.
    """
    inn = [0] * n
    out = [0] * n
    if n == 0:
        return inn
    work = deque(range(n))
    queued = [True] * n
    while work:
        i = work.popleft()
        queued[i] = False
        acc = entry_mask if i == 0 else 0
        for p in preds[i]:
            acc |= out[p]
        inn[i] = acc
        new_out = gen[i] | (acc & ~kill[i])
        if new_out != out[i]:
            out[i] = new_out
            for s in succs[i]:
                if not queued[s]:
                    work.append(s)
                    queued[s] = True
    return inn
