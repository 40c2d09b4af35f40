# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled reaching-definitions fixed point over packed uint64 bitsets.

Same equations as `_fixpoint_py.solve_reaching`; definition sets are rows
of (n, n_words) uint64 arrays instead of Python ints. Integer-exact, so
results are bit-identical to the fallback.
"""

import numpy as np


def solve_reaching_words(int n, int n_words,
                         int[::1] pred_idx, int[::1] pred_off,
                         int[::1] succ_idx, int[::1] succ_off,
                         unsigned long long[:, ::1] gen,
                         unsigned long long[:, ::1] kill,
                         unsigned long long[::1] entry_mask):
    """IN bitset rows for each statement.

    pred_idx/pred_off and succ_idx/succ_off are CSR adjacency arrays:
    neighbours of node i live in idx[off[i]:off[i+1]].
    """
    inn_arr = np.zeros((n, n_words), dtype=np.uint64)
    out_arr = np.zeros((n, n_words), dtype=np.uint64)
    if n == 0:
        return inn_arr

    cdef unsigned long long[:, ::1] inn = inn_arr
    cdef unsigned long long[:, ::1] out = out_arr
    acc_arr = np.zeros(n_words, dtype=np.uint64)
    cdef unsigned long long[::1] acc = acc_arr
    # Circular worklist; each node is queued at most once at a time, so
    # capacity n suffices.
    queue_arr = np.arange(n, dtype=np.int32)
    queued_arr = np.ones(n, dtype=np.uint8)
    cdef int[::1] queue = queue_arr
    cdef unsigned char[::1] queued = queued_arr
    cdef int head = 0, count = n, cap = n, tail
    cdef int i, k, p, s, w
    cdef unsigned long long nw
    cdef bint changed

    with nogil:
        while count > 0:
            i = queue[head]
            head += 1
            if head == cap:
                head = 0
            count -= 1
            queued[i] = 0

            # IN row: union of predecessor OUT rows (entry defs at node 0);
            # predecessors outermost so each OUT row is walked contiguously
            if i == 0:
                for w in range(n_words):
                    acc[w] = entry_mask[w]
            else:
                for w in range(n_words):
                    acc[w] = 0
            for k in range(pred_off[i], pred_off[i + 1]):
                p = pred_idx[k]
                for w in range(n_words):
                    acc[w] |= out[p, w]

            changed = False
            for w in range(n_words):
                inn[i, w] = acc[w]
                nw = gen[i, w] | (acc[w] & ~kill[i, w])
                if nw != out[i, w]:
                    out[i, w] = nw
                    changed = True
            if changed:
                for k in range(succ_off[i], succ_off[i + 1]):
                    s = succ_idx[k]
                    if not queued[s]:
                        tail = head + count
                        if tail >= cap:
                            tail -= cap
                        queue[tail] = s
                        count += 1
                        queued[s] = 1

    return inn_arr
