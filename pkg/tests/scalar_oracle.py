"""Scalar-loop reference implementations of the attention losses.

Deliberately written with plain Python loops and ``math`` so that no matrix
code is shared with the library under test.
"""

import math


def cos(a, b):
    dot = sum(x * y for x, y in zip(a, b))
    return dot / (math.sqrt(sum(x * x for x in a)) * math.sqrt(sum(y * y for y in b)))


def similarity(rows, cols, n, mask):
    """``mask``: None, 'zero' or 'neg_inf'; positives are entries with p == q mod n."""
    out = []
    for p, a in enumerate(rows):
        line = []
        for q, b in enumerate(cols):
            if mask is not None and p % n == q % n:
                line.append(0.0 if mask == "zero" else -math.inf)
            elif rows is cols and p == q:
                line.append(1.0)
            else:
                line.append(cos(a, b))
        out.append(line)
    return out


def softmax(line, tau):
    m = max(v for v in line if v != -math.inf)
    e = [0.0 if v == -math.inf else math.exp((v - m) / tau) for v in line]
    tot = sum(e)
    return [x / tot for x in e]


def sinkhorn(sim, tau, iters=3000):
    size = len(sim)
    m = max(v for line in sim for v in line if v != -math.inf)
    kmat = [[0.0 if v == -math.inf else math.exp((v - m) / tau) for v in line] for line in sim]
    for _ in range(iters):
        for p in range(size):
            r = sum(kmat[p])
            kmat[p] = [x / r for x in kmat[p]]
        for q in range(size):
            c = sum(kmat[p][q] for p in range(size))
            for p in range(size):
                kmat[p][q] /= c
    return kmat


def swapped_ce(target, attn, n, pairs):
    """Mean over (pairs x n) of -<target row (i, jt), log attn row (i, js)>."""
    total = 0.0
    for jt, js in pairs:
        for i in range(n):
            t, a = target[jt * n + i], attn[js * n + i]
            total -= sum(ti * math.log(ai) for ti, ai in zip(t, a) if ti > 0)
    return total / (len(pairs) * n)


def vanilla(z, n, k, tau, pairs, mask="zero"):
    zl = [list(r) for r in z]
    attn = [softmax(line, tau) for line in similarity(zl, zl, n, mask)]
    return swapped_ce(attn, attn, n, pairs)


def bam(z, n, k, tau, tau_b, pairs, mask="zero"):
    zl = [list(r) for r in z]
    sim = similarity(zl, zl, n, mask)
    attn = [softmax(line, tau) for line in sim]
    return swapped_ce(sinkhorn(sim, tau_b), attn, n, pairs)


def bam_teacher(zs, zt, n, k, tau, tau_b, pairs, mask="zero"):
    a_rows, t_rows = [list(r) for r in zs], [list(r) for r in zt]
    src = similarity(a_rows, t_rows, n, mask)
    attn = [softmax(line, tau) for line in src]
    tgt = sinkhorn(similarity(t_rows, t_rows, n, mask), tau_b)
    return swapped_ce(tgt, attn, n, pairs)


def contrastive(z, n, k, tau, pairs):
    zl = [list(r) for r in z]
    size = n * k
    sim = [[-math.inf if p == q else cos(zl[p], zl[q]) for q in range(size)] for p in range(size)]
    attn = [softmax(line, tau) for line in sim]
    total = 0.0
    for jt, js in pairs:
        for i in range(n):
            total -= math.log(attn[js * n + i][jt * n + i])
    return total / (len(pairs) * n)
