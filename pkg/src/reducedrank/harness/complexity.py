"""Per-symbol arithmetic cost of the LMS-type algorithms.

``complexity_count`` returns the closed-form operation counts. The
``counted_*_step`` functions perform one update in plain complex scalar
arithmetic while tallying operations, so the closed forms can be checked
against an actual operation schedule.

Counting convention: every complex scalar multiplication (including a real
step size times a complex value) is one multiplication; every complex
addition or subtraction is one addition; an inner product of length ``n``
costs ``n`` multiplications and ``n - 1`` additions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class OpCount:
    additions: int
    multiplications: int

    def __add__(self, other: "OpCount") -> "OpCount":
        return OpCount(self.additions + other.additions, self.multiplications + other.multiplications)


def mwf_stage_count(m_bar: int) -> OpCount:
    return OpCount(2 * m_bar ** 2 - 3 * m_bar + 1, 2 * m_bar ** 2 + 5 * m_bar + 7)


def complexity_count(algorithm: str, M: int, D: int = 1) -> OpCount:
    """Additions and multiplications per symbol.

    ``"full"``: (2M, 2M+1). ``"jio"``: (2DM+D, 3DM+D+2). ``"mwf"``: per-stage
    costs summed over stages d = 1..D with stage dimension M - d.
    """
    if not M >= D >= 1:
        raise ValueError(f"need M >= D >= 1, got M={M}, D={D}")
    if algorithm == "full":
        return OpCount(2 * M, 2 * M + 1)
    if algorithm == "jio":
        return OpCount(2 * D * M + D, 3 * D * M + D + 2)
    if algorithm == "mwf":
        total = OpCount(0, 0)
        for d in range(1, D + 1):
            total = total + mwf_stage_count(M - d)
        return total
    raise ValueError(f"unknown algorithm {algorithm!r}")


class OpCounter:
    def __init__(self):
        self.additions = 0
        self.multiplications = 0

    def mul(self, a, b):
        self.multiplications += 1
        return a * b

    def add(self, a, b):
        self.additions += 1
        return a + b

    def sub(self, a, b):
        self.additions += 1
        return a - b

    def dot(self, u, v):
        """``sum(u[k] * v[k])`` with ``u`` already conjugated where needed."""
        acc = self.mul(u[0], v[0])
        for a, b in zip(u[1:], v[1:]):
            acc = self.add(acc, self.mul(a, b))
        return acc

    @property
    def count(self) -> OpCount:
        return OpCount(self.additions, self.multiplications)


def counted_fullrank_step(w, r, d, mu):
    """One full-rank LMS step in scalar arithmetic; returns ``(w_new, x, OpCount)``."""
    ops = OpCounter()
    w = [complex(v) for v in w]
    r = [complex(v) for v in r]
    x = ops.dot([v.conjugate() for v in w], r)
    e = ops.sub(complex(d), x)
    g = ops.mul(mu, e.conjugate())
    w_new = [ops.add(wm, ops.mul(g, rm)) for wm, rm in zip(w, r)]
    return np.array(w_new), x, ops.count


def counted_jio_step(S, w_bar, r, d, mu, eta):
    """One coupled JIO-LMS step in scalar arithmetic; returns ``(S_new, w_new, x, OpCount)``.

    Schedule: project ``S^H r``; output and error; scale the error by each
    step size; update the weights; form the outer product ``r w^H``, scale it
    and add it to ``S``.
    """
    ops = OpCounter()
    S = np.asarray(S, complex)
    M, D = S.shape
    r = [complex(v) for v in r]
    w = [complex(v) for v in w_bar]
    r_bar = [ops.dot([S[m, k].conjugate() for m in range(M)], r) for k in range(D)]
    x = ops.dot([v.conjugate() for v in w], r_bar)
    e = ops.sub(complex(d), x)
    a = ops.mul(mu, e.conjugate())
    b = ops.mul(eta, e.conjugate())
    w_new = [ops.add(w[k], ops.mul(a, r_bar[k])) for k in range(D)]
    S_new = np.empty((M, D), complex)
    for m in range(M):
        for k in range(D):
            outer = ops.mul(r[m], w[k].conjugate())
            S_new[m, k] = ops.add(S[m, k], ops.mul(b, outer))
    return S_new, np.array(w_new), x, ops.count


def instrumented_count(algorithm: str, M: int, D: int = 1, seed: int = 0) -> OpCount:
    """Operation tally of one counted step on random data."""
    rng = np.random.default_rng(seed)
    r = rng.standard_normal(M) + 1j * rng.standard_normal(M)
    if algorithm == "full":
        return counted_fullrank_step(np.zeros(M), r, 1.0, 0.01)[2]
    if algorithm == "jio":
        S = rng.standard_normal((M, D)) + 1j * rng.standard_normal((M, D))
        w = rng.standard_normal(D) + 1j * rng.standard_normal(D)
        return counted_jio_step(S, w, r, 1.0, 0.01, 0.01)[3]
    raise ValueError(f"no instrumented step for {algorithm!r}")


def format_table(M: int, D: int) -> str:
    """Aligned text table of closed-form and instrumented counts."""
    rows = [("algorithm", "additions", "multiplications", "counted adds", "counted mults")]
    for alg in ("full", "jio", "mwf"):
        c = complexity_count(alg, M, D)
        try:
            ic = instrumented_count(alg, M, D)
            counted = (str(ic.additions), str(ic.multiplications))
        except ValueError:
            counted = ("-", "-")
        rows.append((alg, str(c.additions), str(c.multiplications)) + counted)
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(cell.rjust(w) if i else cell.ljust(w) for i, (cell, w) in enumerate(zip(row, widths)))
             for row in rows]
    return f"M = {M}, D = {D}\n" + "\n".join(lines)
