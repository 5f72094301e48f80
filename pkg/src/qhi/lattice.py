"""Exact integer linear systems ``A x = b`` via column Hermite reduction."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence


class InfeasibleSystemError(ValueError):
    """The integer system has no solution; ``row`` names the failing equation."""

    def __init__(self, message: str, row: int | None = None) -> None:
        super().__init__(message)
        self.row = row


@dataclass(frozen=True)
class LatticeSolution:
    """``particular + kernel . z`` for integer ``z`` gives every solution."""

    particular: tuple[int, ...]
    kernel: tuple[tuple[int, ...], ...]

    def point(self, params: Sequence[int] | None = None) -> tuple[int, ...]:
        x = list(self.particular)
        for p, k in zip(params or (), self.kernel):
            for i, v in enumerate(k):
                x[i] += p * v
        return tuple(x)


def column_hermite(A: Sequence[Sequence[int]]) -> tuple[list[list[int]], list[list[int]], list[int]]:
    """Return ``(H, U, pivots)`` with ``A U = H`` column echelon and ``U`` unimodular.

    ``pivots[r]`` is the row of the leading entry of column ``r``; columns
    beyond ``len(pivots)`` of ``H`` are zero.
    """
    m = len(A)
    n = len(A[0]) if m else 0
    H = [list(map(int, row)) for row in A]
    U = [[int(i == j) for j in range(n)] for i in range(n)]

    def colop(dst: int, src: int, q: int) -> None:
        # column dst -= q * column src
        for M in (H, U):
            for row in M:
                row[dst] -= q * row[src]

    def swap(a: int, b: int) -> None:
        for M in (H, U):
            for row in M:
                row[a], row[b] = row[b], row[a]

    def negate(a: int) -> None:
        for M in (H, U):
            for row in M:
                row[a] = -row[a]

    pivots: list[int] = []
    col = 0
    for r in range(m):
        if col >= n:
            break
        while True:
            nz = [j for j in range(col, n) if H[r][j] != 0]
            if not nz:
                break
            j = min(nz, key=lambda j: abs(H[r][j]))
            if j != col:
                swap(j, col)
            done = True
            for j in range(col + 1, n):
                if H[r][j]:
                    colop(j, col, H[r][j] // H[r][col])
                    if H[r][j]:
                        done = False
            if done:
                break
        if H[r][col] == 0:
            continue
        if H[r][col] < 0:
            negate(col)
        for j in range(col):
            colop(j, col, H[r][j] // H[r][col])
        pivots.append(r)
        col += 1
    return H, U, pivots


def solve_integer(A: Sequence[Sequence[int]], b: Sequence[int], names: Sequence[str] | None = None) -> LatticeSolution:
    """All integer solutions of ``A x = b``.

    The particular solution takes every free parameter equal to zero.
    """
    m = len(A)
    if m == 0:
        raise ValueError("empty system")
    n = len(A[0])
    H, U, pivots = column_hermite(A)
    rank = len(pivots)
    y = [0] * n
    for r in range(m):
        acc = int(b[r]) - sum(H[r][j] * y[j] for j in range(rank) if pivots[j] != r)
        piv = [j for j in range(rank) if pivots[j] == r]
        if piv:
            j = piv[0]
            if acc % H[r][j]:
                label = names[r] if names else f"row {r}"
                raise InfeasibleSystemError(
                    f"no integer solution: congruence {acc} = 0 mod {H[r][j]} fails at {label}", r
                )
            y[j] = acc // H[r][j]
        elif acc != 0:
            label = names[r] if names else f"row {r}"
            raise InfeasibleSystemError(f"inconsistent equation at {label} (residual {acc})", r)
    x = tuple(sum(U[i][j] * y[j] for j in range(n)) for i in range(n))
    kernel = tuple(tuple(U[i][j] for i in range(n)) for j in range(rank, n))
    return LatticeSolution(x, kernel)
