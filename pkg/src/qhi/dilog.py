"""Scalar and matrix dilogarithms.

Scalar side: the Euler dilogarithm ``Li2``, the Rogers dilogarithm ``L``
normalized by ``L(1) = 0``, the Bloch-Wigner function ``D2`` and the
exponentiated classical tensor ``R_(1, *)``.

Matrix side: the basic tensors ``L_N(u', v')`` on the Fermat curve
``u'^N + v'^N = 1``, their inverses, the charged tensors ``R_(N, *, c)``
and the face matrices ``S``, ``T`` and ``Q = T^-1 S``.

Tensor entries are stored as ``A[i, j, k, l]`` where ``(i, j)`` index
``V2 (x) V0`` and ``(k, l)`` index ``V3 (x) V1``; ``V_j`` is the copy of
``C^N`` attached to the face opposite ``v_j``.  For ``sign = +1`` the
pair ``(i, j)`` is outgoing, for ``sign = -1`` the pair ``(k, l)`` is.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

CURVE_TOL = 1e-9
POLE_TOL = 1e-12


class DegenerateModulusError(ValueError):
    """Raised when a tensor entry hits a pole of the quantum dilogarithm."""


# -- scalar dilogarithms ------------------------------------------------


@lru_cache(maxsize=None)
def _bernoulli(n: int) -> tuple[Fraction, ...]:
    """Bernoulli numbers ``B_0..B_n`` with ``B_1 = -1/2``."""
    b = [Fraction(0)] * (n + 1)
    for m in range(n + 1):
        b[m] = Fraction(1)
        if m == 0:
            continue
        acc = Fraction(0)
        for k in range(m):
            acc += Fraction(math.comb(m + 1, k)) * b[k]
        b[m] = -acc / (m + 1)
    return tuple(b)


@lru_cache(maxsize=None)
def _series_coefficients(terms: int = 40) -> tuple[float, ...]:
    b = _bernoulli(terms)
    return tuple(float(b[n] / math.factorial(n + 1)) for n in range(terms))


def _li2_series(z: complex) -> complex:
    # Li2(z) = sum_n B_n u^(n+1) / (n+1)!  with  u = -log(1 - z)
    u = -cmath.log(1 - z)
    total = 0j
    power = u
    for coeff in _series_coefficients():
        total += coeff * power
        power *= u
    return total


def li2(z: complex) -> complex:
    """Principal branch of the Euler dilogarithm (cut along ``[1, inf)``)."""
    z = complex(z)
    if z == 0:
        return 0j
    if z == 1:
        return complex(math.pi**2 / 6)
    if z.imag == 0.0 and z.real > 1:
        # on the cut take the limit from below, Im Li2 = -pi log z
        x = z.real
        return complex(math.pi**2 / 3 - 0.5 * math.log(x) ** 2 - li2(1 / x).real, -math.pi * math.log(x))
    if abs(z) > 1:
        # inversion: Li2(z) + Li2(1/z) = -pi^2/6 - log(-z)^2 / 2
        return -math.pi**2 / 6 - 0.5 * cmath.log(-z) ** 2 - li2(1 / z)
    if z.real > 0.5:
        # reflection: Li2(z) + Li2(1-z) = pi^2/6 - log(z) log(1-z)
        return math.pi**2 / 6 - cmath.log(z) * cmath.log(1 - z) - _li2_series(1 - z)
    return _li2_series(z)


def bloch_wigner(x: complex) -> float:
    """``D2(x) = Im Li2(x) + arg(1 - x) log|x|``, continuous on the sphere."""
    x = complex(x)
    if x == 0 or x == 1:
        return 0.0
    if x.imag == 0.0:
        return 0.0
    return li2(x).imag + cmath.phase(1 - x) * math.log(abs(x))


def _on_cut(x: complex) -> bool:
    return x.imag == 0.0 and (x.real <= 0.0 or x.real >= 1.0)


def rogers_L(x: complex) -> complex:
    """Rogers dilogarithm ``-pi^2/6 + log(x) log(1-x) / 2 + Li2(x)``."""
    x = complex(x)
    if _on_cut(x):
        raise ValueError(f"Rogers dilogarithm evaluated on a branch cut at {x}")
    return -math.pi**2 / 6 + 0.5 * cmath.log(x) * cmath.log(1 - x) + li2(x)


def rogers_R1(x: complex, p: int, q: int, sign: int) -> complex:
    """The classical tensor ``R_(1, sign)([x; p, q])``."""
    x = complex(x)
    if _on_cut(x):
        raise ValueError(f"R1 needs x off the cuts (-inf, 0] and [1, inf); got {x}")
    inner = rogers_L(x) + 0.5j * math.pi * (p * cmath.log(1 - x) + q * cmath.log(x))
    return cmath.exp(sign * 2 / (1j * math.pi) * inner)


# -- basic quantum dilogarithm --------------------------------------------


def zeta(N: int) -> complex:
    return cmath.exp(2j * math.pi / N)


def _check_odd(N: int) -> None:
    if N < 1 or N % 2 == 0:
        raise ValueError(f"N must be an odd positive integer, got {N}")


def root(x: complex, N: int) -> complex:
    """``x^(1/N) = exp(log(x) / N)`` with ``0^(1/N) = 0``."""
    if x == 0:
        return 0j
    return cmath.exp(cmath.log(x) / N)


def bracket(x: complex, N: int) -> complex:
    """``[x] = (1 - x^N) / (N (1 - x))``, extended by continuity at ``x = 1``."""
    if abs(1 - x) < 1e-14:
        return complex(1.0)
    return (1 - x**N) / (N * (1 - x))


def g_function(x: complex, N: int) -> complex:
    z = zeta(N)
    out = 1 + 0j
    for j in range(1, N):
        base = 1 - x * z ** (-j)
        out *= 0j if base == 0 else cmath.exp(j / N * cmath.log(base))
    return out


def h_function(x: complex, N: int) -> complex:
    return g_function(x, N) / g_function(1.0, N)


def omega(u: complex, v: complex, n: int, N: int) -> complex:
    """``omega(u, v | n) = prod_{j=1}^{n mod N} v / (1 - u zeta^j)``."""
    z = zeta(N)
    out = 1 + 0j
    for j in range(1, n % N + 1):
        den = 1 - u * z**j
        if abs(den) < POLE_TOL:
            raise DegenerateModulusError(f"degenerate N-th root modulus: u = {u} hits a pole")
        out *= v / den
    return out


def _check_curve(u: complex, v: complex, N: int) -> None:
    un, vn = u**N, v**N
    scale = max(1.0, abs(un), abs(vn))
    if abs(un + vn - 1) > CURVE_TOL * scale:
        raise ValueError(f"(u', v') = ({u}, {v}) is not on the curve u'^N + v'^N = 1")


def _phase_table(N: int, sign: int) -> np.ndarray:
    """``zeta^(sign (k j + (m+1) k^2))`` as an array indexed ``[k, j]``."""
    m = (N - 1) // 2
    k = np.arange(N)[:, None]
    j = np.arange(N)[None, :]
    expo = (sign * (k * j + (m + 1) * k * k)) % N
    return np.exp(2j * np.pi * expo / N)


def _delta_mask(N: int) -> np.ndarray:
    i = np.arange(N)[:, None, None]
    j = np.arange(N)[None, :, None]
    l = np.arange(N)[None, None, :]
    return ((i + j - l) % N == 0).astype(float)


def basic_L(N: int, u: complex, v: complex, check: bool = True) -> np.ndarray:
    """Entries ``L_N(u, v)^{i,j}_{k,l}`` stored at ``[i, j, k, l]``."""
    _check_odd(N)
    if check:
        _check_curve(u, v, N)
    w = np.array([omega(u, v, n, N) for n in range(N)])
    i = np.arange(N)
    om = w[(i[:, None] - i[None, :]) % N]  # [i, k]
    ph = _phase_table(N, 1)  # [k, j]
    delta = _delta_mask(N)  # [i, j, l]
    return h_function(u, N) * np.einsum("ik,kj,ijl->ijkl", om, ph, delta)


def basic_L_inverse(N: int, u: complex, v: complex, check: bool = True) -> np.ndarray:
    """Entries ``(L_N(u, v)^-1)^{k,l}_{i,j}`` stored at ``[i, j, k, l]``."""
    _check_odd(N)
    if check:
        _check_curve(u, v, N)
    z = zeta(N)
    w = np.array([omega(u / z, v, n, N) for n in range(N)])
    i = np.arange(N)
    om = 1 / w[(i[:, None] - i[None, :]) % N]
    ph = _phase_table(N, -1)
    delta = _delta_mask(N)
    return bracket(u, N) / h_function(u, N) * np.einsum("ik,kj,ijl->ijkl", om, ph, delta)


def as_matrix(A: np.ndarray) -> np.ndarray:
    """The ``N^2 x N^2`` matrix with rows ``(i, j)`` and columns ``(k, l)``."""
    N = A.shape[0]
    return A.reshape(N * N, N * N)


# -- charged tensors ---------------------------------------------------------


@dataclass(frozen=True)
class Tensor4:
    """A tetrahedral tensor with its in/out signature."""

    data: np.ndarray
    sign: int

    @property
    def N(self) -> int:
        return self.data.shape[0]

    @property
    def outgoing_slots(self) -> tuple[str, str]:
        return ("i", "j") if self.sign == 1 else ("k", "l")

    def by_faces(self) -> np.ndarray:
        """The same entries re-indexed by the states on ``(F0, F1, F2, F3)``."""
        return np.transpose(self.data, (1, 3, 0, 2))


def charge_prefactor(N: int, c: tuple[int, int, int], u0: complex, u1: complex) -> complex:
    """``(u0^-c1 u1^c0)^((N-1)/2)`` with integer powers throughout."""
    return (u0 ** (-c[1]) * u1 ** c[0]) ** ((N - 1) // 2)


def matrix_R(N: int, sign: int, c: tuple[int, int, int], u0: complex, u1: complex) -> Tensor4:
    """The charged matrix dilogarithm ``R_(N, sign, c)(u0, u1)``."""
    pref = charge_prefactor(N, c, u0, u1)
    if sign == 1:
        data = basic_L(N, u0, 1 / u1)
    elif sign == -1:
        data = basic_L_inverse(N, u0, 1 / u1)
    else:
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    return Tensor4(pref * data, sign)


# -- face matrices -------------------------------------------------------------


def jacobi_symbol(a: int, n: int) -> int:
    if n <= 0 or n % 2 == 0:
        raise ValueError("Jacobi symbol needs an odd positive modulus")
    a %= n
    result = 1
    while a:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                result = -result
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            result = -result
        a %= n
    return result if n == 1 else 0


def phi(N: int) -> complex:
    if N < 3 or N % 2 == 0:
        raise ValueError(f"face matrices need odd N >= 3, got {N}")
    m = (N - 1) // 2
    leg = jacobi_symbol(m + 1, N)
    return complex(leg) if N % 4 == 1 else 1j * leg


def epsilon(N: int) -> int:
    return -1 if ((N - 1) // 2) % 2 else 1


@dataclass(frozen=True)
class FaceMatrices:
    N: int
    S: np.ndarray
    T: np.ndarray
    T_inv: np.ndarray
    S_inv: np.ndarray
    Q: np.ndarray
    phi: complex

    def Q_power(self, r: int) -> np.ndarray:
        return np.linalg.matrix_power(self.Q, r % 3)


@lru_cache(maxsize=None)
def face_matrices(N: int) -> FaceMatrices:
    ph = phi(N)
    m = (N - 1) // 2
    idx = np.arange(N)
    S = np.exp(2j * np.pi * np.outer(idx, idx) / N) / math.sqrt(N)
    anti = ((idx[:, None] + idx[None, :]) % N == 0).astype(float)
    diag = np.exp(2j * np.pi * ((idx * idx * (m + 1)) % N) / N)
    T = diag[:, None] * anti
    T_inv = np.conj(diag)[:, None] * anti
    S_inv = np.conj(S)
    Q = T_inv @ S
    for a in (S, T, T_inv, S_inv, Q):
        a.setflags(write=False)
    return FaceMatrices(N, S, T, T_inv, S_inv, Q, ph)
