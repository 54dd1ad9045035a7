"""Shared parameter set for the classical and quantum sawtooth map.

The classical map depends only on ``K = k*T``; the quantum map depends on the
kick strength ``k`` and the period ``T`` (the effective Planck constant)
separately.  On the torus the period is tied to the Hilbert-space size via
``T = 2*pi*L/N``.
"""

from __future__ import annotations

import math
import re
from dataclasses import asdict, dataclass, replace
from typing import Any, Mapping

from qsaw.errors import (
    InvalidMomentum,
    InvalidTorus,
    OverconstrainedParams,
    ParamsError,
)

TORUS = "torus"
CYLINDER = "cylinder"
BOUNDARY_MODES = (TORUS, CYLINDER)

REL_TOL = 1e-12
_INTEGER_TOL = 1e-9

_SQRT_RE = re.compile(r"^([+-]?)\s*sqrt\(?\s*([0-9]*\.?[0-9]+)\s*\)?$")


def resolve_number(value: Any) -> float:
    """Turn a config value into a float.

    Accepts plain numbers, numeric strings, and the symbolic forms ``"sqrt2"``,
    ``"sqrt(3)"``, ``"-sqrt2"``, ``"pi"`` so that irrational parameters survive
    a round trip through JSON at full double precision.
    """
    if isinstance(value, bool):
        raise ParamsError(f"not a number: {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    text = str(value).strip().lower()
    if text in ("pi", "+pi"):
        return math.pi
    if text == "-pi":
        return -math.pi
    match = _SQRT_RE.match(text)
    if match:
        sign = -1.0 if match.group(1) == "-" else 1.0
        return sign * math.sqrt(float(match.group(2)))
    try:
        return float(text)
    except ValueError:
        raise ParamsError(f"cannot interpret {value!r} as a number") from None


def _close(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=REL_TOL, abs_tol=1e-300)


def _as_integer(x: float) -> int | None:
    r = round(x)
    if r >= 1 and abs(x - r) <= _INTEGER_TOL * max(1.0, abs(x)):
        return int(r)
    return None


@dataclass(frozen=True)
class MapParams:
    """Validated parameter set; immutable once built.

    Attributes
    ----------
    K : float
        Classical chaos parameter, ``K = k*T``.
    k : float
        Quantum kick strength.
    T : float
        Kick period, equal to the effective Planck constant.
    n : int
        Number of qubits; the Hilbert space has ``N = 2**n`` levels.
    L : int or None
        Torus size in units of 2*pi.  ``None`` in cylinder mode unless given.
    m0 : int
        Initial momentum level in ``[-N/2, N/2)``.
    boundary : str
        ``"torus"`` or ``"cylinder"``.
    """

    K: float
    k: float
    T: float
    n: int
    L: int | None = None
    m0: int = 0
    boundary: str = TORUS

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1:
            raise ParamsError(f"n must be a positive integer, got {self.n!r}")
        if self.boundary not in BOUNDARY_MODES:
            raise ParamsError(f"unknown boundary mode {self.boundary!r}")
        if not self.T > 0 or not math.isfinite(self.T):
            raise ParamsError(f"T must be positive and finite, got {self.T}")
        if not _close(self.K, self.k * self.T):
            raise OverconstrainedParams(
                f"K={self.K!r} inconsistent with k*T={self.k * self.T!r}")
        if self.boundary == TORUS:
            if self.L is None or int(self.L) != self.L or self.L < 1:
                raise InvalidTorus(f"torus mode needs a positive integer L, got {self.L!r}")
            if not _close(self.T, 2 * math.pi * self.L / self.N):
                raise InvalidTorus(
                    f"T={self.T!r} differs from 2*pi*L/N={2 * math.pi * self.L / self.N!r}")
        elif self.L is not None and (int(self.L) != self.L or self.L < 1):
            raise ParamsError(f"L must be a positive integer, got {self.L!r}")
        if int(self.m0) != self.m0 or not -self.N // 2 <= self.m0 < self.N // 2:
            raise InvalidMomentum(
                f"m0={self.m0!r} outside [{-self.N // 2}, {self.N // 2})")

    @property
    def N(self) -> int:
        return 2 ** self.n

    @property
    def hbar_eff(self) -> float:
        return self.T

    @property
    def m0_index(self) -> int:
        """Storage index of the initial level (``j = m + N/2``)."""
        return self.m0 + self.N // 2

    @property
    def J0(self) -> float:
        """Classical rescaled action of the initial level."""
        return self.T * self.m0

    def with_kick(self, k: float) -> MapParams:
        """Same period and register, different kick strength (``K`` follows)."""
        return replace(self, k=float(k), K=float(k) * self.T)

    def as_dict(self) -> dict:
        return asdict(self)


def derive_params(
    K: float | str | None = None,
    k: float | str | None = None,
    T: float | str | None = None,
    *,
    n: int,
    L: int | None = None,
    m0: int = 0,
    boundary: str = TORUS,
) -> MapParams:
    """Complete a partial parameter set using ``K = k*T`` and the torus rule.

    Two of ``K``, ``k``, ``T`` must be known.  In torus mode ``T`` is implied
    by ``L`` (``T = 2*pi*L/N``), so ``K`` or ``k`` plus ``L`` is enough; when
    only ``K`` and ``k`` are given, ``L = N*T/(2*pi)`` must come out integer.
    Passing all three is allowed when they agree, which makes the function
    idempotent on its own output.
    """
    if boundary not in BOUNDARY_MODES:
        raise ParamsError(f"unknown boundary mode {boundary!r}")
    if not isinstance(n, int) or n < 1:
        raise ParamsError(f"n must be a positive integer, got {n!r}")
    N = 2 ** n
    K = None if K is None else resolve_number(K)
    k = None if k is None else resolve_number(k)
    T = None if T is None else resolve_number(T)

    if boundary == TORUS:
        if L is not None:
            if int(L) != L or L < 1:
                raise InvalidTorus(f"L must be a positive integer, got {L!r}")
            L = int(L)
            T_torus = 2 * math.pi * L / N
            if T is not None and not _close(T, T_torus):
                raise InvalidTorus(f"T={T!r} differs from 2*pi*L/N={T_torus!r}")
            T = T_torus if T is None else T
        elif T is not None:
            L = _as_integer(N * T / (2 * math.pi))
            if L is None:
                raise InvalidTorus(f"N*T/(2*pi)={N * T / (2 * math.pi)!r} is not an integer")
    elif L is not None:
        L = int(L)

    known = sum(v is not None for v in (K, k, T))
    if known < 2:
        raise ParamsError("need two of K, k, T (or L in torus mode plus one of K, k)")
    if known == 3:
        if not _close(K, k * T):
            raise OverconstrainedParams(f"K={K!r} but k*T={k * T!r}")
    elif T is None:
        if k == 0:
            raise ParamsError("cannot derive T from K/k with k = 0")
        T = K / k
        if boundary == TORUS:
            L = _as_integer(N * T / (2 * math.pi))
            if L is None:
                raise InvalidTorus(
                    f"T=K/k={T!r} gives non-integer L={N * T / (2 * math.pi)!r}; "
                    "use boundary='cylinder'")
    elif K is None:
        K = k * T
    else:
        k = K / T

    return MapParams(K=K, k=k, T=T, n=n, L=L, m0=int(m0), boundary=boundary)


def params_from_config(config: Mapping[str, Any]) -> MapParams:
    """Build params from a JSON-style mapping (keys K, k, T, n, L, m0, boundary_mode)."""
    return derive_params(
        K=config.get("K"),
        k=config.get("k"),
        T=config.get("T"),
        n=int(config["n"]),
        L=None if config.get("L") is None else int(config["L"]),
        m0=int(config.get("m0", 0)),
        boundary=config.get("boundary_mode", config.get("boundary", TORUS)),
    )
