"""Single-mode Fock-space states and generalized binomial states.

A cavity mode truncated at ``n_max`` photons is a complex vector of length
``n_max + 1``. The N-photon generalized binomial state is

    |N, p, phi> = sum_n sqrt(C(N, n) p^n (1 - p)^(N - n)) e^{i n phi} |n>

and interpolates between the vacuum (p = 0), the number state |N> (p = 1)
and, for N -> inf with N p = |alpha|^2 fixed, the coherent state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

#: Normalization tolerance for states returned by a single operation.
NORM_TOL = 1e-12

# Above this N, math.comb no longer fits in a double.
_EXACT_COMB_MAX_N = 1000


def _as_readonly(amplitudes) -> np.ndarray:
    arr = np.array(amplitudes, dtype=complex)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class CavityState:
    """Pure state of one cavity mode in the truncated Fock basis.

    Attributes
    ----------
    amplitudes : ndarray of complex, shape (n_max + 1,)
        Probability amplitude of |n> at index n. Read-only.
    """

    amplitudes: np.ndarray

    def __post_init__(self):
        arr = _as_readonly(self.amplitudes)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("amplitudes must be a non-empty 1-D vector")
        norm = float(np.vdot(arr, arr).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"cavity state is not normalized (norm^2 = {norm!r})")
        object.__setattr__(self, "amplitudes", arr)

    @property
    def n_max(self) -> int:
        return self.amplitudes.size - 1

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def __repr__(self):
        return f"CavityState(n_max={self.n_max}, amplitudes={self.amplitudes.tolist()})"


@dataclass(frozen=True)
class NgbsParams:
    """Parameters (N, p, phi) of an N-photon generalized binomial state."""

    big_n: int
    p: float
    phi: float

    def __post_init__(self):
        if int(self.big_n) != self.big_n or self.big_n < 1:
            raise ValueError(f"big_n must be a positive integer, got {self.big_n!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p!r}")
        if not math.isfinite(self.phi):
            raise ValueError("phi must be finite")


def fock_state(n: int, n_max: int) -> CavityState:
    """Number state |n> truncated at ``n_max``."""
    if not 0 <= n <= n_max:
        raise ValueError(f"need 0 <= n <= n_max, got n={n}, n_max={n_max}")
    amps = np.zeros(n_max + 1, dtype=complex)
    amps[n] = 1.0
    return CavityState(amps)


def binomial_weights(big_n: int, p: float) -> np.ndarray:
    """Photon-number distribution C(N, n) p^n (1-p)^(N-n) for n = 0..N."""
    q = 1.0 - p
    if big_n <= _EXACT_COMB_MAX_N:
        return np.array(
            [math.comb(big_n, n) * p**n * q ** (big_n - n) for n in range(big_n + 1)],
            dtype=float,
        )
    # log-space fallback; endpoints p in {0, 1} handled by the masks
    n = np.arange(big_n + 1)
    with np.errstate(divide="ignore"):
        log_w = (
            math.lgamma(big_n + 1)
            - np.array([math.lgamma(k + 1) + math.lgamma(big_n - k + 1) for k in n])
            + n * np.log(p)
            + (big_n - n) * np.log(q)
        )
    w = np.exp(log_w)
    if p == 0.0:
        w = (n == 0).astype(float)
    elif p == 1.0:
        w = (n == big_n).astype(float)
    return w


def make_ngbs(params: NgbsParams, n_max: int) -> CavityState:
    """Build |N, p, phi> in a Fock space truncated at ``n_max``.

    Raises
    ------
    ValueError
        If ``n_max < params.big_n``, which would discard probability.
    """
    if n_max < params.big_n:
        raise ValueError(
            f"n_max={n_max} is below N={params.big_n}; truncation would lose probability"
        )
    amps = np.zeros(n_max + 1, dtype=complex)
    n = np.arange(params.big_n + 1)
    amps[: params.big_n + 1] = np.sqrt(binomial_weights(params.big_n, params.p)) * np.exp(
        1j * n * params.phi
    )
    return CavityState(amps)


def orthogonal_partner(params: NgbsParams) -> NgbsParams:
    """Return (N, 1 - p, phi + pi), whose state is orthogonal to ``params``."""
    return NgbsParams(params.big_n, 1.0 - params.p, params.phi + math.pi)


def _check_same_dim(a, b):
    if a.amplitudes.shape != b.amplitudes.shape:
        raise ValueError(
            f"dimension mismatch: {a.amplitudes.shape} vs {b.amplitudes.shape}"
        )
    dims_a = getattr(a, "factor_dims", None)
    dims_b = getattr(b, "factor_dims", None)
    if dims_a is not None and dims_b is not None and tuple(dims_a) != tuple(dims_b):
        raise ValueError(f"factor layout mismatch: {dims_a} vs {dims_b}")


def inner_product(a: CavityState, b: CavityState) -> complex:
    """<a|b>, conjugate-linear in ``a``."""
    _check_same_dim(a, b)
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def state_fidelity(a, b) -> float:
    """|<a|b>|^2 for two pure states of identical layout.

    Works for any object exposing an ``amplitudes`` vector (cavity or
    composite states) and is insensitive to global phase.
    """
    _check_same_dim(a, b)
    f = abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2
    return float(min(f, 1.0))


def coherent_state(alpha: complex, n_max: int) -> CavityState:
    """Glauber coherent state |alpha>, truncated at ``n_max`` and renormalized.

    Raises
    ------
    ValueError
        If the truncated norm falls below ``1 - 1e-10``.
    """
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    alpha = complex(alpha)
    n = np.arange(n_max + 1)
    if alpha == 0:
        return fock_state(0, n_max)
    r = abs(alpha)
    log_mag = -0.5 * r * r + n * math.log(r) - 0.5 * np.array(
        [math.lgamma(k + 1) for k in n]
    )
    amps = np.exp(log_mag) * np.exp(1j * n * np.angle(alpha))
    norm2 = float(np.sum(np.abs(amps) ** 2))
    if norm2 < 1.0 - 1e-10:
        raise ValueError(
            f"n_max={n_max} too small for |alpha|={r}: truncated norm^2 = {norm2!r}"
        )
    return CavityState(amps / math.sqrt(norm2))
