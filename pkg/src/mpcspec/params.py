"""Physical parameters of the driven atom-cavity system.

All rates are in units of the cavity decay rate (``kappa = 1`` by default)
and every frequency is stored as an offset from the first drive tone, so the
bare atom/cavity frequency never appears.  Detunings ``deltas_tilde`` are in
units of ``g_f``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace


@dataclass(frozen=True)
class SystemParams:
    """Rates, drive tones and truncation for an ``N``-chromatically driven JC system.

    Parameters
    ----------
    g_f : float
        Reference coupling; the first tone sits at ``omega + g_f``.
    kappa : float
        Cavity field decay rate.
    gamma_I : float
        Atomic (fluorescence) decay rate.
    N : int
        Photon order, equal to the number of drive tones.
    amps : tuple of float
        Real drive amplitudes ``E_1 .. E_N``.
    deltas_tilde : tuple of float
        Normalized detunings ``delta_m / g_f`` for tones ``m = 2 .. N``.
        The first tone is pinned at ``delta_1 / g_f = 1``.
    n_couplets : int, optional
        Dressed-basis truncation used by the steady-state solver.
        Defaults to ``N + 1``.
    """

    g_f: float
    kappa: float = 1.0
    gamma_I: float = 1.0
    N: int = 3
    amps: tuple[float, ...] = ()
    deltas_tilde: tuple[float, ...] = ()
    n_couplets: int | None = None
    delta1_tilde: float = field(default=1.0, init=False)

    def __post_init__(self):
        object.__setattr__(self, "amps", tuple(float(a) for a in self.amps))
        object.__setattr__(self, "deltas_tilde", tuple(float(d) for d in self.deltas_tilde))
        if self.n_couplets is None:
            object.__setattr__(self, "n_couplets", self.N + 1)
        self.validate()

    def validate(self) -> None:
        if not isinstance(self.N, int) or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        if not self.kappa > 0:
            raise ValueError(f"kappa must be > 0, got {self.kappa}")
        if not self.g_f > 0:
            raise ValueError(f"g_f must be > 0, got {self.g_f}")
        if not self.gamma_I >= 0:
            raise ValueError(f"gamma_I must be >= 0, got {self.gamma_I}")
        if len(self.amps) != self.N:
            raise ValueError(f"amps must hold N={self.N} values, got {len(self.amps)}")
        if any(not (a >= 0) or not math.isfinite(a) for a in self.amps):
            raise ValueError(f"amps must be real and >= 0, got {self.amps}")
        if len(self.deltas_tilde) != self.N - 1:
            raise ValueError(
                f"deltas_tilde must hold N-1={self.N - 1} values, got {len(self.deltas_tilde)}"
            )
        if any(not math.isfinite(d) for d in self.deltas_tilde):
            raise ValueError(f"deltas_tilde must be finite, got {self.deltas_tilde}")
        if not isinstance(self.n_couplets, int) or self.n_couplets < self.N:
            raise ValueError(f"n_couplets must be an integer >= N={self.N}, got {self.n_couplets}")

    @property
    def all_deltas_tilde(self) -> tuple[float, ...]:
        return (self.delta1_tilde,) + self.deltas_tilde

    def tone_offsets(self) -> tuple[float, ...]:
        """Tone frequencies relative to the first tone, ``delta_m - g_f``."""
        return tuple((d - self.delta1_tilde) * self.g_f for d in self.all_deltas_tilde)

    def with_scan(self, delta_tilde: float) -> SystemParams:
        """Copy with the last (scanned) tone moved to ``delta_tilde``."""
        if self.N < 2:
            raise ValueError("N=1 has no scanned tone")
        return replace(self, deltas_tilde=self.deltas_tilde[:-1] + (float(delta_tilde),))

    def with_amps(self, **amps: float) -> SystemParams:
        """Copy with selected amplitudes replaced, e.g. ``with_amps(E1=0, E2=0)``."""
        new = list(self.amps)
        for key, value in amps.items():
            if not key.startswith("E") or not key[1:].isdigit():
                raise ValueError(f"unknown amplitude {key!r}")
            m = int(key[1:])
            if not 1 <= m <= self.N:
                raise ValueError(f"amplitude index out of range: {key}")
            new[m - 1] = float(value)
        return replace(self, amps=tuple(new))

    def scaled(self, factor: float) -> SystemParams:
        return replace(self, amps=tuple(a * factor for a in self.amps))


def fig2_params(delta3_tilde: float = 1.0, g_f: float = 63.0) -> SystemParams:
    """Trichromatic defaults: gamma_I = kappa, E1 = 1/sqrt2, E2 = E3 = sqrt2.

    The second tone drives |1)+ -> |2)+ at g = g_f, i.e. omega_2 = omega + (sqrt2 - 1) g_f.
    """
    return SystemParams(
        g_f=g_f,
        kappa=1.0,
        gamma_I=1.0,
        N=3,
        amps=(1 / math.sqrt(2), math.sqrt(2), math.sqrt(2)),
        deltas_tilde=(math.sqrt(2) - 1, delta3_tilde),
    )

