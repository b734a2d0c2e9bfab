"""Run configuration: a ``key = value`` document validated up front.

Rates are in units of kappa; detunings ``deltaM`` are normalized by ``g_f``.
Lines starting with ``#`` and blank lines are ignored.  An empty document
yields the trichromatic defaults ``gamma_I = 1``, ``g_f = 63``,
``E1 = 1/sqrt2``, ``E2 = E3 = sqrt2``, ``delta2 = sqrt2 - 1``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, fields
from pathlib import Path

from mpcspec.ensemble import parse_grid
from mpcspec.params import SystemParams


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    params: SystemParams
    q: int = 1
    grid: str = "-4:2:0.02"
    g_grid: str = "0.05:1.25:0.02"
    distribution: str = "delta"
    node_count: int = 24
    g_max_ratio: float = 1.25
    mask_x: float = 0.25
    mask_y: float = 1.0
    waist: float = 1.0
    wavelength: float = 1.0
    L: int = 1
    T: float = 10.0
    dt: float | None = None
    workers: int = 1
    out: str = "."

    def metadata(self) -> dict:
        p = self.params
        meta = {
            "g_f": p.g_f, "kappa": p.kappa, "gamma_I": p.gamma_I, "N": p.N,
            "n_couplets": p.n_couplets,
        }
        meta.update({f"E{m + 1}": a for m, a in enumerate(p.amps)})
        meta.update({f"delta{m + 2}": d for m, d in enumerate(p.deltas_tilde)})
        for f in fields(self):
            if f.name not in ("params", "workers", "out"):
                meta[f.name] = getattr(self, f.name)
        return meta


_INT_KEYS = {"N", "n_couplets", "q", "node_count", "L", "workers"}
_FLOAT_KEYS = {"g_f", "kappa", "gamma_I", "g_max_ratio", "mask_x", "mask_y", "waist",
               "wavelength", "T", "dt"}
_STR_KEYS = {"grid", "g_grid", "distribution", "out"}
_TONE_KEY = re.compile(r"^(E|delta)([1-9][0-9]*)$")

_DEFAULT_AMPS = (1 / math.sqrt(2), math.sqrt(2), math.sqrt(2))
_DEFAULT_DELTAS = (math.sqrt(2) - 1, 1.0)


def _check_distribution(value: str) -> None:
    if value in ("delta", "tem00"):
        return
    if value.startswith("table:") and len(value) > len("table:"):
        return
    raise ValueError("distribution must be 'delta', 'tem00' or 'table:PATH'")


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    raw: dict[str, tuple[object, int]] = {}
    tones: dict[tuple[str, int], tuple[float, int]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        where = f"{source}:{lineno}"
        if "=" not in stripped:
            raise ConfigError(f"{where}: expected 'key = value', got {stripped!r}")
        key, value = (s.strip() for s in stripped.split("=", 1))
        value = value.split("#", 1)[0].strip()
        if key in raw or any(f"{k}{m}" == key for k, m in tones):
            raise ConfigError(f"{where}: duplicate key {key!r}")
        try:
            if key in _INT_KEYS:
                raw[key] = (int(value), lineno)
            elif key in _FLOAT_KEYS:
                raw[key] = (float(value), lineno)
            elif key in _STR_KEYS:
                raw[key] = (value, lineno)
            elif (m := _TONE_KEY.match(key)) is not None:
                tones[(m.group(1), int(m.group(2)))] = (float(value), lineno)
            else:
                raise ConfigError(f"{where}: unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{where}: {key} = {value!r} is not a valid number") from None

    def get(key, default):
        return raw[key][0] if key in raw else default

    N = get("N", 3)
    if N < 1:
        raise ConfigError(f"{source}: N must be a positive integer (N = {N})")
    for (kind, m), (_, lineno) in tones.items():
        lo = 1 if kind == "E" else 2
        if not lo <= m <= N:
            raise ConfigError(f"{source}:{lineno}: {kind}{m} is out of range for N = {N}")
    amps, deltas = [], []
    for m in range(1, N + 1):
        if ("E", m) in tones:
            amps.append(tones[("E", m)][0])
        elif N == 3:
            amps.append(_DEFAULT_AMPS[m - 1])
        else:
            raise ConfigError(f"{source}: E{m} is required when N = {N}")
    for m in range(2, N + 1):
        if ("delta", m) in tones:
            deltas.append(tones[("delta", m)][0])
        elif N == 3:
            deltas.append(_DEFAULT_DELTAS[m - 2])
        else:
            raise ConfigError(f"{source}: delta{m} is required when N = {N}")
    try:
        params = SystemParams(
            g_f=get("g_f", 63.0), kappa=get("kappa", 1.0), gamma_I=get("gamma_I", 1.0), N=N,
            amps=tuple(amps), deltas_tilde=tuple(deltas), n_couplets=get("n_couplets", None),
        )
    except ValueError as exc:
        key = str(exc).split()[0]
        line = f":{raw[key][1]}" if key in raw else ""
        raise ConfigError(f"{source}{line}: {exc}") from None

    kwargs = {k: v for k, (v, _) in raw.items()
              if k not in ("g_f", "kappa", "gamma_I", "N", "n_couplets")}
    cfg = RunConfig(params=params, **kwargs)
    checks = [
        ("q", cfg.q >= 1, "q must be >= 1"),
        ("node_count", cfg.node_count >= 1, "node_count must be >= 1"),
        ("g_max_ratio", cfg.g_max_ratio > 0, "g_max_ratio must be > 0"),
        ("mask_x", 0 < cfg.mask_x <= cfg.wavelength / 4,
         "mask_x must lie in (0, wavelength/4]"),
        ("mask_y", cfg.mask_y > 0, "mask_y must be > 0"),
        ("waist", cfg.waist > 0, "waist must be > 0"),
        ("wavelength", cfg.wavelength > 0, "wavelength must be > 0"),
        ("L", cfg.L >= 0, "L must be >= 0"),
        ("T", cfg.T > 0, "T must be > 0"),
        ("dt", cfg.dt is None or cfg.dt > 0, "dt must be > 0"),
        ("workers", cfg.workers >= 1, "workers must be >= 1"),
    ]
    for key, ok, msg in checks:
        if not ok:
            line = f":{raw[key][1]}" if key in raw else ""
            raise ConfigError(f"{source}{line}: {msg} ({key} = {getattr(cfg, key)!r})")
    for key in ("grid", "g_grid"):
        try:
            parse_grid(getattr(cfg, key))
        except ValueError as exc:
            line = f":{raw[key][1]}" if key in raw else ""
            raise ConfigError(f"{source}{line}: {exc}") from None
    try:
        _check_distribution(cfg.distribution)
    except ValueError as exc:
        line = f":{raw['distribution'][1]}" if "distribution" in raw else ""
        raise ConfigError(f"{source}{line}: {exc}") from None
    return cfg


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return parse_config("")
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except UnicodeDecodeError:
        raise ConfigError(f"{path}: config is not valid UTF-8") from None
    return parse_config(text, source=str(path))
