"""MCS selection under a block-error ceiling and the expected goodput curve.

For a data slot at CSI age d, the SINR is sinr_gain(d) * X where X = |y|^2 is
exponentially distributed.  The slot goodput is the best rate * (1 - BLER)
over all MCS entries whose BLER stays below e_max, and the age curve r(d) is
the exponential-measure integral of that maximum, evaluated by deterministic
composite Gauss-Legendre quadrature split at the MCS feasibility thresholds
(the integrand jumps there, so plain Gauss rules would stall at low accuracy).
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources

import numpy as np

from .channel import LinkParams
from .estimation import pilot_second_moment, sinr_gain

MAX_TABULATED_AGES = 1_000_000

# Default per-CQI logistic BLER model: bler(snr) = 1/(1 + exp(a*(snr_dB - b))).
# Slopes a (per dB) and midpoints b (dB, the 50% BLER point) are model defaults
# spaced so that higher CQIs need higher SINR; they are not measurements.
DEFAULT_BLER_SLOPE_PER_DB = 1.5
DEFAULT_CQI_MIDPOINTS_DB = {
    1: -8.2, 2: -6.2, 3: -3.8, 4: -1.3, 5: 0.9,
    6: 2.8, 7: 4.4, 8: 6.6, 9: 8.8, 10: 10.2,
    11: 12.6, 12: 14.8, 13: 17.2, 14: 19.5, 15: 21.2,
}


class LogisticBlerCurve:
    """Logistic-in-dB block error curve, 0.5 at the midpoint."""

    def __init__(self, slope_per_db: float, midpoint_db: float):
        if slope_per_db <= 0:
            raise ValueError("slope must be positive for a decreasing BLER curve")
        self.slope_per_db = slope_per_db
        self.midpoint_db = midpoint_db

    def __call__(self, snr_linear):
        snr = np.asarray(snr_linear, dtype=float)
        scalar = snr.ndim == 0
        snr = np.atleast_1d(snr)
        out = np.ones_like(snr)
        pos = snr > 0
        if pos.any():
            snr_db = 10.0 * np.log10(snr[pos])
            z = np.clip(self.slope_per_db * (snr_db - self.midpoint_db), -700, 700)
            out[pos] = 1.0 / (1.0 + np.exp(z))
        return float(out[0]) if scalar else out

    def fingerprint_key(self) -> str:
        return f"logistic({self.slope_per_db!r},{self.midpoint_db!r})"


class TabulatedBlerCurve:
    """Piecewise-linear interpolation of measured BLER points, linear in dB.

    Queries outside the grid clamp to the endpoint values.
    """

    def __init__(self, snr_db: np.ndarray, bler: np.ndarray):
        self.snr_db = np.asarray(snr_db, dtype=float)
        self.bler = np.asarray(bler, dtype=float)
        if len(self.snr_db) < 1 or len(self.snr_db) != len(self.bler):
            raise ValueError("grid and BLER arrays must be equal-length and nonempty")

    def __call__(self, snr_linear):
        snr = np.asarray(snr_linear, dtype=float)
        scalar = snr.ndim == 0
        snr = np.atleast_1d(snr)
        out = np.full_like(snr, self.bler[0])
        pos = snr > 0
        if pos.any():
            snr_db = 10.0 * np.log10(snr[pos])
            out[pos] = np.interp(snr_db, self.snr_db, self.bler)
        return float(out[0]) if scalar else out

    def fingerprint_key(self) -> str:
        return f"table({self.snr_db.tolist()!r},{self.bler.tolist()!r})"


@dataclass
class McsEntry:
    """One modulation-and-coding scheme: CQI index, rate, and its BLER curve."""

    index: int
    rate: float
    bler_curve: object  # callable: linear SINR -> BLER

    def __post_init__(self):
        if not 1 <= self.index <= 15:
            raise ValueError(f"CQI index must lie in 1..15, got {self.index}")
        if self.rate <= 0:
            raise ValueError(f"rate must be positive, got {self.rate}")


@dataclass
class McsTable:
    """MCS entries sorted by strictly increasing rate, plus the BLER ceiling."""

    entries: list
    e_max: float = 0.10

    def __post_init__(self):
        if not self.entries:
            raise ValueError("MCS table must contain at least one entry")
        if not (0 < self.e_max < 1):
            raise ValueError(f"e_max must lie in (0, 1), got {self.e_max}")
        rates = [e.rate for e in self.entries]
        for i in range(1, len(rates)):
            if rates[i] <= rates[i - 1]:
                raise ValueError(
                    f"entry rates must be strictly increasing; entry {i} "
                    f"(cqi {self.entries[i].index}) has rate {rates[i]} after {rates[i - 1]}")

    @cached_property
    def max_rate(self) -> float:
        return self.entries[-1].rate

    @cached_property
    def feasibility_thresholds(self) -> np.ndarray:
        """Smallest linear SINR at which each entry meets the BLER ceiling.

        Found by bisection on the monotone curve; +inf when the entry never
        qualifies within the search range.
        """
        out = np.empty(len(self.entries))
        for i, entry in enumerate(self.entries):
            lo, hi = 1e-18, 1e18
            if bler(lo, entry) <= self.e_max:
                out[i] = 0.0
                continue
            if bler(hi, entry) > self.e_max:
                out[i] = np.inf
                continue
            for _ in range(200):
                mid = math.sqrt(lo * hi)
                if bler(mid, entry) <= self.e_max:
                    hi = mid
                else:
                    lo = mid
            out[i] = hi
        return out

    def fingerprint_key(self) -> str:
        parts = [f"{e.index}:{e.rate!r}:{_curve_key(e.bler_curve)}" for e in self.entries]
        return f"e_max={self.e_max!r};" + ";".join(parts)


def _curve_key(curve) -> str:
    key = getattr(curve, "fingerprint_key", None)
    return key() if key is not None else repr(curve)


def bler(snr_linear: float, entry: McsEntry) -> float:
    """Evaluate one entry's BLER at a linear SINR, clamped to [0, 1]."""
    arr = np.asarray(snr_linear, dtype=float)
    if np.any(arr < 0):
        raise ValueError("SINR must be nonnegative")
    value = entry.bler_curve(snr_linear)
    return float(np.clip(value, 0.0, 1.0)) if np.ndim(value) == 0 else np.clip(value, 0.0, 1.0)


def max_goodput(snr_linear: float, table: McsTable):
    """Best rate * (1 - BLER) over entries within the ceiling.

    Returns (goodput, entry); (0.0, None) when no entry qualifies.
    """
    if snr_linear < 0:
        raise ValueError("SINR must be nonnegative")
    best = 0.0
    chosen = None
    for entry in table.entries:
        e = bler(snr_linear, entry)
        if e <= table.e_max:
            g = entry.rate * (1.0 - e)
            if g > best:
                best = g
                chosen = entry
    return best, chosen


def max_goodput_array(snr_linear: np.ndarray, table: McsTable):
    """Vectorized max_goodput over an SINR array.

    Returns (goodput, chosen_index, chosen_bler); chosen_index is -1 and
    chosen_bler is 1.0 where no entry is feasible.
    """
    eta = np.asarray(snr_linear, dtype=float)
    n_entries = len(table.entries)
    blers = np.empty((n_entries, eta.size))
    for i, entry in enumerate(table.entries):
        blers[i] = np.clip(entry.bler_curve(eta.ravel()), 0.0, 1.0)
    rates = np.array([e.rate for e in table.entries])
    goodput = rates[:, None] * (1.0 - blers)
    goodput[blers > table.e_max] = -1.0
    chosen = np.argmax(goodput, axis=0)
    best = goodput[chosen, np.arange(eta.size)]
    infeasible = best < 0
    best[infeasible] = 0.0
    chosen_bler = blers[chosen, np.arange(eta.size)]
    chosen_bler[infeasible] = 1.0
    chosen[infeasible] = -1
    return best.reshape(eta.shape), chosen.reshape(eta.shape), chosen_bler.reshape(eta.shape)


@dataclass(frozen=True)
class QuadratureConfig:
    """Fixed-node quadrature settings for the exponential-measure integral."""

    nodes: int = 64
    tail: float = 40.0       # integrate u in [0, >= tail] (u = X / mean)
    max_panel: float = 5.0   # split panels longer than this in u

    def __post_init__(self):
        if self.nodes < 8:
            raise ValueError(f"quadrature needs at least 8 nodes, got {self.nodes}")
        if self.tail <= 0 or self.max_panel <= 0:
            raise ValueError("tail and max_panel must be positive")


@dataclass(frozen=True, eq=False)
class RewardCurve:
    """Tabulated expected goodput r(1..n) with a fingerprint of its inputs."""

    values: np.ndarray
    fingerprint: str = "synthetic"

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.size < 1:
            raise ValueError("reward curve must be a nonempty 1-D sequence")
        if not np.all(np.isfinite(vals)) or np.any(vals < 0):
            raise ValueError("reward values must be finite and nonnegative")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)

    def value(self, age: int) -> float:
        if not 1 <= age <= len(self.values):
            raise ValueError(f"age {age} outside tabulated range 1..{len(self.values)}")
        return float(self.values[age - 1])

    @cached_property
    def cumulative(self) -> np.ndarray:
        """cumulative[k] = sum of r(1..k), with cumulative[0] = 0."""
        return np.concatenate(([0.0], np.cumsum(self.values)))


_GL_CACHE: dict = {}


def _gauss_legendre(n: int):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def expected_goodput(age: int, params: LinkParams, table: McsTable,
                     quad: QuadratureConfig = QuadratureConfig()) -> float:
    """Expected slot goodput at CSI age `age`, integrated over the pilot draw.

    E[G(sinr_gain(age) * X)] with X exponential of mean P_p*rho0 + noise_var.
    The u-axis (X in units of its mean) is partitioned at every feasibility
    threshold and integrated panel-by-panel with Gauss-Legendre nodes; the
    region below the lowest threshold contributes exactly zero.
    """
    if age < 1:
        raise ValueError(f"age must be >= 1, got {age}")
    gain = sinr_gain(age, params)
    if gain <= 0.0:
        return 0.0
    mean = pilot_second_moment(params)
    scale = gain * mean

    thresholds = table.feasibility_thresholds / scale  # in u units
    finite = thresholds[np.isfinite(thresholds)]
    if finite.size == 0:
        return 0.0
    u_start = float(finite.min())
    u_end = min(max(quad.tail, u_start + 30.0), 700.0)  # exp(-u) underflows past ~745
    if u_start >= u_end:
        return 0.0

    cuts = np.unique(np.concatenate(
        ([u_start, u_end], finite[(finite > u_start) & (finite < u_end)])))
    panels = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        n_sub = max(1, int(math.ceil((b - a) / quad.max_panel)))
        edges = np.linspace(a, b, n_sub + 1)
        panels.extend(zip(edges[:-1], edges[1:]))

    x_ref, w_ref = _gauss_legendre(quad.nodes)
    total = 0.0
    for a, b in panels:
        hw = 0.5 * (b - a)
        u = 0.5 * (a + b) + hw * x_ref
        g, _, _ = max_goodput_array(u * scale, table)
        total += hw * float(np.dot(w_ref, g * np.exp(-u)))
    return total


def build_reward_curve(params: LinkParams, table: McsTable, max_age: int,
                       quad: QuadratureConfig = QuadratureConfig()) -> RewardCurve:
    """Tabulate expected_goodput for ages 1 .. max_age."""
    if max_age < 1:
        raise ValueError(f"max_age must be >= 1, got {max_age}")
    if max_age > MAX_TABULATED_AGES:
        raise ValueError(f"max_age {max_age} exceeds the configured bound {MAX_TABULATED_AGES}")
    values = np.array([expected_goodput(d, params, table, quad) for d in range(1, max_age + 1)])
    key = (f"params={params!r};table={table.fingerprint_key()};"
           f"quad=({quad.nodes},{quad.tail!r},{quad.max_panel!r});max_age={max_age}")
    digest = hashlib.sha256(key.encode()).hexdigest()[:16]
    return RewardCurve(values=values, fingerprint=f"physical:{digest}")


def parametric_mcs_table(rates: dict, e_max: float) -> McsTable:
    """Build a table from CQI -> rate with the default logistic BLER model."""
    entries = []
    for cqi in sorted(rates):
        if cqi not in DEFAULT_CQI_MIDPOINTS_DB:
            raise ValueError(
                f"no default BLER midpoint for cqi {cqi}; supply a measured BLER table")
        entries.append(McsEntry(
            index=cqi, rate=rates[cqi],
            bler_curve=LogisticBlerCurve(DEFAULT_BLER_SLOPE_PER_DB,
                                         DEFAULT_CQI_MIDPOINTS_DB[cqi])))
    return McsTable(entries=entries, e_max=e_max)


def default_mcs_table(e_max: float | None = None) -> McsTable:
    """The shipped 15-CQI table: LTE efficiency rates + logistic BLER model."""
    rates, default_e_max = _load_default_rates()
    return parametric_mcs_table(rates, default_e_max if e_max is None else e_max)


def _load_default_rates():
    text = resources.files("pilotsched.data").joinpath("lte_cqi_rates.json").read_text()
    return _parse_rate_config(json.loads(text), "built-in rate table")


def _parse_rate_config(doc: dict, source: str):
    try:
        e_max = float(doc["e_max"])
        raw = doc["rates"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"{source}: expected keys 'e_max' and 'rates'") from exc
    rates = {}
    for key, value in raw.items():
        cqi = int(key)
        rate = float(value)
        if rate <= 0:
            raise ValueError(f"{source}: cqi {cqi} has nonpositive rate {rate}")
        rates[cqi] = rate
    ordered = sorted(rates)
    for prev, cur in zip(ordered, ordered[1:]):
        if rates[cur] <= rates[prev]:
            raise ValueError(
                f"{source}: non-monotone rate ordering at cqi {cur} "
                f"(rate {rates[cur]} after cqi {prev} rate {rates[prev]})")
    return rates, e_max


def load_mcs_rates(path) -> tuple:
    """Read a CQI -> rate JSON config; returns (rates dict, e_max)."""
    with open(path) as fh:
        doc = json.load(fh)
    return _parse_rate_config(doc, str(path))


def load_bler_table(path, rate_config=None) -> McsTable:
    """Build an McsTable from a measured BLER CSV (header cqi,snr_db,bler).

    Rows must be sorted by (cqi, snr_db); BLER values must lie in [0, 1] and
    be nonincreasing in SNR within each CQI.  Rates come from `rate_config`
    (a JSON path) or the shipped LTE defaults.
    """
    if rate_config is None:
        rates, e_max = _load_default_rates()
    else:
        rates, e_max = load_mcs_rates(rate_config)

    curves: dict[int, tuple[list, list]] = {}
    last_key = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty BLER table")
        if [h.strip() for h in header] != ["cqi", "snr_db", "bler"]:
            raise ValueError(f"{path}: expected header 'cqi,snr_db,bler', got {header}")
        n_rows = 0
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                cqi, snr_db, e = int(row[0]), float(row[1]), float(row[2])
            except (ValueError, IndexError) as exc:
                raise ValueError(f"{path} row {line_no}: malformed row {row}") from exc
            if not 0.0 <= e <= 1.0:
                raise ValueError(f"{path} row {line_no}: BLER {e} outside [0, 1]")
            key = (cqi, snr_db)
            if last_key is not None and key <= last_key:
                raise ValueError(
                    f"{path} row {line_no}: rows not sorted by (cqi, snr_db); "
                    f"{key} follows {last_key}")
            last_key = key
            grid = curves.setdefault(cqi, ([], []))
            grid[0].append(snr_db)
            grid[1].append(e)
            n_rows += 1
        if n_rows == 0:
            raise ValueError(f"{path}: BLER table contains no data rows")

    entries = []
    for cqi in sorted(curves):
        snr_grid, bler_vals = curves[cqi]
        for i in range(1, len(bler_vals)):
            if bler_vals[i] > bler_vals[i - 1]:
                raise ValueError(
                    f"{path}: BLER curve for cqi {cqi} is not nonincreasing "
                    f"at snr_db {snr_grid[i]}")
        if cqi not in rates:
            raise ValueError(f"{path}: no configured rate for cqi {cqi}")
        entries.append(McsEntry(index=cqi, rate=rates[cqi],
                                bler_curve=TabulatedBlerCurve(np.array(snr_grid),
                                                              np.array(bler_vals))))
    return McsTable(entries=entries, e_max=e_max)
