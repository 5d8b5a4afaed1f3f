"""Scenario files and the experiment sweeps that run on them.

Every sweep returns a list of :class:`SimRecord` ordered by sweep index.
Random draws come from seeds derived from ``(scenario seed, point index,
block index)``, so output files do not depend on the worker count.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Sequence

import jsonschema
import numpy as np

from . import analysis
from .angle_search import DEFAULT_RESOLUTION, find_angle_range
from .channel import (
    build_chain,
    chain_product,
    circulant_witness,
    epsilon_segment,
    epsilon_total,
)
from .geometry import MAX_ROTATION, SegmentGeometry, Side, UcaSpec
from .transceiver import (
    MAX_SEARCH_SPACE,
    NoiseSpec,
    SearchSpaceError,
    block_seed,
    get_constellation,
    simulate_errors,
)

__all__ = [
    "ScenarioError",
    "Scenario",
    "SimRecord",
    "ERROR_SURFACE_MODES",
    "BER_DETECTORS",
    "SNR_CONVENTION",
    "list_scenarios",
    "scenario_path",
    "load_schema",
    "load_scenario",
    "scenario_from_dict",
    "rotation_grid",
    "random_pose_chain",
    "run_error_surface",
    "compare_split_vs_direct",
    "run_ber_sweep",
    "run_capacity_sweep",
    "run_angle_range",
    "run_complexity_table",
    "run_circulant_check",
    "emit",
    "dumps",
    "load_records",
    "validate_records",
]

ERROR_SURFACE_MODES = ("segment", "total", "direct")
BER_DETECTORS = ("proposed", "traditional_ml", "uncompensated_ml")
SNR_CONVENTION = ("snr = mean|Lambda|^2 / var_rx for a unit-energy symbol; "
                  "var_ris1 = var_ris2 = var_rx; each symbol sent with energy 1/N")
_ANGLE_FIELDS = ("theta", "phi", "rot_x", "rot_y", "source_alpha", "sink_alpha")
_DATA = resources.files("ucaris") / "data"


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Scenario:
    """A fully resolved simulation setup, all angles in radians."""

    name: str
    wavelength: float
    beta: float
    n_elements: int
    segments: tuple[SegmentGeometry, ...]
    noise: NoiseSpec = NoiseSpec()
    constellation: str = "bpsk"
    bandwidth: float = 1e6
    seed: int = 0
    trials: int = 10_000
    channel_model: str = "approx"
    snr_db: tuple[float, ...] = (0.0, 5.0, 10.0, 15.0, 20.0)
    n_list: tuple[int, ...] = (4, 8, 16)
    direct_link: SegmentGeometry | None = None
    grid_max: float = MAX_ROTATION
    grid_points: int = 10
    mirror: tuple[int, ...] | None = None
    surface_segment: int = 0
    thresholds: tuple[float, ...] = (1e-4,)
    resolution: float = DEFAULT_RESOLUTION
    range_segment: int = 0
    hash: str = ""
    raw: dict = field(default_factory=dict, repr=False)

    def with_n(self, n: int) -> "Scenario":
        """Same scenario with every array resized to ``n`` elements."""
        def resize(seg: SegmentGeometry) -> SegmentGeometry:
            return replace(seg, source=replace(seg.source, num_elements=n),
                           sink=replace(seg.sink, num_elements=n))
        return replace(self, n_elements=n, segments=tuple(resize(s) for s in self.segments),
                       direct_link=None if self.direct_link is None else resize(self.direct_link))

    def chain(self):
        return build_chain(self.segments, self.wavelength, self.beta)

    @property
    def mirror_signs(self) -> tuple[int, ...]:
        return self.mirror or tuple(1 for _ in self.segments)


@dataclass(frozen=True)
class SimRecord:
    """One output row, carrying its sweep inputs next to the measured value."""

    experiment: str
    index: int
    sweep: dict
    metric: str
    value: float | None
    uncertainty: float | None = None
    seed: int | None = None
    scenario_hash: str | None = None
    metadata: dict = field(default_factory=dict)


# ---------------------------------------------------------------- scenarios

def list_scenarios() -> list[str]:
    return sorted(p.name[:-5] for p in (_DATA / "scenarios").iterdir()
                  if p.name.endswith(".json"))


def scenario_path(name: str):
    """Path of a shipped scenario file by name."""
    path = _DATA / "scenarios" / f"{name}.json"
    if not path.is_file():
        raise ScenarioError(f"no shipped scenario {name!r}; have {list_scenarios()}")
    return path


def load_schema(name: str = "scenario") -> dict:
    return json.loads((_DATA / "schemas" / f"{name}.schema.json").read_text())


def _canonical_hash(raw: dict) -> str:
    text = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def load_scenario(source) -> Scenario:
    """Load a scenario from a path, a shipped scenario name or an open file."""
    if hasattr(source, "read"):
        text, where = source.read(), getattr(source, "name", "<stream>")
    else:
        path = Path(source)
        if not path.exists() and path.suffix == "":
            path = scenario_path(str(source))
        try:
            text, where = path.read_text(), str(path)
        except OSError as exc:
            raise ScenarioError(f"cannot read scenario {source}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{where}: invalid JSON: {exc}") from exc
    return scenario_from_dict(raw, where)


def scenario_from_dict(raw: dict, where: str = "<dict>") -> Scenario:
    try:
        jsonschema.validate(raw, load_schema("scenario"))
    except jsonschema.ValidationError as exc:
        loc = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ScenarioError(f"{where}: {loc}: {exc.message}") from None

    deg = raw.get("units", "radians") == "degrees"
    to_rad = math.radians if deg else float
    n = raw["n_elements"]
    default_r = raw.get("radius", 0.12)

    def segment(spec: dict) -> SegmentGeometry:
        s = {k: to_rad(spec.get(k, 0.0)) for k in _ANGLE_FIELDS}
        try:
            return SegmentGeometry(
                source=UcaSpec(spec.get("source_radius", default_r), n, s["source_alpha"]),
                sink=UcaSpec(spec.get("sink_radius", default_r), n, s["sink_alpha"]),
                center_distance=spec["distance"], theta=s["theta"], phi=s["phi"],
                rot_x=s["rot_x"], rot_y=s["rot_y"], side=Side(spec["side"]))
        except ValueError as exc:
            label = spec.get("label", "segment")
            raise ScenarioError(f"{where}: {label}: {exc}") from exc

    segs = tuple(segment(s) for s in raw["segments"])
    surf = raw.get("error_surface", {})
    rng_cfg = raw.get("angle_range", {})
    mirror = tuple(surf["mirror"]) if "mirror" in surf else None
    if mirror is not None and len(mirror) != len(segs):
        raise ScenarioError(f"{where}: error_surface.mirror needs {len(segs)} entries")
    for key, idx in (("error_surface.segment", surf.get("segment", 0)),
                     ("angle_range.segment", rng_cfg.get("segment", 0))):
        if idx >= len(segs):
            raise ScenarioError(f"{where}: {key} = {idx} but only {len(segs)} segments")
    grid_max = to_rad(surf.get("grid_max", math.degrees(MAX_ROTATION) if deg else MAX_ROTATION))
    if grid_max > MAX_ROTATION + 1e-12:
        raise ScenarioError(f"{where}: error_surface.grid_max exceeds pi/3")
    noise = raw.get("noise", {})
    return Scenario(
        name=raw.get("name", Path(where).stem),
        wavelength=raw["wavelength"],
        beta=raw["beta"],
        n_elements=n,
        segments=segs,
        noise=NoiseSpec(**noise),
        constellation=raw.get("constellation", "bpsk"),
        bandwidth=raw.get("bandwidth", 1e6),
        seed=raw.get("seed", 0),
        trials=raw.get("trials", 10_000),
        channel_model=raw.get("channel_model", "approx"),
        snr_db=tuple(raw.get("snr_db", (0.0, 5.0, 10.0, 15.0, 20.0))),
        n_list=tuple(raw.get("n_list", (4, 8, 16))),
        direct_link=segment(raw["direct_link"]) if "direct_link" in raw else None,
        grid_max=min(grid_max, MAX_ROTATION),
        grid_points=surf.get("grid_points", 10),
        mirror=mirror,
        surface_segment=surf.get("segment", 0),
        thresholds=tuple(rng_cfg.get("thresholds", (1e-4,))),
        resolution=rng_cfg.get("resolution", DEFAULT_RESOLUTION),
        range_segment=rng_cfg.get("segment", 0),
        hash=_canonical_hash(raw),
        raw=copy.deepcopy(raw),
    )


# ---------------------------------------------------------------- sweeps

def _map(fn: Callable, items: Sequence, workers: int) -> list:
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def rotation_grid(sc: Scenario, points: int | None = None) -> list[tuple[float, float]]:
    """Square grid ``[0, grid_max]^2`` with ``points`` samples per axis."""
    k = points or sc.grid_points
    axis = np.linspace(0.0, sc.grid_max, k) if k > 1 else np.array([0.0])
    return [(float(a), float(b)) for a in axis for b in axis]


def run_error_surface(sc: Scenario, grid: Iterable[tuple[float, float]] | None = None,
                      mode: str = "segment", workers: int = 1) -> list[SimRecord]:
    """Circulant-approximation error over a grid of rotation pairs.

    ``segment`` tilts one hop, ``total`` tilts every hop by the same pair
    times its mirror sign and ``direct`` tilts the scenario's direct link.
    """
    if mode not in ERROR_SURFACE_MODES:
        raise ValueError(f"unknown mode {mode!r}; choose from {ERROR_SURFACE_MODES}")
    pts = list(grid) if grid is not None else rotation_grid(sc)
    for a, b in pts:
        if not (0 <= a <= MAX_ROTATION + 1e-12 and 0 <= b <= MAX_ROTATION + 1e-12):
            raise ValueError(f"grid point ({a}, {b}) outside [0, pi/3]^2")
    if mode == "direct" and sc.direct_link is None:
        raise ScenarioError(f"scenario {sc.name!r} has no direct_link")

    def point(ab: tuple[float, float]) -> float:
        a, b = ab
        if mode == "segment":
            seg = sc.segments[sc.surface_segment].with_rotation(a, b)
            return epsilon_segment(seg, sc.wavelength, sc.beta)
        if mode == "direct":
            return epsilon_segment(sc.direct_link.with_rotation(a, b), sc.wavelength, sc.beta)
        segs = [s.with_rotation(m * a, m * b) for s, m in zip(sc.segments, sc.mirror_signs)]
        return epsilon_total(build_chain(segs, sc.wavelength, sc.beta))

    values = _map(point, pts, workers)
    metric = "epsilon_total" if mode == "total" else "epsilon"
    return [SimRecord("error_surface", i, {"rot_x": a, "rot_y": b, "n": sc.n_elements},
                      metric, v, seed=sc.seed, scenario_hash=sc.hash,
                      metadata={"mode": mode, "scenario": sc.name})
            for i, ((a, b), v) in enumerate(zip(pts, values))]


def compare_split_vs_direct(sc: Scenario, total_angle: float = MAX_ROTATION,
                            index: int = 0) -> SimRecord:
    """Error of the direct link at ``total_angle`` over the multi-hop error.

    Each hop of the split takes an equal share of the total rotation, with
    its mirror sign.
    """
    if sc.direct_link is None:
        raise ScenarioError(f"scenario {sc.name!r} has no direct_link")
    share = total_angle / len(sc.segments)
    direct = epsilon_segment(sc.direct_link.with_rotation(total_angle, total_angle),
                             sc.wavelength, sc.beta)
    segs = [s.with_rotation(m * share, m * share) for s, m in zip(sc.segments, sc.mirror_signs)]
    split = epsilon_total(build_chain(segs, sc.wavelength, sc.beta))
    return SimRecord("split_vs_direct", index, {"total_angle": total_angle, "n": sc.n_elements},
                     "error_ratio", direct / split if split > 0 else math.inf,
                     seed=sc.seed, scenario_hash=sc.hash,
                     metadata={"epsilon_direct": direct, "epsilon_total_split": split,
                               "per_segment_angle": share, "scenario": sc.name})


def _ber_metadata(sc: Scenario, detector: str, n: int) -> dict:
    return {"detector": detector, "channel_model": sc.channel_model,
            "constellation": sc.constellation, "n": n,
            "snr_convention": SNR_CONVENTION,
            "ber_variant": analysis.DEFAULT_BER_VARIANT,
            "noise_variant": analysis.DEFAULT_NOISE_VARIANT,
            "ci": "3 sigma binomial", "scenario": sc.name}


def run_ber_sweep(sc: Scenario, snr_points: Sequence[float] | None = None,
                  detector: str = "proposed", n: int | None = None,
                  trials: int | None = None, workers: int = 1) -> list[SimRecord]:
    """Monte Carlo bit error rate per SNR point, plus the analytic prediction.

    Point ``i`` draws from ``block_seed(seed, i)``: detectors run on the same
    scenario see the same symbols and noise.
    """
    if detector not in BER_DETECTORS:
        raise ValueError(f"unknown detector {detector!r}; choose from {BER_DETECTORS}")
    sc = sc.with_n(n) if n is not None and n != sc.n_elements else sc
    trials = trials or sc.trials
    omega = get_constellation(sc.constellation)
    n = sc.n_elements
    if detector != "proposed" and omega.size ** n > MAX_SEARCH_SPACE:
        raise SearchSpaceError(f"{detector} needs {omega.size}^{n} candidates; "
                               f"limit is {MAX_SEARCH_SPACE}")
    snrs = list(sc.snr_db if snr_points is None else snr_points)
    chain = sc.chain()
    gains = analysis.overall_gains(chain)
    scale = 1 / math.sqrt(n)

    def point(i: int) -> list[SimRecord]:
        noise = analysis.noise_for_snr(gains, snrs[i])
        counts = simulate_errors(chain, omega, noise, trials, seed=block_seed(sc.seed, i),
                                 detector=detector, kind=sc.channel_model,
                                 symbol_scale=scale)
        ber = counts.bit_error_rate
        meta = _ber_metadata(sc, detector, n) | {"bit_errors": counts.bit_errors,
                                                  "bits": counts.bits}
        sweep = {"snr_db": snrs[i], "n": n}
        out = [SimRecord("ber", i, sweep, "ber", ber,
                         uncertainty=analysis.binomial_halfwidth(ber, counts.bits),
                         seed=sc.seed, scenario_hash=sc.hash, metadata=meta)]
        if omega.size == 2:
            budget = analysis.link_budget(chain, noise)
            out.append(SimRecord("ber", i, sweep, "ber_analytic",
                                 analysis.analytic_ber_bpsk(budget), seed=sc.seed,
                                 scenario_hash=sc.hash,
                                 metadata=_ber_metadata(sc, detector, n)))
        return out

    return [r for part in _map(point, range(len(snrs)), workers) for r in part]


def run_capacity_sweep(sc: Scenario, n_list: Sequence[int] | None = None,
                       snr_points: Sequence[float] | None = None,
                       workers: int = 1) -> list[SimRecord]:
    """Capacity in bit/s for every ``(N, SNR)`` pair."""
    ns = list(sc.n_list if n_list is None else n_list)
    snrs = list(sc.snr_db if snr_points is None else snr_points)

    def for_n(n: int) -> list[float]:
        chain = sc.with_n(n).chain()
        gains = analysis.overall_gains(chain)
        return [analysis.capacity(analysis.link_budget(
            chain, analysis.noise_for_snr(gains, snr), sc.bandwidth)) for snr in snrs]

    table = _map(for_n, ns, workers)
    meta = {"log_base": analysis.CAPACITY_LOG_BASE, "snr_convention": SNR_CONVENTION,
            "noise_variant": analysis.DEFAULT_NOISE_VARIANT, "bandwidth": sc.bandwidth,
            "scenario": sc.name}
    out, idx = [], 0
    for n, row in zip(ns, table):
        for snr, cap in zip(snrs, row):
            out.append(SimRecord("capacity", idx, {"n": n, "snr_db": snr}, "capacity_bps",
                                 cap, seed=sc.seed, scenario_hash=sc.hash, metadata=meta))
            idx += 1
    return out


def run_angle_range(sc: Scenario, rho: float, index: int = 0,
                    workers: int = 1) -> SimRecord:
    base = sc.segments[sc.range_segment]
    res = find_angle_range(rho, base, sc.wavelength, sc.beta, sc.resolution, workers)
    return SimRecord("angle_range", index, {"rho": rho, "n": sc.n_elements},
                     "max_rotation_diagonal", res.diagonal, uncertainty=sc.resolution,
                     seed=sc.seed, scenario_hash=sc.hash,
                     metadata={"max_rot_x": res.max_rot_x, "max_rot_y": res.max_rot_y,
                               "achieved_error": res.achieved_error, "method": res.method,
                               "evaluations": res.evaluations,
                               "segment": sc.range_segment, "scenario": sc.name})


_RATIOS = (
    ("fully_digital_vs_proposed_precoder", analysis.Scheme.FULLY_DIGITAL_PRECODER,
     analysis.Scheme.PROPOSED_PRECODER),
    ("traditional_vs_fast_ml", analysis.Scheme.TRADITIONAL_ML,
     analysis.Scheme.FAST_SYMBOLWISE_ML),
)


def run_complexity_table(n_list: Sequence[int], v_list: Sequence[int],
                         sc: Scenario | None = None) -> list[SimRecord]:
    """Operation counts of every scheme and the headline ratios.

    The counts do not depend on any scenario; ``sc`` only stamps its seed and
    hash on the records.
    """
    tag = {} if sc is None else {"seed": sc.seed, "scenario_hash": sc.hash}
    out: list[SimRecord] = []
    for n in n_list:
        for v in v_list:
            for scheme in analysis.Scheme:
                c = analysis.op_counts(scheme, n, v)
                for metric, value in (("complex_additions", c.complex_additions),
                                      ("complex_multiplications", c.complex_multiplications),
                                      ("phase_subtractions", c.phase_subtractions)):
                    out.append(SimRecord("complexity", len(out),
                                         {"n": n, "v": v, "scheme": scheme.value},
                                         metric, float(value), **tag))
            for name, num, den in _RATIOS:
                a, b = analysis.op_counts(num, n, v), analysis.op_counts(den, n, v)
                for metric, x, y in (("additions_ratio", a.complex_additions, b.complex_additions),
                                     ("multiplications_ratio", a.complex_multiplications,
                                      b.complex_multiplications)):
                    out.append(SimRecord("complexity", len(out),
                                         {"n": n, "v": v, "scheme": name}, metric,
                                         x / y if y else None, **tag))
    return out


def random_pose_chain(sc: Scenario, rng: np.random.Generator, max_rotation: float):
    """The scenario's hops with random included angles and tilts."""
    segs = []
    for s in sc.segments:
        rx, ry = rng.uniform(-max_rotation, max_rotation, 2)
        segs.append(replace(s, theta=float(rng.uniform(0, 2 * math.pi)),
                            phi=float(rng.uniform(0, math.pi / 2 - 1e-9)),
                            rot_x=float(rx), rot_y=float(ry)))
    return build_chain(segs, sc.wavelength, sc.beta)


def run_circulant_check(sc: Scenario, n_list: Sequence[int] | None = None, poses: int = 20,
                        max_rotation: float = math.pi / 9) -> list[SimRecord]:
    """Circulant deviation of the hat and tilde products over random poses."""
    out = []
    for n in (sc.n_list if n_list is None else n_list):
        scn = sc.with_n(n)
        for p in range(poses):
            rng = np.random.default_rng(block_seed(sc.seed, n, p))
            chain = random_pose_chain(scn, rng, max_rotation)
            hat = circulant_witness(chain_product([c.h_hat for c in chain]), chain)
            tilde = circulant_witness(chain_product([c.h_tilde for c in chain]))
            out.append(SimRecord("circulant_check", len(out), {"n": n, "pose": p},
                                 "max_shift_deviation", hat.max_shift_deviation,
                                 seed=sc.seed, scenario_hash=sc.hash,
                                 metadata={"a_t": hat.a_t, "a_r": hat.a_r,
                                           "tilde_deviation": tilde.max_shift_deviation,
                                           "max_rotation": max_rotation,
                                           "scenario": sc.name}))
    return out


# ---------------------------------------------------------------- output

_FIXED_HEAD = ("experiment", "index")
_FIXED_TAIL = ("metric", "value", "uncertainty", "seed", "scenario_hash", "metadata")


def _plain(x):
    # numpy scalars and tuples into JSON-native types
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


def _record_dict(r: SimRecord) -> dict:
    return _plain(asdict(r))


def _sweep_keys(records: Sequence[SimRecord]) -> list[str]:
    keys: list[str] = []
    for r in records:
        for k in r.sweep:
            if k not in keys:
                keys.append(k)
    return keys


def dumps(records: Sequence[SimRecord], fmt: str = "csv") -> str:
    """Serialise records as CSV or JSON text."""
    if fmt == "json":
        return json.dumps([_record_dict(r) for r in records], indent=2, sort_keys=False) + "\n"
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}; use csv or json")
    keys = _sweep_keys(records)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([*_FIXED_HEAD, *(f"sweep.{k}" for k in keys), *_FIXED_TAIL])
    for r in records:
        d = _record_dict(r)
        writer.writerow([d["experiment"], d["index"],
                         *("" if k not in d["sweep"] else _cell(d["sweep"][k]) for k in keys),
                         d["metric"], json.dumps(d["value"]), json.dumps(d["uncertainty"]),
                         json.dumps(d["seed"]), d["scenario_hash"] or "",
                         json.dumps(d["metadata"], sort_keys=True)])
    return buf.getvalue()


def emit(records: Sequence[SimRecord], fmt: str, path) -> None:
    """Write records to ``path`` (``"-"`` for stdout)."""
    text = dumps(records, fmt)
    if str(path) == "-":
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write records to {path}: {exc}") from exc


def _cell(v) -> str:
    return v if isinstance(v, str) else json.dumps(v)


def _json_value(text: str):
    return None if text == "" else json.loads(text)


def _sweep_value(text: str):
    # sweep strings are written bare; anything that is not JSON stays a string
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_records(path, fmt: str | None = None) -> list[SimRecord]:
    """Parse a file written by :func:`emit` back into records."""
    path = Path(path)
    fmt = fmt or path.suffix.lstrip(".")
    text = path.read_text()
    if fmt == "json":
        return [SimRecord(**d) for d in json.loads(text)]
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        return []
    header, body = rows[0], rows[1:]
    sweep_cols = [h for h in header if h.startswith("sweep.")]
    out = []
    for row in body:
        d = dict(zip(header, row))
        sweep = {c[len("sweep."):]: _sweep_value(d[c]) for c in sweep_cols if d[c] != ""}
        out.append(SimRecord(d["experiment"], int(d["index"]), sweep, d["metric"],
                             _json_value(d["value"]), _json_value(d["uncertainty"]),
                             _json_value(d["seed"]), d["scenario_hash"] or None,
                             json.loads(d["metadata"])))
    return out


def validate_records(data) -> None:
    """Raise ``jsonschema.ValidationError`` if ``data`` breaks the records schema."""
    jsonschema.validate(data, load_schema("records"))
