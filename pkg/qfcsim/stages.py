"""
Scenario stages. Each stage turns a validated :class:`Scenario` into report
tables plus a few headline numbers for ``summary.json``.

Stochastic work inside a stage draws its seeds from
``child_seed(root_seed, <stage>, <item>)``, so per-channel work can fan out
over a thread pool without changing any number.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, NamedTuple, Sequence, TypeVar

import numpy as np

from .cavity import (
    comb_grid,
    estimate_fsr,
    extinction_db,
    fit_lorentzian,
    heater_power_mw,
    resonance_comb,
    synthetic_spectrum,
    thermal_shift,
    wavelength_span,
)
from .counting import car_sweep, histogram_bandwidth, histogram_generate, visibility_scan, visibility_series
from .errors import QfcError, ScenarioError, UndefinedRatioError
from .jones import compensation_angle, compensator_phase, concurrence
from .pair_source import (
    ChannelRateModel,
    car_expected,
    expected_coincidences,
    multiphoton_fraction,
    noisy_state,
    with_envelope,
)
from .report import Table, finite_or_none, table
from .scenario import Scenario
from .seeding import child_seed
from .spectral import (
    ChannelFit,
    classify_resonant,
    coincidence_series,
    dominance_ratio,
    efficiencies,
    fit_power_quadratic,
    jsi,
    pgr,
    singles_series,
    spectral_brightness,
)
from .thermal_lock import (
    cavity_transmission,
    hysteresis_area,
    lock_operating_point,
    lock_summary,
    run_lock,
    sinusoidal_drift,
    static_trace,
    sweep_trace,
    tabulated_drift,
)
from .tomography import density_rows, fidelity, maximum_likelihood, net_fidelity, simulate_tomography

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


class StageResult(NamedTuple):
    tables: Dict[str, Table]
    summary: Dict[str, Any]


def fan_out(fn: Callable[[T], R], items: Sequence[T], workers: int) -> List[R]:
    """Ordered map, threaded when ``workers`` > 1."""
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def effective_model(sc: Scenario, m: int) -> ChannelRateModel:
    return with_envelope(sc.channel(m), sc.channel_pair(m), sc.ring.pump_frequency, sc.envelope)


def run_spectrum(sc: Scenario, workers: int = 1) -> StageResult:
    cfg = sc.spectrum
    ring = sc.ring
    n = max(c.m for c in sc.channels)
    start = ring.resonance_frequency - n * ring.fsr
    comb = resonance_comb(ring, 2 * n + 1, start)

    def fit_one(k: int) -> Dict[str, Any]:
        f0, width = comb[k]
        samples = synthetic_spectrum(
            f0,
            width,
            ring.min_transmission,
            span_fwhm=cfg.span_fwhm,
            points=cfg.points,
            noise=cfg.noise,
            seed=child_seed(sc.root_seed, "spectrum", k),
        )
        fit = fit_lorentzian(samples)
        return {
            "resonance": k - n,
            "f0_hz": fit.f0,
            "fwhm_hz": fit.fwhm,
            "tmin": fit.min_transmission,
            "q": fit.q_factor,
            "f0_true_hz": f0,
            "extinction_db": extinction_db(max(fit.min_transmission, 1e-12)),
        }

    rows = fan_out(fit_one, list(range(len(comb))), workers)
    tuning = [
        {"knob": "temperature", "value": t, "heater_power_mw": 0.0, "shift_hz": thermal_shift(t, 0.0, ring)}
        for t in cfg.temperatures
    ] + [
        {
            "knob": "current",
            "value": i,
            "heater_power_mw": heater_power_mw(i, ring),
            "shift_hz": thermal_shift(0.0, i, ring),
        }
        for i in cfg.currents
    ]
    pairs = comb_grid(ring.pump_frequency, ring.grid_spacing, n)
    summary = {
        "fsr_hz": estimate_fsr([r["f0_hz"] for r in rows]),
        "mean_fwhm_hz": float(np.mean([r["fwhm_hz"] for r in rows])),
        "mean_q_factor": float(np.mean([r["q"] for r in rows])),
        "span_nm": wavelength_span(pairs[-1].idler_frequency, pairs[-1].signal_frequency) * 1e9,
    }
    return StageResult(
        {
            "figS1_resonances": table(rows[0].keys(), rows),
            "figS2_tuning": table(["knob", "value", "heater_power_mw", "shift_hz"], tuning),
        },
        summary,
    )


def run_hysteresis(sc: Scenario, workers: int = 1) -> StageResult:
    cfg = sc.hysteresis
    ring = sc.ring
    tau = ring.thermal_time_constant
    ramp = np.linspace(cfg.current_start, cfg.current_stop, cfg.points).tolist()
    static = dict(static_trace(ring, ramp))

    def sweep(power: float) -> Dict[str, Any]:
        kwargs = {"dwell": cfg.dwell_taus * tau, "dt": cfg.step_taus * tau}
        forward = sweep_trace(ring, power, ramp, "forward", **kwargs)
        backward = sweep_trace(ring, power, ramp[::-1], "backward", **kwargs)
        return {"power": power, "forward": forward, "backward": backward}

    sweeps = fan_out(sweep, list(cfg.powers), workers)
    rows: List[Dict[str, Any]] = []
    summary: Dict[str, Any] = {}
    for item in sweeps:
        back = dict(item["backward"])
        gap = max(abs(t - back[i]) for i, t in item["forward"])
        for direction in ("forward", "backward"):
            for current, value in item[direction]:
                rows.append(
                    {
                        "power_mw": item["power"],
                        "direction": direction,
                        "current_ma": current,
                        "transmission": value,
                        "static_transmission": static[current],
                    }
                )
        summary[f"{item['power']!r}"] = {
            "max_gap": gap,
            "area": hysteresis_area(item["forward"], item["backward"]),
        }
    columns = ["power_mw", "direction", "current_ma", "transmission", "static_transmission"]
    return StageResult({"figS3_hysteresis": table(columns, rows)}, summary)


def run_lock_stage(sc: Scenario, workers: int = 1) -> StageResult:
    cfg = sc.lock
    ring = sc.ring
    if cfg.drift_table is not None:
        drift = tabulated_drift(cfg.drift_table)
    else:
        drift = sinusoidal_drift(cfg.drift_amplitude, cfg.drift_period)
    start = lock_operating_point(ring, sc.controller, sc.operating_power, drift=drift(0.0))
    seed = child_seed(sc.root_seed, "lock")
    closed = run_lock(ring, sc.controller, sc.operating_power, drift, cfg.duration, seed=seed, initial_state=start)
    opened = run_lock(
        ring, sc.controller, sc.operating_power, drift, cfg.duration, seed=seed, closed_loop=False, initial_state=start
    )
    rows = [
        {
            "time_s": c.time,
            "transmission": c.transmission,
            "current_ma": c.current,
            "drift_hz": drift(c.time),
            "saturated": c.saturated,
            "open_transmission": o.transmission,
        }
        for c, o in zip(closed, opened)
    ]
    closed_summary = lock_summary(closed, sc.controller, cfg.band)
    open_summary = lock_summary(opened, sc.controller, cfg.band)
    summary = {
        "closed": closed_summary._asdict(),
        "open": open_summary._asdict(),
        "start_current_ma": start.heater_current,
        "start_transmission": cavity_transmission(start, ring.pump_frequency, ring, drift(0.0)),
    }
    columns = ["time_s", "transmission", "current_ma", "drift_hz", "saturated", "open_transmission"]
    return StageResult({"figS4_lock": table(columns, rows)}, summary)


def _channel_tomography(sc: Scenario, m: int, power: float, time: float, stage: str) -> Dict[str, Any]:
    model = effective_model(sc, m)
    rates = expected_coincidences(model, power)
    phi = compensation_angle(sc.tomo.loop_phase) + sc.tomo.hwp_offset
    residual = compensator_phase(sc.tomo.loop_phase, phi)
    if sc.tomo.state_noise == "multiphoton":
        p = multiphoton_fraction(model.pgr, power, model.tau_w)
    else:
        p = rates.signal_fraction
    state = noisy_state(residual, p)
    data = simulate_tomography(state, rates.true, rates.accidental, time, child_seed(sc.root_seed, stage, m))
    result = net_fidelity(data, optimize_phase=sc.tomo.optimize_phase)
    return {"m": m, "rates": rates, "table": data, "fidelity": result, "residual_phase": residual}


def run_tomo(sc: Scenario, workers: int = 1) -> StageResult:
    cfg = sc.tomo
    pairs = {c.m: sc.channel_pair(c.m) for c in sc.channels}
    power = sc.operating_power

    per_channel = fan_out(
        lambda m: _channel_tomography(sc, m, power, sc.integration_time, "tomo"),
        [c.m for c in sc.channels],
        workers,
    )
    fidelity_rows = []
    for item in per_channel:
        pair = pairs[item["m"]]
        fidelity_rows.append(
            {
                "channel": item["m"],
                "signal_thz": pair.signal_frequency / 1e12,
                "idler_thz": pair.idler_frequency / 1e12,
                "coincidence_rate": item["rates"].true,
                "accidental_rate": item["rates"].accidental,
                "raw_fidelity": item["fidelity"].raw,
                "net_fidelity": item["fidelity"].net,
            }
        )

    density_item = next(item for item in per_channel if item["m"] == cfg.density_channel)
    mle = maximum_likelihood(density_item["table"])
    density = [{"channel": cfg.density_channel, **row} for row in density_rows(mle.state)]

    sweep = fan_out(
        lambda p: _channel_tomography(sc, cfg.power_sweep_channel, p, cfg.power_sweep_time, f"tomo-power-{p!r}"),
        list(sc.powers),
        workers,
    )
    power_rows = [
        {"channel": cfg.power_sweep_channel, "power_mw": p, "raw_fidelity": s["fidelity"].raw, "net_fidelity": s["fidelity"].net}
        for p, s in zip(sc.powers, sweep)
    ]

    # HWP scan over a quarter turn covers the full 2π of relative phase.
    angles = np.linspace(0.0, math.pi / 2, cfg.visibility_points).tolist()
    phases = [compensator_phase(cfg.loop_phase, a) for a in angles]
    scan = visibility_scan(phases, cfg.visibility_coincidences, child_seed(sc.root_seed, "visibility"))
    scan_rows = [
        {"hwp_angle_rad": a, "phase_rad": p.theta, "visibility": p.visibility, "sigma": p.sigma, "expected": p.expected}
        for a, p in zip(angles, scan)
    ]
    series = visibility_series(
        0.0,
        cfg.stability_repeats,
        cfg.visibility_coincidences,
        child_seed(sc.root_seed, "visibility-stability"),
        phase_jitter=cfg.stability_jitter,
    )
    series_rows = [{"index": p.index, "phase_rad": p.theta, "visibility": p.visibility, "sigma": p.sigma} for p in series]

    raw = [r["raw_fidelity"] for r in fidelity_rows]
    net = [r["net_fidelity"] for r in fidelity_rows]
    summary = {
        "min_raw_fidelity": min(raw),
        "min_net_fidelity": min(net),
        "mean_raw_fidelity": float(np.mean(raw)),
        "mean_net_fidelity": float(np.mean(net)),
        "density_channel_fidelity": fidelity(mle.state, optimize_phase=cfg.optimize_phase),
        "density_channel_concurrence": concurrence(mle.state),
        "density_channel_purity": mle.state.purity,
        "mle_iterations": mle.iterations,
        "fidelity_vs_power_non_increasing": all(
            b["raw_fidelity"] <= a["raw_fidelity"] for a, b in zip(power_rows, power_rows[1:])
        ),
    }
    return StageResult(
        {
            "fig2a_visibility": table(["hwp_angle_rad", "phase_rad", "visibility", "sigma", "expected"], scan_rows),
            "fig2b_visibility_stability": table(["index", "phase_rad", "visibility", "sigma"], series_rows),
            "fig2c_density": table(["channel", "row", "col", "re", "im"], density),
            "fig2d_fidelities": table(fidelity_rows[0].keys(), fidelity_rows),
            "fig2e_fidelity_power": table(["channel", "power_mw", "raw_fidelity", "net_fidelity"], power_rows),
        },
        summary,
    )


def _off_resonance_models(sc: Scenario) -> List[Dict[str, Any]]:
    """Singles-only "channels" half-way between comb lines on both sides."""
    cfg = sc.power_fit
    ring = sc.ring
    out = []
    for c in sc.channels:
        offset = (c.m + 0.5) * ring.grid_spacing
        model = ChannelRateModel(
            m=c.m,
            pgr=0.0,
            eta_s=c.eta_s,
            eta_i=c.eta_i,
            raman_s=cfg.off_raman_anti_stokes,
            raman_i=cfg.off_raman_stokes,
            dark_s=cfg.off_dark,
            dark_i=cfg.off_dark,
            tau_w=c.tau_w,
        )
        out.append({"label": f"s{c.m}.5", "arm": "signal", "model": model, "freq": ring.pump_frequency + offset})
        out.append({"label": f"i{c.m}.5", "arm": "idler", "model": model, "freq": ring.pump_frequency - offset})
    return out


def run_power_fit(sc: Scenario, workers: int = 1) -> StageResult:
    cfg = sc.power_fit
    ring = sc.ring
    items: List[Dict[str, Any]] = []
    for c in sc.channels:
        pair = sc.channel_pair(c.m)
        model = effective_model(sc, c.m)
        items.append({"label": f"s{c.m}", "arm": "signal", "model": model, "freq": pair.signal_frequency})
        items.append({"label": f"i{c.m}", "arm": "idler", "model": model, "freq": pair.idler_frequency})
    items.extend(_off_resonance_models(sc))

    def fit_one(k: int) -> ChannelFit:
        item = items[k]
        series = singles_series(
            item["model"],
            item["arm"],
            cfg.powers,
            cfg.integration_time,
            child_seed(sc.root_seed, "power-fit", k),
            channel_frequency=item["freq"],
            label=item["label"],
        )
        return ChannelFit(item["label"], fit_power_quadratic(series))

    fits = fan_out(fit_one, list(range(len(items))), workers)
    partition = classify_resonant(fits, significance=cfg.significance, factor=cfg.factor)
    on = set(partition.on_resonance)
    rows = [
        {
            "channel": f.label,
            "frequency_thz": item["freq"] / 1e12,
            "side": "stokes" if item["freq"] < ring.pump_frequency else "anti-stokes",
            "a": f.fit.a,
            "b": f.fit.b,
            "c": f.fit.c,
            "sigma_a": f.fit.sigma_a,
            "sigma_b": f.fit.sigma_b,
            "sigma_c": f.fit.sigma_c,
            "resonant_flag": f.label in on,
        }
        for f, item in zip(fits, items)
    ]

    def mean_b(resonant: bool, side: str) -> float:
        values = [r["b"] for r in rows if r["resonant_flag"] == resonant and r["side"] == side]
        return float(np.mean(values)) if values else float("nan")

    summary = {
        "on_resonance": len(partition.on_resonance),
        "off_resonance": len(partition.off_resonance),
        "on_mean_b": float(np.mean([r["b"] for r in rows if r["resonant_flag"]] or [float("nan")])),
        "off_mean_b_stokes": mean_b(False, "stokes"),
        "off_mean_b_anti_stokes": mean_b(False, "anti-stokes"),
    }
    columns = ["channel", "frequency_thz", "side", "a", "b", "c", "sigma_a", "sigma_b", "sigma_c", "resonant_flag"]
    return StageResult({"fig3_power_terms": table(columns, rows)}, summary)


def run_jsi(sc: Scenario, workers: int = 1) -> StageResult:
    cfg = sc.jsi
    models = [effective_model(sc, c.m) for c in sc.channels]
    grid = jsi(models, cfg.power, cfg.integration_time, child_seed(sc.root_seed, "jsi"), cfg.cross_accidental_rate)
    diag = grid.diagonal
    summary = {
        "dominance_ratio": finite_or_none(dominance_ratio(grid)),
        "diagonal_rates": {str(m): float(v) for m, v in zip(grid.channels, diag)},
        "total_rate": float(grid.rates.sum()),
    }
    rows = grid.to_rows()
    return StageResult({"fig4a_jsi": table(rows[0].keys(), rows)}, summary)


def run_metrics(sc: Scenario, workers: int = 1) -> StageResult:
    cfg = sc.metrics
    fit_cfg = sc.power_fit
    budget = sc.budget

    car_model = effective_model(sc, cfg.car_channel)
    powers = np.geomspace(cfg.car_power_min, cfg.car_power_max, cfg.car_points).tolist()
    records = car_sweep(car_model, powers, cfg.car_time, child_seed(sc.root_seed, "car"), cfg.min_accidentals)
    car_rows = []
    for r in records:
        try:
            value, bound = r.car, None
        except UndefinedRatioError as exc:
            value, bound = None, exc.lower_bound
        car_rows.append(
            {
                "channel": cfg.car_channel,
                "power_mw": r.power,
                "integration_time_s": r.integration_time,
                "coincidences": r.coincidences,
                "accidentals": r.accidentals,
                "net_coincidences": r.net_coincidences,
                "car": value,
                "car_lower_bound": bound,
                "car_expected": car_expected(car_model, r.power),
            }
        )

    def channel_metrics(m: int) -> Dict[str, Any]:
        model = effective_model(sc, m)
        seed = child_seed(sc.root_seed, "metrics", m)
        rs = fit_power_quadratic(singles_series(model, "signal", fit_cfg.powers, fit_cfg.integration_time, seed)).a
        ri = fit_power_quadratic(singles_series(model, "idler", fit_cfg.powers, fit_cfg.integration_time, seed)).a
        rc = fit_power_quadratic(coincidence_series(model, fit_cfg.powers, fit_cfg.integration_time, seed)).a
        target_bw = cfg.bandwidths.get(m, cfg.bandwidth)
        hist = histogram_generate(
            target_bw,
            peak_counts=cfg.histogram_peak,
            background=cfg.histogram_background,
            seed=child_seed(sc.root_seed, "histogram", m),
        )
        bandwidth_mhz = histogram_bandwidth(hist) / 1e6
        rate = pgr(rs, ri, rc)
        eff = efficiencies(rs, ri, rc, budget.transmission_s, budget.transmission_i, budget.detection)
        return {
            "channel": m,
            "rs": rs,
            "ri": ri,
            "rc": rc,
            "pgr": rate,
            "pgr_model": model.pgr,
            "bandwidth_mhz": bandwidth_mhz,
            "brightness": spectral_brightness(rate, bandwidth_mhz),
            **eff._asdict(),
        }

    per_channel = fan_out(channel_metrics, [c.m for c in sc.channels], workers)
    brightness_cols = ["channel", "rs", "ri", "rc", "pgr", "pgr_model", "bandwidth_mhz", "brightness"]
    efficiency_cols = ["channel", "eta_s", "eta_i", "extraction_s", "extraction_i"]

    cars = [r["car"] for r in car_rows if r["car"] is not None]
    peak = int(np.argmax([-math.inf if r["car"] is None else r["car"] for r in car_rows])) if cars else -1
    summary = {
        "car_max": max(cars) if cars else None,
        "car_max_power_mw": car_rows[peak]["power_mw"] if cars else None,
        "car_interior_maximum": 0 < peak < len(car_rows) - 1,
        "mean_bandwidth_mhz": float(np.mean([r["bandwidth_mhz"] for r in per_channel])),
        "mean_extraction": float(np.mean([0.5 * (r["extraction_s"] + r["extraction_i"]) for r in per_channel])),
        "mean_brightness": float(np.mean([r["brightness"] for r in per_channel])),
    }
    car_cols = [
        "channel",
        "power_mw",
        "integration_time_s",
        "coincidences",
        "accidentals",
        "net_coincidences",
        "car",
        "car_lower_bound",
        "car_expected",
    ]
    return StageResult(
        {
            "fig4b_car": table(car_cols, car_rows),
            "fig5_brightness": table(brightness_cols, per_channel),
            "fig6_efficiencies": table(efficiency_cols, per_channel),
        },
        summary,
    )


STAGES: Dict[str, Callable[[Scenario, int], StageResult]] = {
    "spectrum": run_spectrum,
    "hysteresis": run_hysteresis,
    "lock": run_lock_stage,
    "tomo": run_tomo,
    "power-fit": run_power_fit,
    "jsi": run_jsi,
    "metrics": run_metrics,
}


def run_stage(name: str, sc: Scenario, workers: int = 1) -> StageResult:
    try:
        fn = STAGES[name]
    except KeyError:
        raise ScenarioError(f"Unknown stage {name!r}", stage=name) from None
    logger.info("stage %s: start", name)
    try:
        result = fn(sc, workers)
    except QfcError as exc:
        logger.error("stage %s failed: %s", name, exc)
        raise ScenarioError(f"{type(exc).__name__}: {exc}", stage=name) from exc
    logger.info("stage %s: %d table(s)", name, len(result.tables))
    return result
