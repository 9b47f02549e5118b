"""Experiment runners: one function per experiment kind"""

import time
from dataclasses import replace
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from ..ui.console import print_warning
from .averaging import (
    DriftCache,
    averaged_drift,
    build_drift_cache,
    oracle_drift,
    z_free_drift,
)
from .config import ExperimentConfig
from .events import EventType, events
from .exceptions import ConfigurationError, FitError
from .filter_metrics import (
    FilterSetup,
    filter_l1_distance,
    inverse_moment_check,
    observe,
    paired_estimates,
    weak_filter_distance,
)
from .fitting import fit_loglog_slope, mean_and_se
from .models import LEVY_FAMILY, ModelSpec, build_model, verify_dissipativity
from .observation import (
    girsanov_weight_sensor,
    intensity_function,
    levy_observation,
    likelihood_levy,
    likelihood_levy_euler,
    observation_function,
    sensor_observation,
    simulate_observation_levy,
    simulate_observation_sensor,
)
from .particle import (
    EPSILON_MODE,
    HOMOGENIZED_MODE,
    particle_filter_levy,
    particle_filter_sensor,
    zakai_residual_check,
)
from .report import ExperimentReport
from .sde import (
    aux_error_bound,
    rate_profile,
    sample_noise,
    simulate_auxiliary,
    simulate_homogenized,
    simulate_slow_fast,
    sup_squared_distance,
)
from .seeding import cache_seed, replication_seed
from .workers import guarded_map
from .zakai import run_fd_filter

SLOPE_WINDOW = (0.25, 1.5)
AUX_RATIO_SPREAD = 5.0
DEGENERATE_DISTANCE = 0.02
CROSSCHECK_GAP = 0.05
RESIDUAL_HALVING = (0.35, 0.65)
FLOOR = 1e-20
NAN = float("nan")


def decreasing_within(
    values: Sequence[float], ses: Sequence[float], k: float = 3.0
) -> bool:
    """Each value is below its predecessor up to k combined standard errors"""
    for (a, sa), (b, sb) in zip(
        zip(values, ses), zip(values[1:], ses[1:])
    ):
        tolerance = k * np.sqrt(np.nan_to_num(sa) ** 2 + np.nan_to_num(sb) ** 2)
        if not b < a + tolerance:
            return False
    return True


def prepare_drift(config: ExperimentConfig, model: ModelSpec) -> DriftCache:
    """Drift cache from the averaging section"""
    return build_drift_cache(
        model,
        config.cache_nodes(model),
        config.estimator(),
        cache_seed(config.monte_carlo.seed),
        source=config.averaging.source,
        order=config.averaging.order,
        lipschitz_bound=config.averaging.lipschitz_bound,
        threads=config.monte_carlo.threads,
    )


def _check_assumptions(model: ModelSpec, report: ExperimentReport) -> None:
    margin = verify_dissipativity(model)
    if margin <= 0 and model.assumption_exception is None:
        report.notes.append(f"dissipativity margin M = {margin:g} ≤ 0")
    if model.assumption_exception:
        report.notes.append(model.assumption_exception)


def _new_report(config: ExperimentConfig, model: ModelSpec) -> ExperimentReport:
    events.emit(EventType.Experiment.STARTED, config.kind, config)
    return ExperimentReport(
        kind=config.kind,
        model_name=model.name,
        seed=config.monte_carlo.seed,
        config=config,
    )


def _fit_slope(report: ExperimentReport, metric: str) -> None:
    rows = [r for r in report.metric(metric) if np.isfinite(r.value)]
    try:
        fit = fit_loglog_slope([(r.epsilon, r.value, r.se) for r in rows])
    except FitError as e:
        report.check("log-log slope", False, str(e))
        return
    report.slope, report.slope_ci = fit.slope, fit.ci
    low, high = SLOPE_WINDOW
    report.check(
        f"slope in [{low:g}, {high:g}]",
        low <= fit.slope <= high,
        f"slope {fit.slope:.4f}",
    )


def run_strong_convergence(config: ExperimentConfig) -> ExperimentReport:
    """E sup|Xᵉ − X⁰|² per ε on shared slow noise, with a log-log fit"""
    model = config.build_model()
    grid = config.time_grid()
    report = _new_report(config, model)
    _check_assumptions(model, report)
    if model.slow_depends_on_z:
        drift = prepare_drift(config, model)
    else:
        drift = z_free_drift(model)
    mc = config.monte_carlo
    epsilons = config.sweep.epsilons

    for index, epsilon in enumerate(epsilons):
        events.emit(
            EventType.Experiment.EPSILON_STARTED, epsilon, index, len(epsilons)
        )
        delta = config.sweep.delta_for(epsilon, grid)

        def replicate(rep: int, epsilon=epsilon) -> float:
            seed = replication_seed(mc.seed, rep)
            noise = sample_noise(model, grid, epsilon, seed)
            eps_path = simulate_slow_fast(model, epsilon, grid, noise)
            hom_path = simulate_homogenized(model, drift, grid, noise)
            return sup_squared_distance(eps_path.X, hom_path.X)

        tally = guarded_map(
            replicate, mc.replications, mc.threads, f"ε={epsilon:g}"
        ).enforce_quotas()
        value, se = mean_and_se(tally.values)
        count = len(tally.values)
        profile = rate_profile(epsilon, delta)
        report.add_row(epsilon, "strong_error", value, se, count, tally.aborts)
        report.add_row(epsilon, "delta", delta, 0.0, count)
        report.add_row(epsilon, "rate_profile", profile, 0.0, count)
        report.add_row(
            epsilon, "error_over_profile", value / profile, se / profile, count
        )

    rows = report.metric("strong_error")
    values = [r.value for r in rows]
    if isinstance(drift, DriftCache) and drift.extrapolated:
        report.notes.append(
            f"drift cache extrapolated outside its node hull "
            f"({drift.extrapolations} lookups)"
        )
    if not model.slow_depends_on_z:
        report.notes.append(
            "b1 does not depend on z: X⁰ uses b1 directly, slope fit skipped"
        )
        report.check(
            "degenerate config at floor",
            max(values) <= FLOOR,
            f"max error {max(values):.3e}",
        )
    else:
        report.check(
            "errors decreasing in ε (3·SE)",
            decreasing_within(values, [r.se for r in rows]),
        )
        _fit_slope(report, "strong_error")
    return report


def run_aux_scaling(config: ExperimentConfig) -> ExperimentReport:
    """E sup|Zᵉ − Ẑᵉ|² per ε against δε²/ε and the declared-constant bound"""
    model = config.build_model()
    grid = config.time_grid()
    report = _new_report(config, model)
    _check_assumptions(model, report)
    mc = config.monte_carlo
    epsilons = config.sweep.epsilons
    ratios = []

    for index, epsilon in enumerate(epsilons):
        events.emit(
            EventType.Experiment.EPSILON_STARTED, epsilon, index, len(epsilons)
        )
        delta = config.sweep.delta_for(epsilon, grid)

        def replicate(rep: int, epsilon=epsilon, delta=delta) -> np.ndarray:
            seed = replication_seed(mc.seed, rep)
            noise = sample_noise(model, grid, epsilon, seed)
            pair = simulate_slow_fast(model, epsilon, grid, noise)
            Zhat = simulate_auxiliary(model, epsilon, delta, pair, noise)
            return np.sum((pair.Z - Zhat) ** 2, axis=1)

        tally = guarded_map(
            replicate, mc.replications, mc.threads, f"ε={epsilon:g}"
        ).enforce_quotas()
        squared = np.array(tally.values)
        count = squared.shape[0]
        value, se = mean_and_se(squared.max(axis=1))
        per_time = squared.mean(axis=0)
        worst = int(np.argmax(per_time))
        sup_mean, sup_se = mean_and_se(squared[:, worst])
        scale = delta**2 / epsilon
        bound = aux_error_bound(model, epsilon, delta)

        report.add_row(epsilon, "aux_sup_error", value, se, count, tally.aborts)
        report.add_row(epsilon, "aux_sup_of_mean", sup_mean, sup_se, count)
        report.add_row(epsilon, "aux_ratio", value / scale, se / scale, count)
        report.add_row(epsilon, "aux_bound", bound, 0.0, count)
        report.check(
            f"sup E|Z−Ẑ|² ≤ bound at ε={epsilon:g}",
            sup_mean <= bound,
            f"{sup_mean:.3e} ≤ {bound:.3e}",
        )
        ratios.append(value / scale)

    if not model.fast_depends_on_x:
        worst = max(r.value for r in report.metric("aux_sup_error"))
        report.check("x-independent fast law: error ≡ 0", worst <= FLOOR)
    else:
        positive = [r for r in ratios if r > 0]
        spread = max(positive) / min(positive) if positive else np.inf
        report.check(
            f"ratio spread ≤ {AUX_RATIO_SPREAD:g}×",
            spread <= AUX_RATIO_SPREAD,
            f"spread {spread:.2f}",
        )
    return report


def _filter_setup(
    config: ExperimentConfig, model: ModelSpec, drift
) -> FilterSetup:
    return FilterSetup(
        model=model,
        obs_model=config.build_observation(model),
        grid=config.time_grid(),
        particles=config.filter.particles,
        drift=drift,
        function=config.filter.function,
        resample=config.filter.resample,
        time=config.filter.time,
    )


def run_filter_l1(config: ExperimentConfig) -> ExperimentReport:
    """E|πᵉ(φ) − π⁰(φ)| per ε, Np-plateau diagnostic and inverse moments"""
    model = config.build_model()
    report = _new_report(config, model)
    _check_assumptions(model, report)
    setup = _filter_setup(config, model, prepare_drift(config, model))
    mc = config.monte_carlo
    epsilons = config.sweep.epsilons
    rho1 = np.empty(0)

    for index, epsilon in enumerate(epsilons):
        events.emit(
            EventType.Experiment.EPSILON_STARTED, epsilon, index, len(epsilons)
        )
        paired = paired_estimates(setup, epsilon, mc.replications, mc.seed, mc.threads)
        value, se = mean_and_se(np.abs(paired.eps_values - paired.hom_values))
        report.add_row(
            epsilon,
            "filter_l1",
            value,
            se,
            len(paired.tally.values),
            paired.tally.aborts + paired.tally.degenerate,
        )
        rho1 = paired.hom_rho1

    smallest = epsilons[-1]
    for particles in config.filter.plateau_particles:
        estimate = filter_l1_distance(
            replace(setup, particles=particles),
            smallest,
            mc.replications,
            mc.seed,
            mc.threads,
        )
        report.add_row(
            smallest,
            f"filter_l1_np{particles}",
            estimate.value,
            estimate.se,
            estimate.replications,
            estimate.aborts + estimate.degenerate,
        )

    horizon = float(setup.grid.times[setup.index])
    for p in config.filter.inverse_moment_powers:
        moment = inverse_moment_check(rho1, p, setup.obs_model.h.bound, horizon)
        report.add_row(
            smallest, f"inverse_moment_p{p:g}", moment.empirical, moment.se,
            rho1.size,
        )
        report.check(
            f"E|ρ⁰(1)|^-{p:g} ≤ bound",
            moment.passed,
            f"{moment.empirical:.4f} ≤ {moment.bound:.4f}",
        )

    rows = report.metric("filter_l1")
    values = [r.value for r in rows]
    if not model.slow_depends_on_z:
        report.check(
            f"identical dynamics: distance ≤ {DEGENERATE_DISTANCE:g}",
            max(values) <= DEGENERATE_DISTANCE,
            f"max {max(values):.4f}",
        )
    else:
        report.check(
            "distances decreasing in ε (3·SE)",
            decreasing_within(values, [r.se for r in rows]),
        )
    return report


def run_filter_weak(config: ExperimentConfig) -> ExperimentReport:
    """Mean difference and KS statistic between π̌ᵉ(φ) and π̌⁰(φ) samples"""
    model = config.build_model()
    report = _new_report(config, model)
    _check_assumptions(model, report)
    setup = _filter_setup(config, model, prepare_drift(config, model))
    mc = config.monte_carlo

    results = weak_filter_distance(
        setup, config.sweep.epsilons, mc.replications, mc.seed, mc.threads
    )
    resolutions = []
    for result in results:
        failed = result.aborts + result.degenerate
        report.add_row(
            result.epsilon,
            "weak_mean_difference",
            result.mean_difference,
            result.se,
            result.replications,
            failed,
        )
        # two-sample KS resolution for equal sample sizes
        resolution = float(np.sqrt(2.0 / max(result.replications, 1)))
        resolutions.append(resolution)
        report.add_row(
            result.epsilon,
            "ks_statistic",
            result.ks_statistic,
            resolution,
            result.replications,
            failed,
        )

    ks = [r.ks_statistic for r in results]
    if model.slow_depends_on_z:
        report.check(
            "KS statistic decreasing in ε",
            decreasing_within(ks, resolutions, k=1.0),
        )
        report.check(
            "mean differences decreasing in ε (3·SE)",
            decreasing_within(
                [r.mean_difference for r in results], [r.se for r in results]
            ),
        )
    else:
        report.check(
            "identical dynamics: KS at noise floor",
            all(k <= 1.36 * r for k, r in zip(ks, resolutions)),
        )
    return report


def run_zakai_crosscheck(config: ExperimentConfig) -> ExperimentReport:
    """Particle vs FD homogenized filter on shared paths, plus Zakai residuals"""
    model = config.build_model()
    if model.family != LEVY_FAMILY:
        raise ConfigurationError(
            "zakai-crosscheck needs a Lévy-noise model (levy-correlated)"
        )
    report = _new_report(config, model)
    _check_assumptions(model, report)
    drift = prepare_drift(config, model)
    setup = _filter_setup(config, model, drift)
    grid = setup.grid
    mc = config.monte_carlo
    z = config.zakai
    epsilon = config.sweep.epsilons[-1]
    function = config.filter.function
    initial_std = z.initial_std or None
    checkpoints = sorted(
        {grid.steps * k // 4 for k in (1, 2, 3, 4)} | {setup.index}
    )

    def crosscheck(rep: int) -> np.ndarray:
        seed = replication_seed(mc.seed, rep)
        obs_path = observe(setup, epsilon, seed)
        trace = particle_filter_levy(
            obs_path,
            model,
            setup.obs_model,
            setup.particles,
            seed,
            mode=HOMOGENIZED_MODE,
            drift=drift,
            functions=(function,),
            resample=setup.resample,
            initial_std=initial_std,
        )
        fd = run_fd_filter(
            obs_path,
            model,
            setup.obs_model,
            drift,
            lo=z.lo,
            hi=z.hi,
            cells=z.cells,
            functions=(function,),
            implicit=z.implicit,
            initial_std=initial_std,
            snapshot_times=z.snapshots if rep == 0 else (),
            snapshot_dir=config.output_dir if rep == 0 else None,
        )
        gaps = trace.estimate(function) - fd.trace.estimate(function)
        return np.abs(gaps[checkpoints])

    if z.snapshots:
        config.output_dir.mkdir(parents=True, exist_ok=True)
    tally = guarded_map(
        crosscheck, mc.replications, mc.threads, "crosscheck"
    ).enforce_quotas()
    gaps = np.array(tally.values)
    for column, step in enumerate(checkpoints):
        value, se = mean_and_se(gaps[:, column])
        report.add_row(
            epsilon,
            f"pf_fd_gap@t={grid.times[step]:g}",
            value,
            se,
            gaps.shape[0],
            tally.aborts + tally.degenerate,
        )
    final_gap = float(gaps[:, -1].mean())
    report.check(
        f"|π̂ − π̂_fd| at t* ≤ {CROSSCHECK_GAP:g}",
        final_gap <= CROSSCHECK_GAP,
        f"gap {final_gap:.4f}",
    )

    coarse, fine = zakai_residual_halving(config, model, epsilon, function)
    report.add_row(epsilon, "zakai_residual_dt", coarse[0], coarse[1], len(coarse[2]))
    report.add_row(
        epsilon, "zakai_residual_dt/2", fine[0], fine[1], len(fine[2])
    )
    ratio = fine[0] / coarse[0] if coarse[0] > 0 else NAN
    low, high = RESIDUAL_HALVING
    report.check(
        "residual halves with dt",
        low <= ratio <= high,
        f"ratio {ratio:.3f}",
    )
    return report


def zakai_residual_halving(
    config: ExperimentConfig,
    model: ModelSpec,
    epsilon: float,
    function: str,
) -> Tuple[Tuple[float, float, List[float]], Tuple[float, float, List[float]]]:
    """Mean max-residual of unresampled ε-filters at dt and dt/2

    The observation is simulated on the fine grid and summed pairwise for
    the coarse run. σ̌₀ and f̌₁ are switched off so the residual measures
    the time discretization only.
    """
    residual_model = build_model(
        model.name,
        {**model.params, "sigma0": 0.0, "c1": 0.0},
        config.model_constants,
    )
    obs_model = config.build_observation(residual_model)
    coarse_grid = config.time_grid()
    fine_grid = coarse_grid.refine(2)
    mc = config.monte_carlo
    particles = config.zakai.residual_particles

    def residuals(rep: int) -> Tuple[float, float]:
        seed = replication_seed(mc.seed, rep)
        setup = FilterSetup(
            residual_model, obs_model, fine_grid, particles, None, function
        )
        fine_path = observe(setup, epsilon, seed)
        out = []
        for obs_path in (fine_path.coarsen(2), fine_path):
            trace = particle_filter_levy(
                obs_path,
                residual_model,
                obs_model,
                particles,
                seed,
                mode=EPSILON_MODE,
                epsilon=epsilon,
                functions=(function,),
                resample=False,
                keep_history=True,
            )
            out.append(
                zakai_residual_check(
                    trace, function, obs_path, residual_model, obs_model
                )
            )
        return out[0], out[1]

    tally = guarded_map(
        residuals, mc.replications, mc.threads, "residual"
    ).enforce_quotas()
    values = np.array(tally.values).reshape(-1, 2)
    coarse = mean_and_se(values[:, 0])
    fine = mean_and_se(values[:, 1])
    return (
        (coarse[0], coarse[1], list(values[:, 0])),
        (fine[0], fine[1], list(values[:, 1])),
    )


def run_invariant_suite(config: ExperimentConfig) -> ExperimentReport:
    """Desk-scale self-test of reproducibility, normalization and oracles"""
    model = config.build_model()
    report = _new_report(config, model)
    mc = config.monte_carlo
    grid = config.time_grid()
    epsilon = config.sweep.epsilons[0]
    seed = replication_seed(mc.seed, 0)

    # reproducibility
    first = sample_noise(model, grid, epsilon, seed)
    second = sample_noise(model, grid, epsilon, seed)
    same_paths = np.array_equal(
        simulate_slow_fast(model, epsilon, grid, first).X,
        simulate_slow_fast(model, epsilon, grid, second).X,
    )
    report.check(
        "same seed → identical noise and paths",
        first.checksum() == second.checksum() and same_paths,
    )

    def endpoint(rep: int) -> float:
        noise = sample_noise(model, grid, epsilon, replication_seed(mc.seed, rep))
        return float(simulate_slow_fast(model, epsilon, grid, noise).X[-1, 0])

    serial = guarded_map(endpoint, 4, threads=1, label="serial").values
    parallel = guarded_map(endpoint, 4, threads=4, label="parallel").values
    report.check("serial and threaded runs agree", serial == parallel)

    # dissipativity arithmetic
    c = model.constants
    by_hand = 2 * c["Lbar_b2"] - c["L_b2"] - 2 * c["L_sigma2"] ** 2 - 2 * c[
        "int_L2_nu2"
    ]
    margin = verify_dissipativity(model)
    report.add_row(NAN, "dissipativity_margin", margin, 0.0, 1)
    report.check(
        "dissipativity margin",
        margin == by_hand and (margin > 0 or model.assumption_exception),
        f"M = {margin:g}",
    )

    # averaged-drift oracle
    if model.oracle is not None:
        estimator = config.estimator()
        points = np.linspace(config.averaging.lo, config.averaging.hi, 5)
        worst = 0.0
        for i, x in enumerate(points):
            value, se = averaged_drift(
                model, [x], estimator, cache_seed(mc.seed).child(i)
            )
            exact = oracle_drift(model, [[x]])[0, 0]
            gap = abs(value[0] - exact)
            tolerance = max(3 * se[0], 1e-2)
            worst = max(worst, gap / tolerance)
            report.add_row(NAN, f"drift_gap@x={x:g}", gap, se[0], estimator.chains)
        report.check("averaged drift matches oracle", worst <= 1.0)

    _suite_sensor(config, report)
    _suite_levy(config, report)
    return report


def _suite_sensor(config: ExperimentConfig, report: ExperimentReport) -> None:
    model = config.build_model()
    if model.family == LEVY_FAMILY:
        model = build_model("analytic-ou")
    obs_model = sensor_observation(
        observation_function("tanh", 0.5), config.observation.correlation
    )
    grid = config.time_grid()
    epsilon = config.sweep.epsilons[0]
    mc = config.monte_carlo

    def inverse_gamma(rep: int) -> float:
        seed = replication_seed(mc.seed, rep)
        noise = sample_noise(model, grid, epsilon, seed)
        pair = simulate_slow_fast(model, epsilon, grid, noise)
        obs_path = simulate_observation_sensor(
            pair, noise.V, noise.B, obs_model, grid
        )
        return float(np.exp(-girsanov_weight_sensor(pair, obs_path, obs_model.h)[-1]))

    tally = guarded_map(inverse_gamma, mc.replications, mc.threads, "γ⁻¹")
    value, se = mean_and_se(tally.values)
    report.add_row(epsilon, "mean_inverse_gamma", value, se, len(tally.values))
    report.check("E[1/γ_T] = 1 (3·SE)", abs(value - 1) <= 3 * se, f"{value:.4f}")

    seed = replication_seed(mc.seed, 0)
    noise = sample_noise(model, grid, epsilon, seed)
    obs_path = simulate_observation_sensor(
        simulate_slow_fast(model, epsilon, grid, noise),
        noise.V,
        noise.B,
        obs_model,
        grid,
    )
    trace = particle_filter_sensor(
        obs_path,
        model,
        obs_model,
        min(config.filter.particles, 500),
        seed,
        mode=EPSILON_MODE,
        epsilon=epsilon,
    )
    worst = float(np.max(np.abs(trace.estimate("one") - 1.0)))
    report.check("π̂(1) = 1 at every step", worst <= 1e-12, f"max dev {worst:.1e}")


def _suite_levy(config: ExperimentConfig, report: ExperimentReport) -> None:
    model = build_model("levy-correlated")
    obs_model = levy_observation(
        observation_function("tanh", 0.5),
        intensity_function("tanh", 0.5, 0.3),
        rate=2.0,
        jump_scale=0.5,
    )
    grid = config.time_grid()
    epsilon = config.sweep.epsilons[0]
    mc = config.monte_carlo
    gap_bound = (
        4 * obs_model.h.bound**2 * np.sqrt(grid.horizon * grid.dt) + 10 * grid.dt
    )

    def inverse_lambda(rep: int) -> Tuple[float, float]:
        seed = replication_seed(mc.seed, rep)
        noise = sample_noise(model, grid, epsilon, seed, obs_model.measure)
        pair = simulate_slow_fast(model, epsilon, grid, noise)
        obs_path = simulate_observation_levy(
            pair, noise.V, noise.J_lambda, obs_model, grid
        )
        closed = likelihood_levy(pair, obs_path, obs_model)
        euler = likelihood_levy_euler(pair, obs_path, obs_model)
        return float(np.exp(-closed[-1])), float(np.max(np.abs(closed - euler)))

    tally = guarded_map(inverse_lambda, mc.replications, mc.threads, "λ⁻¹")
    values = np.array(tally.values).reshape(-1, 2)
    value, se = mean_and_se(values[:, 0])
    report.add_row(epsilon, "mean_inverse_lambda", value, se, values.shape[0])
    report.check("E[1/λ_T] = 1 (3·SE)", abs(value - 1) <= 3 * se, f"{value:.4f}")
    worst = float(values[:, 1].max())
    report.add_row(epsilon, "likelihood_euler_gap", worst, 0.0, values.shape[0])
    report.check(
        "closed-form vs Euler likelihood",
        worst <= gap_bound,
        f"{worst:.2e} ≤ {gap_bound:.2e}",
    )


RUNNERS: Dict[str, Callable[[ExperimentConfig], ExperimentReport]] = {
    "strong-convergence": run_strong_convergence,
    "aux-scaling": run_aux_scaling,
    "filter-l1": run_filter_l1,
    "filter-weak": run_filter_weak,
    "zakai-crosscheck": run_zakai_crosscheck,
    "invariant-suite": run_invariant_suite,
}


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Dispatch on ``config.kind`` and time the run"""
    started = time.perf_counter()
    report = RUNNERS[config.kind](config)
    report.wall_clock = time.perf_counter() - started
    for note in report.notes:
        print_warning(note)
    events.emit(EventType.Experiment.FINISHED, report)
    return report
