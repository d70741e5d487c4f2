"""
Monte Carlo risk experiments.

Every (n, rep) replication draws from its own counter-based stream keyed by
(base seed, n index, rep), so the table does not depend on how replications
are scheduled across threads.
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.stats import linregress

from deconv.estimator import (
    calibrate_constants,
    default_order,
    estimate_manifold,
    level_grid,
    select_bandwidth,
    select_threshold,
    truncated_loss,
)
from deconv.kernels import check_bandwidth_floor
from geometry.metrics import hausdorff_distance
from geometry.models import HausdorffEstimate
from manifold_lab.exceptions import ConfigError, GeometryError, ParameterError
from sampling.random import SeedRecord
from sampling.samplers import sample
from slabfit.scoring import epsilon_n, fit, offset_family

from .models import ABSCISSAE, RateFit, RiskRow, RiskTable
from .presets import build_scenario

logger = logging.getLogger(__name__)


def replication_seed(config, n_index, rep):
    return SeedRecord(config.seed, n_index, rep)


def deconv_setup(config, scenario, n, n_index, h=None):
    """
    Bandwidth, order, calibrated threshold and level grid at sample size n.

    Calibration runs once per n on its own stream, keyed by the n index alone.
    ``h`` overrides the bandwidth 1 / sqrt(log n).

    Raises:
        NumericFloorError: If the bandwidth is too small to deconvolve.
    """
    manifold = scenario.manifold
    d, D = manifold.intrinsic_dim, manifold.ambient_dim
    h = h or select_bandwidth(n)
    check_bandwidth_floor(h, D)
    k = config.deconv_k or default_order(d, config.deconv_delta)
    calibration = calibrate_constants(
        scenario.dist,
        [h],
        k,
        config.deconv_L,
        config.deconv_delta,
        seed=SeedRecord(config.seed, n_index),
        box=scenario.box,
        grid_factor=config.deconv_grid_factor,
    )
    threshold = select_threshold(h, D, d, k, config.deconv_L, calibration)
    grid = level_grid(scenario.box, h, config.deconv_delta, config.deconv_grid_factor)
    logger.info(
        "deconv at n=%d: h=%.4g, k=%d, lambda=%.4g on %d nodes",
        n,
        h,
        k,
        threshold.value,
        grid.size,
    )
    return {"h": h, "k": k, "threshold": threshold, "grid": grid}


def slab_estimate(config, scenario, cloud, n):
    """Point net of the slab-score maximiser over the offset family."""
    epsilon = epsilon_n(n, scenario.intrinsic_dim, config.slab_K)
    distance = 2 * math.sqrt(epsilon)
    family = offset_family(scenario.manifold, distance, config.slab_offsets)
    result = fit(family, cloud, n, config.slab_K, config.slab_b1, config.slab_b2)
    return result.manifold.discretize(config.resolution)


def truncated_estimate(config, scenario, estimate, grid=None):
    """Truncated loss and its bound; an empty set inside K scores its diameter."""
    try:
        return truncated_loss(
            scenario.manifold, estimate, scenario.box, config.resolution, grid=grid
        )
    except GeometryError:
        logger.warning("empty estimate inside K; loss set to its diameter")
        return HausdorffEstimate(value=scenario.box.diameter, bound=0.0)


def replication_loss(config, scenario, estimate, truth, grid=None):
    """
    Hausdorff loss of one estimate.

    The additive model truncates both sets to K. An empty estimate scores
    the diameter of K.
    """
    if config.noise == "additive":
        return truncated_estimate(config, scenario, estimate, grid).value
    if estimate.is_empty:
        logger.warning("empty estimate; loss set to the diameter of K")
        return scenario.box.diameter
    return hausdorff_distance(estimate, truth)


def run_experiment(config, scenario=None):
    """
    Risk table of ``config``: one row per (n, rep).

    Args:
        config (ExperimentConfig): The experiment.
        scenario (Scenario): Overrides the preset named by the config.

    Returns:
        RiskTable: Rows sorted by (n, rep).

    Raises:
        ConfigError: If the estimator cannot run under the noise model.
    """
    if config.mismatch:
        raise ConfigError(config.mismatch)
    scenario = scenario or build_scenario(config)
    truth = None
    if config.noise != "additive":
        truth = scenario.manifold.discretize(config.resolution)
    setups = {}
    if config.estimator == "deconv":
        setups = {
            n: deconv_setup(config, scenario, n, index)
            for index, n in enumerate(config.ns)
        }

    def replicate(task):
        n_index, n, rep = task
        started = time.perf_counter()
        dataset = sample(
            scenario.dist, scenario.model, n, replication_seed(config, n_index, rep)
        )
        cloud = dataset.observed
        grid = None
        if config.estimator == "slab":
            estimate = slab_estimate(config, scenario, cloud, n)
        elif config.estimator == "deconv":
            setup = setups[n]
            grid = setup["grid"]
            _, estimate = estimate_manifold(
                cloud, grid, setup["h"], setup["k"], setup["threshold"]
            )
        else:
            estimate = cloud
        loss = replication_loss(config, scenario, estimate, truth, grid)
        runtime = 1000 * (time.perf_counter() - started)
        return RiskRow(n=n, rep=rep, loss=float(loss), runtime_ms=runtime)

    tasks = [
        (index, n, rep)
        for index, n in enumerate(config.ns)
        for rep in range(config.replications)
    ]
    logger.info(
        "running %d replications of %s on %s (%s noise)",
        len(tasks),
        config.estimator,
        scenario.manifold.label,
        config.noise,
    )
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            rows = list(pool.map(replicate, tasks))
    else:
        rows = [replicate(task) for task in tasks]
    return RiskTable(tuple(rows), abscissa=config.abscissa, params=config.as_dict())


def rate_fit(table, abscissa=None):
    """
    Least squares of log median loss against log n (or log log n).

    Raises:
        ParameterError: With fewer than three distinct n, or "degenerate fit"
            when a median loss is zero.
    """
    abscissa = abscissa or table.abscissa
    if abscissa not in ABSCISSAE:
        raise ParameterError(f"unknown abscissa {abscissa!r}")
    ns = table.ns
    if len(ns) < 3:
        raise ParameterError("a rate fit needs at least three distinct n")
    medians = table.medians()
    if np.any(medians <= 0):
        raise ParameterError("degenerate fit: a median loss is zero")
    x = np.log(np.asarray(ns, dtype=float))
    if abscissa == "loglog":
        x = np.log(x)
    result = linregress(x, np.log(medians))
    logger.info(
        "rate fit against %s n: slope %.4g +- %.2g",
        abscissa,
        result.slope,
        result.stderr,
    )
    return RateFit(
        slope=float(result.slope),
        stderr=float(result.stderr),
        intercept=float(result.intercept),
        r_squared=float(result.rvalue**2),
        abscissa=abscissa,
        ns=tuple(ns),
    )
