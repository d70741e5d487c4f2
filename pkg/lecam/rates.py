"""
TV decay tables and the minimax lower-bound curves built from them.

A pair family maps gamma to a LeastFavorablePair. The additive model uses
grid TV between the Gaussian-smoothed laws, whose logarithm falls linearly in
1 / gamma; the noiseless and clutter models use the singular TV, scaled by
pi under clutter. In both cases the Le Cam bound is maximised over gamma.
"""

import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.stats import linregress

from geometry.models import Box, Grid
from manifold_lab.exceptions import ParameterError

from .divergence import PADDING_SIGMAS, pair_divergence, singular_tv
from .models import DecayFit, RateBound, TVTable

logger = logging.getLogger(__name__)


def padded_grid(pair, spacing, scale=1.0, padding=PADDING_SIGMAS):
    """Grid over the union of both bounding boxes plus ``padding`` sd."""
    lower = np.minimum(pair.m0.bounding_box.lower, pair.m1.bounding_box.lower)
    upper = np.maximum(pair.m0.bounding_box.upper, pair.m1.bounding_box.upper)
    margin = padding * scale
    return Grid.with_spacing(Box(lower - margin, upper + margin), spacing)


def _decreasing(gammas):
    gammas = np.asarray(gammas, dtype=float).reshape(-1)
    if gammas.size == 0 or np.any(gammas <= 0):
        raise ParameterError("gamma values must be positive")
    if np.any(np.diff(gammas) >= 0):
        raise ParameterError("gamma values must be strictly decreasing")
    return gammas


def tv_decay_table(
    family, gammas, spacing=0.1, scale=1.0, atom_spacing=None, threads=1, label=""
):
    """
    Grid TV between the smoothed laws of each pair in ``family``.

    Args:
        family (callable): gamma -> LeastFavorablePair.
        gammas (list): Strictly decreasing construction scales.
        spacing (float): Grid spacing of the convolved densities.
        scale (float): Noise standard deviation.
        atom_spacing (float): Parameter spacing of the G atoms.
        threads (int): Worker threads over grid blocks.

    Returns:
        TVTable: Errors add the quadrature error and the tail.
    """
    gammas = _decreasing(gammas)
    tvs, errors, factor = [], [], 1.0
    for gamma in gammas:
        pair = family(float(gamma))
        grid = padded_grid(pair, spacing, scale)
        report = pair_divergence(pair, grid, scale, atom_spacing, threads)
        tvs.append(report.tv)
        errors.append(report.quadrature_error + report.tail_error)
        factor = pair.separation / pair.gamma
        logger.info(
            "gamma=%.4g: TV=%.4e (err %.1e, %d nodes)",
            gamma,
            report.tv,
            errors[-1],
            grid.size,
        )
    return TVTable(gammas, tvs, errors, separation_factor=factor, label=label)


def singular_tv_table(family, gammas, pi=1.0, spacing=None, threads=1, label=""):
    """
    pi times the singular TV of each bump pair in ``family``.

    Panels align with the bump support. The error column is the change
    against a rule with half as many panels per piece.
    """
    gammas = _decreasing(gammas)
    if not 0 < pi <= 1:
        raise ParameterError(f"clutter weight must satisfy 0 < pi <= 1, got {pi}")

    def row(gamma):
        pair = family(float(gamma))
        rho = pair.params.get("rho", 0.0)
        fine = spacing or pair.m0.check_spacing()
        breaks = (-rho, rho) if rho > 0 else ()
        tv = singular_tv(pair.g0, pair.g1, fine, breaks)
        coarse = singular_tv(pair.g0, pair.g1, 2 * fine, breaks, order=3)
        return pi * tv, pi * abs(tv - coarse), pair.separation / pair.gamma

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(row, gammas))
    else:
        rows = [row(gamma) for gamma in gammas]
    tvs, errors, factors = zip(*rows)
    return TVTable(gammas, tvs, errors, separation_factor=factors[0], label=label)


def tv_decay_fit(table):
    """
    Least-squares slope of log TV against 1 / gamma.

    Raises:
        ParameterError: With fewer than four gammas, a non-decreasing gamma
            list or a vanishing TV.
    """
    gammas = _decreasing(table.gammas)
    if gammas.size < 4:
        raise ParameterError("a decay fit needs at least four gamma values")
    if np.any(table.tvs <= 0):
        raise ParameterError("every TV must be positive to fit its logarithm")
    fit = linregress(1.0 / gammas, np.log(table.tvs))
    logger.info("TV decay slope %.4g (R^2 = %.4f)", fit.slope, fit.rvalue**2)
    return DecayFit(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        r_squared=float(fit.rvalue**2),
        stderr=float(fit.stderr),
        separation_factor=table.separation_factor,
    )


def default_gammas(source):
    if isinstance(source, TVTable):
        return source.gammas
    return np.geomspace(1e-4, 1.0, 2000)


def rate_from_bound(source, n, gammas=None):
    """
    Maximise separation(gamma) / 8 (1 - TV(gamma))^(2n) over a gamma grid.

    Args:
        source (TVTable | DecayFit): Anything exposing ``tv(gamma)`` and a
            ``separation_factor``.
        n (int): Sample size.
        gammas (array-like): Grid to search; defaults to the table's gammas or
            a log-spaced grid on [1e-4, 1].

    Returns:
        RateBound: The maximiser (the first on ties) and the bound there.
    """
    if n < 1:
        raise ParameterError(f"sample size must be at least 1, got {n}")
    gammas = np.asarray(
        default_gammas(source) if gammas is None else gammas, dtype=float
    )
    tvs = np.clip(source.tv(gammas), 0.0, 1.0)
    bounds = source.separation_factor * gammas / 8 * (1 - tvs) ** (2 * n)
    best = int(np.argmax(bounds))
    return RateBound(
        n=int(n), gamma_star=float(gammas[best]), bound=float(bounds[best])
    )


def bound_curve(source, ns, gammas=None):
    """RateBound for each sample size in ``ns``."""
    return [rate_from_bound(source, n, gammas) for n in ns]
