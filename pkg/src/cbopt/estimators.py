"""Unbiased gradient estimates built from comparison outcomes only."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from cbopt.errors import DensityInconsistency
from cbopt.oracle import (
    PLUS_SMALLER,
    SAMPLE_ABOVE,
    SAMPLE_BELOW,
    BinaryOutcome,
    CategoricalOutcome,
    CategoricalScheme,
    PairOutcome,
)
from cbopt.problems import ABOVE, BELOW, Objective1D
from cbopt.sampling import RadialDensity, SamplingDensity

PLAIN = "plain"
CORRECTED = "corrected"


@dataclass(frozen=True)
class GradSample1D:
    value: float
    branch: str
    z: float


@dataclass(frozen=True)
class GradSampleQP:
    value: np.ndarray
    magnitude: float
    u: np.ndarray


def _weight(obj, x, z, side, density):
    p = density.pdf(z)
    if p <= 0.0:
        raise DensityInconsistency(f"density vanishes at z={z} ({density!r})")
    return obj.cross(x, z, side) / p


def grad_cba(
    x: float,
    first: BinaryOutcome,
    z: float,
    second: BinaryOutcome,
    obj: Objective1D,
    band: SamplingDensity,
) -> GradSample1D:
    """Two-comparison estimate of ``H'(x)``.

    ``first`` compares the sample with ``x``, ``second`` with ``z`` drawn from
    ``band``.  Below ``x`` the correction applies when ``z >= xi``; above
    ``x`` it applies when ``z < xi``.
    """
    if first is SAMPLE_BELOW:
        if band.side != BELOW:
            raise ValueError("sample below x needs a below-side band")
        base = obj.dleft(x)
        if second is SAMPLE_BELOW:
            return GradSample1D(base - _weight(obj, x, z, BELOW, band), CORRECTED, z)
        return GradSample1D(base, PLAIN, z)
    if band.side != ABOVE:
        raise ValueError("sample above x needs an above-side band")
    base = obj.dright(x)
    if second is SAMPLE_ABOVE:
        return GradSample1D(base + _weight(obj, x, z, ABOVE, band), CORRECTED, z)
    return GradSample1D(base, PLAIN, z)


def edge_derivative(obj: Objective1D, x: float, side: str, gap: float) -> float:
    """Limit of ``h'_x(x, xi)`` as ``xi`` approaches ``x -+ gap`` from inside the band."""
    if gap == 0.0:
        return obj.dleft(x) if side == BELOW else obj.dright(x)
    return obj.dx(x, x - gap if side == BELOW else x + gap)


def grad_cba_categorical(
    x: float,
    out: CategoricalOutcome,
    z: float,
    second: BinaryOutcome,
    obj: Objective1D,
    scheme: CategoricalScheme,
    band: SamplingDensity | None = None,
) -> GradSample1D:
    """Band-aware estimate: the plain value is the derivative at the band's inner edge."""
    if band is None:
        band = scheme.density(x, out)
    base = edge_derivative(obj, x, out.side, scheme.thresholds[out.band])
    if out.side == BELOW:
        if second is SAMPLE_BELOW:
            return GradSample1D(base - _weight(obj, x, z, BELOW, band), CORRECTED, z)
        return GradSample1D(base, PLAIN, z)
    if second is SAMPLE_ABOVE:
        return GradSample1D(base + _weight(obj, x, z, ABOVE, band), CORRECTED, z)
    return GradSample1D(base, PLAIN, z)


def grad_qp(
    x: np.ndarray,
    u: np.ndarray,
    z: float,
    pair: PairOutcome,
    winner_le_center: bool,
    quad_form,
    radial: RadialDensity,
) -> GradSampleQP:
    """Direction-times-scalar estimate of ``Q (x - xi)``.

    ``quad_form`` is ``u^T Q u`` as a number, or a callable taking ``u``.
    """
    if not winner_le_center:
        return GradSampleQP(np.zeros_like(u, dtype=float), 0.0, u)
    p = radial.pdf(z)
    if p <= 0.0:
        raise DensityInconsistency(f"radial density vanishes at z={z}")
    uqu = quad_form(u) if callable(quad_form) else quad_form
    mag = 0.5 * uqu / p
    if pair is PLUS_SMALLER:
        mag = -mag
    return GradSampleQP(mag * u, mag, u)


def minibatch_grad(
    x: float,
    first: BinaryOutcome,
    zs: Sequence[float],
    seconds: Sequence[BinaryOutcome],
    obj: Objective1D,
    band: SamplingDensity,
) -> float:
    """Mean of the single-point estimates over ``S`` second points of one round."""
    if len(zs) == 0:
        raise ValueError("mini-batch needs at least one second point")
    if len(zs) != len(seconds):
        raise ValueError("each second point needs its comparison outcome")
    total = 0.0
    for z, s in zip(zs, seconds):
        total += grad_cba(x, first, z, s, obj, band).value
    return total / len(zs)
