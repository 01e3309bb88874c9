"""Bayesian attractor network of head-direction (ring) and grid (torus) cells.

Each network is summarised by two Gaussian bumps with periodic boundaries:
an integrator bump driven by self-motion and a calibration bump driven by
visual cues. A bump is a (mean phase, precision) pair; precisions play the
role of neural activity energy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .geometry import TWO_PI, PlanarVelocity, wrap_2pi, wrap_pi


@dataclass(frozen=True)
class RingBump:
    mu: float
    weight: float

    def __post_init__(self):
        if not (0.0 <= self.mu < TWO_PI):
            raise ValueError(f"phase {self.mu} outside [0, 2pi)")
        if not self.weight > 0:
            raise ValueError(f"precision must be positive, got {self.weight}")


@dataclass(frozen=True)
class TorusBump:
    mu_x: float
    mu_y: float
    weight_x: float
    weight_y: float

    def __post_init__(self):
        for mu in (self.mu_x, self.mu_y):
            if not (0.0 <= mu < TWO_PI):
                raise ValueError(f"phase {mu} outside [0, 2pi)")
        if not (self.weight_x > 0 and self.weight_y > 0):
            raise ValueError("precisions must be positive")

    @property
    def mu(self) -> tuple[float, float]:
        return (self.mu_x, self.mu_y)


@dataclass(frozen=True)
class AttractorConfig:
    total_energy: float = 2.0
    delta_inte: float = 0.05
    delta_cali: float = 0.05
    familiarity_threshold: float = 0.1
    weight_floor: float = 1e-6
    grid_gain: float = TWO_PI / 40.0

    def __post_init__(self):
        if not self.total_energy > 0:
            raise ValueError("total_energy must be positive")
        for d in (self.delta_inte, self.delta_cali):
            if not (0.0 <= d < 1.0):
                raise ValueError("mutual inhibition intensities must lie in [0, 1)")
        if not self.familiarity_threshold > 0:
            raise ValueError("familiarity_threshold must be positive")
        if not self.weight_floor > 0:
            raise ValueError("weight_floor must be positive")
        if not self.total_energy > 2 * self.weight_floor:
            raise ValueError("total_energy must exceed twice the weight floor")
        if not self.grid_gain > 0:
            raise ValueError("grid_gain must be positive")


def _default_ring() -> RingBump:
    return RingBump(0.0, 1.0)


def _default_torus() -> TorusBump:
    return TorusBump(0.0, 0.0, 1.0, 1.0)


@dataclass(frozen=True)
class NetworkState:
    hd_integrator: RingBump = field(default_factory=_default_ring)
    hd_calibration: RingBump = field(default_factory=_default_ring)
    grid_integrator: TorusBump = field(default_factory=_default_torus)
    grid_calibration: TorusBump = field(default_factory=_default_torus)

    @classmethod
    def initial(cls, cfg: AttractorConfig, hd_phase: float = 0.0,
                grid_phase: tuple[float, float] = (0.0, 0.0)) -> NetworkState:
        half = cfg.total_energy / 2.0
        ring = RingBump(wrap_2pi(hd_phase), half)
        torus = TorusBump(wrap_2pi(grid_phase[0]), wrap_2pi(grid_phase[1]), half, half)
        return cls(ring, ring, torus, torus)


@dataclass(frozen=True)
class Cue:
    """Visual cue recalled from a view template."""

    hd_phase: float
    grid_phase: tuple[float, float]
    inject_weight: float


@dataclass(frozen=True)
class StepResult:
    state: NetworkState
    hd_estimate: float
    grid_estimate: tuple[float, float]
    loop_closed: bool
    hd_familiar: bool
    grid_familiar: bool


def circular_distance(a: float, b: float, period: float = TWO_PI) -> float:
    d = math.fmod(a - b, period)
    d = abs(d)
    return min(d, period - d)


def fuse_circular(a: tuple[float, float], b: tuple[float, float],
                  period: float = TWO_PI) -> tuple[float, float]:
    """Precision-weighted fusion of two periodic Gaussians.

    ``b`` is moved to the representative nearest ``a`` before averaging, so the
    fused mean always lies on the short arc between the two means.
    """
    mu_a, w_a = a
    mu_b, w_b = b
    half = period / 2.0
    delta = math.fmod(mu_b - mu_a + half, period)
    if delta < 0:
        delta += period
    delta -= half
    w = w_a + w_b
    mu = math.fmod(mu_a + (w_b / w) * delta, period)
    if mu < 0:
        mu += period
    if mu >= period:
        mu = 0.0
    return mu, w


def global_inhibition(inte_w: float, cali_w: float, E: float,
                      weight_floor: float = 0.0) -> tuple[float, float]:
    inte = E * inte_w / (inte_w + cali_w)
    inte = min(max(inte, weight_floor), E - weight_floor) if weight_floor > 0 else inte
    return inte, E - inte


def mutual_inhibition(inte_w: float, cali_w: float, delta_inte: float,
                      delta_cali: float, weight_floor: float) -> tuple[float, float]:
    return (
        max(inte_w - delta_inte * cali_w, weight_floor),
        max(cali_w - delta_cali * inte_w, weight_floor),
    )


def path_integrate_ring(bump: RingBump, omega: float, dt: float) -> RingBump:
    return RingBump(wrap_2pi(bump.mu + omega * dt), bump.weight)


def path_integrate_torus(bump: TorusBump, heading: float, speed: float, dt: float,
                         grid_gain: float) -> TorusBump:
    step = grid_gain * speed * dt
    return replace(
        bump,
        mu_x=wrap_2pi(bump.mu_x + step * math.cos(heading)),
        mu_y=wrap_2pi(bump.mu_y + step * math.sin(heading)),
    )


def inject_cue(cali, inject_mu, inject_weight: float):
    """Energy injection into a calibration bump (ring or torus)."""
    if not inject_weight > 0:
        raise ValueError("inject_weight must be positive")
    if isinstance(cali, RingBump):
        mu, w = fuse_circular((cali.mu, cali.weight), (float(inject_mu), inject_weight))
        return RingBump(mu, w)
    mx, wx = fuse_circular((cali.mu_x, cali.weight_x), (float(inject_mu[0]), inject_weight))
    my, wy = fuse_circular((cali.mu_y, cali.weight_y), (float(inject_mu[1]), inject_weight))
    return TorusBump(mx, my, wx, wy)


def estimate_phase(inte, cali, threshold: float):
    """Fused phase estimate and the familiarity decision.

    Returns ``(mu_cc, w_cc, familiar)``; for torus bumps ``mu_cc`` and ``w_cc``
    are (x, y) pairs and familiarity must hold on both axes.
    """
    if isinstance(inte, RingBump):
        mu, w = fuse_circular((inte.mu, inte.weight), (cali.mu, cali.weight))
        return mu, w, circular_distance(mu, cali.mu) < threshold
    mx, wx = fuse_circular((inte.mu_x, inte.weight_x), (cali.mu_x, cali.weight_x))
    my, wy = fuse_circular((inte.mu_y, inte.weight_y), (cali.mu_y, cali.weight_y))
    familiar = (circular_distance(mx, cali.mu_x) < threshold
                and circular_distance(my, cali.mu_y) < threshold)
    return (mx, my), (wx, wy), familiar


def _inhibit_ring(inte: RingBump, cali: RingBump, cfg: AttractorConfig):
    wi, wc = mutual_inhibition(inte.weight, cali.weight, cfg.delta_inte,
                               cfg.delta_cali, cfg.weight_floor)
    wi, wc = global_inhibition(wi, wc, cfg.total_energy, cfg.weight_floor)
    return RingBump(inte.mu, wi), RingBump(cali.mu, wc)


def _inhibit_torus(inte: TorusBump, cali: TorusBump, cfg: AttractorConfig):
    weights = []
    for wi, wc in ((inte.weight_x, cali.weight_x), (inte.weight_y, cali.weight_y)):
        wi, wc = mutual_inhibition(wi, wc, cfg.delta_inte, cfg.delta_cali, cfg.weight_floor)
        weights.append(global_inhibition(wi, wc, cfg.total_energy, cfg.weight_floor))
    (ix, cx), (iy, cy) = weights
    return (replace(inte, weight_x=ix, weight_y=iy),
            replace(cali, weight_x=cx, weight_y=cy))


def step(state: NetworkState, cfg: AttractorConfig, vel: PlanarVelocity,
         cue: Cue | None = None) -> StepResult:
    """One decision cycle: integrate, inject, inhibit, estimate."""
    dt = vel.dt
    hd_i = path_integrate_ring(state.hd_integrator, vel.rotational, dt)
    hd_c = path_integrate_ring(state.hd_calibration, vel.rotational, dt)
    heading, _, _ = estimate_phase(hd_i, hd_c, cfg.familiarity_threshold)

    g_i = path_integrate_torus(state.grid_integrator, heading, vel.translational, dt,
                               cfg.grid_gain)
    g_c = path_integrate_torus(state.grid_calibration, heading, vel.translational, dt,
                               cfg.grid_gain)

    if cue is not None:
        hd_c = inject_cue(hd_c, cue.hd_phase, cue.inject_weight)
        g_c = inject_cue(g_c, cue.grid_phase, cue.inject_weight)

    hd_i, hd_c = _inhibit_ring(hd_i, hd_c, cfg)
    g_i, g_c = _inhibit_torus(g_i, g_c, cfg)

    hd_mu, _, hd_fam = estimate_phase(hd_i, hd_c, cfg.familiarity_threshold)
    g_mu, _, g_fam = estimate_phase(g_i, g_c, cfg.familiarity_threshold)
    if hd_fam:
        hd_i = replace(hd_i, mu=hd_mu)
    if g_fam:
        g_i = replace(g_i, mu_x=g_mu[0], mu_y=g_mu[1])

    new_state = NetworkState(hd_i, hd_c, g_i, g_c)
    return StepResult(
        new_state, hd_mu, g_mu,
        loop_closed=cue is not None and hd_fam and g_fam,
        hd_familiar=hd_fam, grid_familiar=g_fam,
    )


def torus_distance(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Geodesic distance between two points on the flat 2-torus."""
    return math.hypot(circular_distance(a[0], b[0]), circular_distance(a[1], b[1]))


def heading_from_phase(phase: float) -> float:
    return wrap_pi(phase)
