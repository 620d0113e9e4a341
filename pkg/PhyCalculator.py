import dataclasses
import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ChainModel import SystemParams
from constants import DEFAULT_MC_SAMPLES, DEFAULT_SEED, MIN_MC_SAMPLES, PROB_TOL
from utils import ConfigurationError, DomainError, InvariantViolation

logger = logging.getLogger(__name__)

"""
    The PhyCalculator reduces a link budget to the four average decoding failure probabilities the
    chain model works with:

    1) rho and rho*: failure at the primary destination with the secondary silent / transmitting,
       the primary receiver treats the secondary signal as noise

    2) nu and nu*: failure at the secondary destination with the primary silent / transmitting,
       the secondary receiver either treats the primary signal as noise or decodes and cancels it
       whenever the rate pair lies in the successive-decoding region

    Single-gain events (rho, nu) use the closed-form exponential CDF under Rayleigh fading, the
    events involving two gains (rho*, nu*) use seeded Monte Carlo with one set of gain draws
    shared by both, so that paired comparisons across budgets move together.
"""

class FadingModel(Enum):
    RAYLEIGH = "rayleigh"
    DETERMINISTIC = "deterministic"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigurationError(f"ERROR: unknown fading model {value}. Check inputs!")


RX_TREAT_AS_NOISE = "treat-as-noise"
RX_OPPORTUNISTIC_CANCEL = "opportunistic-cancel"


@dataclass(frozen=True)
class LinkBudget:
    r_p: float
    r_s: float
    p_p: float
    p_s: float
    gbar_pp: float
    gbar_ps: float
    gbar_ss: float
    gbar_sp: float
    secondary_rx_mode: str = RX_OPPORTUNISTIC_CANCEL

    def __post_init__(self):
        if self.r_p < 0 or self.r_s < 0:
            raise InvariantViolation("ERROR: transmission rates must be >= 0. Check inputs!")
        if self.p_p <= 0 or self.p_s <= 0:
            raise InvariantViolation("ERROR: transmit powers must be > 0. Check inputs!")
        if min(self.gbar_pp, self.gbar_ps, self.gbar_ss, self.gbar_sp) <= 0:
            raise InvariantViolation("ERROR: mean channel gains must be > 0. Check inputs!")
        if self.secondary_rx_mode not in (RX_TREAT_AS_NOISE, RX_OPPORTUNISTIC_CANCEL):
            raise ConfigurationError(f"ERROR: unknown secondary_rx_mode {self.secondary_rx_mode}. Check inputs!")

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigurationError(f"ERROR: link budget must be a mapping, got {type(d).__name__}. Check inputs!")
        try:
            return cls(**d)
        except TypeError as err:
            raise ConfigurationError(f"ERROR: malformed link budget: {err}")

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class FailureProbs:
    rho: float
    rho_star: float
    nu: float
    nu_star: float

    def __post_init__(self):
        for name in ("rho", "rho_star", "nu", "nu_star"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InvariantViolation(f"ERROR: {name}={value} must lie in [0,1]")
        if self.rho_star < self.rho:
            raise InvariantViolation(f"ERROR: rho_star={self.rho_star} < rho={self.rho}")
        if self.nu_star < self.nu:
            raise InvariantViolation(f"ERROR: nu_star={self.nu_star} < nu={self.nu}")

    def to_dict(self):
        return dataclasses.asdict(self)


def capacity(x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError(f"ERROR: capacity argument must be >= 0, got {x}")
    c = np.log2(1.0 + x)
    return float(c) if c.ndim == 0 else c


# (rho*-rho)/(1-rho), zero when the link always fails
def _increasing_factor(base, degraded):
    if degraded < base:
        raise InvariantViolation(f"ERROR: degraded failure probability {degraded} below baseline {base}")
    if base >= 1.0:
        return 0.0
    return min(1.0, max(0.0, (degraded - base) / (1.0 - base)))


class PhyCalculator:
    def __init__(self, budget, fading=FadingModel.RAYLEIGH, mc_samples=DEFAULT_MC_SAMPLES, seed=DEFAULT_SEED):
        self.budget = budget
        self.fading = FadingModel.parse(fading)
        self.mc_samples = int(mc_samples)
        self.seed = seed

    capacity = staticmethod(capacity)

    def _rayleigh_outage(self, rate, snr_mean):
        # P{g*P < 2^R - 1} for an exponential power gain with mean gbar, snr_mean = gbar*P
        return float(1.0 - np.exp(-(2.0 ** rate - 1.0) / snr_mean))

    # Unit-mean exponential draws, one column per link: pp, ps, ss, sp
    def _gain_draws(self):
        if self.mc_samples < MIN_MC_SAMPLES:
            raise ConfigurationError(
                f"ERROR: {self.mc_samples} Monte Carlo samples is below the minimum {MIN_MC_SAMPLES}. Check inputs!")
        rng = np.random.Generator(np.random.PCG64(self.seed))
        return rng.standard_exponential((self.mc_samples, 4))

    def _gains(self):
        b = self.budget
        means = np.array([b.gbar_pp, b.gbar_ps, b.gbar_ss, b.gbar_sp])
        if self.fading is FadingModel.DETERMINISTIC:
            return means.reshape(1, 4)
        return self._gain_draws() * means

    def _secondary_success(self, g_pp, g_ps, g_ss):
        b = self.budget
        as_noise = b.r_s <= capacity(g_ss * b.p_s / (1.0 + g_ps * b.p_p))
        if b.secondary_rx_mode == RX_TREAT_AS_NOISE:
            return as_noise
        # Sum-rate condition evaluated with g_pp as in the published rate region
        cancel = (b.r_s <= capacity(g_ss * b.p_s)) & (b.r_p + b.r_s <= capacity(g_pp * b.p_p + g_ss * b.p_s))
        return cancel | as_noise

    def failure_probs(self):
        b = self.budget
        gains = self._gains()
        g_pp, g_ps, g_ss, g_sp = gains[:, 0], gains[:, 1], gains[:, 2], gains[:, 3]

        rho_star = float(np.mean(b.r_p > capacity(g_pp * b.p_p / (1.0 + g_sp * b.p_s))))
        nu_star = 1.0 - float(np.mean(self._secondary_success(g_pp, g_ps, g_ss)))
        if self.fading is FadingModel.DETERMINISTIC:
            rho = float(b.r_p > capacity(b.gbar_pp * b.p_p))
            nu = float(b.r_s > capacity(b.gbar_ss * b.p_s))
        else:
            rho = self._rayleigh_outage(b.r_p, b.gbar_pp * b.p_p)
            nu = self._rayleigh_outage(b.r_s, b.gbar_ss * b.p_s)
            logger.debug("Monte Carlo with %d samples: rho*=%g nu*=%g", self.mc_samples, rho_star, nu_star)

        # Sampling noise must not break rho* >= rho and nu* >= nu
        rho_star, nu_star = max(rho_star, rho), max(nu_star, nu)
        return FailureProbs(rho=rho, rho_star=rho_star, nu=nu, nu_star=nu_star)

    @staticmethod
    def increasing_factors(fp):
        return _increasing_factor(fp.rho, fp.rho_star), _increasing_factor(fp.nu, fp.nu_star)

    def system_params(self, alpha, t_max):
        fp = self.failure_probs()
        lam, lambda_s = self.increasing_factors(fp)
        if fp.nu >= 1.0 - PROB_TOL:
            raise ConfigurationError("ERROR: secondary link always fails (nu=1), nothing to optimise. Check inputs!")
        return SystemParams(alpha=alpha, rho=fp.rho, lam=lam, nu=fp.nu, lambda_s=lambda_s, t_max=t_max)
