import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from ChainModel import ChainModel
from constants import DEFAULT_SEED, DEFAULT_SLOTS, DEFAULT_WARMUP_SLOTS, N_BATCHES, PRNG_NAME
from utils import ConfigurationError

logger = logging.getLogger(__name__)

"""
    Simulator inherits from ChainModel. It plays the slotted two-link network slot by slot under a
    given secondary policy and returns empirical estimates of every analytic quantity of the model:

    1) Per slot: in state 0 a new primary packet arrives with probability alpha; in state theta >= 1
       the primary transmits, failing with probability rho (secondary silent) or rho* (secondary
       transmitting). A failure before the last retransmission moves the chain to theta+1, any other
       outcome ends the packet and the next state is 1 with probability alpha, 0 otherwise

    2) The secondary transmits in state theta with probability kappa[theta] and succeeds with
       probability 1-nu when the primary is idle, 1-nu* when it is busy

    3) Error bars come from batch means over equal batches of the counted slots, slot outcomes
       are Markov-dependent so the i.i.d. standard error would be too small

    Each stochastic decision (arrival, primary failure, secondary action, secondary failure) has its
    own PCG64 stream spawned from the master seed, so runs that differ only in the policy stay paired.
"""

STREAMS = ("arrival", "primary_failure", "secondary_action", "secondary_failure")
TRACE_COLUMNS = ["slot", "state", "secondary_tx", "primary_success", "secondary_success"]


@dataclass(frozen=True)
class SimConfig:
    n_slots: int = DEFAULT_SLOTS
    seed: int = DEFAULT_SEED
    warmup_slots: int = DEFAULT_WARMUP_SLOTS

    def __post_init__(self):
        if self.n_slots < 1 or self.warmup_slots < 0:
            raise ConfigurationError("ERROR: n_slots must be >= 1 and warmup_slots >= 0. Check inputs!")
        if self.n_slots - self.warmup_slots < N_BATCHES:
            raise ConfigurationError(
                f"ERROR: need at least {N_BATCHES} slots after a warmup of {self.warmup_slots}. Check inputs!")

    @property
    def counted_slots(self):
        return self.n_slots - self.warmup_slots


@dataclass
class SimStats:
    w_p_hat: float
    w_s_hat: float
    fp_hat: float
    ntx_hat: float
    occupancy_hat: List[float]
    stderr: Dict[str, float]
    slots_counted: int
    seed: int
    prng: str = PRNG_NAME
    trace: Optional[pd.DataFrame] = field(default=None, repr=False)

    def to_dict(self):
        return {
            "w_p_hat": self.w_p_hat,
            "w_s_hat": self.w_s_hat,
            "fp_hat": self.fp_hat,
            "ntx_hat": self.ntx_hat,
            "occupancy_hat": list(self.occupancy_hat),
            "stderr": dict(self.stderr),
            "slots_counted": self.slots_counted,
            "seed": self.seed,
            "prng": self.prng,
        }

    """
        Largest gap between analytic metrics and the empirical estimates, in standard errors.
        A field estimated with zero spread counts as zero when it matches exactly and as infinite
        otherwise. The stationary distribution is compared state by state when given.
    """
    def max_deviation(self, metrics, steady_state=None):
        pairs = [
            ("w_p", metrics.w_p, self.w_p_hat),
            ("w_s", metrics.w_s, self.w_s_hat),
            ("fp", metrics.j_fp, self.fp_hat),
            ("ntx", metrics.j_ntx, self.ntx_hat),
        ]
        if steady_state is not None:
            pairs += [(f"pi_{theta}", value, self.occupancy_hat[theta])
                      for theta, value in enumerate(steady_state.as_array())]

        worst = 0.0
        for name, analytic, empirical in pairs:
            if np.isnan(empirical):
                continue
            gap = abs(analytic - empirical)
            se = self.stderr[name]
            if se > 0.0:
                worst = max(worst, gap / se)
            elif gap > 1e-12:
                return float("inf")
        return worst


# Mean of the whole run and batch-means standard error
def _batch_estimate(totals, counts):
    overall = totals.sum() / counts.sum() if counts.sum() > 0 else float("nan")
    valid = counts > 0
    if valid.sum() < 2:
        return float(overall), 0.0
    ratios = totals[valid] / counts[valid]
    return float(overall), float(np.std(ratios, ddof=1) / np.sqrt(valid.sum()))


class Simulator(ChainModel):
    def __init__(self, params):
        super().__init__(params)

    def _uniforms(self, config):
        children = np.random.SeedSequence(config.seed).spawn(len(STREAMS))
        return {name: np.random.Generator(np.random.PCG64(child)).random(config.n_slots)
                for name, child in zip(STREAMS, children)}

    def simulate(self, policy, config=None, trace=False):
        config = SimConfig() if config is None else config
        self._check_policy(policy)
        p = self.params
        T, alpha = p.t_max, p.alpha
        kappa = policy.to_list()
        ok_idle, ok_busy = 1.0 - p.nu, 1.0 - p.nu_star

        u = self._uniforms(config)
        u_arr, u_pf, u_act, u_sf = (u[name] for name in STREAMS)

        batch_size = config.counted_slots // N_BATCHES
        primary_ok = np.zeros(N_BATCHES)
        secondary_ok = np.zeros(N_BATCHES)
        completed = np.zeros(N_BATCHES)
        discarded = np.zeros(N_BATCHES)
        transmissions = np.zeros(N_BATCHES)
        visits = np.zeros((N_BATCHES, T + 1))
        slots = np.zeros(N_BATCHES)
        rows = [] if trace else None

        state = 0
        for k in range(config.n_slots):
            tx = u_act[k] < kappa[state]
            p_ok, done = False, False
            if state == 0:
                s_ok = tx and u_sf[k] < ok_idle
                next_state = 1 if u_arr[k] < alpha else 0
            else:
                p_ok = u_pf[k] >= (p.rho_star if tx else p.rho)
                s_ok = tx and u_sf[k] < ok_busy
                done = p_ok or state == T
                next_state = (1 if u_arr[k] < alpha else 0) if done else state + 1

            if k >= config.warmup_slots:
                b = min((k - config.warmup_slots) // batch_size, N_BATCHES - 1)
                slots[b] += 1
                visits[b, state] += 1
                primary_ok[b] += p_ok
                secondary_ok[b] += s_ok
                if state > 0 and done:
                    completed[b] += 1
                    discarded[b] += not p_ok
                    transmissions[b] += state
                if trace:
                    rows.append((k, state, bool(tx), bool(p_ok), bool(s_ok)))
            state = next_state

        w_p, w_p_se = _batch_estimate(primary_ok, slots)
        w_s, w_s_se = _batch_estimate(secondary_ok, slots)
        fp, fp_se = _batch_estimate(discarded, completed)
        ntx, ntx_se = _batch_estimate(transmissions, completed)
        occupancy, stderr = [], {"w_p": w_p_se, "w_s": w_s_se, "fp": fp_se, "ntx": ntx_se}
        for theta in range(T + 1):
            value, se = _batch_estimate(visits[:, theta], slots)
            occupancy.append(value)
            stderr[f"pi_{theta}"] = se

        logger.debug("simulated %d slots, %d packets completed", config.n_slots, int(completed.sum()))
        return SimStats(
            w_p_hat=w_p,
            w_s_hat=w_s,
            fp_hat=fp,
            ntx_hat=ntx,
            occupancy_hat=occupancy,
            stderr=stderr,
            slots_counted=config.counted_slots,
            seed=config.seed,
            trace=pd.DataFrame(rows, columns=TRACE_COLUMNS) if trace else None,
        )
