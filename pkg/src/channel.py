# src/channel.py
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional

import numpy as np
import simpy
from dataclasses_json import config as json_config, dataclass_json

from .adversary import make_adversary
from .config import (
    BasicStrategy,
    BernoulliLoss,
    GilbertElliottLoss,
    OverlappedStrategy,
    Scenario,
    ScheduleLoss,
    TimingConfig,
    parse_strategy,
    strategy_label,
)
from .errors import InvalidArgument
from .receiver import (
    Accepted,
    DroppedRecoveryPending,
    RejectedIntegrity,
    RejectedOrigin,
    RejectedReplay,
    apply_recovery,
    init_receiver,
    on_timer_expiry,
    process,
)
from .report import render_fraction
from .transmitter import handle_recovery_request, init_transmitter
from .wire import SC_KEY_BYTES, LinkInfo, encode_frame

logger = logging.getLogger(__name__)


# -------------------
# Loss processes
# -------------------

class BernoulliChannel:
    """Independent losses with probability p"""

    def __init__(self, rng: np.random.Generator, p: float):
        self.rng = rng
        self.p = p

    def drop(self, ordinal: int) -> bool:
        return bool(self.rng.random() < self.p)


class GilbertElliottChannel:
    """
    Two-state Markov channel.
    state=0: Good; state=1: Bad
    - e_g / e_b: loss probability in Good / Bad
    - p_gb: P(Good->Bad), p_bg: P(Bad->Good)
    """

    def __init__(self, rng: np.random.Generator, p_gb: float, p_bg: float, e_g: float, e_b: float, init_state: int = 0):
        self.rng = rng
        self.p_gb = p_gb
        self.p_bg = p_bg
        self.e_g = e_g
        self.e_b = e_b
        self.state = init_state

    def step(self) -> None:
        if self.state == 0:
            if self.rng.random() < self.p_gb:
                self.state = 1
        elif self.rng.random() < self.p_bg:
            self.state = 0

    def drop(self, ordinal: int) -> bool:
        p = self.e_g if self.state == 0 else self.e_b
        lost = bool(self.rng.random() < p)
        self.step()
        return lost


class ScheduledChannel:
    """Drops exactly the listed frame ordinals"""

    def __init__(self, drops):
        self.drops = frozenset(drops)

    def drop(self, ordinal: int) -> bool:
        return ordinal in self.drops


def make_loss_process(model, rng: np.random.Generator):
    if isinstance(model, BernoulliLoss):
        return BernoulliChannel(rng, model.p)
    if isinstance(model, GilbertElliottLoss):
        return GilbertElliottChannel(rng, model.p_gb, model.p_bg, model.e_g, model.e_b)
    if isinstance(model, ScheduleLoss):
        return ScheduledChannel(model.drop_set)
    raise InvalidArgument(f"unknown loss model: {model!r}")


# -------------------
# Metrics
# -------------------

@dataclass_json
@dataclass
class Metrics:
    scenario: str = ""
    strategy: str = ""
    frames_sent: int = 0
    frames_delivered: int = 0
    frames_lost: int = 0
    forged_injected: int = 0
    frames_processed: int = 0
    accepted: int = 0
    rejected_origin: int = 0
    rejected_integrity: int = 0
    rejected_replay: int = 0
    dropped_recovery: int = 0
    false_negatives: int = 0
    false_positives: int = 0
    recoveries: int = 0
    recovery_downtime_us: int = 0
    first_recovery_us: Optional[int] = None
    keys_sent: int = 0
    measured_eta_kt: Fraction = field(default=Fraction(0), metadata=json_config(encoder=render_fraction))
    max_survived_burst: int = 0
    duration_us: int = 0


# -------------------
# Simulation
# -------------------

class BusSimulation:
    """
    One SC on a multidrop bus: transmitter, loss process, optional attacker
    and one receiver, driven by a simpy environment in microseconds.
    """

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.strategy = scenario.strategy
        self.timing = scenario.timing
        self.env = simpy.Environment()

        key_seq, tx_seq, loss_seq, arrival_seq, adv_seq = np.random.SeedSequence(scenario.seed).spawn(5)
        self.sc_key = np.random.default_rng(key_seq).bytes(SC_KEY_BYTES)
        self.tx, snapshot = init_transmitter(
            self.strategy, tx_seq, LinkInfo(sc_id=scenario.sc_id, src_id=scenario.src_id)
        )
        self.rx = init_receiver(
            snapshot,
            self.sc_key,
            self.strategy.hash,
            self.timing,
            backtrack_cap=scenario.backtrack_cap,
            chain_n=self.strategy.n,
        )
        self.loss = make_loss_process(scenario.loss, np.random.default_rng(loss_seq))
        self.arrival_rng = np.random.default_rng(arrival_seq)
        self.adversary = None
        if scenario.adversary is not None:
            self.adversary = make_adversary(scenario.adversary, scenario, self.sc_key, np.random.default_rng(adv_seq))

        self.metrics = Metrics(scenario=scenario.name, strategy=strategy_label(self.strategy))
        self._burst = 0

    def _message(self, ordinal: int) -> bytes:
        size = self.scenario.message_bytes
        return (ordinal % (1 << (8 * size))).to_bytes(size, "big") if size else b""

    def _gap(self) -> int:
        if self.timing.arrival == "sporadic":
            return max(1, int(round(self.arrival_rng.exponential(self.timing.period_us))))
        return self.timing.period_us

    def _deliver(self, data: bytes, licit: bool):
        m = self.metrics
        armed_before = self.rx.timeout
        outcome = process(self.rx, data, self.env.now)
        m.frames_processed += 1
        if isinstance(outcome, Accepted):
            m.accepted += 1
            if not licit:
                m.false_positives += 1
                logger.warning(f"Forged frame accepted at {self.env.now}us")
        else:
            if isinstance(outcome, RejectedOrigin):
                m.rejected_origin += 1
            elif isinstance(outcome, RejectedIntegrity):
                m.rejected_integrity += 1
            elif isinstance(outcome, RejectedReplay):
                m.rejected_replay += 1
            elif isinstance(outcome, DroppedRecoveryPending):
                m.dropped_recovery += 1
            if licit:
                m.false_negatives += 1
        if self.rx.timeout is not None and self.rx.timeout != armed_before:
            self.env.process(self._watchdog(self.rx.timeout))
        logger.debug(f"{self.env.now}us {'licit' if licit else 'forged'}: {type(outcome).__name__}")
        return outcome

    def _bus(self):
        m = self.metrics
        for ordinal in range(1, self.scenario.frame_count + 1):
            frame = self.tx.emit(self._message(ordinal))
            data = encode_frame(frame, self.sc_key)
            m.frames_sent += 1
            if self.loss.drop(ordinal):
                m.frames_lost += 1
                self._burst += 1
            else:
                m.frames_delivered += 1
                outcome = self._deliver(data, licit=True)
                if isinstance(outcome, Accepted) and self._burst:
                    m.max_survived_burst = max(m.max_survived_burst, self._burst)
                self._burst = 0
            if self.adversary is not None:
                for forged in self.adversary.observe(frame):
                    m.forged_injected += 1
                    self._deliver(forged, licit=False)
            m.duration_us = self.env.now
            if ordinal < self.scenario.frame_count:
                yield self.env.timeout(self._gap())

    def _attacker(self):
        interval = self.adversary.interval_us
        yield self.env.timeout(max(1, interval // 2))
        while True:
            forged = self.adversary.next_forgery()
            if forged is not None:
                self.metrics.forged_injected += 1
                self._deliver(forged, licit=False)
            yield self.env.timeout(interval)

    def _watchdog(self, deadline: int):
        yield self.env.timeout(deadline - self.env.now)
        # Frames arriving at the deadline are handled first
        if on_timer_expiry(self.rx, self.env.now) is not None:
            self.metrics.recoveries += 1
            if self.metrics.first_recovery_us is None:
                self.metrics.first_recovery_us = self.env.now
            self.env.process(self._recovery())

    def _recovery(self):
        requested = self.env.now
        yield self.env.timeout(self.timing.recovery_latency_us)
        apply_recovery(self.rx, handle_recovery_request(self.tx))
        self.metrics.recovery_downtime_us += self.env.now - requested
        logger.info(f"SC recovered at {self.env.now}us after {self.env.now - requested}us")

    def run(self) -> Metrics:
        bus = self.env.process(self._bus())
        if self.adversary is not None and self.adversary.interval_us:
            self.env.process(self._attacker())
        self.env.run(until=bus)
        m = self.metrics
        m.keys_sent = self.tx.keys_sent
        m.measured_eta_kt = Fraction(m.frames_sent, m.keys_sent) if m.keys_sent else Fraction(0)
        logger.info(
            f"Scenario '{self.scenario.name}' done: {m.frames_sent} frames, "
            f"{m.false_negatives} false negatives, {m.recoveries} recoveries"
        )
        return m


def run(scenario: Scenario) -> Metrics:
    if not isinstance(scenario, Scenario):
        raise InvalidArgument("run() expects a Scenario")
    return BusSimulation(scenario).run()


# -------------------
# Burst tolerance
# -------------------

def max_tolerated_burst(config) -> int:
    """
    Longest burst survived from every start position. A single chain
    cannot lose its junction frame and overlap needs one of its Q J-frames.
    Dual chains survive up to a half; with sparse start-up keys the frames
    before the first one in a half carry only the settled chain, so the
    burst must also leave one start-up key of the previous half.
    """
    config = parse_strategy(config)
    if isinstance(config, BasicStrategy):
        return 0
    if isinstance(config, OverlappedStrategy):
        return config.q - 1
    if config.spacing == 1:
        return config.half_length
    return config.half_length - config.spacing


def best_case_burst(config) -> int:
    """Longest burst survived from the most favourable start position"""
    config = parse_strategy(config)
    if isinstance(config, (BasicStrategy, OverlappedStrategy)):
        return config.n - config.q
    if config.spacing == 1:
        return 2 * config.half_length - 1
    return 2 * config.half_length - config.spacing - 1


@dataclass_json
@dataclass(frozen=True)
class BurstResult:
    start: int
    length: int
    survived: bool


def _burst_scenario(config, start: int, length: int, frame_count: int) -> Scenario:
    return Scenario(
        name=f"burst-{start}-{length}",
        strategy=config,
        loss=ScheduleLoss(drops=list(range(start, start + length))),
        frame_count=frame_count,
        timing=TimingConfig(timeout_us=config.period_frames * TimingConfig().period_us),
        message_bytes=0,
    )


def _run_burst(config, start: int, length: int, horizon: int) -> BurstResult:
    frame_count = max(horizon, start + length + config.period_frames)
    m = run(_burst_scenario(config, start, length, frame_count))
    return BurstResult(start=start, length=length, survived=m.recoveries == 0 and m.false_negatives == 0)


def burst_sweep(config, horizon: Optional[int] = None, workers: int = 1) -> List[BurstResult]:
    """
    Every burst start within the second period (the first one is warm-up)
    and every length up to one period, each run as its own scenario.
    Rows come back ordered by (start, length) whatever the worker count.
    """
    config = parse_strategy(config)
    period = config.period_frames
    horizon = horizon or 3 * period
    if horizon < 2 * period:
        raise InvalidArgument(f"horizon {horizon} is shorter than two periods ({2 * period})")
    tasks = [(start, length) for start in range(period + 1, 2 * period + 1) for length in range(1, period + 1)]
    logger.info(f"Burst sweep over {strategy_label(config)}: {len(tasks)} scenarios")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            return list(executor.map(lambda t: _run_burst(config, t[0], t[1], horizon), tasks))
    return [_run_burst(config, start, length, horizon) for start, length in tasks]


def summarize_sweep(rows: List[BurstResult]) -> Dict[str, int]:
    """Per start, the longest burst such that every shorter one also survived; then min and max over starts"""
    by_start: Dict[int, List[BurstResult]] = {}
    for row in rows:
        by_start.setdefault(row.start, []).append(row)
    tolerated = []
    for start_rows in by_start.values():
        best = 0
        for row in sorted(start_rows, key=lambda r: r.length):
            if not row.survived:
                break
            best = row.length
        tolerated.append(best)
    return {"worst_case": min(tolerated), "best_case": max(tolerated)}
