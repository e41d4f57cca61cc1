"""Simulated half-duplex acoustic medium.

Models the four hazards that shape the link budget: serialization delay at
a fixed bitrate, propagation delay at a fixed sound speed, a
distance-dependent Bernoulli loss draw, and receiver-side blanking
(overlapping arrivals collide and kill each other; a modem cannot hear
while it transmits). All times are integer milliseconds and all loss draws
come from one seeded generator in a fixed order (ascending receiver id per
transmission), so a run replays exactly for a given seed.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .geo import EnuPoint

DROP_LOSS = "loss"
DROP_COLLISION = "collision"
DROP_RANGE = "range"
DROP_HALF_DUPLEX = "half-duplex"

BROADCAST_ADDR = 255


@dataclass(frozen=True)
class ChannelParams:
    sound_speed_mps: float = 1500.0
    bitrate_bps: int = 13_900
    max_range_m: float = 3500.0
    base_loss: float = 0.02
    loss_exponent: float = 4.0

    def __post_init__(self) -> None:
        if self.sound_speed_mps <= 0 or self.bitrate_bps <= 0 or self.max_range_m <= 0:
            raise ValueError("sound speed, bitrate, and range must be positive")
        if not 0.0 <= self.base_loss < 1.0:
            raise ValueError("base_loss must lie in [0, 1)")
        if self.loss_exponent < 1.0:
            raise ValueError("loss_exponent must be >= 1")


def delivery_probability(d_m: float, params: ChannelParams) -> float:
    """Chance a frame at distance d survives the loss draw."""
    if d_m < 0:
        raise ValueError("distance must be non-negative")
    if d_m > params.max_range_m:
        return 0.0
    loss = params.base_loss + (1.0 - params.base_loss) * (
        d_m / params.max_range_m
    ) ** params.loss_exponent
    return 1.0 - min(1.0, loss)


@dataclass
class ModemEndpoint:
    id: int
    pos: EnuPoint
    busy_until_ms: int = 0
    # closed-open [start, end) intervals of own transmissions, for half-duplex checks
    tx_intervals: list[tuple[int, int]] = field(default_factory=list)


@dataclass
class _Arrival:
    receiver_id: int
    data: bytes
    src_id: int
    dst: int
    tx_start_ms: int
    arrival_start_ms: int
    arrival_end_ms: int
    loss_pass: bool
    collided: bool = False
    order: int = 0


@dataclass(frozen=True)
class TxRecord:
    src_id: int
    tx_start_ms: int
    tx_end_ms: int
    data: bytes


@dataclass(frozen=True)
class Delivery:
    receiver_id: int
    data: bytes
    src_id: int
    tx_start_ms: int
    arrival_start_ms: int
    arrival_end_ms: int


@dataclass(frozen=True)
class DropRecord:
    receiver_id: int
    cause: str
    src_id: int
    data: bytes
    t_ms: int


class ChannelError(ValueError):
    pass


class AcousticChannel:
    """Single shared medium; mutate only through transmit/poll (one writer)."""

    def __init__(self, params: ChannelParams, seed: int = 0):
        self.params = params
        self.endpoints: dict[int, ModemEndpoint] = {}
        self._rng = random.Random(seed)
        self._arrivals: list[_Arrival] = []
        self._drops: list[DropRecord] = []
        self._order = 0

    def register(self, endpoint_id: int, pos: EnuPoint) -> None:
        if endpoint_id in self.endpoints:
            raise ChannelError(f"endpoint {endpoint_id} already registered")
        self.endpoints[endpoint_id] = ModemEndpoint(endpoint_id, pos)

    def set_position(self, endpoint_id: int, pos: EnuPoint) -> None:
        self._endpoint(endpoint_id).pos = pos

    def _endpoint(self, endpoint_id: int) -> ModemEndpoint:
        try:
            return self.endpoints[endpoint_id]
        except KeyError:
            raise ChannelError(f"endpoint {endpoint_id} not registered") from None

    def tx_duration_ms(self, n_bytes: int) -> int:
        return math.ceil(n_bytes * 8 * 1000 / self.params.bitrate_bps)

    def transmit(self, data: bytes, src_id: int, now_ms: int) -> TxRecord:
        """Schedule a transmission; queues behind the sender's earlier traffic."""
        src = self._endpoint(src_id)
        start = max(now_ms, src.busy_until_ms)
        end = start + self.tx_duration_ms(len(data))
        src.busy_until_ms = end
        src.tx_intervals.append((start, end))
        dst = data[3] if len(data) > 3 else BROADCAST_ADDR
        for rx_id in sorted(self.endpoints):
            if rx_id == src_id:
                continue
            rx = self.endpoints[rx_id]
            d = src.pos.distance_to(rx.pos)
            if d > self.params.max_range_m:
                self._drops.append(DropRecord(rx_id, DROP_RANGE, src_id, data, start))
                continue
            delay = round(d / self.params.sound_speed_mps * 1000.0)
            arrival = _Arrival(
                receiver_id=rx_id,
                data=data,
                src_id=src_id,
                dst=dst,
                tx_start_ms=start,
                arrival_start_ms=start + delay,
                arrival_end_ms=end + delay,
                loss_pass=self._rng.random() < delivery_probability(d, self.params),
                order=self._order,
            )
            self._order += 1
            for other in self._arrivals:
                if other.receiver_id == rx_id and _overlaps(
                    arrival.arrival_start_ms,
                    arrival.arrival_end_ms,
                    other.arrival_start_ms,
                    other.arrival_end_ms,
                ):
                    arrival.collided = True
                    other.collided = True
            self._arrivals.append(arrival)
        return TxRecord(src_id, start, end, data)

    def poll_deliveries(self, now_ms: int) -> list[Delivery]:
        """Frames fully arrived by now that survived loss, collision, and blanking."""
        done = [a for a in self._arrivals if a.arrival_end_ms <= now_ms]
        self._arrivals = [a for a in self._arrivals if a.arrival_end_ms > now_ms]
        deliveries: list[Delivery] = []
        for a in sorted(done, key=lambda a: (a.arrival_end_ms, a.receiver_id, a.order)):
            if not a.loss_pass:
                self._drops.append(
                    DropRecord(a.receiver_id, DROP_LOSS, a.src_id, a.data, a.arrival_end_ms)
                )
                continue
            if a.collided:
                self._drops.append(
                    DropRecord(a.receiver_id, DROP_COLLISION, a.src_id, a.data, a.arrival_end_ms)
                )
                continue
            rx = self.endpoints[a.receiver_id]
            if any(
                _overlaps(a.arrival_start_ms, a.arrival_end_ms, s, e)
                for s, e in rx.tx_intervals
            ):
                self._drops.append(
                    DropRecord(
                        a.receiver_id, DROP_HALF_DUPLEX, a.src_id, a.data, a.arrival_end_ms
                    )
                )
                continue
            if a.dst not in (a.receiver_id, BROADCAST_ADDR):
                continue  # energy heard, frame not addressed here
            deliveries.append(
                Delivery(
                    a.receiver_id,
                    a.data,
                    a.src_id,
                    a.tx_start_ms,
                    a.arrival_start_ms,
                    a.arrival_end_ms,
                )
            )
        self._prune_tx_intervals(now_ms)
        return deliveries

    def drain_drops(self) -> list[DropRecord]:
        drops, self._drops = self._drops, []
        return drops

    def _prune_tx_intervals(self, now_ms: int) -> None:
        # anything older than the worst-case flight time can no longer matter
        horizon = now_ms - math.ceil(
            self.params.max_range_m / self.params.sound_speed_mps * 1000.0
        ) - 60_000
        for ep in self.endpoints.values():
            ep.tx_intervals = [(s, e) for s, e in ep.tx_intervals if e >= horizon]


def _overlaps(s1: int, e1: int, s2: int, e2: int) -> bool:
    return s1 < e2 and s2 < e1
