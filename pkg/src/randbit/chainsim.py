"""Discrete-event proof-of-work chain carrying contract transactions.

One canonical chain, no forks: each block arrives after an exponential delay
with mean t_gen, its miner is drawn in proportion to hash power (the
memoryless PoW abstraction), and the block takes everything from the mempool
except transactions the winning miner censors. Included transactions are
applied to the contract engine in order with the block timestamp as `now`;
contract rejections consume the transaction and are recorded, censored
transactions stay pending. Block capacity is unlimited and timestamps are
honest.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

from . import commitment as cmt
from .protocol import Config, Ledger, ProtocolError, RandomBitContract


@dataclass(frozen=True)
class Tx:
    """A contract call waiting for inclusion.

    kind is one of: request, request-word, register, reveal, return-deposit,
    claim-reward, get-output. `params` carries the call arguments; a request
    may give either an absolute `deadline` or a `deadline_offset` resolved
    against the including block's timestamp (the pattern a client contract
    would use to avoid inclusion-lag rejections).
    """

    kind: str
    sender: str
    params: dict


@dataclass
class MinerSpec:
    """A miner with a share of total hash power and an inclusion policy.

    `censors` is a predicate over transactions the miner refuses to include;
    None means honest.
    """

    id: str
    hash_power: Fraction
    censors: Optional[Callable[[Tx], bool]] = None

    def __post_init__(self):
        self.hash_power = as_fraction(self.hash_power)
        if not 0 < self.hash_power <= 1:
            raise ValueError(f"hash power must be in (0, 1], got {self.hash_power}")


def as_fraction(value) -> Fraction:
    """Exact Fraction from ints, strings like "0.6" or "1/3", or floats."""
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


def censor_kind(kind: str) -> Callable[[Tx], bool]:
    return lambda tx: tx.kind == kind


def censor_all(tx: Tx) -> bool:
    return True


@dataclass(frozen=True)
class SimParams:
    t_gen: int
    seed: int
    duration: int

    def __post_init__(self):
        if self.t_gen <= 0:
            raise ValueError(f"t_gen must be positive, got {self.t_gen}")


@dataclass(frozen=True)
class Block:
    height: int
    timestamp: int
    miner: str
    transactions: tuple[Tx, ...]


@dataclass(frozen=True)
class RejectedTx:
    time: int
    tx: Tx
    reason: str


class ChainSim:
    """Single-threaded event loop owning a contract engine."""

    def __init__(self, params: SimParams, miners: Sequence[MinerSpec], contract: RandomBitContract):
        if not miners:
            raise ValueError("need at least one miner")
        total = sum((m.hash_power for m in miners), Fraction(0))
        if total != 1:
            raise ValueError(f"miner hash powers must sum to exactly 1, got {total}")
        self.params = params
        self.miners = list(miners)
        self.contract = contract
        self.rng = random.Random(params.seed)
        self.now = 0
        self.mempool: list[Tx] = []
        self.chain: list[Block] = []
        self.rejected: list[RejectedTx] = []
        self._weights = [float(m.hash_power) for m in self.miners]

    def submit_tx(self, tx: Tx) -> None:
        self.mempool.append(tx)

    def next_block(self, incoming: Optional[Callable[[int], list[Tx]]] = None) -> Block:
        """Mine one block.

        `incoming(timestamp)` may hand over transactions that were broadcast
        between the previous block and this one; they join the mempool before
        inclusion, after anything already pending.
        """
        delay = max(1, round(self.rng.expovariate(1.0 / self.params.t_gen)))
        self.now += delay
        miner = self.rng.choices(self.miners, weights=self._weights)[0]
        if incoming is not None:
            self.mempool.extend(incoming(self.now))
        included: list[Tx] = []
        kept: list[Tx] = []
        for tx in self.mempool:
            if miner.censors is not None and miner.censors(tx):
                kept.append(tx)
            else:
                included.append(tx)
        self.mempool = kept
        for tx in included:
            try:
                self._apply(tx, self.now)
            except ProtocolError as err:
                # The contract ignores the call; the simulator keeps the reason.
                self.rejected.append(RejectedTx(self.now, tx, type(err).__name__))
        block = Block(
            height=len(self.chain),
            timestamp=self.now,
            miner=miner.id,
            transactions=tuple(included),
        )
        self.chain.append(block)
        return block

    def run(self, duration: Optional[int] = None,
            incoming: Optional[Callable[[int], list[Tx]]] = None,
            on_block: Optional[Callable[[Block], None]] = None) -> None:
        """Mine blocks until the clock passes `duration` (default: params)."""
        horizon = self.params.duration if duration is None else duration
        while self.now < horizon:
            block = self.next_block(incoming)
            if on_block is not None:
                on_block(block)

    def _apply(self, tx: Tx, now: int):
        e = self.contract
        p = tx.params
        if tx.kind == "request":
            deadline = p["deadline"] if "deadline" in p else now + p["deadline_offset"]
            return e.request_random_bit(tx.sender, p["fee"], deadline, p["value_bound"], now)
        if tx.kind == "request-word":
            deadline = p["deadline"] if "deadline" in p else now + p["deadline_offset"]
            return e.request_random_word(
                tx.sender, p["bits"], p["fee"], deadline, p["value_bound"], now
            )
        if tx.kind == "register":
            return e.register(p["request_id"], tx.sender, p["deposit"], p["commitment"], now)
        if tx.kind == "reveal":
            return e.reveal(p["request_id"], p["participant"], p["bit"], p["nonce"], now)
        if tx.kind == "return-deposit":
            return e.return_deposit(p["request_id"], p["participant"], now)
        if tx.kind == "claim-reward":
            return e.request_reward(p["request_id"], p["participant"], now)
        if tx.kind == "get-output":
            return e.get_output(p["request_id"], tx.sender, now)
        raise ValueError(f"unknown transaction kind {tx.kind!r}")


def censorship_trial(q, m: int, trials: int, seed: int) -> float:
    """Fraction of trials where a censoring miner keeps one reveal off-chain.

    Per trial a single registered participant has a pending reveal and
    exactly m blocks are mined; an adversary holding hash power q censors
    reveal transactions while the honest remainder includes everything. The
    reveal stays out only if the adversary mines all m blocks, so the rate
    converges to q**m.
    """
    q = as_fraction(q)
    if not 0 < q < 1:
        raise ValueError(f"adversary hash power must be in (0, 1), got {q}")
    if not isinstance(m, int) or m < 1:
        raise ValueError(f"window must be at least one block, got {m!r}")
    if trials < 1:
        raise ValueError("need at least one trial")

    master = random.Random(seed)
    withheld = 0
    for _ in range(trials):
        trial_seed = master.getrandbits(64)
        setup = random.Random(master.getrandbits(64))
        ledger = Ledger()
        ledger.fund("client", 0)
        ledger.fund("revealer", 1)
        engine = RandomBitContract(Config(t_min=2, t_reg=1), ledger)
        request_id = engine.request_random_bit("client", 0, 10**15, 1, now=0)
        bit = setup.getrandbits(1)
        nonce = setup.randbytes(cmt.NONCE_LENGTH)
        number = engine.register(
            request_id, "revealer", 1, cmt.commit(bit, nonce, 1, request_id), now=0
        )
        sim = ChainSim(
            SimParams(t_gen=1000, seed=trial_seed, duration=10**15),
            [
                MinerSpec("adversary", q, censors=censor_kind("reveal")),
                MinerSpec("honest", 1 - q),
            ],
            engine,
        )
        sim.submit_tx(
            Tx("reveal", "revealer", {
                "request_id": request_id, "participant": number, "bit": bit, "nonce": nonce,
            })
        )
        for _ in range(m):
            sim.next_block()
        if sim.mempool:
            withheld += 1
    return withheld / trials


def trace_rows(sim: ChainSim) -> list[dict]:
    """Flat trace: one row per block, per protocol event, per rejected call.

    Rows share a header; the `record` column tells them apart. Sorted by
    time with blocks first inside a tick, then events, then rejections.
    """
    rows = []
    for b in sim.chain:
        rows.append({
            "record": "block", "time": b.timestamp, "height": b.height,
            "miner": b.miner, "tx_count": len(b.transactions),
            "request_id": "", "event": "", "amount": "", "detail": "",
        })
    for e in sim.contract.events:
        rows.append({
            "record": "event", "time": e.time, "height": "", "miner": "",
            "tx_count": "", "request_id": e.request_id, "event": e.kind,
            "amount": e.amount, "detail": e.detail or (e.account or ""),
        })
    for r in sim.rejected:
        rows.append({
            "record": "rejected", "time": r.time, "height": "", "miner": "",
            "tx_count": "", "request_id": r.tx.params.get("request_id", ""),
            "event": r.tx.kind, "amount": "", "detail": r.reason,
        })
    priority = {"block": 0, "event": 1, "rejected": 2}
    rows.sort(key=lambda row: (row["time"], priority[row["record"]]))
    return rows


TRACE_FIELDS = [
    "record", "time", "height", "miner", "tx_count",
    "request_id", "event", "amount", "detail",
]
