"""Commit-reveal random-bit contract: request lifecycle plus escrow accounting.

One request walks through six steps: a client escrows a fee and names a
deadline; anyone registers with a deposit and a bit commitment while the
registration window is open; registrants reveal their preimages until the
deadline; after the deadline revealers reclaim deposits and claim rewards
(split by the parity game in `randbit.game`); finally the client settles the
request and receives Success, Penalty or Failure.

Money is integer base units moving between account balances and per-request
escrow inside a closed `Ledger`; nothing is minted or burned after genesis
funding, so the total supply is a global invariant.

Window semantics (ends are part of the windows unless stated otherwise):

    registration: created_at <= now <= created_at + t_reg
    reveal:       created_at + t_reg < now <= deadline
    claims and settlement: now > deadline strictly

The engine is a single-writer state machine: all mutation goes through one
logical owner (in the chain simulator, the block application loop), with
`now` always supplied by the caller.
"""

from __future__ import annotations

import functools
import itertools
import operator
from dataclasses import dataclass, field
from typing import Optional, Union

from . import commitment as cmt
from . import game


class ProtocolError(Exception):
    """Base class for contract-level rejections."""


class DeadlineTooClose(ProtocolError):
    pass


class InsufficientFunds(ProtocolError):
    pass


class UnknownRequest(ProtocolError):
    pass


class RegistrationClosed(ProtocolError):
    pass


class WrongDeposit(ProtocolError):
    pass


class OutsideRevealWindow(ProtocolError):
    pass


class UnknownParticipant(ProtocolError):
    pass


class AlreadyRevealed(ProtocolError):
    pass


class BadPreimage(ProtocolError):
    pass


class NotRevealed(ProtocolError):
    pass


class AlreadyClaimed(ProtocolError):
    pass


class TooEarly(ProtocolError):
    pass


class NotClient(ProtocolError):
    pass


def _check_amount(name: str, value) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or value < 0:
        raise ValueError(f"{name} must be a non-negative integer, got {value!r}")
    return value


class Ledger:
    """Integer account balances plus per-request escrow pots.

    The only way money enters the system is `fund` (genesis); every other
    operation moves existing units, so sum(balances) + sum(escrow) is
    constant afterwards.
    """

    def __init__(self):
        self.balances: dict[str, int] = {}
        self.escrow: dict[int, int] = {}

    def fund(self, account: str, amount: int) -> None:
        _check_amount("amount", amount)
        self.balances[account] = self.balances.get(account, 0) + amount

    def balance(self, account: str) -> int:
        return self.balances.get(account, 0)

    def escrow_of(self, request_id: int) -> int:
        return self.escrow.get(request_id, 0)

    def transfer(self, src: str, dst: str, amount: int) -> None:
        _check_amount("amount", amount)
        if self.balance(src) < amount:
            raise InsufficientFunds(f"{src} holds {self.balance(src)} < {amount}")
        self.balances[src] = self.balance(src) - amount
        self.balances[dst] = self.balance(dst) + amount

    def to_escrow(self, account: str, request_id: int, amount: int) -> None:
        _check_amount("amount", amount)
        if self.balance(account) < amount:
            raise InsufficientFunds(f"{account} holds {self.balance(account)} < {amount}")
        self.balances[account] = self.balance(account) - amount
        self.escrow[request_id] = self.escrow_of(request_id) + amount

    def from_escrow(self, request_id: int, account: str, amount: int) -> None:
        _check_amount("amount", amount)
        if self.escrow_of(request_id) < amount:
            # Escrow can only underflow through an engine bug, never through
            # caller input, so this is not a ProtocolError.
            raise RuntimeError(
                f"escrow underflow for request {request_id}: "
                f"{self.escrow_of(request_id)} < {amount}"
            )
        self.escrow[request_id] = self.escrow_of(request_id) - amount
        self.balances[account] = self.balance(account) + amount

    def total_supply(self) -> int:
        return sum(self.balances.values()) + sum(self.escrow.values())


@dataclass(frozen=True)
class Config:
    """Protocol timing in milliseconds. A reveal window must exist."""

    t_min: int
    t_reg: int
    nonce_len: int = cmt.NONCE_LENGTH

    def __post_init__(self):
        if not 0 < self.t_reg < self.t_min:
            raise ValueError(
                f"need t_min > t_reg > 0, got t_min={self.t_min} t_reg={self.t_reg}"
            )


@dataclass(frozen=True)
class Success:
    bit: int


@dataclass(frozen=True)
class Penalty:
    bit: int
    compensation: int


@dataclass(frozen=True)
class Failure:
    refund: int
    confiscated: int = 0


Settlement = Union[Success, Penalty, Failure]


@dataclass
class Registrant:
    account: str
    number: int
    commitment: bytes
    deposited: int
    revealed_bit: Optional[int] = None
    deposit_returned: bool = False
    reward_claimed: bool = False

    @property
    def strategy(self) -> Optional[int]:
        if self.revealed_bit is None:
            return None
        return game.strategy_for_bit(self.number, self.revealed_bit)


@dataclass
class Request:
    id: int
    client: str
    fee: int
    deadline: int
    value_bound: int
    created_at: int
    registration_close: int
    registrants: list[Registrant] = field(default_factory=list)
    settlement: Optional[Settlement] = None
    settled_at: Optional[int] = None
    dust: Optional[int] = None
    _tally: list[int] = field(default_factory=lambda: [0, 0, 0, 0])

    @property
    def counts(self) -> game.StrategyCounts:
        return game.StrategyCounts(*self._tally)

    def derive_counts(self) -> game.StrategyCounts:
        """Recompute the tallies from reveal states; must equal `counts`."""
        return game.StrategyCounts.from_strategies(
            r.strategy for r in self.registrants if r.revealed_bit is not None
        )

    @property
    def revealed(self) -> list[Registrant]:
        return [r for r in self.registrants if r.revealed_bit is not None]


class RandomBitContract:
    """The request/register/reveal/claim/settle state machine.

    All operations validate against the supplied `now` and either mutate
    state and append a `ProtocolEvent`, or raise a `ProtocolError` leaving
    state untouched.
    """

    def __init__(self, config: Config, ledger: Ledger):
        self.config = config
        self.ledger = ledger
        self.requests: dict[int, Request] = {}
        self.events: list[ProtocolEvent] = []
        self._ids = itertools.count(0)

    # -- step 1: request ---------------------------------------------------

    def request_random_bit(
        self, client: str, fee: int, deadline: int, value_bound: int, now: int
    ) -> int:
        _check_amount("fee", fee)
        _check_amount("value_bound", value_bound)
        if deadline - now < self.config.t_min:
            raise DeadlineTooClose(
                f"deadline leaves {deadline - now} ms < t_min={self.config.t_min}"
            )
        request_id = next(self._ids)
        self.ledger.to_escrow(client, request_id, fee)
        self.requests[request_id] = Request(
            id=request_id,
            client=client,
            fee=fee,
            deadline=deadline,
            value_bound=value_bound,
            created_at=now,
            registration_close=now + self.config.t_reg,
        )
        self._log(now, request_id, "request", fee, client)
        return request_id

    def request_random_word(
        self, client: str, bits: int, fee: int, deadline: int, value_bound: int, now: int
    ) -> list[int]:
        """Open `bits` independent requests; the client assembles the word.

        The fee splits evenly with the floor remainder going to the first
        instance. All-or-nothing: preconditions are checked before any
        request is created.
        """
        if not isinstance(bits, int) or bits < 1:
            raise ValueError(f"bits must be a positive integer, got {bits!r}")
        _check_amount("fee", fee)
        if deadline - now < self.config.t_min:
            raise DeadlineTooClose(
                f"deadline leaves {deadline - now} ms < t_min={self.config.t_min}"
            )
        if self.ledger.balance(client) < fee:
            raise InsufficientFunds(f"{client} holds {self.ledger.balance(client)} < {fee}")
        base, remainder = divmod(fee, bits)
        fees = [base + remainder] + [base] * (bits - 1)
        return [
            self.request_random_bit(client, f, deadline, value_bound, now) for f in fees
        ]

    # -- step 2: registration ----------------------------------------------

    def register(
        self, request_id: int, account: str, deposit: int, digest: bytes, now: int
    ) -> int:
        req = self._request(request_id)
        if req.settlement is not None or now > req.registration_close:
            raise RegistrationClosed(f"request {request_id} closed at {req.registration_close}")
        if deposit != req.value_bound:
            raise WrongDeposit(f"deposit must be exactly {req.value_bound}, got {deposit}")
        if not isinstance(digest, (bytes, bytearray)) or len(digest) != cmt.DIGEST_LENGTH:
            raise ValueError(f"commitment must be {cmt.DIGEST_LENGTH} bytes")
        self.ledger.to_escrow(account, request_id, deposit)
        number = len(req.registrants) + 1
        req.registrants.append(
            Registrant(account=account, number=number, commitment=bytes(digest), deposited=deposit)
        )
        self._log(now, request_id, "register", deposit, account, detail=f"number={number}")
        return number

    # -- step 3: reveal ------------------------------------------------------

    def reveal(self, request_id: int, participant: int, bit: int, nonce: bytes, now: int) -> None:
        req = self._request(request_id)
        if not req.registration_close < now <= req.deadline:
            raise OutsideRevealWindow(
                f"reveals accepted in ({req.registration_close}, {req.deadline}], now={now}"
            )
        if not 1 <= participant <= len(req.registrants):
            raise UnknownParticipant(f"no participant {participant} on request {request_id}")
        reg = req.registrants[participant - 1]
        if reg.revealed_bit is not None:
            raise AlreadyRevealed(f"participant {participant} already revealed")
        if not cmt.verify_reveal(bit, nonce, participant, request_id, reg.commitment):
            raise BadPreimage(f"preimage does not match commitment of participant {participant}")
        reg.revealed_bit = bit
        req._tally[game.strategy_for_bit(participant, bit)] += 1
        self._log(now, request_id, "reveal", 0, reg.account, detail=f"number={participant}")

    # -- step 4: deposits ---------------------------------------------------

    def return_deposit(self, request_id: int, participant: int, now: int) -> int:
        req = self._request(request_id)
        reg = self._participant(req, participant)
        if now <= req.deadline:
            raise TooEarly(f"deposits return strictly after {req.deadline}")
        if reg.revealed_bit is None:
            raise NotRevealed(f"participant {participant} never revealed")
        if reg.deposit_returned:
            raise AlreadyClaimed(f"participant {participant} already took the deposit back")
        reg.deposit_returned = True
        self.ledger.from_escrow(request_id, reg.account, reg.deposited)
        self._log(now, request_id, "deposit-returned", reg.deposited, reg.account)
        return reg.deposited

    # -- step 5: rewards ----------------------------------------------------

    def request_reward(self, request_id: int, participant: int, now: int) -> int:
        req = self._request(request_id)
        reg = self._participant(req, participant)
        if now <= req.deadline:
            raise TooEarly(f"rewards claimable strictly after {req.deadline}")
        if reg.revealed_bit is None:
            raise NotRevealed(f"participant {participant} never revealed")
        if reg.reward_claimed:
            raise AlreadyClaimed(f"participant {participant} already claimed the reward")
        share = self._shares(req)[participant]
        reg.reward_claimed = True
        self.ledger.from_escrow(request_id, reg.account, share)
        self._log(now, request_id, "reward-paid", share, reg.account)
        return share

    # -- step 6: output -----------------------------------------------------

    def get_output(self, request_id: int, caller: str, now: int) -> Settlement:
        req = self._request(request_id)
        if caller != req.client:
            raise NotClient(f"only {req.client} may settle request {request_id}")
        if now <= req.deadline:
            raise TooEarly(f"output available strictly after {req.deadline}")
        if req.settlement is not None:
            return req.settlement

        revealed = req.revealed
        if not revealed:
            # Nobody revealed (maybe nobody registered). The fee was never
            # spent on rewards, so it comes back in full; deposits of silent
            # registrants are confiscated and forwarded to the client too.
            confiscated = sum(r.deposited for r in req.registrants)
            self.ledger.from_escrow(request_id, req.client, req.fee + confiscated)
            settlement: Settlement = Failure(refund=req.fee, confiscated=confiscated)
            kind = "settled-failure"
            paid = req.fee + confiscated
        else:
            bit = functools.reduce(operator.xor, (r.revealed_bit for r in revealed))
            shares = self._shares(req)
            dust = req.fee - sum(shares.values())
            req.dust = dust
            if len(revealed) == len(req.registrants):
                self.ledger.from_escrow(request_id, req.client, dust)
                settlement = Success(bit=bit)
                kind = "settled-success"
                paid = dust
            else:
                confiscated = sum(
                    r.deposited for r in req.registrants if r.revealed_bit is None
                )
                compensation = confiscated + dust
                self.ledger.from_escrow(request_id, req.client, compensation)
                settlement = Penalty(bit=bit, compensation=compensation)
                kind = "settled-penalty"
                paid = compensation
        req.settlement = settlement
        req.settled_at = now
        self._log(now, request_id, kind, paid, req.client)
        return settlement

    # -- views ----------------------------------------------------------------

    def snapshot(self) -> dict:
        """JSON-ready view of the whole engine state."""
        return {
            "balances": dict(self.ledger.balances),
            "escrow": {str(k): v for k, v in self.ledger.escrow.items()},
            "totalSupply": self.ledger.total_supply(),
            "requests": [self._request_view(r) for r in self.requests.values()],
        }

    def _request_view(self, req: Request) -> dict:
        counts = req.counts
        return {
            "id": req.id,
            "client": req.client,
            "fee": req.fee,
            "deadline": req.deadline,
            "valueBound": req.value_bound,
            "createdAt": req.created_at,
            "registrationClose": req.registration_close,
            "registrants": [
                {
                    "account": r.account,
                    "number": r.number,
                    "commitment": r.commitment.hex(),
                    "deposited": r.deposited,
                    "revealState": (
                        {"state": "pending"}
                        if r.revealed_bit is None
                        else {"state": "revealed", "bit": r.revealed_bit}
                    ),
                }
                for r in req.registrants
            ],
            "counts": {
                "n0": counts.n0,
                "n1": counts.n1,
                "n2": counts.n2,
                "n3": counts.n3,
                "nPrime": counts.n_prime,
            },
            "settlement": settlement_view(req.settlement),
            "settledAt": req.settled_at,
            "dust": req.dust,
            "claims": {
                "depositReturned": [r.number for r in req.registrants if r.deposit_returned],
                "rewardClaimed": [r.number for r in req.registrants if r.reward_claimed],
            },
        }

    # -- internals -------------------------------------------------------------

    def _request(self, request_id: int) -> Request:
        try:
            return self.requests[request_id]
        except KeyError:
            raise UnknownRequest(f"no request {request_id}") from None

    @staticmethod
    def _participant(req: Request, participant: int) -> Registrant:
        if not 1 <= participant <= len(req.registrants):
            raise UnknownParticipant(f"no participant {participant} on request {req.id}")
        return req.registrants[participant - 1]

    def _shares(self, req: Request) -> dict[int, int]:
        """Reward per revealer. Stable once the reveal window has closed."""
        strategies = {r.number: r.strategy for r in req.revealed}
        shares, _ = game.reward_shares(req.counts, strategies, req.fee)
        return shares

    def _log(self, now, request_id, kind, amount, account, detail=""):
        self.events.append(ProtocolEvent(now, request_id, kind, amount, account, detail))


def settlement_view(settlement: Optional[Settlement]) -> Optional[dict]:
    """JSON-ready view of a settlement value."""
    if settlement is None:
        return None
    if isinstance(settlement, Success):
        return {"kind": "success", "bit": settlement.bit}
    if isinstance(settlement, Penalty):
        return {
            "kind": "penalty",
            "bit": settlement.bit,
            "compensation": settlement.compensation,
        }
    return {
        "kind": "failure",
        "refund": settlement.refund,
        "confiscated": settlement.confiscated,
    }


@dataclass(frozen=True)
class ProtocolEvent:
    time: int
    request_id: int
    kind: str
    amount: int
    account: Optional[str] = None
    detail: str = ""
