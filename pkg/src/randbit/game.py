"""Zero-sum parity game that pays participants for being unpredictable.

Players are numbered from 1 in registration order. Even-numbered players pick
a strategy in {0, 2}, odd-numbered players in {1, 3}; a player holding bit b
maps it to 2*b (even) or 2*b + 1 (odd). Every pair of players with opposite
parity plays a cyclic minigame on Z/4: strategy x beats x - 1 (mod 4) for one
point, loses one point to x + 1, and ties everything else. A player's utility
is the sum of her minigame points, which makes the whole game zero-sum.

The uniform profile (every player flips a fair coin between her two legal
strategies) is the unique profile that no coalition of players can deviate
from to raise the coalition's *total* expected utility. The verifier below
checks the equilibrium side of that claim by exhaustive enumeration on small
player counts, and the deviation finder constructively falsifies any biased
profile.

All probabilities, expected utilities, and gains are `fractions.Fraction`.
"gain is exactly 0" is only a meaningful statement in exact arithmetic, so
floats are rejected throughout this module.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

STRATEGIES = (0, 1, 2, 3)

# Exhaustive coalition enumeration is exponential; past 8 players it stops
# being "sub-second laptop work".
MAX_EXHAUSTIVE_PLAYERS = 8


def legal_strategies(player: int) -> tuple[int, int]:
    """(lower, upper) strategy pair for a 1-based player number."""
    if player < 1:
        raise ValueError(f"player numbers start at 1, got {player}")
    low = player % 2
    return (low, low + 2)


def is_legal(player: int, strategy: int) -> bool:
    return strategy in STRATEGIES and strategy % 2 == player % 2


def strategy_for_bit(player: int, bit: int) -> int:
    """Map a committed bit to the strategy it represents for this player."""
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit}")
    return player % 2 + 2 * bit


def minigame_payoff(a: int, b: int) -> int:
    """Points strategy `a` scores against strategy `b` in one minigame.

    +1 if a == b + 1 (mod 4), -1 if a == b - 1 (mod 4), else 0. Antisymmetric
    by construction, and 0 whenever a and b share parity.
    """
    if a not in STRATEGIES or b not in STRATEGIES:
        raise ValueError(f"strategies must be in {STRATEGIES}, got ({a}, {b})")
    d = (a - b) % 4
    if d == 1:
        return 1
    if d == 3:
        return -1
    return 0


def validate_outcome(strategies: Sequence[int]) -> None:
    """Check a pure outcome: one parity-legal strategy per player 1..n."""
    if len(strategies) < 1:
        raise ValueError("an outcome needs at least one player")
    for player, s in enumerate(strategies, start=1):
        if not is_legal(player, s):
            raise ValueError(f"strategy {s} is illegal for player {player}")


def outcome_utility(strategies: Sequence[int], player: int) -> int:
    """Utility of `player` at a pure outcome: sum of her minigame points."""
    validate_outcome(strategies)
    if not 1 <= player <= len(strategies):
        raise IndexError(f"player {player} out of range 1..{len(strategies)}")
    mine = strategies[player - 1]
    return sum(
        minigame_payoff(mine, other)
        for j, other in enumerate(strategies, start=1)
        if j != player
    )


@dataclass(frozen=True)
class StrategyCounts:
    """How many revealers played each strategy.

    n0/n2 count even-numbered players with bit 0/1, n1/n3 odd-numbered
    players with bit 0/1. The player total n' is derived, so it can never
    disagree with the four tallies.
    """

    n0: int
    n1: int
    n2: int
    n3: int

    def __post_init__(self):
        for name in ("n0", "n1", "n2", "n3"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {v!r}")

    @property
    def n_prime(self) -> int:
        return self.n0 + self.n1 + self.n2 + self.n3

    def of(self, strategy: int) -> int:
        if strategy not in STRATEGIES:
            raise ValueError(f"no count for strategy {strategy}")
        return (self.n0, self.n1, self.n2, self.n3)[strategy]

    @classmethod
    def from_strategies(cls, strategies: Iterable[int]) -> "StrategyCounts":
        tally = [0, 0, 0, 0]
        for s in strategies:
            if s not in STRATEGIES:
                raise ValueError(f"bad strategy {s}")
            tally[s] += 1
        return cls(*tally)


def utility_from_counts(counts: StrategyCounts, strategy: int) -> int:
    """Utility of a player who played `strategy`, from the tallies alone.

    Equals the pairwise sum: the player beats everyone one step below and
    loses to everyone one step above, so u = count(s-1) - count(s+1) mod 4.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"bad strategy {strategy}")
    if counts.of(strategy) < 1:
        raise ValueError(f"no player holds strategy {strategy} in {counts}")
    return counts.of((strategy - 1) % 4) - counts.of((strategy + 1) % 4)


def _exact(q) -> Fraction:
    if isinstance(q, float):
        raise TypeError(
            "probabilities must be exact (int, str or Fraction), not float"
        )
    return Fraction(q)


@dataclass(frozen=True)
class MixedProfile:
    """One marginal per player: the probability of the *lower* legal strategy.

    For even players the marginal is P(play 0), for odd players P(play 1);
    the complementary strategy gets the rest of the mass.
    """

    marginals: tuple[Fraction, ...]

    def __post_init__(self):
        coerced = tuple(_exact(q) for q in self.marginals)
        if not coerced:
            raise ValueError("a profile needs at least one player")
        for i, q in enumerate(coerced, start=1):
            if not 0 <= q <= 1:
                raise ValueError(f"marginal for player {i} out of [0, 1]: {q}")
        object.__setattr__(self, "marginals", coerced)

    @property
    def players(self) -> int:
        return len(self.marginals)

    def distribution(self, player: int) -> tuple[tuple[int, Fraction], ...]:
        """((strategy, probability), ...) pairs for one player."""
        if not 1 <= player <= self.players:
            raise IndexError(f"player {player} out of range 1..{self.players}")
        low, high = legal_strategies(player)
        q = self.marginals[player - 1]
        return ((low, q), (high, 1 - q))

    def is_uniform(self) -> bool:
        return all(q == Fraction(1, 2) for q in self.marginals)

    @classmethod
    def uniform(cls, players: int) -> "MixedProfile":
        if players < 1:
            raise ValueError("need at least one player")
        return cls(tuple(Fraction(1, 2) for _ in range(players)))


def expected_utility(profile: MixedProfile, player: int) -> Fraction:
    """Exact expected utility of one player under a mixed profile.

    Only opposite-parity pairs can score, so this is an O(n) sum of 2x2
    expectations.
    """
    if not 1 <= player <= profile.players:
        raise IndexError(f"player {player} out of range 1..{profile.players}")
    mine = profile.distribution(player)
    total = Fraction(0)
    for other in range(1, profile.players + 1):
        if other == player or other % 2 == player % 2:
            continue
        for a, pa in mine:
            if pa == 0:
                continue
            for b, pb in profile.distribution(other):
                total += pa * pb * minigame_payoff(a, b)
    return total


def coalition_expected_total(
    profile: MixedProfile,
    coalition: Iterable[int],
    deviation: Mapping[int, int],
) -> Fraction:
    """Total expected utility of `coalition` when its members play `deviation`.

    Non-members keep following `profile`. Minigames between two coalition
    members only move points around inside the coalition, so they are
    excluded from the total.
    """
    members = frozenset(coalition)
    if not members:
        raise ValueError("coalition must be non-empty")
    for p in members:
        if not 1 <= p <= profile.players:
            raise IndexError(f"coalition member {p} out of range")
    if set(deviation) != members:
        raise ValueError("deviation must assign a strategy to each coalition member")
    for p, s in deviation.items():
        if not is_legal(p, s):
            raise ValueError(f"strategy {s} is illegal for player {p}")

    outsiders = [j for j in range(1, profile.players + 1) if j not in members]
    total = Fraction(0)
    for p in members:
        s = deviation[p]
        for j in outsiders:
            if j % 2 == p % 2:
                continue
            for b, pb in profile.distribution(j):
                if pb:
                    total += pb * minigame_payoff(s, b)
    return total


def coalition_profile_total(profile: MixedProfile, coalition: Iterable[int]) -> Fraction:
    """Total expected utility of a coalition with everyone following `profile`.

    Internal minigames cancel pairwise (antisymmetry), so this is just the
    sum of the members' individual expected utilities.
    """
    members = frozenset(coalition)
    if not members:
        raise ValueError("coalition must be non-empty")
    return sum((expected_utility(profile, p) for p in members), Fraction(0))


@dataclass(frozen=True, eq=True)
class DeviationReport:
    """A coalition, the pure strategies it switches to, and the exact gain."""

    coalition: frozenset[int]
    deviation: Mapping[int, int]
    gain: Fraction


@dataclass(frozen=True, eq=True)
class EquilibriumReport:
    """Result of exhaustively testing the uniform profile for a player count."""

    players: int
    pairs_checked: int
    max_gain: Fraction
    worst: Optional[DeviationReport]

    @property
    def holds(self) -> bool:
        return self.max_gain == 0


def verify_quasi_strong_uniform(players: int) -> EquilibriumReport:
    """Test every coalition x pure deviation against the uniform complement.

    Pure deviations suffice: the coalition total is multilinear in each
    member's marginal, so its maximum over mixed deviations is attained at a
    pure one. Reports the maximum gain found, which must be exactly 0.
    """
    if not 2 <= players <= MAX_EXHAUSTIVE_PLAYERS:
        raise ValueError(
            f"players must be in 2..{MAX_EXHAUSTIVE_PLAYERS}, got {players}"
        )
    uniform = MixedProfile.uniform(players)
    everyone = range(1, players + 1)
    pairs = 0
    max_gain = Fraction(0)
    worst: Optional[DeviationReport] = None
    for size in range(1, players + 1):
        for coalition in itertools.combinations(everyone, size):
            baseline = coalition_profile_total(uniform, coalition)
            options = [legal_strategies(p) for p in coalition]
            for choice in itertools.product(*options):
                deviation = dict(zip(coalition, choice))
                gain = coalition_expected_total(uniform, coalition, deviation) - baseline
                pairs += 1
                if worst is None or gain > max_gain:
                    max_gain = gain
                    worst = DeviationReport(frozenset(coalition), deviation, gain)
    return EquilibriumReport(players, pairs, max_gain, worst)


def find_profitable_coalition_deviation(
    profile: MixedProfile,
) -> Optional[DeviationReport]:
    """Construct a strictly profitable coalition deviation for a biased profile.

    Targets the most-biased player e first: everyone else forms the coalition
    and the opposite-parity members switch to the strategy that beats e's
    more frequent one (same-parity members touch only internal minigames, so
    they simply keep their own more frequent strategy). If that candidate
    yields no gain it means every opposite-parity player already sits pure on
    the beating strategy; those players are themselves maximally biased, and
    targeting one of them must succeed, so iterating candidates by decreasing
    bias always finds a positive gain on any non-uniform profile. Returns
    None only for the uniform profile.
    """
    if profile.players < 2:
        raise ValueError("need at least two players")
    half = Fraction(1, 2)
    candidates = sorted(
        (p for p in range(1, profile.players + 1) if profile.marginals[p - 1] != half),
        key=lambda p: (-abs(profile.marginals[p - 1] - half), p),
    )
    for target in candidates:
        low, high = legal_strategies(target)
        frequent = low if profile.marginals[target - 1] > half else high
        beater = (frequent + 1) % 4
        coalition = [p for p in range(1, profile.players + 1) if p != target]
        deviation = {}
        for p in coalition:
            if p % 2 != target % 2:
                deviation[p] = beater
            else:
                p_low, p_high = legal_strategies(p)
                deviation[p] = p_low if profile.marginals[p - 1] >= half else p_high
        gain = coalition_expected_total(profile, coalition, deviation)
        gain -= coalition_profile_total(profile, coalition)
        if gain > 0:
            return DeviationReport(frozenset(coalition), deviation, gain)
    return None


def random_biased_profile(
    players: int,
    rng: random.Random,
    *,
    denominator: int = 200,
    min_bias: Fraction = Fraction(1, 100),
) -> MixedProfile:
    """Random rational profile with at least one marginal off 1/2 by min_bias."""
    if players < 1:
        raise ValueError("need at least one player")
    half = Fraction(1, 2)
    offsets = [
        k for k in range(denominator + 1) if abs(Fraction(k, denominator) - half) >= min_bias
    ]
    if not offsets:
        raise ValueError("denominator too small for the requested bias")
    pivot = rng.randrange(players)
    marginals = []
    for i in range(players):
        if i == pivot:
            k = rng.choice(offsets)
        else:
            k = rng.randrange(denominator + 1)
        marginals.append(Fraction(k, denominator))
    return MixedProfile(tuple(marginals))


def reward_shares(
    counts: StrategyCounts,
    strategies: Mapping[object, int],
    fee: int,
) -> tuple[dict, int]:
    """Split an integer fee among revealers in proportion to 1 + u/n'.

    Each revealer's exact share is fee * (n' + u) / n'^2, which sums to the
    fee because the game is zero-sum and is strictly positive because
    u >= -(n' - 1). Integer money floors each share; the remainder is
    returned as dust (0 <= dust < n'^2, in fact < n').
    """
    if not isinstance(fee, int) or fee < 0:
        raise ValueError(f"fee must be a non-negative integer, got {fee!r}")
    n = counts.n_prime
    if n < 1:
        raise ValueError("no revealers to reward")
    if StrategyCounts.from_strategies(strategies.values()) != counts:
        raise ValueError("per-player strategies disagree with the counts")
    shares = {
        p: fee * (n + utility_from_counts(counts, s)) // (n * n)
        for p, s in strategies.items()
    }
    dust = fee - sum(shares.values())
    return shares, dust
