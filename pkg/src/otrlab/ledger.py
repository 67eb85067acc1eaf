"""Bond and slashing ledger.

Stake only moves between accounts, escrow and the slashed pool, so
``total()`` is constant apart from explicit deposits.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Hashable, List, Optional


class AlreadySlashed(Exception):
    pass


class InsufficientStake(Exception):
    pass


@dataclass(frozen=True)
class SlashEvent:
    participant: str
    amount: float
    reason: str
    time: float
    offense: Hashable
    shortfall: float = 0.0


class StakeLedger:
    def __init__(self, balances: Optional[Dict[str, float]] = None) -> None:
        self.balances: Dict[str, float] = {}
        self.escrowed: Dict[Hashable, tuple] = {}
        self.slashed_pool = 0.0
        self.slash_events: List[SlashEvent] = []
        self._offenses = set()
        self._deposited = 0.0
        for who, amount in (balances or {}).items():
            self.deposit(who, amount)

    def deposit(self, participant: str, amount: float) -> None:
        if amount < 0:
            raise ValueError("deposit must be >= 0")
        self.balances[participant] = self.balances.get(participant, 0.0) + amount
        self._deposited += amount

    def balance(self, participant: str) -> float:
        return self.balances.get(participant, 0.0)

    def total(self) -> float:
        """Balances + escrow + slashed pool."""
        return (
            sum(self.balances.values())
            + sum(amount for _, amount in self.escrowed.values())
            + self.slashed_pool
        )

    @property
    def deposited(self) -> float:
        return self._deposited

    def escrow(self, key: Hashable, participant: str, amount: float) -> None:
        if key in self.escrowed:
            raise ValueError(f"escrow {key!r} already exists")
        if self.balance(participant) < amount:
            raise InsufficientStake(f"{participant} holds {self.balance(participant)} < {amount}")
        self.balances[participant] -= amount
        self.escrowed[key] = (participant, amount)

    def release(self, key: Hashable, to: Optional[str] = None) -> float:
        """Pay an escrow out to ``to`` (default: back to its owner)."""
        owner, amount = self.escrowed.pop(key)
        dest = owner if to is None else to
        self.balances[dest] = self.balances.get(dest, 0.0) + amount
        return amount

    def slash(
        self,
        participant: str,
        amount: float,
        reason: str,
        offense: Hashable = None,
        time: float = 0.0,
    ) -> SlashEvent:
        """Debit ``amount`` into the slashed pool.

        An offense key may be slashed once; a repeat raises AlreadySlashed.
        If the balance is short, the whole balance is taken and the
        shortfall is recorded on the event instead of going negative.
        """
        if amount < 0:
            raise ValueError("slash amount must be >= 0")
        key = (offense, participant) if offense is not None else None
        if key is not None and key in self._offenses:
            raise AlreadySlashed(f"{participant} already slashed for {offense!r}")
        held = self.balance(participant)
        taken = min(held, amount)
        self.balances[participant] = held - taken
        self.slashed_pool += taken
        event = SlashEvent(participant, taken, reason, time, offense, shortfall=amount - taken)
        self.slash_events.append(event)
        if key is not None:
            self._offenses.add(key)
        return event

    def pay_from_pool(self, participant: str, amount: float) -> float:
        amount = min(amount, self.slashed_pool)
        self.slashed_pool -= amount
        self.balances[participant] = self.balances.get(participant, 0.0) + amount
        return amount

    def total_slashed(self) -> float:
        return sum(e.amount for e in self.slash_events)
