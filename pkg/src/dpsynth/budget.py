"""zCDP accounting: conversions between (epsilon, delta) and rho.

rho is the internal accounting currency; user-facing (epsilon, delta) is
converted once at pipeline start.  A Gaussian release with scale sigma and
L2 sensitivity s costs s^2 / (2 sigma^2); an epsilon-DP exponential mechanism
costs epsilon^2 / 8; any pure epsilon-DP release costs at most epsilon^2 / 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import BudgetExhausted, InvalidArgument

_LEDGER_SLACK = 1e-12


def zcdp_of_gaussian(sigma: float, sensitivity: float) -> float:
    """zCDP cost of one Gaussian release."""
    if sigma <= 0 or sensitivity <= 0:
        raise InvalidArgument("sigma and sensitivity must be positive")
    return sensitivity**2 / (2.0 * sigma**2)


def sigma_for_rho(rho: float, sensitivity: float = 1.0) -> float:
    """Gaussian scale that spends exactly rho at the given sensitivity."""
    if rho <= 0:
        raise InvalidArgument("rho must be positive")
    return sensitivity / math.sqrt(2.0 * rho)


def zcdp_of_exponential(epsilon: float) -> float:
    """zCDP cost of one epsilon-DP exponential-mechanism selection."""
    if epsilon <= 0:
        raise InvalidArgument("epsilon must be positive")
    return epsilon**2 / 8.0


def zcdp_of_pure(epsilon: float) -> float:
    """zCDP cost of a generic pure epsilon-DP release (Laplace, PrivTree)."""
    if epsilon < 0:
        raise InvalidArgument("epsilon must be non-negative")
    return epsilon**2 / 2.0


def eps_of_rho(rho: float, delta: float) -> float:
    """Standard rho-zCDP to (epsilon, delta)-DP conversion."""
    if not 0.0 < delta < 1.0:
        raise InvalidArgument(f"delta must lie in (0, 1), got {delta}")
    if rho < 0:
        raise InvalidArgument("rho must be non-negative")
    if rho == 0:
        return 0.0
    return rho + 2.0 * math.sqrt(rho * math.log(1.0 / delta))

def rho_of_eps(epsilon: float, delta: float) -> float:
    """Largest rho whose conversion stays within epsilon, by bisection."""
    if epsilon <= 0:
        raise InvalidArgument("epsilon must be positive")
    if not 0.0 < delta < 1.0:
        raise InvalidArgument(f"delta must lie in (0, 1), got {delta}")
    # eps_of_rho(rho) >= rho, so the answer lies in [0, epsilon].
    lo, hi = 0.0, epsilon
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if eps_of_rho(mid, delta) <= epsilon:
            lo = mid
        else:
            hi = mid
    return lo


@dataclass(frozen=True)
class PrivacyBudget:
    """User-facing (epsilon, delta) with the derived zCDP budget."""

    epsilon: float
    delta: float
    rho: float = field(init=False)

    def __post_init__(self):
        if self.epsilon <= 0:
            raise InvalidArgument("epsilon must be positive")
        if not 0.0 < self.delta < 1.0:
            raise InvalidArgument("delta must lie in (0, 1)")
        object.__setattr__(self, "rho", rho_of_eps(self.epsilon, self.delta))


class PrivacyLedger:
    """Single-writer record of zCDP charges against a fixed total.

    Mechanisms that read private data do so inside ``spend(...)`` so that an
    auditor (or the taint test) can verify no read happens without a charge.
    """

    def __init__(self, total_rho: float):
        if total_rho < 0:
            raise InvalidArgument("total_rho must be non-negative")
        self.total_rho = float(total_rho)
        self.spent_rho = 0.0
        self.log: list[tuple[str, float]] = []
        self._active = 0

    def charge(self, label: str, rho: float) -> None:
        if rho < 0:
            raise InvalidArgument("rho must be non-negative")
        if self.spent_rho + rho > self.total_rho + _LEDGER_SLACK:
            raise BudgetExhausted(
                f"charge {label!r} of {rho:.6g} exceeds remaining "
                f"{self.remaining_rho:.6g}"
            )
        self.spent_rho += rho
        self.log.append((label, rho))

    @property
    def remaining_rho(self) -> float:
        return max(0.0, self.total_rho - self.spent_rho)

    @property
    def charge_active(self) -> bool:
        """True while some mechanism is reading private data under a charge."""
        return self._active > 0

    def spend(self, label: str, rho: float) -> "_ChargeScope":
        """Charge and open a scope within which private reads are sanctioned."""
        self.charge(label, rho)
        return _ChargeScope(self)

    def snapshot(self) -> dict:
        return {
            "total_rho": self.total_rho,
            "spent_rho": self.spent_rho,
            "log": [[label, rho] for label, rho in self.log],
        }


class _ChargeScope:
    def __init__(self, ledger: PrivacyLedger):
        self._ledger = ledger

    def __enter__(self):
        self._ledger._active += 1
        return self._ledger

    def __exit__(self, *exc):
        self._ledger._active -= 1
        return False


class FreeLedger(PrivacyLedger):
    """Ledger for declared-public data: reads are sanctioned, charges are void.

    Used by public pretraining, where domain extraction, discretization and
    selection must run without spending budget.  It reports the nominal total
    so budget-proportional strategies shape their plans as the private run
    would, but spent_rho never moves.
    """

    def __init__(self, total_rho: float = 0.0):
        super().__init__(total_rho=total_rho)

    def charge(self, label: str, rho: float) -> None:
        if rho < 0:
            raise InvalidArgument("rho must be non-negative")
        self.log.append((label, 0.0))
