"""Exception types and enumeration limits shared across the package."""

import os


class CoklabError(Exception):
    pass


class ValidationError(CoklabError, ValueError):
    """Bad input: malformed types, mismatched configurations, bad ranges."""


class BoundExceeded(CoklabError):
    """An enumeration would exceed its configured size limit."""


class DegenerateDistribution(ValidationError):
    def __init__(self, prime: int, residue: int):
        self.prime = prime
        self.residue = residue
        super().__init__(
            f"entry law is constant mod {prime} (all mass on residue {residue}); "
            "it is not alpha-balanced"
        )


class LevelTooSmall(ValidationError):
    def __init__(self, prime: int, needed: int, have: int):
        self.prime = prime
        self.needed = needed
        super().__init__(f"level for p={prime} is {have}; targets need L_p >= {needed}")


class ConfigMismatch(ValidationError):
    pass


class ConvergenceError(CoklabError):
    pass


DEFAULT_BOUNDS = {
    "order": 256,          # per-prime group order for concrete enumeration
    "chains": 10**6,       # surjection chains in seq-classes
    "exhaustive": 2**24,   # matrix tuples in exhaustive oracles
    "stabilizer": 10**4,   # product of Aut orders for direct stabilizer counts
}


def enum_bound(name: str) -> int:
    """Look up an enumeration limit, honouring COKLAB_MAX_ENUM.

    The variable is either a bare integer (applies to every limit) or a
    comma list such as ``order=512,chains=2e6``.
    """
    raw = os.environ.get("COKLAB_MAX_ENUM", "").strip()
    if raw:
        if "=" not in raw:
            return int(float(raw))
        for item in raw.split(","):
            key, _, val = item.partition("=")
            if key.strip() == name:
                return int(float(val))
    return DEFAULT_BOUNDS[name]
