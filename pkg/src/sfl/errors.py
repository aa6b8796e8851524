"""Typed rejection errors shared by the protection relations and checkers."""

from __future__ import annotations

MISMATCH = "Mismatch"
PROTECTION_FAIL = "ProtectionFail"
PC_TOO_HIGH = "PcTooHigh"
EFFECT_COMPOSITION_FAIL = "EffectCompositionFail"
NOT_POINTED = "NotPointed"
WRONG_CALCULUS = "WrongCalculus"
UNBOUND_VAR = "UnboundVar"
STATE_TYPE_INVALID = "StateTypeInvalid"

KINDS = frozenset(
    {
        MISMATCH,
        PROTECTION_FAIL,
        PC_TOO_HIGH,
        EFFECT_COMPOSITION_FAIL,
        NOT_POINTED,
        WRONG_CALCULUS,
        UNBOUND_VAR,
        STATE_TYPE_INVALID,
    }
)


class CheckError(Exception):
    """A rejection by one of the checkers; cites the violated premise."""

    def __init__(self, kind: str, message: str, pos=None):
        assert kind in KINDS, kind
        self.kind = kind
        self.message = message
        self.pos = pos
        where = f" at line {pos[0]}, column {pos[1]}" if pos else ""
        super().__init__(f"{kind}{where}: {message}")
