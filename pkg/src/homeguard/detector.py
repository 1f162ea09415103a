"""Rule engine: tier policy, ordered-subsequence rule matching, feedback rules.

A rule pattern matches as an ordered subsequence of the event stream, not a
contiguous substring: benign events interleaved into an attack sequence do
not defeat a match.  An optional window caps the trace span (inclusive, in
events) an embedding may cover.

The per-tier policy is hard-wired and independent of the rule set: every
Suspicious event raises a user alert and every Critical event halts the
sample on all devices except honeypots, before the event takes effect.
Rules add earlier (pre-critical) detection and attribution on top.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Mapping, Sequence

from .model import EventKind, SyscallEvent, Tier, tier_of


class OutOfOrderEvent(Exception):
    """Event fed out of sequence for this sample."""


class NoCriticalEvent(Exception):
    """Honeypot trace shows a ransom demand but no critical event to learn from."""


class RuleAction(str, Enum):
    ALERT = "Alert"
    HALT = "Halt"


@dataclass(frozen=True)
class Rule:
    """Ordered-subsequence pattern over event kinds with a tier action.

    window, when present, is the maximum trace span (from first to last
    matched event, inclusive) an embedding may cover; absent means unbounded.
    Halt rules must end in a Critical-tier kind so the halt can fire before
    the dangerous call executes.
    """

    rule_id: str
    pattern: tuple[EventKind, ...]
    action: RuleAction
    window: int | None = None

    def __post_init__(self) -> None:
        if not self.pattern:
            raise ValueError(f"rule {self.rule_id!r}: pattern must be non-empty")
        if self.window is not None and self.window < len(self.pattern):
            raise ValueError(
                f"rule {self.rule_id!r}: window {self.window} shorter than pattern "
                f"length {len(self.pattern)}"
            )
        if self.action is RuleAction.HALT and tier_of(self.pattern[-1]) is not Tier.CRITICAL:
            raise ValueError(
                f"rule {self.rule_id!r}: halt rules must end in a critical-tier kind, "
                f"got {self.pattern[-1].value}"
            )

    def identity(self) -> tuple:
        """Structural identity used for duplicate detection."""
        return (self.pattern, self.action)


def seed_rules() -> list[Rule]:
    """The fixed seed rule set transcribing the crypto-ransomware kill chain.

    Deliberately small: zero-day variants that dodge these sequences are
    caught by the tier policy plus the honeypot verdict, then fed back as
    new halt rules.
    """
    return [
        Rule(
            rule_id="seed-killchain-recon",
            pattern=(EventKind.FINGERPRINT, EventKind.PORT_SCAN, EventKind.C2_CONNECT),
            action=RuleAction.ALERT,
        ),
        Rule(
            rule_id="seed-c2-encrypt",
            pattern=(EventKind.C2_CONNECT, EventKind.ENCRYPTION_CALL),
            action=RuleAction.HALT,
        ),
        Rule(
            rule_id="seed-backupwipe-encrypt",
            pattern=(EventKind.BACKUP_DELETE, EventKind.ENCRYPTION_CALL),
            action=RuleAction.HALT,
        ),
        Rule(
            rule_id="seed-lockscreen",
            pattern=(EventKind.KEYGUARD_DISABLE, EventKind.DESKTOP_CONTROL),
            action=RuleAction.HALT,
        ),
    ]


class DecisionKind(str, Enum):
    CONTINUE = "Continue"
    ALERT_USER = "AlertUser"
    HALT_EXCEPT_HONEYPOT = "HaltExceptHoneypot"


@dataclass(frozen=True)
class Decision:
    """Verdict for one event, issued before the event is applied anywhere."""

    kind: DecisionKind
    event_index: int
    triggering_rule: str | None = None
    user_allowed: bool | None = None


# A partial match is (start index in trace, count of pattern elements matched).
_Partial = tuple[int, int]


@dataclass(frozen=True)
class MatchState:
    """Immutable per-sample matcher state: active partial matches per rule.

    fed counts events consumed so far and doubles as the expected index of
    the next event.
    """

    fed: int = 0
    partials: Mapping[str, frozenset[_Partial]] = field(default_factory=dict)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MatchState):
            return NotImplemented
        return self.fed == other.fed and dict(self.partials) == dict(other.partials)


def step_matches(
    state: MatchState, rules: Sequence[Rule], event: SyscallEvent
) -> tuple[MatchState, list[Rule]]:
    """Advance all partial matches by one event; report completed rules.

    Matching is fully nondeterministic: a partial that could advance on this
    event is also retained unadvanced, since the embedding may prefer a later
    occurrence of the same kind.  A fresh partial opens whenever the event
    matches a rule's first element.  Partials whose window can no longer
    accommodate a completion are dropped.

    Returns the new state and the rules completing on this event, in rule
    order.
    """
    kind = event.kind
    j = event.index
    new_partials: dict[str, frozenset[_Partial]] = dict(state.partials)
    completed: list[Rule] = []
    for rule in rules:
        pattern = rule.pattern
        window = rule.window
        old = state.partials.get(rule.rule_id)
        fired = False
        if old:
            if window is None:
                live: set[_Partial] = set(old)
            else:
                live = {p for p in old if j - p[0] + 1 <= window}
            advanced: set[_Partial] = set()
            for start, matched in live:
                if pattern[matched] is kind:
                    if matched + 1 == len(pattern):
                        fired = True
                    else:
                        advanced.add((start, matched + 1))
            bucket = live | advanced
            if bucket:
                new_partials[rule.rule_id] = frozenset(bucket)
            else:
                new_partials.pop(rule.rule_id, None)
        if pattern[0] is kind:
            if len(pattern) == 1:
                fired = True
            else:
                opened = new_partials.get(rule.rule_id, frozenset())
                new_partials[rule.rule_id] = opened | {(j, 1)}
        if fired:
            completed.append(rule)
    return MatchState(fed=state.fed + 1, partials=new_partials), completed


def advance(
    state: MatchState,
    rules: Sequence[Rule],
    event: SyscallEvent,
    permission: Callable[[SyscallEvent], bool] = lambda _event: True,
) -> tuple[MatchState, Decision]:
    """Classify one event and advance the matcher.

    The returned decision is evaluated before the event is applied to any
    device state.  Priority: a Critical-tier event or a completing halt rule
    halts everywhere except honeypots; otherwise a Suspicious-tier event or a
    completing alert rule asks the permission callback; otherwise continue.

    Raises OutOfOrderEvent when event.index does not equal the number of
    events previously fed.
    """
    if event.index != state.fed:
        raise OutOfOrderEvent(
            f"expected event index {state.fed}, got {event.index}"
        )
    new_state, completed = step_matches(state, rules, event)
    tier = tier_of(event.kind)
    halt_rule = next((r for r in completed if r.action is RuleAction.HALT), None)
    if tier is Tier.CRITICAL or halt_rule is not None:
        return new_state, Decision(
            kind=DecisionKind.HALT_EXCEPT_HONEYPOT,
            event_index=event.index,
            triggering_rule=halt_rule.rule_id if halt_rule else None,
        )
    alert_rule = next((r for r in completed if r.action is RuleAction.ALERT), None)
    if tier is Tier.SUSPICIOUS or alert_rule is not None:
        return new_state, Decision(
            kind=DecisionKind.ALERT_USER,
            event_index=event.index,
            triggering_rule=alert_rule.rule_id if alert_rule else None,
            user_allowed=bool(permission(event)),
        )
    return new_state, Decision(kind=DecisionKind.CONTINUE, event_index=event.index)


def extract_feedback_rule(
    honeypot_trace: Sequence[SyscallEvent], active_rules: Iterable[Rule]
) -> Rule | None:
    """Derive a new halt rule from a honeypot-confirmed ransomware trace.

    The pattern is the ordered, de-duplicated list of Suspicious-tier kinds
    seen before the first Critical-tier event (capped at its first four
    elements) with that first Critical kind appended; the window is the trace
    span those events cover.  Returns None when an identical rule is already
    active.

    Raises NoCriticalEvent for a trace that demands ransom without any
    critical action, and ValueError if no ransom demand is present at all.
    """
    if not any(e.kind is EventKind.RANSOM_DEMAND for e in honeypot_trace):
        raise ValueError("feedback extraction requires a trace with a ransom demand")
    crit = next((e for e in honeypot_trace if tier_of(e.kind) is Tier.CRITICAL), None)
    if crit is None:
        raise NoCriticalEvent("ransom demanded but no critical event in honeypot trace")
    kinds: list[EventKind] = []
    first_span_index = crit.index
    for e in honeypot_trace[: crit.index]:
        if tier_of(e.kind) is Tier.SUSPICIOUS and e.kind not in kinds:
            if len(kinds) == 4:
                continue
            kinds.append(e.kind)
            first_span_index = min(first_span_index, e.index)
    pattern = tuple(kinds) + (crit.kind,)
    window = crit.index - first_span_index + 1
    tag = hashlib.sha256("/".join(k.value for k in pattern).encode("utf-8")).hexdigest()[:8]
    rule = Rule(rule_id=f"fb-{tag}", pattern=pattern, action=RuleAction.HALT, window=window)
    for existing in active_rules:
        if existing.identity() == rule.identity():
            return None
    return rule
