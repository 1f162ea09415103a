"""Append-only hash-chained block store.

Used twice by the simulator: as the edge chain (device registry + detection
rules) and as the cloud backup chain.  A single sequencer orders writes and
synchronously updates every replica before an append returns, so all copies
stay byte-identical; there is no mining, no forks, no consensus protocol.

Canonical block encoding, bit-exact across implementations:

    index (u64 BE) || prev_digest (32) || timestamp (u64 BE)
        || payload length (u64 BE) || payload

The block digest is SHA-256 over that encoding.  A chain exports to a single
file of blocks in the same encoding, each followed by its 32-byte digest.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum

DIGEST_SIZE = 32
GENESIS_PREV = bytes(DIGEST_SIZE)
_HEADER_SIZE = 8 + DIGEST_SIZE + 8 + 8
_MIN_BLOCK_SIZE = _HEADER_SIZE + DIGEST_SIZE
_U64_MAX = 2**64 - 1
# Wire sentinel for an absent optional integer (ransom index, window).
_ABSENT = _U64_MAX


class SerializationFailure(Exception):
    """Entry cannot be canonically encoded (bad field value or size)."""


class UndecodableChain(Exception):
    """File is too short to possibly hold a single exported block."""


class EntryKind(str, Enum):
    DEVICE_REGISTRATION = "DeviceRegistration"
    RULE_ADDED = "RuleAdded"
    BACKUP_RECORD = "BackupRecord"
    VERDICT_RECORD = "VerdictRecord"


@dataclass(frozen=True)
class DeviceRegistration:
    """Registry entry: device id, key commitment and granted scopes.

    Carries the SHA-256 commitment of the device key, never the key itself.
    """

    device_id: str
    public_commitment: bytes
    capabilities: tuple[str, ...]

    kind = EntryKind.DEVICE_REGISTRATION


@dataclass(frozen=True)
class RuleAdded:
    """A detection rule published to the edge chain, with its origin."""

    rule_id: str
    action: str
    origin: str
    window: int | None
    pattern: tuple[str, ...]

    kind = EntryKind.RULE_ADDED


@dataclass(frozen=True)
class BackupRecord:
    """One backed-up file: content plus its SHA-256 digest at a logical tick."""

    device_id: str
    path: str
    content_digest: bytes
    content: bytes
    tick: int

    kind = EntryKind.BACKUP_RECORD

    def __post_init__(self) -> None:
        if self.content_digest != hashlib.sha256(self.content).digest():
            raise SerializationFailure(f"backup record digest mismatch for {self.path!r}")


@dataclass(frozen=True)
class VerdictRecord:
    """Honeypot verdict for one sample."""

    sample_name: str
    verdict: str
    ransom_index: int | None

    kind = EntryKind.VERDICT_RECORD


LedgerEntry = DeviceRegistration | RuleAdded | BackupRecord | VerdictRecord


def _u64(value: int, what: str) -> bytes:
    if not 0 <= value <= _U64_MAX:
        raise SerializationFailure(f"{what} {value} outside unsigned 64-bit range")
    return value.to_bytes(8, "big")


def _lp(data: bytes) -> bytes:
    return len(data).to_bytes(8, "big") + data


def _lp_text(text: str, what: str) -> bytes:
    try:
        return _lp(text.encode("utf-8"))
    except UnicodeEncodeError as exc:
        raise SerializationFailure(f"{what} is not encodable: {exc}") from None


def encode_entry(entry: LedgerEntry) -> bytes:
    """Canonical length-prefixed, field-ordered entry encoding."""
    head = _lp_text(entry.kind.value, "entry kind")
    if isinstance(entry, DeviceRegistration):
        if len(entry.public_commitment) != DIGEST_SIZE:
            raise SerializationFailure("public commitment must be 32 bytes")
        caps = sorted(entry.capabilities)
        body = (
            _lp_text(entry.device_id, "device id")
            + _lp(entry.public_commitment)
            + _u64(len(caps), "capability count")
            + b"".join(_lp_text(c, "capability") for c in caps)
        )
    elif isinstance(entry, RuleAdded):
        window = _ABSENT if entry.window is None else entry.window
        if window != _ABSENT and window < 1:
            raise SerializationFailure(f"rule window {entry.window} must be >= 1")
        body = (
            _lp_text(entry.rule_id, "rule id")
            + _lp_text(entry.action, "rule action")
            + _lp_text(entry.origin, "rule origin")
            + _u64(window, "rule window")
            + _u64(len(entry.pattern), "pattern length")
            + b"".join(_lp_text(k, "pattern kind") for k in entry.pattern)
        )
    elif isinstance(entry, BackupRecord):
        body = (
            _lp_text(entry.device_id, "device id")
            + _lp_text(entry.path, "path")
            + _lp(entry.content_digest)
            + _lp(entry.content)
            + _u64(entry.tick, "tick")
        )
    elif isinstance(entry, VerdictRecord):
        ransom = _ABSENT if entry.ransom_index is None else entry.ransom_index
        body = (
            _lp_text(entry.sample_name, "sample name")
            + _lp_text(entry.verdict, "verdict")
            + _u64(ransom, "ransom index")
        )
    else:  # pragma: no cover - union is closed
        raise SerializationFailure(f"unknown entry type {type(entry).__name__}")
    return head + body


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise SerializationFailure("truncated entry payload")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u64(self) -> int:
        return int.from_bytes(self.take(8), "big")

    def lp(self) -> bytes:
        return self.take(self.u64())

    def text(self) -> str:
        try:
            return self.lp().decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SerializationFailure(f"invalid UTF-8 in entry: {exc}") from None

    def done(self) -> bool:
        return self.pos == len(self.data)


def decode_entry(payload: bytes) -> LedgerEntry:
    """Inverse of encode_entry; raises SerializationFailure on bad payloads."""
    r = _Reader(payload)
    kind_name = r.text()
    try:
        kind = EntryKind(kind_name)
    except ValueError:
        raise SerializationFailure(f"unknown entry kind {kind_name!r}") from None
    entry: LedgerEntry
    if kind is EntryKind.DEVICE_REGISTRATION:
        device_id = r.text()
        commitment = r.lp()
        caps = tuple(r.text() for _ in range(r.u64()))
        entry = DeviceRegistration(device_id, commitment, caps)
    elif kind is EntryKind.RULE_ADDED:
        rule_id = r.text()
        action = r.text()
        origin = r.text()
        window = r.u64()
        pattern = tuple(r.text() for _ in range(r.u64()))
        entry = RuleAdded(rule_id, action, origin, None if window == _ABSENT else window, pattern)
    elif kind is EntryKind.BACKUP_RECORD:
        entry = BackupRecord(r.text(), r.text(), r.lp(), r.lp(), r.u64())
    else:
        name = r.text()
        verdict = r.text()
        ransom = r.u64()
        entry = VerdictRecord(name, verdict, None if ransom == _ABSENT else ransom)
    if not r.done():
        raise SerializationFailure("trailing bytes after entry")
    return entry


@dataclass(frozen=True)
class Block:
    index: int
    prev_digest: bytes
    timestamp: int
    payload: bytes
    digest: bytes

    def canonical_bytes(self) -> bytes:
        return (
            self.index.to_bytes(8, "big")
            + self.prev_digest
            + self.timestamp.to_bytes(8, "big")
            + len(self.payload).to_bytes(8, "big")
            + self.payload
        )


def compute_digest(index: int, prev_digest: bytes, timestamp: int, payload: bytes) -> bytes:
    message = (
        index.to_bytes(8, "big")
        + prev_digest
        + timestamp.to_bytes(8, "big")
        + len(payload).to_bytes(8, "big")
        + payload
    )
    return hashlib.sha256(message).digest()


def verify_blocks(blocks: list[Block] | tuple[Block, ...]) -> bool:
    """True iff digests recompute, links hold, and indices run 0,1,2,..."""
    prev = GENESIS_PREV
    for position, block in enumerate(blocks):
        if block.index != position:
            return False
        if block.prev_digest != prev:
            return False
        if block.digest != compute_digest(block.index, block.prev_digest, block.timestamp, block.payload):
            return False
        prev = block.digest
    return True


class Chain:
    """Single-sequencer chain with `replicas` synchronously updated copies.

    Replica block lists are separate list objects (the workstation copies);
    append pushes the new block to every one of them before returning.
    """

    def __init__(self, replicas: int = 1):
        if replicas < 1:
            raise ValueError("a chain needs at least one replica")
        self._blocks: list[Block] = []
        self._mirrors: list[list[Block]] = [[] for _ in range(replicas)]

    @property
    def replicas(self) -> int:
        return len(self._mirrors)

    @property
    def blocks(self) -> tuple[Block, ...]:
        return tuple(self._blocks)

    def __len__(self) -> int:
        return len(self._blocks)

    def tip_digest(self) -> bytes:
        return self._blocks[-1].digest if self._blocks else GENESIS_PREV

    def append(self, entry: LedgerEntry, tick: int) -> Block:
        """Append a new block holding entry; all replicas updated before return."""
        payload = encode_entry(entry)
        index = len(self._blocks)
        prev = self.tip_digest()
        if not 0 <= tick <= _U64_MAX:
            raise SerializationFailure(f"tick {tick} outside unsigned 64-bit range")
        block = Block(
            index=index,
            prev_digest=prev,
            timestamp=tick,
            payload=payload,
            digest=compute_digest(index, prev, tick, payload),
        )
        self._blocks.append(block)
        for mirror in self._mirrors:
            mirror.append(block)
        return block

    def verify(self) -> bool:
        return verify_blocks(self._blocks)

    def query(self, kind: EntryKind, predicate=None) -> list[LedgerEntry]:
        """Decoded entries of the given kind, in append order."""
        found = []
        for block in self._blocks:
            entry = decode_entry(block.payload)
            if entry.kind is kind and (predicate is None or predicate(entry)):
                found.append(entry)
        return found

    def entries(self) -> list[LedgerEntry]:
        return [decode_entry(block.payload) for block in self._blocks]

    def replica_blocks(self, ws_id: int) -> tuple[Block, ...]:
        return tuple(self._mirrors[ws_id])

    def export_bytes(self) -> bytes:
        return b"".join(block.canonical_bytes() + block.digest for block in self._blocks)

    def replica_export(self, ws_id: int) -> bytes:
        return b"".join(block.canonical_bytes() + block.digest for block in self._mirrors[ws_id])


def verify_chain(chain: Chain) -> bool:
    """Module-level verification entry point (see Chain.verify)."""
    return chain.verify()


@dataclass(frozen=True)
class DecodedChain:
    """Result of decoding an exported chain file.

    framing_ok is False when the byte stream could not be split cleanly into
    blocks; such a chain always fails verification.
    """

    blocks: tuple[Block, ...]
    framing_ok: bool

    def verify(self) -> bool:
        return self.framing_ok and verify_blocks(self.blocks)


def decode_chain_file(data: bytes) -> DecodedChain:
    """Decode an exported chain file, tolerating damaged framing.

    A corrupted length field must not mask tampering, so framing damage is
    absorbed into a failed-verification result instead of a decode error.
    Only inputs too short to hold one block raise UndecodableChain.
    """
    if len(data) < _MIN_BLOCK_SIZE:
        raise UndecodableChain(f"{len(data)} bytes cannot hold an exported block")
    blocks: list[Block] = []
    pos = 0
    framing_ok = True
    while pos < len(data):
        remaining = len(data) - pos
        if remaining < _MIN_BLOCK_SIZE:
            framing_ok = False
            break
        index = int.from_bytes(data[pos : pos + 8], "big")
        prev = data[pos + 8 : pos + 40]
        timestamp = int.from_bytes(data[pos + 40 : pos + 48], "big")
        paylen = int.from_bytes(data[pos + 48 : pos + 56], "big")
        if paylen > remaining - _MIN_BLOCK_SIZE:
            # Declared payload overruns the file: clamp so the damage is
            # inspectable; verification will reject the block.
            framing_ok = False
            paylen = remaining - _MIN_BLOCK_SIZE
        payload = data[pos + 56 : pos + 56 + paylen]
        digest = data[pos + 56 + paylen : pos + 56 + paylen + DIGEST_SIZE]
        blocks.append(Block(index=index, prev_digest=prev, timestamp=timestamp, payload=payload, digest=digest))
        pos += _HEADER_SIZE + paylen + DIGEST_SIZE
    return DecodedChain(blocks=tuple(blocks), framing_ok=framing_ok)
