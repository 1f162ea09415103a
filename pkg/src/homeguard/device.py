"""Mutable runtime state of a simulated device and the event effect table.

A DeviceState is built from a DeviceSpec and carries the live file store a
sample's events act on.  Honeypot sandboxes are disposable DeviceState
copies, so real devices stay untouched by honeypot execution.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .model import DeviceClass, DeviceSpec, EventKind, SyscallEvent

# Conventional path prefixes touched by the sequence-only benign kinds.
BACKUP_PREFIX = "backups/"
LOG_PREFIX = "logs/"

ENCRYPTED_MARKER = b"\x00ENC\x00"


@dataclass
class DeviceState:
    """Live state of one device: file store plus installed-sample bookkeeping."""

    spec: DeviceSpec
    files: dict[str, bytes] = field(default_factory=dict)
    installed: set[str] = field(default_factory=set)

    @classmethod
    def from_spec(cls, spec: DeviceSpec) -> "DeviceState":
        return cls(spec=spec, files=dict(spec.files))

    @property
    def device_id(self) -> str:
        return self.spec.device_id

    @property
    def device_class(self) -> DeviceClass:
        return self.spec.device_class

    def sandbox_copy(self) -> "DeviceState":
        """Disposable copy for honeypot execution; shares nothing mutable."""
        return DeviceState(spec=self.spec, files=dict(self.files))

    def file_digests(self) -> dict[str, str]:
        """SHA-256 hex digest per path, for before/after integrity checks."""
        return {path: hashlib.sha256(content).hexdigest() for path, content in self.files.items()}

    def apply(self, event: SyscallEvent, sample_name: str) -> None:
        """Apply one event's effect to the file store.

        Only write-like kinds mutate anything; reads, queries and network
        actions leave the store alone.  Effects are deterministic functions
        of (sample, event) so repeated runs produce identical stores.
        """
        kind = event.kind
        if kind is EventKind.FILE_WRITE:
            assert event.arg
            self.files[event.arg] = f"write:{sample_name}:{event.index}".encode("utf-8")
        elif kind is EventKind.ENCRYPTION_CALL:
            assert event.arg
            previous = self.files.get(event.arg, b"")
            self.files[event.arg] = ENCRYPTED_MARKER + hashlib.sha256(previous).digest()
        elif kind is EventKind.FOLDER_DELETE:
            assert event.arg
            self._delete_prefix(event.arg.rstrip("/") + "/", exact=event.arg)
        elif kind is EventKind.BACKUP_DELETE:
            self._delete_prefix(BACKUP_PREFIX)
        elif kind is EventKind.TRACE_DELETE:
            self._delete_prefix(LOG_PREFIX)

    def _delete_prefix(self, prefix: str, exact: str | None = None) -> None:
        doomed = [p for p in self.files if p.startswith(prefix) or p == exact]
        for path in doomed:
            del self.files[path]
