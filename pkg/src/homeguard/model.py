"""Shared domain vocabulary for the smart-home defense simulator.

Defines the closed system-call event alphabet, the severity tiers attached
to each event kind, sample and device descriptions, and the scenario file
schema (JSON) together with its parser and serializer.

All values here are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum, IntEnum


class ScenarioError(Exception):
    """Base class for scenario parsing/validation failures."""


class MalformedScenario(ScenarioError):
    """Scenario text is syntactically broken (bad JSON, wrong shape, unknown tag)."""


class InvariantViolation(ScenarioError):
    """Scenario text parsed but violates a semantic invariant."""


class EventKind(str, Enum):
    """Closed alphabet of observable system-call actions.

    The enumeration covers exactly 23 kinds across file, registry, network,
    crypto and UI categories; rule patterns and traces draw only from it.
    """

    FILE_SEARCH = "FileSearch"
    FILE_READ = "FileRead"
    FILE_WRITE = "FileWrite"
    FOLDER_DELETE = "FolderDelete"
    REGISTRY_EDIT = "RegistryEdit"
    LOG_EDIT = "LogEdit"
    ADMIN_PRIVILEGE_REQUEST = "AdminPrivilegeRequest"
    ROOT_ACCESS = "RootAccess"
    OPEN_PORTS_QUERY = "OpenPortsQuery"
    OPEN_SESSIONS_QUERY = "OpenSessionsQuery"
    BROWSING_HISTORY_READ = "BrowsingHistoryRead"
    BOOKMARK_READ = "BookmarkRead"
    KERNEL_INFO_READ = "KernelInfoRead"
    PORT_SCAN = "PortScan"
    FINGERPRINT = "Fingerprint"
    C2_CONNECT = "C2Connect"
    ENCRYPTION_CALL = "EncryptionCall"
    TOR_CONNECT = "TorConnect"
    KEYGUARD_DISABLE = "KeyguardDisable"
    DESKTOP_CONTROL = "DesktopControl"
    RANSOM_DEMAND = "RansomDemand"
    BACKUP_DELETE = "BackupDelete"
    TRACE_DELETE = "TraceDelete"


class Tier(str, Enum):
    """Severity tier of an event kind.

    Benign kinds look like normal user behaviour; Suspicious kinds raise a
    user-permission alert; Critical kinds halt execution everywhere except
    honeypot nodes before they take effect; the single Terminal kind is the
    ransom demand that decides the honeypot verdict.
    """

    BENIGN = "Benign"
    SUSPICIOUS = "Suspicious"
    CRITICAL = "Critical"
    TERMINAL = "Terminal"


_TIER_TABLE: dict[EventKind, Tier] = {
    EventKind.FILE_SEARCH: Tier.BENIGN,
    EventKind.FILE_READ: Tier.BENIGN,
    EventKind.FILE_WRITE: Tier.BENIGN,
    EventKind.FOLDER_DELETE: Tier.BENIGN,
    EventKind.REGISTRY_EDIT: Tier.BENIGN,
    EventKind.LOG_EDIT: Tier.BENIGN,
    EventKind.ADMIN_PRIVILEGE_REQUEST: Tier.BENIGN,
    EventKind.ROOT_ACCESS: Tier.BENIGN,
    EventKind.BACKUP_DELETE: Tier.BENIGN,
    EventKind.TRACE_DELETE: Tier.BENIGN,
    EventKind.OPEN_PORTS_QUERY: Tier.SUSPICIOUS,
    EventKind.OPEN_SESSIONS_QUERY: Tier.SUSPICIOUS,
    EventKind.BROWSING_HISTORY_READ: Tier.SUSPICIOUS,
    EventKind.BOOKMARK_READ: Tier.SUSPICIOUS,
    EventKind.KERNEL_INFO_READ: Tier.SUSPICIOUS,
    EventKind.PORT_SCAN: Tier.SUSPICIOUS,
    EventKind.FINGERPRINT: Tier.SUSPICIOUS,
    EventKind.C2_CONNECT: Tier.SUSPICIOUS,
    EventKind.ENCRYPTION_CALL: Tier.CRITICAL,
    EventKind.TOR_CONNECT: Tier.CRITICAL,
    EventKind.KEYGUARD_DISABLE: Tier.CRITICAL,
    EventKind.DESKTOP_CONTROL: Tier.CRITICAL,
    EventKind.RANSOM_DEMAND: Tier.TERMINAL,
}

# Kinds whose arg must be a non-empty file path.
PATH_REQUIRED_KINDS = frozenset(
    {
        EventKind.ENCRYPTION_CALL,
        EventKind.FILE_READ,
        EventKind.FILE_WRITE,
        EventKind.FOLDER_DELETE,
    }
)


def tier_of(kind: EventKind) -> Tier:
    """Return the fixed severity tier of an event kind. Total over EventKind."""
    return _TIER_TABLE[kind]


class EntryChannel(str, Enum):
    """How a software sample reaches the smart home."""

    NETWORK = "Network"
    PHYSICAL_DEVICE = "PhysicalDevice"


class DeviceClass(IntEnum):
    """Device capability class, ordered by computing power."""

    CONSTRAINED = 0
    EDGE = 1
    HONEYPOT = 2

    @property
    def label(self) -> str:
        return _DEVICE_CLASS_LABELS[self]


_DEVICE_CLASS_LABELS = {
    DeviceClass.CONSTRAINED: "Constrained",
    DeviceClass.EDGE: "Edge",
    DeviceClass.HONEYPOT: "Honeypot",
}
_DEVICE_CLASS_BY_LABEL = {label: cls for cls, label in _DEVICE_CLASS_LABELS.items()}


class DeviceTrust(str, Enum):
    """Registration stance of a device, used to model external-device attacks.

    Valid devices register normally; Unregistered devices never appear on the
    chain; WrongKey devices are registered under a commitment that does not
    match the key they actually hold.
    """

    VALID = "Valid"
    UNREGISTERED = "Unregistered"
    WRONG_KEY = "WrongKey"


class UserPolicy(str, Enum):
    """How suspicious-event permission prompts are answered."""

    ALLOW_ALL = "AllowAll"
    DENY_ALL = "DenyAll"
    PER_SAMPLE_SCRIPT = "PerSampleScript"


@dataclass(frozen=True)
class SyscallEvent:
    """One observed action of a running sample.

    index is the 0-based position of the event within its trace; kinds that
    operate on a file carry the path in arg.
    """

    kind: EventKind
    index: int
    arg: str | None = None

    def __post_init__(self) -> None:
        if self.index < 0:
            raise InvariantViolation(f"event index must be >= 0, got {self.index}")
        if self.kind in PATH_REQUIRED_KINDS and not self.arg:
            raise InvariantViolation(
                f"{self.kind.value} event at index {self.index} requires a non-empty path arg"
            )


@dataclass(frozen=True)
class IngressMeta:
    """Network-facing metadata of a sample: where it came from and what it looks like."""

    source_ip: str
    port: int
    file_extension: str

    def __post_init__(self) -> None:
        if not 0 <= self.port <= 65535:
            raise InvariantViolation(f"port {self.port} outside 0-65535")
        parts = self.source_ip.split(".")
        if len(parts) != 4 or not all(p.isdigit() and 0 <= int(p) <= 255 for p in parts):
            raise InvariantViolation(f"source_ip {self.source_ip!r} is not a dotted quad")
        ext = self.file_extension
        if ext.startswith("."):
            raise InvariantViolation(f"file_extension {ext!r} must not carry a leading dot")
        if ext != ext.lower():
            raise InvariantViolation(f"file_extension {ext!r} must be lowercase")


@dataclass(frozen=True)
class SoftwareSample:
    """A software sample expressed as a declared system-call trace.

    evasive samples model advanced malware that slips past the gateway
    firewall. permissions is the scripted answer list consumed (one entry
    per alert) under the PerSampleScript user policy; once exhausted the
    remaining alerts default to allow.
    """

    name: str
    entry: EntryChannel
    target_device: str
    ingress_meta: IngressMeta
    trace: tuple[SyscallEvent, ...]
    evasive: bool = False
    permissions: tuple[bool, ...] = ()

    def __post_init__(self) -> None:
        if not self.name:
            raise InvariantViolation("sample name must be non-empty")
        if not self.trace:
            raise InvariantViolation(f"sample {self.name!r} has an empty trace")
        for pos, event in enumerate(self.trace):
            if event.index != pos:
                raise InvariantViolation(
                    f"sample {self.name!r}: event at position {pos} carries index {event.index}"
                )


@dataclass(frozen=True)
class DeviceSpec:
    """Declared initial state of one smart-home device."""

    device_id: str
    device_class: DeviceClass
    files: dict[str, bytes] = field(default_factory=dict)
    trust: DeviceTrust = DeviceTrust.VALID
    capabilities: tuple[str, ...] = ("FileAccess", "NetworkAccess")

    def __post_init__(self) -> None:
        if not self.device_id:
            raise InvariantViolation("device id must be non-empty")


@dataclass(frozen=True)
class FirewallConfig:
    """Gateway blacklists: ports, source addresses, and file extensions."""

    port_blacklist: frozenset[int] = frozenset()
    ip_blacklist: frozenset[str] = frozenset()
    extension_blacklist: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        for port in self.port_blacklist:
            if not 0 <= port <= 65535:
                raise InvariantViolation(f"blacklisted port {port} outside 0-65535")
        for ext in self.extension_blacklist:
            if ext.startswith("."):
                raise InvariantViolation(f"blacklisted extension {ext!r} carries a leading dot")
            if ext != ext.lower():
                raise InvariantViolation(f"blacklisted extension {ext!r} must be lowercase")


@dataclass(frozen=True)
class Scenario:
    """Full simulation input: devices, firewall, samples, policy and seed."""

    devices: tuple[DeviceSpec, ...]
    firewall: FirewallConfig
    samples: tuple[SoftwareSample, ...]
    user_policy: UserPolicy
    seed: int
    workstations: int

    def __post_init__(self) -> None:
        if not 0 <= self.seed < 2**64:
            raise InvariantViolation(f"seed {self.seed} outside unsigned 64-bit range")
        if self.workstations < 1:
            raise InvariantViolation("workstations must be >= 1")
        ids = [d.device_id for d in self.devices]
        if len(set(ids)) != len(ids):
            raise InvariantViolation("duplicate device ids")
        by_id = {d.device_id: d for d in self.devices}
        if not any(d.device_class is DeviceClass.HONEYPOT for d in self.devices):
            raise InvariantViolation("scenario declares no honeypot-class device")
        names = [s.name for s in self.samples]
        if len(set(names)) != len(names):
            raise InvariantViolation("duplicate sample names")
        for sample in self.samples:
            target = by_id.get(sample.target_device)
            if target is None:
                raise InvariantViolation(
                    f"sample {sample.name!r} targets unknown device {sample.target_device!r}"
                )
            if target.device_class is DeviceClass.HONEYPOT:
                raise InvariantViolation(
                    f"sample {sample.name!r} may not target honeypot device {target.device_id!r}"
                )

    def device(self, device_id: str) -> DeviceSpec:
        for spec in self.devices:
            if spec.device_id == device_id:
                return spec
        raise KeyError(device_id)

    def honeypots(self) -> tuple[DeviceSpec, ...]:
        return tuple(d for d in self.devices if d.device_class is DeviceClass.HONEYPOT)


# --- scenario file format (JSON) ------------------------------------------
#
# Top-level object keys: devices, firewall, samples, user_policy, seed,
# workstations.  Events encode as {"kind": "<EventKind>", "arg": "<text>"}
# with arg omitted when absent.  See scenarios/example_scenario.json for a
# complete documented instance.


def _expect(obj: dict, key: str, types: tuple[type, ...], where: str):
    if key not in obj:
        raise MalformedScenario(f"{where}: missing required field {key!r}")
    value = obj[key]
    if not isinstance(value, types) or (isinstance(value, bool) and bool not in types):
        raise MalformedScenario(f"{where}: field {key!r} has wrong type {type(value).__name__}")
    return value


def _reject_unknown(obj: dict, allowed: set[str], where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise MalformedScenario(f"{where}: unknown field(s) {sorted(unknown)}")


def _parse_enum(enum_cls, raw: str, where: str):
    try:
        return enum_cls(raw)
    except ValueError:
        valid = ", ".join(member.value for member in enum_cls)
        raise MalformedScenario(f"{where}: {raw!r} is not one of [{valid}]") from None


def _parse_event(obj, position: int, where: str) -> SyscallEvent:
    if not isinstance(obj, dict):
        raise MalformedScenario(f"{where}: event {position} is not an object")
    _reject_unknown(obj, {"kind", "arg"}, f"{where} event {position}")
    kind_raw = _expect(obj, "kind", (str,), f"{where} event {position}")
    kind = _parse_enum(EventKind, kind_raw, f"{where} event {position} kind")
    arg = obj.get("arg")
    if arg is not None and not isinstance(arg, str):
        raise MalformedScenario(f"{where} event {position}: arg must be text")
    return SyscallEvent(kind=kind, index=position, arg=arg)


def _parse_device(obj, position: int) -> DeviceSpec:
    where = f"devices[{position}]"
    if not isinstance(obj, dict):
        raise MalformedScenario(f"{where}: not an object")
    _reject_unknown(obj, {"id", "class", "files", "trust", "capabilities"}, where)
    device_id = _expect(obj, "id", (str,), where)
    class_raw = _expect(obj, "class", (str,), where)
    if class_raw not in _DEVICE_CLASS_BY_LABEL:
        raise MalformedScenario(f"{where}: class {class_raw!r} is not one of [Constrained, Edge, Honeypot]")
    files_raw = obj.get("files", {})
    if not isinstance(files_raw, dict):
        raise MalformedScenario(f"{where}: files must be an object of path -> text content")
    files: dict[str, bytes] = {}
    for path, content in files_raw.items():
        if not isinstance(content, str):
            raise MalformedScenario(f"{where}: file {path!r} content must be text")
        files[path] = content.encode("utf-8")
    trust_raw = obj.get("trust", DeviceTrust.VALID.value)
    if not isinstance(trust_raw, str):
        raise MalformedScenario(f"{where}: trust must be text")
    trust = _parse_enum(DeviceTrust, trust_raw, f"{where} trust")
    caps_raw = obj.get("capabilities", ["FileAccess", "NetworkAccess"])
    if not isinstance(caps_raw, list) or not all(isinstance(c, str) for c in caps_raw):
        raise MalformedScenario(f"{where}: capabilities must be a list of text scopes")
    return DeviceSpec(
        device_id=device_id,
        device_class=_DEVICE_CLASS_BY_LABEL[class_raw],
        files=files,
        trust=trust,
        capabilities=tuple(caps_raw),
    )


def _parse_sample(obj, position: int) -> SoftwareSample:
    where = f"samples[{position}]"
    if not isinstance(obj, dict):
        raise MalformedScenario(f"{where}: not an object")
    _reject_unknown(
        obj,
        {"name", "entry", "target_device", "ingress_meta", "trace", "evasive", "permissions"},
        where,
    )
    name = _expect(obj, "name", (str,), where)
    entry = _parse_enum(EntryChannel, _expect(obj, "entry", (str,), where), f"{where} entry")
    target = _expect(obj, "target_device", (str,), where)
    meta_obj = _expect(obj, "ingress_meta", (dict,), where)
    _reject_unknown(meta_obj, {"source_ip", "port", "file_extension"}, f"{where} ingress_meta")
    meta = IngressMeta(
        source_ip=_expect(meta_obj, "source_ip", (str,), f"{where} ingress_meta"),
        port=_expect(meta_obj, "port", (int,), f"{where} ingress_meta"),
        file_extension=_expect(meta_obj, "file_extension", (str,), f"{where} ingress_meta"),
    )
    trace_raw = _expect(obj, "trace", (list,), where)
    trace = tuple(_parse_event(ev, i, where) for i, ev in enumerate(trace_raw))
    evasive = obj.get("evasive", False)
    if not isinstance(evasive, bool):
        raise MalformedScenario(f"{where}: evasive must be a boolean")
    perms_raw = obj.get("permissions", [])
    if not isinstance(perms_raw, list):
        raise MalformedScenario(f"{where}: permissions must be a list")
    permissions = []
    for i, answer in enumerate(perms_raw):
        if answer not in ("allow", "deny"):
            raise MalformedScenario(f"{where}: permissions[{i}] must be 'allow' or 'deny'")
        permissions.append(answer == "allow")
    return SoftwareSample(
        name=name,
        entry=entry,
        target_device=target,
        ingress_meta=meta,
        trace=trace,
        evasive=evasive,
        permissions=tuple(permissions),
    )


def parse_scenario(data: bytes) -> Scenario:
    """Parse scenario file bytes into a validated Scenario.

    Raises MalformedScenario for syntax/shape errors and InvariantViolation
    for semantic failures (bad port, sample targeting a honeypot, ...).
    """
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedScenario(f"scenario is not UTF-8 text: {exc}") from None
    try:
        root = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedScenario(f"line {exc.lineno}: {exc.msg}") from None
    if not isinstance(root, dict):
        raise MalformedScenario("top level must be a JSON object")
    _reject_unknown(
        root, {"devices", "firewall", "samples", "user_policy", "seed", "workstations"}, "scenario"
    )
    devices_raw = _expect(root, "devices", (list,), "scenario")
    samples_raw = _expect(root, "samples", (list,), "scenario")
    fw_obj = _expect(root, "firewall", (dict,), "scenario")
    _reject_unknown(fw_obj, {"port_blacklist", "ip_blacklist", "extension_blacklist"}, "firewall")

    def _str_set(key: str) -> frozenset[str]:
        raw = fw_obj.get(key, [])
        if not isinstance(raw, list) or not all(isinstance(v, str) for v in raw):
            raise MalformedScenario(f"firewall: {key} must be a list of text values")
        return frozenset(raw)

    ports_raw = fw_obj.get("port_blacklist", [])
    if not isinstance(ports_raw, list) or not all(
        isinstance(v, int) and not isinstance(v, bool) for v in ports_raw
    ):
        raise MalformedScenario("firewall: port_blacklist must be a list of integers")
    firewall = FirewallConfig(
        port_blacklist=frozenset(ports_raw),
        ip_blacklist=_str_set("ip_blacklist"),
        extension_blacklist=_str_set("extension_blacklist"),
    )
    policy = _parse_enum(UserPolicy, _expect(root, "user_policy", (str,), "scenario"), "user_policy")
    seed = _expect(root, "seed", (int,), "scenario")
    workstations = _expect(root, "workstations", (int,), "scenario")
    return Scenario(
        devices=tuple(_parse_device(d, i) for i, d in enumerate(devices_raw)),
        firewall=firewall,
        samples=tuple(_parse_sample(s, i) for i, s in enumerate(samples_raw)),
        user_policy=policy,
        seed=seed,
        workstations=workstations,
    )


def serialize_scenario(scenario: Scenario) -> bytes:
    """Serialize a Scenario back to the JSON file format (round-trip stable)."""
    root = {
        "devices": [
            {
                "id": d.device_id,
                "class": d.device_class.label,
                "files": {path: content.decode("utf-8") for path, content in d.files.items()},
                "trust": d.trust.value,
                "capabilities": list(d.capabilities),
            }
            for d in scenario.devices
        ],
        "firewall": {
            "port_blacklist": sorted(scenario.firewall.port_blacklist),
            "ip_blacklist": sorted(scenario.firewall.ip_blacklist),
            "extension_blacklist": sorted(scenario.firewall.extension_blacklist),
        },
        "samples": [
            {
                "name": s.name,
                "entry": s.entry.value,
                "target_device": s.target_device,
                "ingress_meta": {
                    "source_ip": s.ingress_meta.source_ip,
                    "port": s.ingress_meta.port,
                    "file_extension": s.ingress_meta.file_extension,
                },
                "trace": [
                    {"kind": ev.kind.value} if ev.arg is None else {"kind": ev.kind.value, "arg": ev.arg}
                    for ev in s.trace
                ],
                "evasive": s.evasive,
                "permissions": ["allow" if p else "deny" for p in s.permissions],
            }
            for s in scenario.samples
        ],
        "user_policy": scenario.user_policy.value,
        "seed": scenario.seed,
        "workstations": scenario.workstations,
    }
    return (json.dumps(root, indent=2, sort_keys=True) + "\n").encode("utf-8")
