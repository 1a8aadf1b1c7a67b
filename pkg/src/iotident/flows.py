"""Bidirectional flow assembly and session handling.

A flow is every packet sharing a canonical 5-tuple (both directions)
within one session; a session is one device power cycle. Flows carry an
initiator (the endpoint that sent the temporally first packet), which
fixes the forward direction for feature extraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import DataError, NonPositiveWindow
from .pcap import PacketRecord, parse_capture

Endpoint = tuple[str, int]  # (ip, port)


@dataclass(frozen=True)
class FlowKey:
    """Direction-free 5-tuple: endpoints in canonical (lexicographic) order."""

    endpoint_a: Endpoint
    endpoint_b: Endpoint
    proto: int

    @classmethod
    def from_packet(cls, pkt: PacketRecord) -> "FlowKey":
        a = (pkt.src_ip, pkt.src_port)
        b = (pkt.dst_ip, pkt.dst_port)
        if b < a:
            a, b = b, a
        return cls(a, b, pkt.proto)


@dataclass
class Flow:
    key: FlowKey
    initiator: Endpoint            # defines "forward"
    packets: list[PacketRecord]    # time-ordered
    session_id: str
    first_ts: float
    last_ts: float

    @property
    def responder(self) -> Endpoint:
        if self.initiator == self.key.endpoint_a:
            return self.key.endpoint_b
        return self.key.endpoint_a

    def is_forward(self, pkt: PacketRecord) -> bool:
        return (pkt.src_ip, pkt.src_port) == self.initiator


@dataclass
class Session:
    session_id: str
    device_label: str
    power_on_ts: float
    flows: list[Flow]

    @property
    def packet_count(self) -> int:
        return sum(len(f.packets) for f in self.flows)


def assemble_flows(packets, session_id: str) -> list[Flow]:
    """Partition packets into bidirectional flows, ordered by first packet time.

    Input need not be time-sorted; packets are stably sorted so equal
    timestamps keep capture order.
    """
    ordered = sorted(packets, key=lambda p: p.ts)
    groups: dict[FlowKey, list[PacketRecord]] = {}
    for pkt in ordered:
        groups.setdefault(FlowKey.from_packet(pkt), []).append(pkt)
    flows = []
    for key, pkts in groups.items():
        flows.append(Flow(
            key=key,
            initiator=(pkts[0].src_ip, pkts[0].src_port),
            packets=pkts,
            session_id=session_id,
            first_ts=pkts[0].ts,
            last_ts=pkts[-1].ts,
        ))
    flows.sort(key=lambda f: f.first_ts)
    return flows


def truncate_session(session: Session, window: float) -> Session:
    """Keep only packets with ts <= power_on_ts + window.

    Flows emptied by the cut are dropped; flow bounds are recomputed.
    Truncating twice at the same window is a no-op.
    """
    if not (window > 0):
        raise NonPositiveWindow(f"window must be > 0, got {window}")
    cutoff = session.power_on_ts + window
    kept = []
    for flow in session.flows:
        pkts = [p for p in flow.packets if p.ts <= cutoff]
        if not pkts:
            continue
        kept.append(replace(flow, packets=pkts,
                            initiator=(pkts[0].src_ip, pkts[0].src_port),
                            first_ts=pkts[0].ts, last_ts=pkts[-1].ts))
    return Session(session.session_id, session.device_label,
                   session.power_on_ts, kept)


@dataclass(frozen=True)
class ManifestEntry:
    session_id: str
    device_label: str
    power_on_ts: float
    pcap_path: str


def parse_manifest(text: str) -> list[ManifestEntry]:
    """Parse the tab-separated session manifest.

    Line format: ``session_id<TAB>device_label<TAB>power_on_ts<TAB>pcap_path``.
    Blank lines and lines starting with '#' are ignored.
    """
    entries = []
    seen = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise DataError(f"manifest line {lineno}: expected 4 tab-separated fields")
        session_id, label, ts_text, path = parts
        try:
            power_on = float(ts_text)
        except ValueError:
            raise DataError(f"manifest line {lineno}: bad power_on_ts {ts_text!r}")
        if not math.isfinite(power_on):
            raise DataError(f"manifest line {lineno}: non-finite power_on_ts")
        if session_id in seen:
            raise DataError(f"manifest line {lineno}: duplicate session id {session_id!r}")
        seen.add(session_id)
        entries.append(ManifestEntry(session_id, label, power_on, path))
    return entries


def format_manifest(entries) -> str:
    lines = [f"{e.session_id}\t{e.device_label}\t{e.power_on_ts!r}\t{e.pcap_path}"
             for e in entries]
    return "".join(line + "\n" for line in lines)


def load_sessions(manifest_path) -> list[Session]:
    """Read a manifest and its captures into Session objects.

    Relative pcap paths resolve against the manifest's directory. Returns
    sessions in manifest order.
    """
    manifest_path = Path(manifest_path)
    base = manifest_path.parent
    sessions = []
    for entry in parse_manifest(manifest_path.read_text()):
        pcap_path = Path(entry.pcap_path)
        if not pcap_path.is_absolute():
            pcap_path = base / pcap_path
        capture = parse_capture(pcap_path.read_bytes())
        flows = assemble_flows(capture.records, entry.session_id)
        sessions.append(Session(entry.session_id, entry.device_label,
                                entry.power_on_ts, flows))
    return sessions
