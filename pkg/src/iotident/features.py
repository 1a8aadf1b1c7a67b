"""Flow-level feature catalogue and extraction.

Every flow yields 47 features under schema version ``v1``: volume
(packet/byte counts and rates), timing (inter-arrival statistics), TCP
flag counts, payload shape (Shannon entropy and non-zero byte fraction
over the first 512 payload bytes per direction), and categorical
metadata (protocol, port buckets, RFC1918 destination flag).

Undefined statistics are an explicit Missing value (``None``), never 0
and never NaN: a single-packet direction has no std or inter-arrival
gap, a zero-duration flow has no rate.
"""

from __future__ import annotations

import enum
import ipaddress
import math
from dataclasses import dataclass

from .errors import EmptyFlow, EmptyInput
from .flows import Flow
from .pcap import ACK, CWR, ECE, FIN, PSH, RST, SYN, URG, proto_name

SCHEMA_VERSION = "v1"
PAYLOAD_CORPUS_LIMIT = 512  # entropy corpus bound per flow direction

NUMERIC = "numeric"
CATEGORICAL = "categorical"
BINARY = "binary"

MISSING = None


class PortBucket(enum.Enum):
    WELL_KNOWN_DNS = 0
    WELL_KNOWN_HTTP = 1
    WELL_KNOWN_HTTPS = 2
    WELL_KNOWN_NTP = 3
    WELL_KNOWN_DHCP = 4
    WELL_KNOWN_MDNS = 5
    WELL_KNOWN_MQTT = 6
    OTHER_SYSTEM = 7
    REGISTERED = 8
    EPHEMERAL = 9


_PORT_TABLE = {
    53: PortBucket.WELL_KNOWN_DNS,
    80: PortBucket.WELL_KNOWN_HTTP,
    443: PortBucket.WELL_KNOWN_HTTPS,
    123: PortBucket.WELL_KNOWN_NTP,
    67: PortBucket.WELL_KNOWN_DHCP,
    68: PortBucket.WELL_KNOWN_DHCP,
    5353: PortBucket.WELL_KNOWN_MDNS,
    1883: PortBucket.WELL_KNOWN_MQTT,
    8883: PortBucket.WELL_KNOWN_MQTT,
}

_RFC1918 = (
    ipaddress.ip_network("10.0.0.0/8"),
    ipaddress.ip_network("172.16.0.0/12"),
    ipaddress.ip_network("192.168.0.0/16"),
)


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str    # numeric | categorical | binary
    units: str


@dataclass(frozen=True)
class FeatureSchema:
    version: str
    columns: tuple[ColumnSpec, ...]

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(names) != len(set(names)):
            raise ValueError("duplicate column names in schema")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def column(self, name: str) -> ColumnSpec:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    def subset(self, names) -> "FeatureSchema":
        wanted = set(names)
        return FeatureSchema(self.version,
                             tuple(c for c in self.columns if c.name in wanted))


def _stat_block(prefix: str, units: str):
    return tuple(ColumnSpec(f"{prefix}_{stat}", NUMERIC, units)
                 for stat in ("mean", "std", "min", "max"))


FULL_SCHEMA_V1 = FeatureSchema(SCHEMA_VERSION, (
    ColumnSpec("dur", NUMERIC, "s"),
    ColumnSpec("pkts_fwd", NUMERIC, "count"),
    ColumnSpec("pkts_bwd", NUMERIC, "count"),
    ColumnSpec("pkts_tot", NUMERIC, "count"),
    ColumnSpec("bytes_fwd", NUMERIC, "bytes"),
    ColumnSpec("bytes_bwd", NUMERIC, "bytes"),
    ColumnSpec("bytes_tot", NUMERIC, "bytes"),
    *_stat_block("pktlen_fwd", "bytes"),
    *_stat_block("pktlen_bwd", "bytes"),
    *_stat_block("iat_fwd", "s"),
    *_stat_block("iat_bwd", "s"),
    ColumnSpec("iat_tot_mean", NUMERIC, "s"),
    ColumnSpec("iat_tot_std", NUMERIC, "s"),
    ColumnSpec("pps", NUMERIC, "pkt/s"),
    ColumnSpec("bps", NUMERIC, "B/s"),
    ColumnSpec("down_up_pkt_ratio", NUMERIC, ""),
    ColumnSpec("down_up_byte_ratio", NUMERIC, ""),
    ColumnSpec("syn_cnt", NUMERIC, "count"),
    ColumnSpec("ack_cnt", NUMERIC, "count"),
    ColumnSpec("fin_cnt", NUMERIC, "count"),
    ColumnSpec("rst_cnt", NUMERIC, "count"),
    ColumnSpec("psh_cnt", NUMERIC, "count"),
    ColumnSpec("urg_cnt", NUMERIC, "count"),
    ColumnSpec("ece_cnt", NUMERIC, "count"),
    ColumnSpec("cwr_cnt", NUMERIC, "count"),
    ColumnSpec("payload_entropy_fwd", NUMERIC, "bits/byte"),
    ColumnSpec("payload_entropy_bwd", NUMERIC, "bits/byte"),
    ColumnSpec("payload_nonzero_frac_fwd", NUMERIC, "[0,1]"),
    ColumnSpec("payload_nonzero_frac_bwd", NUMERIC, "[0,1]"),
    ColumnSpec("has_fwd", BINARY, ""),
    ColumnSpec("has_bwd", BINARY, ""),
    ColumnSpec("proto", CATEGORICAL, ""),
    ColumnSpec("sport_bucket", CATEGORICAL, ""),
    ColumnSpec("dport_bucket", CATEGORICAL, ""),
    ColumnSpec("internal_dst", BINARY, ""),
))

assert len(FULL_SCHEMA_V1.columns) == 47


@dataclass
class FeatureVector:
    """Feature values keyed by column name, plus row provenance."""

    values: dict
    session_id: str
    flow_index: int
    window_s: float

    def as_row(self, schema: FeatureSchema):
        return [self.values[name] for name in schema.names]


def payload_entropy(data: bytes) -> float:
    """Shannon entropy of the byte-value distribution, in bits per byte."""
    if not data:
        raise EmptyInput("entropy of empty byte sequence")
    counts: dict[int, int] = {}
    for b in data:
        counts[b] = counts.get(b, 0) + 1
    n = len(data)
    return -sum((c / n) * math.log2(c / n) for c in counts.values())


def port_bucket(port: int) -> PortBucket:
    """Map a port number to its well-known / system / registered / ephemeral bucket."""
    if not 0 <= port <= 65535:
        raise ValueError(f"port out of range: {port}")
    bucket = _PORT_TABLE.get(port)
    if bucket is not None:
        return bucket
    if port <= 1023:
        return PortBucket.OTHER_SYSTEM
    if port <= 49151:
        return PortBucket.REGISTERED
    return PortBucket.EPHEMERAL


def is_internal_dst(ip: str) -> bool:
    """True iff the address sits in an RFC1918 private IPv4 range."""
    addr = ipaddress.ip_address(ip)
    if addr.version != 4:
        return False
    return any(addr in net for net in _RFC1918)


def _mean(xs):
    return sum(xs) / len(xs) if xs else MISSING


def _pop_std(xs):
    # population std; Missing below 2 samples to avoid a false zero-variance signal
    if len(xs) < 2:
        return MISSING
    m = sum(xs) / len(xs)
    return math.sqrt(sum((x - m) ** 2 for x in xs) / len(xs))


def _stats(xs) -> dict:
    return {
        "mean": _mean(xs),
        "std": _pop_std(xs),
        "min": min(xs) if xs else MISSING,
        "max": max(xs) if xs else MISSING,
    }


def _gaps(timestamps):
    return [b - a for a, b in zip(timestamps, timestamps[1:])]


def _payload_corpus(packets):
    corpus = bytearray()
    for pkt in packets:
        if len(corpus) >= PAYLOAD_CORPUS_LIMIT:
            break
        corpus.extend(pkt.payload_prefix[:PAYLOAD_CORPUS_LIMIT - len(corpus)])
    return bytes(corpus)


def extract_features(flow: Flow, window_s: float = 0.0, flow_index: int = 0) -> FeatureVector:
    """Compute the full v1 feature vector for one flow.

    Forward is the initiator's direction; down/up ratios read backward
    over forward. Payload statistics run over the concatenated captured
    payload of a direction, capped at the first 512 bytes.
    """
    if not flow.packets:
        raise EmptyFlow(f"flow {flow.key} has no packets")

    fwd = [p for p in flow.packets if flow.is_forward(p)]
    bwd = [p for p in flow.packets if not flow.is_forward(p)]

    dur = flow.last_ts - flow.first_ts
    pkts_fwd, pkts_bwd = len(fwd), len(bwd)
    bytes_fwd = sum(p.wire_len for p in fwd)
    bytes_bwd = sum(p.wire_len for p in bwd)
    pkts_tot = pkts_fwd + pkts_bwd
    bytes_tot = bytes_fwd + bytes_bwd

    values = {
        "dur": dur,
        "pkts_fwd": float(pkts_fwd),
        "pkts_bwd": float(pkts_bwd),
        "pkts_tot": float(pkts_tot),
        "bytes_fwd": float(bytes_fwd),
        "bytes_bwd": float(bytes_bwd),
        "bytes_tot": float(bytes_tot),
    }

    for prefix, pkts in (("pktlen_fwd", fwd), ("pktlen_bwd", bwd)):
        stats = _stats([float(p.wire_len) for p in pkts])
        for stat, value in stats.items():
            values[f"{prefix}_{stat}"] = value

    for prefix, pkts in (("iat_fwd", fwd), ("iat_bwd", bwd)):
        stats = _stats(_gaps([p.ts for p in pkts]))
        for stat, value in stats.items():
            values[f"{prefix}_{stat}"] = value

    tot_gaps = _gaps([p.ts for p in flow.packets])
    values["iat_tot_mean"] = _mean(tot_gaps)
    values["iat_tot_std"] = _pop_std(tot_gaps)

    values["pps"] = pkts_tot / dur if dur > 0 else MISSING
    values["bps"] = bytes_tot / dur if dur > 0 else MISSING
    values["down_up_pkt_ratio"] = pkts_bwd / pkts_fwd if pkts_fwd > 0 else MISSING
    values["down_up_byte_ratio"] = bytes_bwd / bytes_fwd if bytes_fwd > 0 else MISSING

    for name, bit in (("syn", SYN), ("ack", ACK), ("fin", FIN), ("rst", RST),
                      ("psh", PSH), ("urg", URG), ("ece", ECE), ("cwr", CWR)):
        values[f"{name}_cnt"] = float(sum(1 for p in flow.packets if p.tcp_flags & bit))

    for suffix, pkts in (("fwd", fwd), ("bwd", bwd)):
        corpus = _payload_corpus(pkts)
        if corpus:
            values[f"payload_entropy_{suffix}"] = payload_entropy(corpus)
            values[f"payload_nonzero_frac_{suffix}"] = (
                sum(1 for b in corpus if b != 0) / len(corpus))
        else:
            values[f"payload_entropy_{suffix}"] = MISSING
            values[f"payload_nonzero_frac_{suffix}"] = MISSING

    values["has_fwd"] = pkts_fwd > 0
    values["has_bwd"] = pkts_bwd > 0
    values["proto"] = proto_name(flow.key.proto)
    values["sport_bucket"] = port_bucket(flow.initiator[1]).name
    values["dport_bucket"] = port_bucket(flow.responder[1]).name
    values["internal_dst"] = is_internal_dst(flow.responder[0])

    return FeatureVector(values, flow.session_id, flow_index, window_s)


def categorical_code(name: str, value: str) -> int:
    """Stable integer code for a categorical value, used in numeric matrices."""
    if name in ("sport_bucket", "dport_bucket"):
        return PortBucket[value].value
    if name == "proto":
        if value == "TCP":
            return 6
        if value == "UDP":
            return 17
        return int(value.removeprefix("OTHER_"))
    raise KeyError(f"not a categorical column: {name}")


def categorical_name(name: str, code: int) -> str:
    if name in ("sport_bucket", "dport_bucket"):
        return PortBucket(code).name
    if name == "proto":
        return proto_name(code)
    raise KeyError(f"not a categorical column: {name}")
