"""Classic pcap reading/writing and packet dissection.

Supports the classic pcap container (magic 0xA1B2C3D4 little or big
endian) with Ethernet framing. IPv4 and IPv6 packets become
:class:`PacketRecord`; anything else (ARP, LLDP, ...) is skipped and
counted. No pcapng, no live capture, no IP defragmentation.
"""

from __future__ import annotations

import ipaddress
import struct
from dataclasses import dataclass, field

from .errors import MalformedCapture

PCAP_MAGIC = 0xA1B2C3D4
GLOBAL_HEADER_LEN = 24
RECORD_HEADER_LEN = 16
ETHERTYPE_IPV4 = 0x0800
ETHERTYPE_IPV6 = 0x86DD
PROTO_TCP = 6
PROTO_UDP = 17

PAYLOAD_PREFIX_LIMIT = 512

# TCP flag bits, low to high
FIN = 0x01
SYN = 0x02
RST = 0x04
PSH = 0x08
ACK = 0x10
URG = 0x20
ECE = 0x40
CWR = 0x80

FLAG_NAMES = (
    ("syn", SYN), ("ack", ACK), ("fin", FIN), ("rst", RST),
    ("psh", PSH), ("urg", URG), ("ece", ECE), ("cwr", CWR),
)

# IPv6 extension headers we can walk past (8-octet length units after the
# first 8 bytes, except Fragment which is fixed 8 bytes).
_IPV6_EXT = {0, 43, 44, 60}


@dataclass(frozen=True)
class PacketRecord:
    """One observed IP packet, reduced to what feature extraction needs."""

    ts: float                  # seconds since capture epoch, usec precision
    src_ip: str
    dst_ip: str
    src_port: int              # 0 for portless protocols
    dst_port: int
    proto: int                 # IP protocol number (6 TCP, 17 UDP, other n)
    tcp_flags: int             # bitmask, 0 unless proto == TCP
    wire_len: int              # original frame length on the wire
    payload_prefix: bytes      # first <=512 transport payload bytes captured
    payload_len: int           # full transport payload length


@dataclass
class CaptureResult:
    records: list[PacketRecord] = field(default_factory=list)
    skipped_non_ip: int = 0
    truncated_tail: int = 0    # 1 if the final record was cut short


def proto_name(proto: int) -> str:
    if proto == PROTO_TCP:
        return "TCP"
    if proto == PROTO_UDP:
        return "UDP"
    return f"OTHER_{proto}"


def flag_names(mask: int) -> tuple[str, ...]:
    return tuple(name for name, bit in FLAG_NAMES if mask & bit)


def _canonical_ip(raw: bytes) -> str:
    return ipaddress.ip_address(raw).compressed


def _dissect_ipv4(ip: bytes, captured_ip_len: int):
    """Return (src, dst, proto, transport_bytes, transport_len, first_fragment)."""
    if captured_ip_len < 20:
        return None
    ihl = (ip[0] & 0x0F) * 4
    if ihl < 20 or captured_ip_len < ihl:
        return None
    total_len = struct.unpack_from("!H", ip, 2)[0]
    frag_field = struct.unpack_from("!H", ip, 6)[0]
    frag_offset = frag_field & 0x1FFF
    proto = ip[9]
    src = _canonical_ip(ip[12:16])
    dst = _canonical_ip(ip[16:20])
    transport_len = max(total_len - ihl, 0)
    transport = ip[ihl:captured_ip_len]
    return src, dst, proto, transport, transport_len, frag_offset == 0


def _dissect_ipv6(ip: bytes, captured_ip_len: int):
    if captured_ip_len < 40:
        return None
    payload_len = struct.unpack_from("!H", ip, 4)[0]
    nxt = ip[6]
    src = _canonical_ip(ip[8:24])
    dst = _canonical_ip(ip[24:40])
    offset = 40
    remaining = payload_len
    first_fragment = True
    while nxt in _IPV6_EXT:
        if captured_ip_len < offset + 8:
            return None
        if nxt == 44:  # fragment header
            frag_off = struct.unpack_from("!H", ip, offset + 2)[0] >> 3
            first_fragment = frag_off == 0
            ext_len = 8
        else:
            ext_len = (ip[offset + 1] + 1) * 8
        nxt = ip[offset]
        offset += ext_len
        remaining -= ext_len
    transport = ip[offset:captured_ip_len]
    return src, dst, nxt, transport, max(remaining, 0), first_fragment


def _make_record(ts, wire_len, src, dst, proto, transport, transport_len, first_frag):
    src_port = dst_port = 0
    tcp_flags = 0
    payload = b""
    payload_len = transport_len
    if not first_frag:
        # later fragment: transport header lives in the first fragment only
        return PacketRecord(ts, src, dst, 0, 0, proto, 0, wire_len, b"", transport_len)
    if proto == PROTO_TCP and len(transport) >= 20:
        src_port, dst_port = struct.unpack_from("!HH", transport, 0)
        data_off = (transport[12] >> 4) * 4
        tcp_flags = transport[13]
        payload_len = max(transport_len - data_off, 0)
        payload = transport[data_off:data_off + min(payload_len, PAYLOAD_PREFIX_LIMIT)]
    elif proto == PROTO_UDP and len(transport) >= 8:
        src_port, dst_port, udp_len = struct.unpack_from("!HHH", transport, 0)
        payload_len = max(min(udp_len, transport_len) - 8, 0)
        payload = transport[8:8 + min(payload_len, PAYLOAD_PREFIX_LIMIT)]
    elif proto in (PROTO_TCP, PROTO_UDP):
        # captured slice too short for the transport header
        payload_len = transport_len
    else:
        # portless protocol: the whole IP payload is the transport payload
        payload = transport[:min(transport_len, PAYLOAD_PREFIX_LIMIT)]
    return PacketRecord(ts, src, dst, src_port, dst_port, proto, tcp_flags,
                        wire_len, bytes(payload), payload_len)


def parse_capture(data: bytes) -> CaptureResult:
    """Parse classic pcap bytes into packet records.

    Raises MalformedCapture on a bad magic number, a truncated global
    header, or a non-Ethernet link type. A truncated final record is
    counted, not raised.
    """
    if len(data) < GLOBAL_HEADER_LEN:
        raise MalformedCapture("truncated global header")
    magic = struct.unpack_from("<I", data, 0)[0]
    if magic == PCAP_MAGIC:
        endian = "<"
    elif struct.unpack_from(">I", data, 0)[0] == PCAP_MAGIC:
        endian = ">"
    else:
        raise MalformedCapture(f"bad magic 0x{magic:08X}")
    linktype = struct.unpack_from(endian + "I", data, 20)[0]
    if linktype != 1:
        raise MalformedCapture(f"unsupported link type {linktype} (Ethernet only)")

    result = CaptureResult()
    rec_fmt = endian + "IIII"
    pos = GLOBAL_HEADER_LEN
    n = len(data)
    while pos < n:
        if n - pos < RECORD_HEADER_LEN:
            result.truncated_tail = 1
            break
        ts_sec, ts_usec, incl_len, orig_len = struct.unpack_from(rec_fmt, data, pos)
        pos += RECORD_HEADER_LEN
        if n - pos < incl_len:
            result.truncated_tail = 1
            break
        frame = data[pos:pos + incl_len]
        pos += incl_len
        ts = ts_sec + ts_usec * 1e-6
        rec = _dissect_frame(ts, frame, orig_len)
        if rec is None:
            result.skipped_non_ip += 1
        else:
            result.records.append(rec)
    return result


def _dissect_frame(ts: float, frame: bytes, orig_len: int) -> PacketRecord | None:
    if len(frame) < 14:
        return None
    ethertype = struct.unpack_from("!H", frame, 12)[0]
    ip = frame[14:]
    if ethertype == ETHERTYPE_IPV4:
        parsed = _dissect_ipv4(ip, len(ip))
    elif ethertype == ETHERTYPE_IPV6:
        parsed = _dissect_ipv6(ip, len(ip))
    else:
        return None
    if parsed is None:
        return None
    src, dst, proto, transport, transport_len, first_frag = parsed
    return _make_record(ts, orig_len, src, dst, proto, transport,
                        transport_len, first_frag)


class PcapWriter:
    """Builds classic little-endian pcap bytes (Ethernet link type)."""

    def __init__(self):
        self._chunks = [struct.pack("<IHHiIII", PCAP_MAGIC, 2, 4, 0, 0, 65535, 1)]

    def add_frame(self, ts: float, frame: bytes):
        ts_sec = int(ts)
        ts_usec = int(round((ts - ts_sec) * 1e6))
        if ts_usec >= 1_000_000:
            ts_sec += 1
            ts_usec -= 1_000_000
        self._chunks.append(
            struct.pack("<IIII", ts_sec, ts_usec, len(frame), len(frame)))
        self._chunks.append(frame)

    def getvalue(self) -> bytes:
        return b"".join(self._chunks)


def _ipv4_checksum(header: bytes) -> int:
    total = 0
    for i in range(0, len(header), 2):
        total += (header[i] << 8) + header[i + 1]
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return ~total & 0xFFFF


def build_ipv4_frame(src_ip: str, dst_ip: str, proto: int, transport: bytes,
                     src_mac: bytes = b"\x02\x00\x00\x00\x00\x01",
                     dst_mac: bytes = b"\x02\x00\x00\x00\x00\x02") -> bytes:
    """Assemble an Ethernet II frame carrying an IPv4 packet."""
    total_len = 20 + len(transport)
    header = bytearray(struct.pack(
        "!BBHHHBBH4s4s",
        0x45, 0, total_len, 0, 0, 64, proto, 0,
        ipaddress.IPv4Address(src_ip).packed,
        ipaddress.IPv4Address(dst_ip).packed))
    struct.pack_into("!H", header, 10, _ipv4_checksum(header))
    return dst_mac + src_mac + struct.pack("!H", ETHERTYPE_IPV4) + bytes(header) + transport


def build_udp(src_port: int, dst_port: int, payload: bytes) -> bytes:
    return struct.pack("!HHHH", src_port, dst_port, 8 + len(payload), 0) + payload


def build_tcp(src_port: int, dst_port: int, flags: int, payload: bytes = b"",
              seq: int = 0, ack: int = 0) -> bytes:
    header = struct.pack("!HHIIBBHHH", src_port, dst_port, seq, ack,
                         5 << 4, flags, 65535, 0, 0)
    return header + payload
