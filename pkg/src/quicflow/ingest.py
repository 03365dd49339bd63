"""Trace readers: the canonical CSV interchange format and classic pcap.

CSV layout (UTF-8, LF line endings)::

    timestamp_s,direction,length_bytes,flow_id
    0.000125,C2S,1350,flow-7

Only classic libpcap files with an Ethernet link layer are accepted; pcap-ng
is rejected outright.  From pcap we keep UDP datagrams over IPv4/IPv6 and
report the IP total length as the packet length.
"""

from __future__ import annotations

import csv
import enum
import ipaddress
import logging
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import ParseError, SchemaError, UnsupportedFormat
from .flowcore import Direction, PacketRecord

log = logging.getLogger(__name__)

CSV_HEADER = ("timestamp_s", "direction", "length_bytes", "flow_id")

PCAP_MAGIC_US = 0xA1B2C3D4
PCAP_MAGIC_NS = 0xA1B23C4D
PCAPNG_MAGIC = 0x0A0D0D0A
LINKTYPE_ETHERNET = 1

ETH_IPV4 = 0x0800
ETH_IPV6 = 0x86DD
ETH_VLAN = (0x8100, 0x88A8)
IPPROTO_TCP = 6
IPPROTO_UDP = 17
# IPv6 extension headers we walk over to reach the transport header
_IPV6_EXT = {0, 43, 60}


class TraceFormat(enum.Enum):
    CSV = "csv"
    PCAP = "pcap"


@dataclass(frozen=True)
class TraceSource:
    format: TraceFormat
    path: Path
    client_hint: Optional[str] = None


# --------------------------------------------------------------------- CSV

def read_csv_trace(path) -> list[PacketRecord]:
    path = Path(path)
    records = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: missing header row") from None
        if tuple(h.strip() for h in header) != CSV_HEADER:
            raise SchemaError(f"{path}: expected header {','.join(CSV_HEADER)}, got {','.join(header)}")
        for row in reader:
            line = reader.line_num
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 4:
                raise ParseError(f"expected 4 fields, got {len(row)}", line)
            ts, direction, length, flow_id = row
            try:
                t = float(ts)
                n = int(length)
            except ValueError:
                raise ParseError(f"non-numeric field in {row!r}", line) from None
            if not math.isfinite(t) or t < 0:
                raise ParseError(f"invalid timestamp {ts!r}", line)
            if n < 0:
                raise ParseError(f"negative length {length!r}", line)
            try:
                d = Direction.parse(direction)
            except ValueError as exc:
                raise ParseError(str(exc), line) from None
            records.append(PacketRecord(t, d, n, flow_id))
    return records


def write_csv_trace(path, records: Iterable[PacketRecord]) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in records:
            writer.writerow((repr(float(r.timestamp)), r.direction.name, int(r.length), r.flow_id))


# -------------------------------------------------------------------- pcap

@dataclass
class PcapStats:
    packets: int = 0
    udp: int = 0
    non_udp: int = 0
    truncated: int = 0
    foreign: int = 0
    other: int = 0

    @property
    def skipped(self) -> int:
        return self.packets - self.udp


@dataclass
class _Endian:
    prefix: str
    nanos: bool


def _read_global_header(buf: bytes) -> _Endian:
    if len(buf) < 24:
        raise UnsupportedFormat("file shorter than a pcap global header")
    (magic_le,) = struct.unpack("<I", buf[:4])
    (magic_be,) = struct.unpack(">I", buf[:4])
    if PCAPNG_MAGIC in (magic_le, magic_be):
        raise UnsupportedFormat("pcap-ng files are not supported; convert to classic pcap")
    for prefix, magic in (("<", magic_le), (">", magic_be)):
        if magic in (PCAP_MAGIC_US, PCAP_MAGIC_NS):
            endian = _Endian(prefix, magic == PCAP_MAGIC_NS)
            break
    else:
        raise UnsupportedFormat(f"unknown magic 0x{magic_be:08x}")
    linktype = struct.unpack(endian.prefix + "I", buf[20:24])[0] & 0x0FFFFFFF
    if linktype != LINKTYPE_ETHERNET:
        raise UnsupportedFormat(f"link type {linktype} is not Ethernet")
    return endian


def _parse_frame(frame: bytes):
    """Return (src_ip, dst_ip, proto, sport, dport, ip_len) or raise ValueError
    for truncation; returns None for non-IP frames."""
    if len(frame) < 14:
        raise ValueError("short ethernet header")
    off = 12
    ethertype = struct.unpack(">H", frame[off:off + 2])[0]
    off += 2
    while ethertype in ETH_VLAN:
        if len(frame) < off + 4:
            raise ValueError("short vlan tag")
        ethertype = struct.unpack(">H", frame[off + 2:off + 4])[0]
        off += 4
    if ethertype == ETH_IPV4:
        if len(frame) < off + 20:
            raise ValueError("short ipv4 header")
        ihl = (frame[off] & 0x0F) * 4
        total = struct.unpack(">H", frame[off + 2:off + 4])[0]
        proto = frame[off + 9]
        src = ipaddress.IPv4Address(frame[off + 12:off + 16])
        dst = ipaddress.IPv4Address(frame[off + 16:off + 20])
        l4 = off + ihl
    elif ethertype == ETH_IPV6:
        if len(frame) < off + 40:
            raise ValueError("short ipv6 header")
        payload = struct.unpack(">H", frame[off + 4:off + 6])[0]
        total = payload + 40
        proto = frame[off + 6]
        src = ipaddress.IPv6Address(frame[off + 8:off + 24])
        dst = ipaddress.IPv6Address(frame[off + 24:off + 40])
        l4 = off + 40
        while proto in _IPV6_EXT:
            if len(frame) < l4 + 2:
                raise ValueError("short ipv6 extension header")
            proto, hdr_len = frame[l4], (frame[l4 + 1] + 1) * 8
            l4 += hdr_len
    else:
        return None
    sport = dport = 0
    if proto in (IPPROTO_UDP, IPPROTO_TCP):
        if len(frame) < l4 + 4:
            raise ValueError("short transport header")
        sport, dport = struct.unpack(">HH", frame[l4:l4 + 4])
    return src, dst, proto, sport, dport, total


def flow_key(src, sport: int, dst, dport: int, proto: int = IPPROTO_UDP) -> str:
    """Canonical 5-tuple key: endpoints sorted so both directions agree."""
    a = (ipaddress.ip_address(src), int(sport))
    b = (ipaddress.ip_address(dst), int(dport))
    lo, hi = sorted((a, b), key=lambda ep: (ep[0].version, int(ep[0]), ep[1]))
    name = {IPPROTO_UDP: "udp", IPPROTO_TCP: "tcp"}.get(proto, str(proto))
    return f"{name}|{lo[0]}|{lo[1]}|{hi[0]}|{hi[1]}"


def parse_flow_key(key: str):
    """Inverse of flow_key; returns None for keys that are not 5-tuples."""
    parts = key.split("|")
    if len(parts) != 5:
        return None
    try:
        return (
            parts[0],
            ipaddress.ip_address(parts[1]),
            int(parts[2]),
            ipaddress.ip_address(parts[3]),
            int(parts[4]),
        )
    except ValueError:
        return None


def parse_pcap(path, client_hint: Optional[str]) -> tuple[list[PacketRecord], PcapStats]:
    if client_hint is None:
        raise ValueError("pcap ingestion needs a client address to resolve directions")
    client = ipaddress.ip_address(client_hint)
    buf = Path(path).read_bytes()
    endian = _read_global_header(buf)
    rec_hdr = struct.Struct(endian.prefix + "IIII")
    divisor = 1e9 if endian.nanos else 1e6
    stats = PcapStats()
    records = []
    off = 24
    while off < len(buf):
        if len(buf) - off < rec_hdr.size:
            stats.packets += 1
            stats.truncated += 1
            break
        ts_sec, ts_frac, incl_len, _orig = rec_hdr.unpack_from(buf, off)
        off += rec_hdr.size
        stats.packets += 1
        frame = buf[off:off + incl_len]
        off += incl_len
        if len(frame) < incl_len:
            stats.truncated += 1
            break
        try:
            parsed = _parse_frame(frame)
        except ValueError:
            stats.truncated += 1
            continue
        if parsed is None:
            stats.other += 1
            continue
        src, dst, proto, sport, dport, total = parsed
        if proto != IPPROTO_UDP:
            stats.non_udp += 1
            continue
        if src == client:
            direction = Direction.C2S
        elif dst == client:
            direction = Direction.S2C
        else:
            stats.foreign += 1
            continue
        stats.udp += 1
        ts = ts_sec + ts_frac / divisor
        records.append(PacketRecord(ts, direction, total, flow_key(src, sport, dst, dport)))
    return records, stats


def read_pcap_trace(source: TraceSource) -> list[PacketRecord]:
    records, stats = parse_pcap(source.path, source.client_hint)
    if stats.skipped:
        log.warning(
            "%s: kept %d of %d packets (non-udp=%d truncated=%d foreign=%d other=%d)",
            source.path, stats.udp, stats.packets, stats.non_udp,
            stats.truncated, stats.foreign, stats.other,
        )
    return records


def read_trace(source: TraceSource) -> list[PacketRecord]:
    if source.format is TraceFormat.CSV:
        return read_csv_trace(source.path)
    return read_pcap_trace(source)


# ------------------------------------------------------------ pcap writing

def build_frame(src: str, dst: str, sport: int, dport: int, payload: int,
                proto: int = IPPROTO_UDP) -> bytes:
    """Ethernet frame carrying a UDP (or minimal TCP) segment with a zero payload."""
    s, d = ipaddress.ip_address(src), ipaddress.ip_address(dst)
    if proto == IPPROTO_UDP:
        l4 = struct.pack(">HHHH", sport, dport, 8 + payload, 0)
    else:
        l4 = struct.pack(">HHIIBBHHH", sport, dport, 0, 0, 5 << 4, 0x10, 65535, 0, 0)
    l4 += bytes(payload)
    if s.version == 4:
        ip = struct.pack(">BBHHHBBH4s4s", 0x45, 0, 20 + len(l4), 0, 0, 64, proto, 0,
                         s.packed, d.packed)
        ethertype = ETH_IPV4
    else:
        ip = struct.pack(">IHBB16s16s", 6 << 28, len(l4), proto, 64, s.packed, d.packed)
        ethertype = ETH_IPV6
    eth = bytes(6) + bytes.fromhex("020000000001") + struct.pack(">H", ethertype)
    return eth + ip + l4


def write_pcap(path, packets: Sequence[tuple[float, bytes]], byteorder: str = "<",
               linktype: int = LINKTYPE_ETHERNET) -> None:
    """Write (timestamp, frame) pairs as a classic microsecond pcap file."""
    out = [struct.pack(byteorder + "IHHiIII", PCAP_MAGIC_US, 2, 4, 0, 0, 65535, linktype)]
    for ts, frame in packets:
        sec = int(ts)
        usec = int(round((ts - sec) * 1e6))
        if usec == 1_000_000:
            sec, usec = sec + 1, 0
        out.append(struct.pack(byteorder + "IIII", sec, usec, len(frame), len(frame)))
        out.append(frame)
    Path(path).write_bytes(b"".join(out))
