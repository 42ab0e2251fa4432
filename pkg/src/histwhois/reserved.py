"""Reserved ASN ranges and special-use prefixes.

ASN ranges follow the private/reserved allocations (AS 0, AS_TRANS,
documentation and private-use blocks, IANA reserved, and the 32-bit
private/last ranges). Prefixes are the IANA special-use registries; they
are statically seeded into the trie and reported as reserved on lookup.
"""

from __future__ import annotations

# Inclusive (low, high) pairs.
RESERVED_ASN_RANGES: tuple[tuple[int, int], ...] = (
    (0, 0),
    (23456, 23456),
    (64496, 64511),
    (64512, 65534),
    (65535, 65535),
    (65536, 65551),
    (65552, 131071),
    (4200000000, 4294967294),
    (4294967295, 4294967295),
)

MAX_ASN = 4294967295


def asn_is_reserved(asn: int, ranges: tuple[tuple[int, int], ...] = RESERVED_ASN_RANGES) -> bool:
    for low, high in ranges:
        if low <= asn <= high:
            return True
    return False


SPECIAL_USE_V4: tuple[tuple[str, str], ...] = (
    ("0.0.0.0/8", "This host on this network"),
    ("10.0.0.0/8", "Private-Use (RFC1918)"),
    ("100.64.0.0/10", "Shared Address Space"),
    ("127.0.0.0/8", "Loopback"),
    ("169.254.0.0/16", "Link Local"),
    ("172.16.0.0/12", "Private-Use (RFC1918)"),
    ("192.0.0.0/24", "IETF Protocol Assignments"),
    ("192.0.2.0/24", "Documentation (TEST-NET-1)"),
    ("192.88.99.0/24", "6to4 Relay Anycast"),
    ("192.168.0.0/16", "Private-Use (RFC1918)"),
    ("198.18.0.0/15", "Benchmarking"),
    ("198.51.100.0/24", "Documentation (TEST-NET-2)"),
    ("203.0.113.0/24", "Documentation (TEST-NET-3)"),
    ("224.0.0.0/4", "Multicast"),
    ("240.0.0.0/4", "Reserved"),
    ("255.255.255.255/32", "Limited Broadcast"),
)

SPECIAL_USE_V6: tuple[tuple[str, str], ...] = (
    ("::/128", "Unspecified Address"),
    ("::1/128", "Loopback Address"),
    ("::ffff:0:0/96", "IPv4-mapped Address"),
    ("64:ff9b::/96", "IPv4-IPv6 Translation"),
    ("100::/64", "Discard-Only Address Block"),
    ("2001::/23", "IETF Protocol Assignments"),
    ("2001:db8::/32", "Documentation"),
    ("2002::/16", "6to4"),
    ("fc00::/7", "Unique-Local"),
    ("fe80::/10", "Link-Local Unicast"),
    ("ff00::/8", "Multicast"),
)

SPECIAL_USE_PREFIXES: tuple[tuple[str, str], ...] = SPECIAL_USE_V4 + SPECIAL_USE_V6
