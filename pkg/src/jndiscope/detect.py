"""Log4Shell signature matching, callback extraction and severity ladder.

Signatures are tiered:

1. direct ``${jndi:<scheme>://...}`` lookups (closing brace optional),
2. fragmented ``j n d i`` tokens split by punctuation, whitespace or
   placeholders, which also mark the payload as obfuscated,
3. bare ``ldap://`` URIs outside any jndi lookup (weak evidence only).

Severity is assigned first-match from L1 (weaponised) down to L5 (residual).
"""

from __future__ import annotations

import enum
import ipaddress
import re
from dataclasses import dataclass, field

from .decode import (
    DEFAULT_CONFIG,
    DecodeConfig,
    DecodedPayload,
    decode_payload,
    normalize_obfuscation,
)
from .signals import (
    ENDPOINT,
    FRAGMENTED_JNDI,
    JNDI_EXPR,
    LDAP_URI,
    SCHEMES,
)

DEFAULT_PORTS = {
    "ldap": 389,
    "ldaps": 636,
    "rmi": 1099,
    "dns": 53,
    "iiop": 535,
    "http": 80,
    "https": 443,
}

_FRAGMENTED_EXPR = re.compile(
    FRAGMENTED_JNDI.pattern
    + rf"\s*:\s*(?:(?P<scheme>[a-z][a-z0-9+.\-]*)://)?(?P<endpoint>{ENDPOINT})",
    re.IGNORECASE,
)


class Severity(str, enum.Enum):
    L1 = "L1"  # command execution / downloader
    L2 = "L2"  # out-of-band callback verification
    L3 = "L3"  # DNS enumeration
    L4 = "L4"  # basic jndi probe
    L5 = "L5"  # residual / unclassified

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class JndiExpression:
    scheme: str | None
    endpoint_text: str
    normalized: str | None = None
    raw_scheme: str | None = None
    fragmented: bool = False

    @property
    def unknown_scheme(self) -> bool:
        return self.raw_scheme is not None and self.scheme is None


@dataclass(frozen=True)
class CallbackEndpoint:
    host: str
    is_ip_literal: bool
    port: int
    path: str
    scheme: str


class EndpointError(ValueError):
    pass


@dataclass
class SignatureMatch:
    expressions: list[JndiExpression] = field(default_factory=list)
    obfuscated: bool = False
    weak: list[str] = field(default_factory=list)
    tier1_candidates: list[int] = field(default_factory=list)
    any_candidates: list[int] = field(default_factory=list)
    fragmented: bool = False

    @property
    def has_jndi(self) -> bool:
        return bool(self.expressions) or self.fragmented


@dataclass
class DetectionResult:
    expressions: list[JndiExpression]
    endpoints: list[CallbackEndpoint]
    obfuscated: bool
    weak_only: bool
    matched_candidate: int
    printable_ratio: float
    valid_transform_count: int
    byte_length: int
    weak_matches: list[str] = field(default_factory=list)
    endpoint_errors: list[str] = field(default_factory=list)
    fragmented: bool = False
    severity: Severity | None = None

    @property
    def tier(self) -> str:
        """Strongest signature tier that fired: direct, fragmented or weak."""
        if self.weak_only:
            return "weak"
        if any(not e.fragmented for e in self.expressions):
            return "direct"
        return "fragmented"


def _expression(scheme: str | None, endpoint: str, fragmented: bool) -> JndiExpression:
    raw = scheme.lower() if scheme else None
    known = raw if raw in SCHEMES else None
    normalized = f"${{jndi:{known}://{endpoint}}}" if known and endpoint else None
    return JndiExpression(known, endpoint, normalized, raw, fragmented)


def match_signatures(decoded: DecodedPayload, placeholder_iterations: int = 16) -> SignatureMatch:
    match = SignatureMatch()
    seen: set[tuple] = set()

    def add(expr: JndiExpression) -> None:
        ident = (expr.raw_scheme, expr.endpoint_text)
        if ident not in seen:
            seen.add(ident)
            match.expressions.append(expr)

    literal_in_raw = bool(decoded.candidates and JNDI_EXPR.search(decoded.candidates[0].text))
    for index, cand in enumerate(decoded.candidates):
        text = cand.text
        norm = normalize_obfuscation(text, placeholder_iterations)
        hit = False

        direct = list(JNDI_EXPR.finditer(norm))
        if direct:
            hit = True
            match.tier1_candidates.append(index)
            for m in direct:
                add(_expression(m.group("scheme"), m.group("endpoint"), False))
            if not JNDI_EXPR.search(text):
                match.obfuscated = True  # placeholders hid the lookup

        for m in _FRAGMENTED_EXPR.finditer(text):
            if m.group("s1") or m.group("s2") or m.group("s3"):
                hit = True
                match.fragmented = match.obfuscated = True
                add(_expression(m.group("scheme"), m.group("endpoint"), True))
        for m in FRAGMENTED_JNDI.finditer(text):
            if m.group("s1") or m.group("s2") or m.group("s3"):
                hit = True
                match.fragmented = match.obfuscated = True
        if "jndi" in norm.lower() and "jndi" not in text.lower():
            hit = True
            match.fragmented = match.obfuscated = True

        spans = [m.span() for m in direct]
        for m in LDAP_URI.finditer(norm):
            if not any(s <= m.start() < e for s, e in spans):
                hit = True
                if m.group(0) not in match.weak:
                    match.weak.append(m.group(0))
        if hit:
            match.any_candidates.append(index)

    if match.expressions and not literal_in_raw:
        match.obfuscated = True  # only encoding layers revealed the lookup
    return match


def extract_callback(expr: JndiExpression) -> CallbackEndpoint:
    if not expr.scheme or not expr.endpoint_text:
        raise EndpointError("expression has no scheme or endpoint")
    hostport, _, path = expr.endpoint_text.partition("/")
    hostport = hostport.rpartition("@")[2]
    host, port = hostport, DEFAULT_PORTS[expr.scheme]
    m = re.fullmatch(r"(.*):(\d+)", hostport)
    if m:
        host, port = m.group(1), int(m.group(2))
        if not 0 < port <= 0xFFFF:
            raise EndpointError(f"port out of range in {expr.endpoint_text!r}")
    if not host:
        raise EndpointError(f"no host in {expr.endpoint_text!r}")
    return CallbackEndpoint(host, _is_ipv4(host), port, path, expr.scheme)


def _is_ipv4(host: str) -> bool:
    try:
        ipaddress.IPv4Address(host)
    except ValueError:
        return False
    return True


def detect_payload(decoded: DecodedPayload, placeholder_iterations: int = 16) -> DetectionResult | None:
    """Signature scan over all candidates; None when nothing matched."""
    match = match_signatures(decoded, placeholder_iterations)
    if not (match.has_jndi or match.weak):
        return None
    endpoints, errors = [], []
    for expr in match.expressions:
        if not expr.scheme:
            continue
        try:
            ep = extract_callback(expr)
        except EndpointError as exc:
            errors.append(str(exc))
            continue
        if ep not in endpoints:
            endpoints.append(ep)
    matched = (match.tier1_candidates or match.any_candidates)[0]
    best = decoded.best_candidate
    return DetectionResult(
        expressions=match.expressions,
        endpoints=endpoints,
        obfuscated=match.obfuscated,
        weak_only=not match.has_jndi,
        matched_candidate=matched,
        printable_ratio=best.printable_ratio,
        valid_transform_count=decoded.valid_transform_count,
        byte_length=decoded.byte_length,
        weak_matches=match.weak,
        endpoint_errors=errors,
        fragmented=match.fragmented,
    )


# -- severity ----------------------------------------------------------------

DEFAULT_VERIFICATION_HOSTS = ("interact.sh", "dnslog.", "oast.", "burpcollaborator", "canarytokens")
COMMAND_MARKERS = ("wget ", "curl ", "/bin/sh", "chmod ", "powershell")
PATH_MARKERS = ("command/base64/", "/exploit", "/basic/command")


@dataclass(frozen=True)
class SeverityRules:
    verification_hosts: tuple[str, ...] = DEFAULT_VERIFICATION_HOSTS
    command_markers: tuple[str, ...] = COMMAND_MARKERS
    path_markers: tuple[str, ...] = PATH_MARKERS


DEFAULT_RULES = SeverityRules()


def has_weaponization_markers(result: DetectionResult | None, decoded: DecodedPayload,
                              rules: SeverityRules = DEFAULT_RULES) -> bool:
    for cand in decoded.candidates:
        if "base64" in cand.transform_chain:
            low = cand.text.lower()
            if any(marker in low for marker in rules.command_markers):
                return True
    if result is not None:
        for expr in result.expressions:
            path = "/" + expr.endpoint_text.lower()
            if any(marker in path for marker in rules.path_markers):
                return True
    return False


def classify_severity(result: DetectionResult | None, decoded: DecodedPayload,
                      rules: SeverityRules = DEFAULT_RULES, dst_ip: str | None = None) -> Severity:
    """First matching level from L1 to L5.

    ``dst_ip`` is the attacked telescope address; a callback path that embeds
    it is treated as a verification token (L2).
    """
    if has_weaponization_markers(result, decoded, rules):
        return Severity.L1
    if result is None or result.weak_only:
        return Severity.L5
    for ep in result.endpoints:
        host = ep.host.lower()
        if any(h in host for h in rules.verification_hosts):
            return Severity.L2
        if dst_ip and re.search(rf"(?<![\d.]){re.escape(dst_ip)}(?![\d.])", ep.path):
            return Severity.L2
    if any(e.scheme == "dns" for e in result.expressions):
        return Severity.L3
    known = [e for e in result.expressions if not e.unknown_scheme]
    if known or result.fragmented:
        return Severity.L4
    return Severity.L5


@dataclass
class Verdict:
    decoded: DecodedPayload
    detection: DetectionResult | None

    @property
    def detected(self) -> bool:
        return self.detection is not None

    @property
    def severity(self) -> Severity | None:
        return self.detection.severity if self.detection else None


def analyze(raw: bytes, config: DecodeConfig = DEFAULT_CONFIG, rules: SeverityRules = DEFAULT_RULES,
            dst_ip: str | None = None) -> Verdict:
    """Decode, detect and classify one payload."""
    decoded = decode_payload(raw, config)
    result = detect_payload(decoded, config.placeholder_iterations)
    if result is not None:
        result.severity = classify_severity(result, decoded, rules, dst_ip)
    return Verdict(decoded, result)
