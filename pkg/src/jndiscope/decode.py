"""Multi-layer payload decoding.

Every payload is expanded into a set of candidate text views by breadth-first
application of reversible transforms (hex recovery, charset ladder, percent
decoding, HTML entities, backslash escapes, Log4j placeholder collapse,
Base64 with gzip/zlib).  Each candidate carries the ordered chain of
transforms that produced it.  The best candidate is chosen by a coherence
score plus a semantic boost for jndi/ldap markers.
"""

from __future__ import annotations

import base64
import binascii
import gzip
import html
import re
import zlib
from collections import deque
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Iterable
from urllib.parse import unquote_to_bytes

from .signals import has_jndi_signal, has_ldap_signal

CHARSET_LADDER = ("utf-8", "utf-16-le", "utf-16-be", "latin-1", "ascii")

GZIP_MAGIC = b"\x1f\x8b"


@dataclass(frozen=True)
class DecodeConfig:
    max_depth: int = 5
    placeholder_iterations: int = 16
    base64_min_run: int = 16
    hex_density: float = 0.8
    # base64/decompression products below this printable ratio are dropped
    min_printable: float = 0.8
    jndi_weight: float = 2.0
    ldap_weight: float = 1.0
    max_candidates: int = 256

    def __post_init__(self):
        if self.max_depth < 1 or self.placeholder_iterations < 1 or self.base64_min_run < 1:
            raise ValueError("decode limits must be positive")
        if self.max_candidates < 1:
            raise ValueError("max_candidates must be positive")


DEFAULT_CONFIG = DecodeConfig()


@dataclass(frozen=True)
class DecodeCandidate:
    text: str
    transform_chain: tuple[str, ...] = ()
    printable_ratio: float = 0.0
    score: float = 0.0
    parse_loss: bool = False

    @property
    def depth(self) -> int:
        return len(self.transform_chain)


@dataclass
class DecodedPayload:
    raw: bytes
    candidates: list[DecodeCandidate]
    best: int
    valid_transform_count: int
    byte_length: int

    @property
    def best_candidate(self) -> DecodeCandidate:
        return self.candidates[self.best]


def _is_printable(ch: str) -> bool:
    return ch.isprintable() or ch in "\t\r\n"


def printable_ratio(text: str) -> float:
    """Share of printable characters; tab, CR and LF count as printable."""
    if not text:
        return 0.0
    return sum(map(_is_printable, text)) / len(text)


def bytes_to_text(data: bytes) -> str:
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError:
        return data.decode("latin-1")


# -- hex recovery and charset ladder ---------------------------------------

_HEX_DIGITS = frozenset("0123456789abcdefABCDEF")
_HEX_SEPARATORS = re.compile(r"[\s:]+")


def hex_recover(raw: bytes, density: float = DEFAULT_CONFIG.hex_density) -> tuple[bytes, bool] | None:
    """Parse a hex-text byte stream, dropping pairs that are not valid hex.

    Returns ``(bytes, parse_loss)``, or None when ``raw`` does not look like
    hex text (fewer than four digits or digit density below ``density``).
    """
    text = _HEX_SEPARATORS.sub("", raw.decode("latin-1"))
    if text[:2] in ("0x", "0X"):
        text = text[2:]
    digits = sum(ch in _HEX_DIGITS for ch in text)
    if digits < 4 or digits / len(text) < density:
        return None
    out = bytearray()
    loss = len(text) % 2 == 1
    for i in range(0, len(text) - 1, 2):
        pair = text[i:i + 2]
        if pair[0] in _HEX_DIGITS and pair[1] in _HEX_DIGITS:
            out.append(int(pair, 16))
        else:
            loss = True
    return bytes(out), loss


def _ladder(data: bytes) -> list[tuple[str, str]]:
    views = []
    for codec in CHARSET_LADDER:
        try:
            views.append((codec, data.decode(codec)))
        except UnicodeDecodeError:
            continue
    return views


def recover_text(raw: bytes, config: DecodeConfig = DEFAULT_CONFIG) -> list[DecodeCandidate]:
    """Charset-ladder views of ``raw``, preceded by hex-recovered views when it looks like hex text."""
    out = []
    recovered = hex_recover(raw, config.hex_density)
    if recovered is not None:
        data, loss = recovered
        for codec, text in _ladder(data):
            out.append(make_candidate(text, ("hex-recover", f"charset:{codec}"), config, parse_loss=loss))
    for codec, text in _ladder(raw):
        out.append(make_candidate(text, (f"charset:{codec}",), config))
    return out


# -- textual expansions ----------------------------------------------------

def url_decode(text: str) -> str:
    """Percent-decode once; malformed escapes stay verbatim."""
    if "%" not in text:
        return text
    return bytes_to_text(unquote_to_bytes(text))


def html_decode(text: str) -> str:
    if "&" not in text:
        return text
    return html.unescape(text)


_ESCAPE_RE = re.compile(r"\\u([0-9a-fA-F]{4})|\\x([0-9a-fA-F]{2})|\\U([0-9a-fA-F]{8})")


def escape_decode(text: str) -> str:
    """Expand \\uXXXX, \\UXXXXXXXX and \\xNN escapes; anything else stays."""
    if "\\" not in text:
        return text

    def repl(m: re.Match) -> str:
        value = int(m.group(1) or m.group(2) or m.group(3), 16)
        return chr(value) if value <= 0x10FFFF else m.group(0)

    out = _ESCAPE_RE.sub(repl, text)
    try:
        # join UTF-16 surrogate pairs produced by consecutive \u escapes
        return out.encode("utf-16", "surrogatepass").decode("utf-16")
    except UnicodeError:
        return out


# -- Log4j placeholder collapse --------------------------------------------

_DEFAULT_LOOKUP = re.compile(r"\$\{[^{}$]*?:-([^{}$]*)\}")
_CASE_LOOKUP = re.compile(r"\$\{(lower|upper):([^{}$:]*)\}", re.IGNORECASE)
_TOKEN = re.compile(r"\$\{[^{}]*\}|.", re.DOTALL)


def _placeholder_value(token: str) -> str:
    body = token[2:-1]
    if ":" not in body:
        return ""
    value = body.rsplit(":", 1)[1].strip("'\"")
    return value if len(value) == 1 else ""


def _collapse_split_jndi(text: str) -> str:
    """Drop or resolve placeholders that split the letters j, n, d, i."""
    if "${" not in text:
        return text
    tokens = _TOKEN.findall(text)
    out = []
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        first = tok if len(tok) == 1 else _placeholder_value(tok)
        if first.lower() != "j":
            out.append(tok)
            i += 1
            continue
        letters = [first]
        used_placeholder = len(tok) > 1
        pos = i + 1
        while len(letters) < 4 and pos < len(tokens):
            nxt = tokens[pos]
            need = "jndi"[len(letters)]
            if len(nxt) == 1:
                if nxt.lower() != need:
                    break
                letters.append(nxt)
            else:
                value = _placeholder_value(nxt)
                used_placeholder = True
                if value.lower() == need:
                    letters.append(value)
                elif value:
                    break
            pos += 1
        if len(letters) == 4 and used_placeholder:
            out.append("".join(letters))
            i = pos
        else:
            out.append(tok)
            i += 1
    return "".join(out)


def collapse_placeholders(text: str, max_iterations: int = DEFAULT_CONFIG.placeholder_iterations) -> tuple[str, int]:
    """Rewrite Log4j lookup obfuscation; return the text and the number of rewriting passes."""
    passes = 0
    for _ in range(max_iterations):
        new = _DEFAULT_LOOKUP.sub(lambda m: m.group(1), text)
        new = _CASE_LOOKUP.sub(
            lambda m: m.group(2).lower() if m.group(1).lower() == "lower" else m.group(2).upper(), new)
        new = _collapse_split_jndi(new)
        if new == text:
            break
        text = new
        passes += 1
    return text, passes


@lru_cache(maxsize=4096)
def normalize_obfuscation(text: str, max_iterations: int = DEFAULT_CONFIG.placeholder_iterations) -> str:
    """Collapse ``${x:-c}`` defaults, case lookups and jndi-splitting placeholders, innermost first."""
    return collapse_placeholders(text, max_iterations)[0]


# -- base64 and compression ------------------------------------------------

_B64_RUN = re.compile(r"[A-Za-z0-9+/]+={0,2}")


def _b64_decode(run: str) -> bytes | None:
    body = run.rstrip("=")
    if len(body) % 4 == 1:
        return None
    if len(run) != len(body) and len(run) % 4:
        return None  # padding present but wrong
    try:
        return base64.b64decode(body + "=" * (-len(body) % 4), validate=True)
    except (binascii.Error, ValueError):
        return None


def base64_runs(text: str, min_run: int = DEFAULT_CONFIG.base64_min_run) -> list[tuple[str, bytes]]:
    """Decodable base64 substrings of ``text``.

    Each maximal alphabet run is tried whole and then from just after each
    ``/`` it contains, since path separators share the alphabet.
    """
    found = []
    for m in _B64_RUN.finditer(text):
        run = m.group(0)
        if len(run) < min_run:
            continue
        starts = [0] + [i + 1 for i, ch in enumerate(run) if ch == "/"]
        for s in starts:
            sub = run[s:]
            if len(sub.rstrip("=")) < min_run:
                break
            data = _b64_decode(sub)
            if data:
                found.append((sub, data))
    return found


def decompress(data: bytes) -> tuple[str, bytes] | None:
    """Return ``(tag, bytes)`` if ``data`` is gzip or zlib compressed and inflates cleanly."""
    if data[:2] == GZIP_MAGIC:
        try:
            return "gunzip", gzip.decompress(data)
        except (OSError, EOFError, zlib.error):
            return None
    if len(data) >= 2 and data[0] & 0x0F == 8 and data[0] >> 4 <= 7 and (data[0] << 8 | data[1]) % 31 == 0:
        try:
            return "inflate", zlib.decompress(data)
        except zlib.error:
            return None
    return None


def _text_views(data: bytes) -> list[tuple[str, tuple[str, ...]]]:
    """Default text view of decoded bytes, plus UTF-16 views when they differ."""
    views = [(bytes_to_text(data), ())]
    for codec in ("utf-16-le", "utf-16-be"):
        if len(data) % 2:
            break
        try:
            views.append((data.decode(codec), (f"charset:{codec}",)))
        except UnicodeDecodeError:
            pass
    return views


# -- candidate bookkeeping -------------------------------------------------

def score_text(text: str, config: DecodeConfig = DEFAULT_CONFIG) -> float:
    score = printable_ratio(text)
    if has_jndi_signal(normalize_obfuscation(text, config.placeholder_iterations)):
        score += config.jndi_weight
    if has_ldap_signal(text):
        score += config.ldap_weight
    return score


def make_candidate(text: str, chain: tuple[str, ...] = (), config: DecodeConfig = DEFAULT_CONFIG,
                   parse_loss: bool = False) -> DecodeCandidate:
    return DecodeCandidate(text, tuple(chain), printable_ratio(text), score_text(text, config), parse_loss)


def score_candidate(candidate: DecodeCandidate, config: DecodeConfig = DEFAULT_CONFIG) -> float:
    return score_text(candidate.text, config)


# A step maps a text to (new text, tags appended) pairs.
Step = Callable[[str, DecodeConfig], Iterable[tuple[str, tuple[str, ...]]]]


def _simple(tag: str, fn: Callable[[str], str]) -> Step:
    def step(text: str, config: DecodeConfig):
        new = fn(text)
        if new != text:
            yield new, (tag,)
    return step


def _placeholder_step(text: str, config: DecodeConfig):
    if "${" in text:
        new = normalize_obfuscation(text, config.placeholder_iterations)
        if new != text:
            yield new, ("placeholder-collapse",)


def _base64_step(text: str, config: DecodeConfig):
    for _run, data in base64_runs(text, config.base64_min_run):
        tags: tuple[str, ...] = ("base64",)
        inflated = decompress(data)
        if inflated is not None:
            tags += (inflated[0],)
            data = inflated[1]
        for view, extra in _text_views(data):
            if printable_ratio(view) >= config.min_printable:
                yield view, tags + extra


URL_STEP = _simple("url", url_decode)
HTML_STEP = _simple("html-entity", html_decode)
ESCAPE_STEP = _simple("escape", escape_decode)
EXPANSION_STEPS: tuple[Step, ...] = (URL_STEP, HTML_STEP, ESCAPE_STEP)
ALL_STEPS: tuple[Step, ...] = EXPANSION_STEPS + (_placeholder_step, _base64_step)


@dataclass
class _Ledger:
    config: DecodeConfig
    candidates: list[DecodeCandidate] = field(default_factory=list)
    seen: set[str] = field(default_factory=set)

    def add(self, cand: DecodeCandidate) -> bool:
        if cand.text in self.seen or len(self.candidates) >= self.config.max_candidates:
            return False
        if cand.depth > self.config.max_depth:
            return False
        self.seen.add(cand.text)
        self.candidates.append(cand)
        return True

    def explore(self, start: int, steps: tuple[Step, ...]) -> None:
        """Breadth-first expansion of every candidate from index ``start`` on."""
        queue = deque(range(start, len(self.candidates)))
        while queue:
            parent = self.candidates[queue.popleft()]
            for step in steps:
                for text, tags in step(parent.text, self.config):
                    chain = parent.transform_chain + tags
                    if len(chain) > self.config.max_depth:
                        continue
                    if self.add(make_candidate(text, chain, self.config, parent.parse_loss)):
                        queue.append(len(self.candidates) - 1)


def expand_encodings(text: str, max_depth: int = DEFAULT_CONFIG.max_depth,
                     config: DecodeConfig | None = None) -> list[DecodeCandidate]:
    """The input plus every distinct percent/HTML/escape expansion reachable within ``max_depth`` steps."""
    config = _with_depth(config, max_depth)
    ledger = _Ledger(config)
    ledger.add(make_candidate(text, (), config))
    ledger.explore(0, EXPANSION_STEPS)
    return ledger.candidates


def base64_and_decompress(text: str, max_depth: int = DEFAULT_CONFIG.max_depth,
                          config: DecodeConfig | None = None) -> list[DecodeCandidate]:
    """New candidates from base64 runs in ``text`` (inflated when compressed), expanded recursively."""
    config = _with_depth(config, max_depth)
    ledger = _Ledger(config)
    ledger.seen.add(text)
    for new, tags in _base64_step(text, config):
        ledger.add(make_candidate(new, tags, config))
    ledger.explore(0, EXPANSION_STEPS + (_base64_step,))
    return ledger.candidates


def _with_depth(config: DecodeConfig | None, max_depth: int) -> DecodeConfig:
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    config = config or DEFAULT_CONFIG
    if config.max_depth != max_depth:
        config = replace(config, max_depth=max_depth)
    return config


def select_best(candidates: list[DecodeCandidate]) -> int:
    """Highest score; ties go to the fewest transforms, then the earliest candidate."""
    return min(range(len(candidates)),
               key=lambda i: (-candidates[i].score, candidates[i].depth, i))


def decode_payload(raw: bytes, config: DecodeConfig = DEFAULT_CONFIG) -> DecodedPayload:
    """Run the full pipeline over one reassembled payload.

    Candidate 0 is always the zero-transform view (UTF-8, else Latin-1).
    ``valid_transform_count`` is the number of further candidates, i.e.
    transformations that produced new valid text.
    """
    if not raw:
        raise ValueError("cannot decode an empty payload")
    ledger = _Ledger(config)
    ledger.add(make_candidate(bytes_to_text(raw), (), config))
    inflated = decompress(raw)
    if inflated is not None:
        tag, data = inflated
        for view, extra in _text_views(data):
            if printable_ratio(view) >= config.min_printable:
                ledger.add(make_candidate(view, (tag,) + extra, config))
    for cand in recover_text(raw, config):
        ledger.add(cand)
    ledger.explore(0, ALL_STEPS)
    cands = ledger.candidates
    return DecodedPayload(
        raw=raw,
        candidates=cands,
        best=select_best(cands),
        valid_transform_count=len(cands) - 1,
        byte_length=len(raw),
    )
