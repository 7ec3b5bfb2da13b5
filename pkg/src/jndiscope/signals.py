"""Regular expressions shared by the decoder's scorer and the detector."""

import re

SCHEMES = ("ldap", "ldaps", "rmi", "dns", "iiop", "http", "https")

# a lookup placeholder with no nested braces, e.g. ${k8} or ${::-n}
PLACEHOLDER = r"\$\{[^{}]*\}"

# one-or-more characters of lookup syntax, punctuation or whitespace between
# the letters of an obfuscated "jndi"
_SEP = rf"(?:{PLACEHOLDER}|[^\w]|_)"
FRAGMENTED_JNDI = re.compile(
    rf"j(?P<s1>{_SEP}{{0,12}})n(?P<s2>{_SEP}{{0,12}})d(?P<s3>{_SEP}{{0,12}})i",
    re.IGNORECASE,
)

# ${jndi:scheme://endpoint} with a tolerated missing closing brace
ENDPOINT = rf"(?:{PLACEHOLDER}|[^}}\s\"'<>])*"
JNDI_EXPR = re.compile(
    rf"\$\{{\s*jndi\s*:\s*(?:(?P<scheme>[a-z][a-z0-9+.\-]*)://)?(?P<endpoint>{ENDPOINT})\}}?",
    re.IGNORECASE,
)

LDAP_URI = re.compile(r"ldap://[^\s\"'<>{}]+", re.IGNORECASE)


def has_fragmented_jndi(text: str) -> bool:
    """True when j, n, d, i appear split by at least one separator."""
    for m in FRAGMENTED_JNDI.finditer(text):
        if m.group("s1") or m.group("s2") or m.group("s3"):
            return True
    return False


def has_jndi_signal(text: str) -> bool:
    """Literal or fragmented jndi token anywhere in ``text``."""
    return "jndi" in text.lower() or has_fragmented_jndi(text)


def has_ldap_signal(text: str) -> bool:
    return "ldap://" in text.lower()
