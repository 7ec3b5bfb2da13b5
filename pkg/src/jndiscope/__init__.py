"""Log4Shell exploit traffic analysis for network telescope captures.

Pipeline stages live in their own modules: ``ingest`` (pcap reading, geo
lookup, daily partitions), ``reassembly`` (TCP streams), ``decode`` and
``detect`` (deobfuscation, signatures, severity), ``infra`` and ``temporal``
(aggregate statistics) and ``pipeline``/``cli`` (end-to-end runs, reports).
"""

__version__ = "0.1.0"
