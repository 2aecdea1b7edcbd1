"""Traceroute extension that detects and reveals MPLS tunnels.

The package has two halves:

* the measurement side: probe engine, TTL fingerprinting, tunnel
  indicator/trigger classification and hidden-LSR revelation
  (:mod:`tunneltrace.engine`, :mod:`tunneltrace.fingerprint`,
  :mod:`tunneltrace.classifier`, :mod:`tunneltrace.revelation`);
* a deterministic MPLS forwarding simulator used as an offline backend and
  as the test bench (:mod:`tunneltrace.sim`).
"""

from tunneltrace.model import (
    AnnotatedTrace,
    HopRecord,
    IndicatorCode,
    LabelStackEntry,
    ProbeAccounting,
    RevelationState,
    RouterBrand,
    Thresholds,
    TunnelAnnotation,
    TunnelClass,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotatedTrace",
    "HopRecord",
    "IndicatorCode",
    "LabelStackEntry",
    "ProbeAccounting",
    "RevelationState",
    "RouterBrand",
    "Thresholds",
    "TunnelAnnotation",
    "TunnelClass",
    "__version__",
]
