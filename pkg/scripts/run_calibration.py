#!/usr/bin/env python3
"""Sweep the FRPLA/RTLA trigger thresholds and print the ROC tables.

Runs the built-in calibration corpus clean and with injected return-path
asymmetry, printing one TPR/FPR row per threshold pair plus the operating
point used as the default configuration.
"""

from __future__ import annotations

import sys

from tunneltrace.calibrate import calibration_corpus, evaluate, roc_sweep
from tunneltrace.model import Thresholds


def show(title: str, noise: tuple[int, float, int] | None) -> None:
    corpus = calibration_corpus(noise=noise)
    positives = sum(case.hides_tunnel for case in corpus)
    print(f"== {title}: {positives} tunnels, "
          f"{len(corpus) - positives} plain paths")
    print(f"{'t_frpla':>8} {'t_rtla':>7} {'tpr':>6} {'fpr':>6}")
    for point in roc_sweep(corpus):
        print(f"{point.t_frpla:>8} {point.t_rtla:>7} "
              f"{point.tpr:>6.2f} {point.fpr:>6.2f}")
    defaults = Thresholds()
    chosen = evaluate(corpus, defaults.frpla, defaults.rtla)
    print(f"default operating point ({defaults.frpla}, {defaults.rtla}): "
          f"tpr={chosen.tpr:.2f} fpr={chosen.fpr:.2f}")
    print()


def main() -> int:
    show("clean corpus", None)
    show("30% of paths detoured by 1..3 return hops", (7, 0.3, 3))
    return 0


if __name__ == "__main__":
    sys.exit(main())
