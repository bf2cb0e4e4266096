#!/usr/bin/env python
"""Freeze metric values on deterministic cube pairs into tests/fixtures/.

Run once when the metric definitions change on purpose; the regression test
then guards against drift.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from pandenoise import metrics

OUT = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "metrics_regression.json"


def pair(seed: int, shape=(24, 20, 6)):
    rng = np.random.Generator(np.random.PCG64(seed))
    ref = 0.1 + 0.8 * rng.random(shape)
    x = ref + 0.05 * rng.standard_normal(shape)
    return x, ref


def main() -> None:
    cases = []
    for seed in (1, 2, 3):
        x, ref = pair(seed)
        rep = metrics.evaluate(x, ref)
        cases.append({"seed": seed, "shape": list(x.shape), "psnr": rep.psnr, "ssim": rep.ssim,
                      "ergas": rep.ergas, "sam": rep.sam})
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(cases, indent=2))
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
