#!/usr/bin/env python3
"""Smoke test for the rsgrove_py extension module.

Build the extension first:

    cargo build -p rsgrove-py --features extension-module

then run this script with the same interpreter family the build found:

    python3 python/smoke_test.py

The script stages the built cdylib under an importable name, so no maturin
install is needed for a quick check.
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parents[1]


def stage_module() -> None:
    candidates = [
        REPO / "target" / profile / name
        for profile in ("release", "debug")
        for name in ("librsgrove_py.so", "rsgrove_py.so", "librsgrove_py.dylib")
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit(
            "extension not built; run: cargo build -p rsgrove-py --features extension-module"
        )
    stage = Path(tempfile.mkdtemp(prefix="rsgrove-py-"))
    shutil.copy2(built, stage / "rsgrove_py.so")
    sys.path.insert(0, str(stage))


def main() -> None:
    stage_module()
    import rsgrove_py as rg

    # validity primitives
    assert rg.is_valid_size(28, 9, 10)
    assert not rg.is_valid_size(14, 9, 10)
    assert not rg.is_valid_size(62, 9, 10)
    assert rg.min_valid_size(9, 10) == 81.0
    mb = rg.min_sample_bytes(0.95, 0.01, 128_000_000)
    assert abs(mb - 23_000_000) / 23_000_000 < 0.05, mb

    # the 28-point split lands exactly on {9, 9, 10}
    points = [[i * 0.37, math.sin(i * 0.73)] for i in range(28)]
    scheme = rg.grove_partition(points, 9.0, 10.0, rho=0.0, disjoint=True)
    sizes = sorted(p[3] for p in scheme.partitions())
    assert sizes == [9.0, 9.0, 10.0], sizes
    assert scheme.partition_count == 3
    assert scheme.dim == 2

    # the router sends every sample point to a live partition and the JSON
    # round trip preserves the scheme
    ids = {scheme.lookup(p) for p in points}
    assert ids == {0, 1, 2}, ids
    again = rg.Scheme.from_json(scheme.to_json())
    assert [again.lookup(p) for p in points] == [scheme.lookup(p) for p in points]

    # replication covers straddling boxes in disjoint mode
    whole = scheme.replicate([-100.0, -100.0], [100.0, 100.0])
    assert sorted(whole) == [0, 1, 2]

    # weighted splitting with the two-point correction
    corrected = rg.grove_partition(
        [[float(i), 0.5] for i in range(5)],
        450.0,
        550.0,
        weights=[200.0] * 5,
        rho=0.0,
    )
    assert sorted(p[3] for p in corrected.partitions()) == [500.0, 500.0]

    # baselines
    grid = [[float(x), float(y)] for x in range(8) for y in range(8)]
    tiles = rg.str_tile_partition(grid, 16.0)
    assert tiles.partition_count == 4
    kd = rg.kdtree_median_partition(grid, 16.0)
    assert kd.partition_count == 4
    runs = rg.curve_run_partition(grid, 16.0, curve="hilbert")
    assert runs.partition_count == 4
    assert sum(p[3] for p in runs.partitions()) == 64.0

    # curve keys: unit-domain corner cells
    assert rg.curve_key([0.0, 0.0], [0.0, 0.0], [1.0, 1.0], 1) == 0
    assert rg.curve_key([0.9, 0.9], [0.0, 0.0], [1.0, 1.0], 1, curve="zorder") == 3

    # metrics on the two-partition fixture
    mib = 1 << 20
    report = rg.quality_metrics(
        [
            ([0.0, 0.0], [2.0, 2.0], 100 * mib, 10),
            ([1.0, 1.0], [3.0, 3.0], 200 * mib, 10),
        ],
        128 * mib,
    )
    assert report["q1_total_volume"] == 12.0
    assert report["q2_total_overlap"] == 6.0
    assert report["q3_total_margin"] == 12.0
    assert report["q4_block_utilization"] == 300.0 / 384.0
    assert report["q5_size_stddev"] == 50.0 * mib

    print("rsgrove_py smoke test: all checks passed")


if __name__ == "__main__":
    main()
