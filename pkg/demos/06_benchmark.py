"""
Closed form against power iteration
===================================

Times the kernel formulas and a 20-step power iteration on one small
and one large layer shape (single-threaded).
"""

from convnorm.bench import bench_shape

for shape in [(3, 3, 32, 32), (5, 5, 256, 128)]:
    res = bench_shape(shape, input_hw=(32, 32), runs=50, slow_runs=2, power_iters=20)
    for method, t in res.timings.items():
        print(f"{res.row()['shape']:>12s} {method:10s} median {t.median:.2e}s")
    print("   ratios:", {k: round(v) for k, v in res.ratios.items()})
    if res.notes:
        print("   notes:", res.notes)
