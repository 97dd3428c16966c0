"""A kernel built from hat functions, sum_n 2^-n h(x - c_n) h(y - c_n).

Each hat contributes 2/3 (its square) plus 2 (its slope squared) to the
H^1 imbedding trace, so 20 hats give (16/3)(1 - 2^-20), below 10.
The paths are Lipschitz with kinks at the hat corners. The midpoint
quadrature error at those kinks is O(h), so the refinement ladder only
settles once the base grid resolves them (base n >= 512 here).

    python demos/03_hat_series.py
"""
from gpsobolev import AnalysisConfig, analyze
from gpsobolev import kernels as K
from gpsobolev.grid import build_grid
from gpsobolev.spectral import rkhs_imbedding_trace

k = K.hat_series(K.dyadic_centers(20), [2.0**-n for n in range(20)])
exact = 16 / 3 * (1 - 2.0**-20)
for n in (512, 1024, 4096):
    t = rkhs_imbedding_trace(k, 1, build_grid(k.default_box(), n))
    print(f"n={n:5d}  trace={t:.6f}  exact={exact:.6f}")

for base_n in (128, 512):
    r = analyze(k, 1, 2.0, AnalysisConfig(base_n=base_n, n_paths=1000))
    print(f"base n={base_n}: W^1,2 -> {r.overall}")

# one derivative too many: second differences across a kink grow like 1/h,
# but only once the grid resolves the spacing between neighbouring kinks
for base_n in (512, 1024):
    r = analyze(k, 2, 2.0, AnalysisConfig(base_n=base_n, monte_carlo=False))
    rec = r.record((2,))
    series = ", ".join(f"{v:.1f}" for v in rec.trace.refinement_series)
    print(f"base n={base_n}: W^2,2 -> {r.overall}  alpha=(2) {rec.classification} [{series}]")
