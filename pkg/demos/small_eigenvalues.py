"""Small eigenvalues of A(x, t): two velocity families and their spacing.

Near x = 4 at t = 1.5 the eigenvalues of A(x, t) close to zero move with
two distinct x-velocities.  The zero crossings of each family are spaced by
2 pi eps / f, with f = u2B - u1B for the fast family and u0B for the slow one.

Run:  python3 demos/small_eigenvalues.py
"""

import numpy as np

from bo_ensemble import microlocal as ml
from bo_ensemble.burgers import caustics
from bo_ensemble.ensemble import quantize
from bo_ensemble.profile import lorentzian

u0 = lorentzian()
x0, t, eps = 4.0, 1.5, 2.0 ** -7
ens = quantize(u0, eps)
s = ml.small_eigs(ens, x0, t)
print(f"predicted velocities: slow {s.v_slow:.4f}, fast {s.v_fast:.4f}, split {s.v_split:.4f}")
for lab in (ml.FAST, ml.SLOW, ml.AMBIGUOUS):
    ax = s.alpha_x[s.labels == lab]
    if ax.size:
        print(f"{lab:>9}: {ax.size:3d} eigenvalues, median alpha_x {np.median(ax):.4f}")

cr = ml.zero_crossings(ens, t, caustics(u0, t))
bs = ml.bohr_sommerfeld(u0, x0, t, eps, cr)
print(f"\npredicted spacings: fast {bs.dx_plus:.5f}, slow {bs.dx_minus:.5f}")
for lab in (ml.FAST, ml.SLOW):
    r = ml.spacing_ratios(cr, u0, lab)
    r = r[np.isfinite(r)]
    print(f"{lab:>9}: {r.size} spacings, median measured/predicted {np.median(r):.4f}")
