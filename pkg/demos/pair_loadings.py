# Loadings of a shared latent from two-variable cumulants.
#
# Two observed variables that share a single non-Gaussian latent,
#   x = a L + S1,  y = b L + S2,
# have cross cumulants cum(x^n, y^m) = a^n b^m kappa(L).  The ratio of two
# fourth-order cross cumulants times the covariance isolates a^2, so the
# loadings come out without ever seeing L.

import numpy as np

from cumlingam import cum_ab, estimate_pair
from cumlingam.cumulants import center
from cumlingam.mixing import select_order

rng = np.random.default_rng(0)
n = 200_000
L, S1, S2 = rng.standard_normal((3, n)) ** 3 / np.sqrt(15)  # unit-variance cubed Gaussians
a, b = 0.5, 0.7
x, y = a * L + S1, b * L + S2
x, y = x - x.mean(), y - y.mean()

# the cross cumulants carry the loadings
for i, j in [(1, 1), (2, 2), (1, 3)]:
    est = cum_ab(x, y, i, j, with_se=True)
    print(f"cum(x^{i}, y^{j}) = {est.value:8.4f}  (se {est.standard_error:.4f})")

pc = estimate_pair(x, y)
print("estimated loadings:", round(pc.alpha_i, 3), round(pc.alpha_j, 3), "true:", a, b)

# the product of the loadings is the covariance, which is far less noisy than
# either loading; heavy tails make the fourth-order ratio the weak link
print("a*b estimate:", round(pc.alpha_i * pc.alpha_j, 4), "true:", a * b)

# order selection picks the lowest cumulant order that clears the noise gate
print("order used (n, m):", select_order(x, y))
