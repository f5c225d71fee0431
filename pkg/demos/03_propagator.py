# %% [markdown]
# # Heat-kernel propagators on the half-line
#
# The propagator P(eps, lam) integrates the mollified heat kernel, together with its
# mirror image, over scales t in [eps, lam]. At eps = 0 it extends to two branches
# on the diagonal.

# %%
import numpy as np

from tqmbv.bf_theory import bf_space
from tqmbv.halfline_kernels import Branch, HalfLineChart, splitting_theta

space = bf_space(1)
chart = HalfLineChart.from_space(space)
print("K+ =\n", chart.K_plus, "\nK- =\n", chart.K_minus)

# %% The two branches differ by -K/2 on the diagonal; at the corner they take the values -K-/2 and +K+/2.
for x in (0.0, 0.3):
    c1 = chart.propagator_matrix(0.0, 1.0, x, x, Branch.C1)
    c2 = chart.propagator_matrix(0.0, 1.0, x, x, Branch.C2)
    print(f"x={x}: jump + K/2 = {np.abs(c1 - c2 + chart.K / 2).max():.1e}")
print("corner C1 =\n", chart.propagator_matrix(0.0, 1.0, 0.0, 0.0, Branch.C1))

# %% As eps -> 0 the regularized propagator tends to the extended one off the diagonal,
# to the branch average on the diagonal (zero here, the diagonal scalar is odd), and is 0 at the corner.
off = chart.propagator_matrix(0.0, 1.0, 0.3, 0.33, Branch.C1)
avg = 0.5 * (chart.propagator_matrix(0.0, 1.0, 0.3, 0.3, Branch.C1) + chart.propagator_matrix(0.0, 1.0, 0.3, 0.3, Branch.C2))
for eps in (1e-2, 1e-4, 1e-6):
    d_off = np.abs(chart.propagator_matrix(eps, 1.0, 0.3, 0.33) - off).max()
    d_diag = np.abs(chart.propagator_matrix(eps, 1.0, 0.3, 0.3) - avg).max()
    print(f"eps={eps:g}: off-diagonal {d_off:.2e}, diagonal {d_diag:.2e}, corner {np.abs(chart.propagator_matrix(eps, 1.0, 0, 0)).max():.1e}")

# %% The splitting theta_t(l') equals l' at the boundary and follows erfc on the plateau.
# In the glue zone of the cutoff the slope term takes over, and beyond r2 the splitting is zero.
lp = np.array([0.0, 1.0])
for x in (0.0, 0.01, 0.03, 0.08, 0.2):
    print(f"theta_0.01(l')({x}) = {splitting_theta(chart, space, 0.01, lp, x)}")
