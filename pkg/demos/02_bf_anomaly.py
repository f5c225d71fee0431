# %% [markdown]
# # One-dimensional BF theory: flatness and the boundary anomaly
#
# The boundary interaction 1/2 f^{ab}_c B^c A_a A_b is flat for every Lie algebra.
# The quantum master equation on the interval then fails exactly by the trace of ad.

# %%
from tqmbv.bf_theory import BUILTIN, anomaly_closed_form, build_bf_theory, builtin_algebra, unimodularity_vector
from tqmbv.bvbfv_check import bfv_nilpotency, check_mqme_interval, check_qme_interval
from tqmbv.weyl_moyal import moyal

for name in sorted(BUILTIN):
    g = builtin_algebra(name)
    th = build_bf_theory(g)
    flat = moyal(th.ctx0, th.I_boundary, th.I_boundary).is_zero()
    qme = check_qme_interval(th)
    end1 = qme.residual("endpoint 1")
    closed = anomaly_closed_form(g, th.ctx0)
    print(f"{name:12s} flat={flat}  trace of ad={[str(-v) for v in unimodularity_vector(g)]}  "
          f"residual at 1: {end1}  matches closed form: {end1 == closed}")

# %% The modified master equation holds with H0 = -I and H1 = +I, and these operators square to zero.
th = build_bf_theory(builtin_algebra("sl2"))
print(check_mqme_interval(th).passed, bfv_nilpotency(th.ctx0, th.H0).passed)
