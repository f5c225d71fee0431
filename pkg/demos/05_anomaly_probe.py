# %% [markdown]
# # A numerical look at the boundary anomaly
#
# For one bulk vertex, integrating the total derivative and the BV-kernel term over
# the interval produces a boundary value. It is compared with the Weyl-ordered
# interaction evaluated on the boundary values of the fields.

# %%
from tqmbv.bf_theory import affine2, sl2, unimodularity_vector
from tqmbv.cli import anomaly_battery

for g in (affine2(), sl2()):
    print(g.name, "expected A-side coefficients:", [str(-v / 2) for v in unimodularity_vector(g)])
    for r in anomaly_battery(g, "both", 0.05):
        rows = [(row["hbar"], round(row["numeric"], 9), row["algebraic"]) for row in r.details["table"]]
        print(f"  {r.name:40s} {r.passed} {rows}")
