"""How fast the leaf census forgets the root letter, on either side of d*lambda^2 = 1."""
# %%
from deeptree.experiments import run_count_tv_experiment

heights = [1, 2, 4, 6, 8]
for lam in (0.6, 0.9):
    rows = run_count_tv_experiment(d=2, lam=lam, q=2, k=1, h_list=heights, n_samples=20_000, seed=0)
    print(f"lambda={lam}  d*lambda^2={rows[0]['d_lambda_sq']:.2f}")
    for row in rows:
        print(f"  h={row['h']}: TV {row['tv']:.3f} +- {row['se']:.3f}")
