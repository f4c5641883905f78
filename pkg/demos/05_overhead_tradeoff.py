"""
Training overhead versus spectral efficiency
============================================

Larger tiles shorten training (T1 = K Mbar^2 G2) but restrict the surface.
For short frames the best tile size is interior; for long frames the
smallest tile wins.
"""

from bdris import harness

cfg = harness.make_config(scenario="se_tradeoff", M=(32,), group_size=(2, 4),
                          tile_size=(1, 2, 4, 8), T=(600, 2000), trials=40, seed=5)
table = harness.run(cfg)

for T in cfg.T:
    print(f"\nT = {T}")
    for mb in cfg.group_size:
        opt = table.where(scheme="optimized", group_size=mb, T=T)
        rnd = table.where(scheme="random", group_size=mb, T=T)
        cells = "  ".join(f"G={o['tile_size']}: {o['se_mean']:.2f} ({r['se_mean']:.2f})"
                          for o, r in zip(opt, rnd))
        print(f"  Mbar={mb}  {cells}")
print("\nvalues in parentheses: random block-unitary surface")
