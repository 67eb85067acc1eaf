"""
When does cheating stop paying?
===============================

A rational sequencer cheats when the expected gain beats the expected
penalty. Detection comes from two independent channels: the random
spot-check (rho) and a watching fisherman (p_fish).
"""

import numpy as np

from otrlab.econ import EconParams, cheat_threshold_l_slash, expected_cheat_profit, profit_root_in_p_fish

p = EconParams()
print("defaults:", p)
print("expected profit from cheating:", round(expected_cheat_profit(p), 4))

# with no fisherman at all, how large must the slash be at each rho?
print("\nminimum deterrent stake per query, p_fish = 0")
for rho in (0.001, 0.01, 0.1, 0.5):
    print(f"  rho={rho:<6} l_slash >= {cheat_threshold_l_slash(EconParams(rho=rho, p_fish=0.0)):.2f}")

# expected profit as the fisherman gets more attentive, small slash
grid = np.linspace(0, 1, 11)
small = [expected_cheat_profit(EconParams(rho=0.0, p_fish=f, l_slash=1.0)) for f in grid]
print("\np_fish  E[profit]  (l_slash = 1)")
for f, e in zip(grid, small):
    print(f"  {f:.1f}   {e:+.3f}")
print("crosses zero at p_fish =", round(profit_root_in_p_fish(EconParams(rho=0.0, l_slash=1.0)), 4))
