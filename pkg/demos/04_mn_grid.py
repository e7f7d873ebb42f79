"""
How m and n set the bounds
==========================

The lower and upper bounds over a grid of metric values m and group sizes
n, written as heatmaps next to this script.
"""

from pathlib import Path

from fairaudit import grid_axis, mn_grid
from fairaudit.svg import heatmap_svg

out = Path(__file__).with_suffix("")
out.mkdir(exist_ok=True)
n_values = list(range(1, 101))
m_values = grid_axis(101)

for mode in ("lower", "upper_capped", "upper_raw"):
    grid = mn_grid(101, n_values, 1.64, mode)
    (out / f"grid_{mode}.svg").write_text(heatmap_svg(grid, m_values, n_values, title=f"c ({mode})"))
    print(f"{mode:>13}: min {grid.min():+.3f}  max {grid.max():+.3f}")

# %%
# A group of four at 90% accuracy: the uncapped upper bound overshoots 1.
print("upper at m=0.9, n=4:", round(float(mn_grid(11, [4], 1.64, "upper_raw")[9, 0]), 4))
print(f"heatmaps written to {out}/")
