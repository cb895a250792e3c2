"""Median acceptance rate over the (step size, leapfrog steps) grid.

Input: the epsilon_L_grid sweep CSV
(epsilon,L,median_acceptance,sd_acceptance,chains).  Cells run from low
(dark blue) to high (yellow).
"""

import numpy as np
import matplotlib.pyplot as plt

from .common import floats, make_parser, read_table, run

SCHEMA = ["epsilon", "L", "median_acceptance", "sd_acceptance", "chains"]


def draw(args):
    cols = read_table(args.input, SCHEMA)
    eps = floats(cols["epsilon"])
    L = [int(v) for v in cols["L"]]
    med = floats(cols["median_acceptance"])
    eps_grid = sorted(set(eps))
    l_grid = sorted(set(L))
    grid = np.full((len(l_grid), len(eps_grid)), np.nan)
    for e, l, m in zip(eps, L, med):
        grid[l_grid.index(l), eps_grid.index(e)] = m
    fig, ax = plt.subplots(figsize=(6, 4.5))
    im = ax.imshow(grid, origin="lower", aspect="auto", cmap="viridis", vmin=0.0, vmax=1.0)
    ax.set_xticks(range(len(eps_grid)), [f"{e:g}" for e in eps_grid])
    ax.set_yticks(range(len(l_grid)), [str(l) for l in l_grid])
    ax.set_xlabel("step size")
    ax.set_ylabel("leapfrog steps")
    fig.colorbar(im, ax=ax, label="median acceptance rate")
    fig.tight_layout()
    return fig


def main(argv=None):
    return run(draw, argv, make_parser(__doc__.splitlines()[0]))


if __name__ == "__main__":
    raise SystemExit(main())
