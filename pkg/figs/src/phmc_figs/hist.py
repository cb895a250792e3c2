"""Histograms of the kept draws, one panel per parameter.

Input: a chain CSV (iter,param_*,log_z,accepted).  Degenerate (constant)
columns are drawn as a single bar instead of crashing on an empty range.
"""

import matplotlib.pyplot as plt

from .chain_io import read_chain
from .common import make_parser, run


def draw(args):
    _, params = read_chain(args.input)
    k = max(len(params), 1)
    fig, axes = plt.subplots(1, k, figsize=(4 * k, 3), squeeze=False)
    for ax, (name, values) in zip(axes[0], params.items()):
        lo, hi = min(values), max(values)
        if lo == hi:
            ax.bar([lo], [len(values)], width=max(abs(lo) * 0.01, 1e-3))
        else:
            ax.hist(values, bins=30, color="tab:gray")
        ax.set_title(name)
    fig.tight_layout()
    return fig


def main(argv=None):
    return run(draw, argv, make_parser(__doc__.splitlines()[0]))


if __name__ == "__main__":
    raise SystemExit(main())
