"""Trace plots of the kept draws, one panel per parameter.

Input: a chain CSV (iter,param_*,log_z,accepted).
"""

import matplotlib.pyplot as plt

from .chain_io import read_chain
from .common import make_parser, run


def draw(args):
    iters, params = read_chain(args.input)
    k = max(len(params), 1)
    fig, axes = plt.subplots(1, k, figsize=(4 * k, 3), squeeze=False)
    for ax, (name, values) in zip(axes[0], params.items()):
        ax.plot(iters, values, linewidth=0.7)
        ax.set_xlabel("iteration")
        ax.set_title(name)
    fig.tight_layout()
    return fig


def main(argv=None):
    return run(draw, argv, make_parser(__doc__.splitlines()[0]))


if __name__ == "__main__":
    raise SystemExit(main())
