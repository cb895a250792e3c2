"""Autocorrelation of the kept draws, one panel per parameter.

Input: a chain CSV (iter,param_*,log_z,accepted).  The autocorrelation is
computed here from the file contents; a constant column is drawn as a flat
zero line beyond lag 0.
"""

import matplotlib.pyplot as plt

from .chain_io import read_chain
from .common import make_parser, run

MAX_LAG = 40


def sample_acf(values, max_lag):
    n = len(values)
    mean = sum(values) / n
    xc = [v - mean for v in values]
    c0 = sum(v * v for v in xc) / n
    out = [1.0]
    for k in range(1, min(max_lag, n - 1) + 1):
        if c0 == 0.0:
            out.append(0.0)
            continue
        ck = sum(xc[i] * xc[i + k] for i in range(n - k)) / n
        out.append(ck / c0)
    return out


def draw(args):
    _, params = read_chain(args.input)
    k = max(len(params), 1)
    fig, axes = plt.subplots(1, k, figsize=(4 * k, 3), squeeze=False)
    for ax, (name, values) in zip(axes[0], params.items()):
        acf = sample_acf(values, MAX_LAG)
        ax.bar(range(len(acf)), acf, width=0.6)
        ax.axhline(0.0, color="black", linewidth=0.6)
        ax.set_xlabel("lag")
        ax.set_ylim(-1.05, 1.05)
        ax.set_title(name)
    fig.tight_layout()
    return fig


def main(argv=None):
    return run(draw, argv, make_parser(__doc__.splitlines()[0]))


if __name__ == "__main__":
    raise SystemExit(main())
