"""Acceptance rate vs particle count: median dots with +/- sd intervals.

Input: the particles-sweep CSV (N,median_acceptance,sd_acceptance,chains).
"""

import matplotlib.pyplot as plt

from .common import floats, make_parser, read_table, run

SCHEMA = ["N", "median_acceptance", "sd_acceptance", "chains"]


def draw(args):
    cols = read_table(args.input, SCHEMA)
    n = floats(cols["N"])
    med = floats(cols["median_acceptance"])
    sd = floats(cols["sd_acceptance"])
    order = sorted(range(len(n)), key=lambda i: n[i])
    n = [n[i] for i in order]
    med = [med[i] for i in order]
    sd = [sd[i] for i in order]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(n, med, yerr=sd, fmt="o", color="black", capsize=4)
    ax.set_xscale("log")
    ax.set_xlabel("number of particles N")
    ax.set_ylabel("acceptance rate")
    ax.set_ylim(-0.02, 1.02)
    fig.tight_layout()
    return fig


def main(argv=None):
    return run(draw, argv, make_parser(__doc__.splitlines()[0]))


if __name__ == "__main__":
    raise SystemExit(main())
