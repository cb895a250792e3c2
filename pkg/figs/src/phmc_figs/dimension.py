"""Sampler comparison across model dimension: median acceptance per sampler.

Input: the dimension sweep CSV
(sampler,d,d_theta,epsilon,L,median_acceptance,sd_acceptance,chains).
Hamiltonian chains in red, random-walk chains in blue.
"""

import matplotlib.pyplot as plt

from .common import make_parser, read_table, run

SCHEMA = ["sampler", "d", "d_theta", "epsilon", "L", "median_acceptance", "sd_acceptance", "chains"]
COLORS = {"phmc": "tab:red", "pmmh": "tab:blue"}


def draw(args):
    cols = read_table(args.input, SCHEMA)
    fig, ax = plt.subplots(figsize=(6, 4))
    samplers = []
    for s in cols["sampler"]:
        if s not in samplers:
            samplers.append(s)
    for sampler in samplers:
        pts = sorted(
            (int(dt), float(m))
            for s, dt, m in zip(cols["sampler"], cols["d_theta"], cols["median_acceptance"])
            if s == sampler
        )
        ax.plot(
            [p[0] for p in pts],
            [p[1] for p in pts],
            marker="o",
            color=COLORS.get(sampler),
            label=sampler,
        )
    ax.set_xlabel("total number of parameters")
    ax.set_ylabel("median acceptance rate")
    ax.set_ylim(-0.02, 1.02)
    ax.legend()
    fig.tight_layout()
    return fig


def main(argv=None):
    return run(draw, argv, make_parser(__doc__.splitlines()[0]))


if __name__ == "__main__":
    raise SystemExit(main())
