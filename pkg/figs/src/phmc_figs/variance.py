"""Gradient-estimator variance vs particle count, one panel per estimator.

Input: the `grad-variance` CSV (estimator,N,component,variance,runs).
Log-log panels with one line per parameter component and a dotted red
reference line at variance 1.
"""

import matplotlib.pyplot as plt

from .common import make_parser, read_table, run

SCHEMA = ["estimator", "N", "component", "variance", "runs"]


def draw(args):
    cols = read_table(args.input, SCHEMA)
    estimators = []
    for e in cols["estimator"]:
        if e not in estimators:
            estimators.append(e)
    fig, axes = plt.subplots(1, max(len(estimators), 1), figsize=(5 * max(len(estimators), 1), 4), squeeze=False)
    for ax, est in zip(axes[0], estimators):
        rows = [
            (int(n), c, float(v))
            for e, n, c, v in zip(cols["estimator"], cols["N"], cols["component"], cols["variance"])
            if e == est
        ]
        components = sorted({c for _, c, _ in rows})
        for comp in components:
            pts = sorted((n, v) for n, c, v in rows if c == comp)
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=comp)
        ax.axhline(1.0, color="red", linestyle=":", linewidth=1)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("number of particles N")
        ax.set_ylabel("variance")
        ax.set_title(est)
        ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def main(argv=None):
    return run(draw, argv, make_parser(__doc__.splitlines()[0]))


if __name__ == "__main__":
    raise SystemExit(main())
