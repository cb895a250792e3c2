"""Posterior mean of the latent path with a 95% band over kept draws.

Input: a latents CSV (iter,h_1..h_T), one kept trajectory per row.
"""

import matplotlib.pyplot as plt

from .common import floats, make_parser, matching, read_table, run

REQUIRED = ["iter"]
PATTERNS = (r"h_\d+",)


def draw(args):
    cols = read_table(args.input, REQUIRED, PATTERNS)
    names = matching(cols, r"h_\d+")
    if not names:
        from .common import SchemaError

        raise SchemaError(args.input, missing=["h_1"])
    series = [floats(cols[c]) for c in names]
    ts = list(range(1, len(names) + 1))
    means, lower, upper = [], [], []
    for values in series:
        ordered = sorted(values)
        n = len(ordered)
        means.append(sum(values) / n)
        lower.append(ordered[max(0, int(0.025 * (n - 1)))])
        upper.append(ordered[min(n - 1, int(round(0.975 * (n - 1))))])
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.fill_between(ts, lower, upper, alpha=0.3, color="tab:red", label="95% interval")
    ax.plot(ts, means, color="red", label="posterior mean")
    ax.set_xlabel("time (hours)")
    ax.set_ylabel("latent state")
    ax.legend()
    fig.tight_layout()
    return fig


def main(argv=None):
    return run(draw, argv, make_parser(__doc__.splitlines()[0]))


if __name__ == "__main__":
    raise SystemExit(main())
