"""Shared plumbing for the figure scripts.

Each script reads one CSV produced by the experiment CLI, validates the
header against its declared schema, and renders one figure.  Rendering never
touches the input file and reruns simply overwrite the output.
"""

import argparse
import csv
import re
import sys

import matplotlib

matplotlib.use("Agg")

EXIT_SCHEMA = 1


class SchemaError(Exception):
    def __init__(self, path, missing=(), unexpected=()):
        self.missing = list(missing)
        self.unexpected = list(unexpected)
        parts = [f"{path}: schema mismatch"]
        if self.missing:
            parts.append(f"missing columns: {', '.join(self.missing)}")
        if self.unexpected:
            parts.append(f"unexpected columns: {', '.join(self.unexpected)}")
        super().__init__("; ".join(parts))


def read_table(path, required, patterns=(), allow_extra=False):
    """Read a CSV into a dict of column name -> list of strings.

    ``required`` columns must be present; remaining columns must match one of
    the ``patterns`` regexes unless ``allow_extra`` is set.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(path, missing=required)
        missing = [c for c in required if c not in header]
        unexpected = []
        if not allow_extra:
            for c in header:
                if c in required:
                    continue
                if not any(re.fullmatch(p, c) for p in patterns):
                    unexpected.append(c)
        if missing or unexpected:
            raise SchemaError(path, missing=missing, unexpected=unexpected)
        columns = {c: [] for c in header}
        for row in reader:
            if not row:
                continue
            for c, v in zip(header, row):
                columns[c].append(v)
    return columns


def floats(column):
    return [float(v) for v in column]


def matching(columns, pattern):
    """Column names matching a regex, sorted by their numeric suffix."""
    names = [c for c in columns if re.fullmatch(pattern, c)]
    return sorted(names, key=lambda c: int(re.search(r"(\d+)$", c).group(1)))


def make_parser(description):
    parser = argparse.ArgumentParser(description=description)
    parser.add_argument("--input", required=True, help="input CSV path")
    parser.add_argument("--output", required=True, help="output image path")
    parser.add_argument("--title", default=None, help="figure title")
    return parser


def run(draw, argv=None, parser=None):
    """Parse common flags, call ``draw(args)``, exit 1 on schema errors."""
    args = parser.parse_args(argv)
    try:
        fig = draw(args)
    except SchemaError as err:
        print(err, file=sys.stderr)
        return EXIT_SCHEMA
    except OSError as err:
        print(err, file=sys.stderr)
        return EXIT_SCHEMA
    if args.title:
        fig.suptitle(args.title)
    fig.savefig(args.output, dpi=130)
    return 0
