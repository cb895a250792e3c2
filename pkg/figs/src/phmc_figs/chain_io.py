"""Reader for the sampler's chain CSV (iter,param_*,log_z,accepted)."""

from .common import floats, matching, read_table

CHAIN_REQUIRED = ["iter", "log_z", "accepted"]
CHAIN_PATTERNS = (r"param_\d+",)


def read_chain(path):
    cols = read_table(path, CHAIN_REQUIRED, CHAIN_PATTERNS)
    names = matching(cols, r"param_\d+")
    params = {name: floats(cols[name]) for name in names}
    return [int(float(v)) for v in cols["iter"]], params
