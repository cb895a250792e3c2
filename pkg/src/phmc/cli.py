"""Experiment command line.

Four commands, each driven by a JSON config file whose top-level scalar
fields can be overridden from the command line:

* ``simulate``      -- draw a dataset from a model and write it as CSV
* ``grad-variance`` -- variance study of the two score estimators over N
* ``sample``        -- run one chain of pmmh / phmc / hmc-reference
* ``sweep``         -- chain batches over an (epsilon, L) grid, a particle
                       grid, or the model-dimension grid

Every command writes its artifacts into ``out_dir`` plus a ``manifest.json``
recording the config hash, seed, code version and wall-clock time.  Outputs
are pure functions of (config, input files, seed); reruns rewrite identical
bytes (the manifest's wall-time field aside).

Exit codes: 0 success, 1 config error (all violations are reported before
exiting), 2 runtime or numerical error.  ``PHMC_WORKERS`` caps the process
pool used for sweep grid points and chains.
"""

import argparse
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import finite_difference_score, kalman_log_likelihood, summarize_chain
from .errors import DegenerateBackwardKernelError, DegenerateFilterError, DivergenceError
from .gradients import score_linear, score_quadratic
from .model import make_lgssm_model, make_poisson_model, simulate_dataset
from .samplers import SamplerConfig, hmc, phmc, pmmh
from .smc import FilterConfig, run_filter

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

SAMPLERS = ("pmmh", "phmc", "hmc-reference")
SWEEP_KINDS = ("epsilon_L_grid", "particles", "dimension")

# truth used by the dimension sweep (kappa entries average to 0.5)
_DIM_SWEEP_TRUTH = {"sigma_y": 0.25, "sigma_h": 0.2, "rho": 0.8, "kappa": 0.5}


# ---------------------------------------------------------------------------
# small IO helpers


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_dataset(path):
    """Read a `t,y[,h]` CSV; returns (y, h-or-None)."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        cols = {name: i for i, name in enumerate(header)}
        if "t" not in cols or "y" not in cols:
            raise ValueError(f"{path}: expected a header with columns t,y")
        ys = []
        hs = []
        for line in fh:
            parts = line.strip().split(",")
            if not line.strip():
                continue
            ys.append(float(parts[cols["y"]]))
            if "h" in cols:
                hs.append(float(parts[cols["h"]]))
    y = np.asarray(ys)
    return y, (np.asarray(hs) if hs else None)


def config_hash(config):
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def write_manifest(out_dir, config, elapsed):
    manifest = {
        "config_hash": config_hash(config),
        "seed": config.get("seed"),
        "code_version": __version__,
        "wall_time_s": round(elapsed, 3),
    }
    with open(Path(out_dir) / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _substream(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


def _chain_seed(seed, *key):
    return int(np.random.SeedSequence(entropy=seed, spawn_key=key).generate_state(1)[0])


# ---------------------------------------------------------------------------
# config validation


def _build_model(config):
    if config["model"] == "poisson":
        return make_poisson_model()
    return make_lgssm_model(int(config.get("d", 1)))


def _theta_from_dict(model, mapping, errors, field):
    names = list(model.param_names)
    missing = [n for n in names if n not in mapping]
    extra = [n for n in mapping if n not in names]
    if missing:
        errors.append(f"{field}: missing components {missing}")
    if extra:
        errors.append(f"{field}: unknown components {extra}")
    if missing or extra:
        return None
    return np.array([float(mapping[n]) for n in names])


def _check_common(config, errors):
    if not isinstance(config.get("seed"), int):
        errors.append("seed: must be an integer")
    if "out_dir" not in config:
        errors.append("out_dir: required")
    model_name = config.get("model")
    if model_name not in ("poisson", "lgssm"):
        errors.append("model: must be 'poisson' or 'lgssm'")
        return None
    if model_name == "lgssm":
        d = config.get("d", 1)
        if not (isinstance(d, int) and d >= 1):
            errors.append("d: must be an integer >= 1")
            return None
    return _build_model(config)


def _check_positive_int(config, key, errors, minimum=1):
    v = config.get(key)
    if not (isinstance(v, int) and v >= minimum):
        errors.append(f"{key}: must be an integer >= {minimum}")
        return False
    return True


def _check_positive_float(config, key, errors):
    v = config.get(key)
    if not (isinstance(v, (int, float)) and v > 0):
        errors.append(f"{key}: must be a number > 0")
        return False
    return True


def _check_sampler_fields(config, errors):
    ok = _check_positive_int(config, "K", errors)
    burn = config.get("burn_in", 0)
    if not (isinstance(burn, int) and burn >= 0):
        errors.append("burn_in: must be an integer >= 0")
    elif ok and not config["K"] > burn:
        errors.append("K: must exceed burn_in")
    thin = config.get("thin", 1)
    if not (isinstance(thin, int) and thin >= 1):
        errors.append("thin: must be an integer >= 1")
    _check_positive_int(config, "N", errors)


def _check_dataset(config, errors):
    path = config.get("dataset")
    if not isinstance(path, str):
        errors.append("dataset: required path")
        return
    if not Path(path).exists():
        errors.append(f"dataset: file not found: {path}")


# ---------------------------------------------------------------------------
# simulate


def validate_simulate(config):
    errors = []
    model = _check_common(config, errors)
    _check_positive_int(config, "T", errors)
    if model is not None:
        theta = config.get("theta")
        if not isinstance(theta, dict):
            errors.append("theta: must be an object mapping component names to reals")
        else:
            arr = _theta_from_dict(model, theta, errors, "theta")
            if arr is not None and not model.in_support(arr):
                errors.append("theta: outside the prior support")
    return errors


def cmd_simulate(config):
    model = _build_model(config)
    theta = np.array([float(config["theta"][n]) for n in model.param_names])
    h, y = simulate_dataset(model, theta, config["T"], config["seed"])
    out_dir = Path(config["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    is_count = model.obs_kind == "count"
    rows = [
        (t + 1, int(y[t]) if is_count else y[t], h[t])
        for t in range(len(y))
    ]
    write_csv(out_dir / "dataset.csv", ["t", "y", "h"], rows)
    sidecar = {
        "model": config["model"],
        "d": config.get("d"),
        "theta": {n: float(v) for n, v in zip(model.param_names, theta)},
        "T": config["T"],
        "seed": config["seed"],
    }
    with open(out_dir / "truth.json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# grad-variance


def validate_grad_variance(config):
    errors = []
    model = _check_common(config, errors)
    _check_dataset(config, errors)
    runs = config.get("runs")
    if not (isinstance(runs, int) and runs >= 2):
        errors.append("runs: must be an integer >= 2 (variance undefined for fewer)")
    grid = config.get("n_grid")
    if not (isinstance(grid, list) and grid and all(isinstance(n, int) and n >= 1 for n in grid)):
        errors.append("n_grid: must be a non-empty list of integers >= 1")
    if model is not None and not isinstance(config.get("theta"), dict):
        errors.append("theta: must be an object mapping component names to reals")
    elif model is not None:
        _theta_from_dict(model, config["theta"], errors, "theta")
    return errors


def cmd_grad_variance(config):
    model = _build_model(config)
    theta = np.array([float(config["theta"][n]) for n in model.param_names])
    y, _ = read_dataset(config["dataset"])
    y = model.check_observations(y)
    runs = config["runs"]
    rows = []
    for n_particles in config["n_grid"]:
        fcfg = FilterConfig(
            N=n_particles,
            ess_threshold_fraction=config.get("ess_threshold_fraction", 0.5),
            resampling=config.get("resampling", "systematic"),
        )
        lin = np.empty((runs, model.d_theta))
        quad = np.empty((runs, model.d_theta))
        for r in range(runs):
            res = run_filter(
                model, theta, y, fcfg, _substream(config["seed"], n_particles, r)
            )
            lin[r] = score_linear(model, theta, res.system, y).score
            quad[r] = score_quadratic(model, theta, res.system, y).score
        for est, vals in (("linear", lin), ("quadratic", quad)):
            var = vals.var(axis=0, ddof=1)
            for c, name in enumerate(model.param_names):
                rows.append((est, n_particles, name, var[c], runs))
    out_dir = Path(config["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(
        out_dir / "grad_variance.csv",
        ["estimator", "N", "component", "variance", "runs"],
        rows,
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# sample


def validate_sample(config):
    errors = []
    model = _check_common(config, errors)
    _check_dataset(config, errors)
    sampler = config.get("sampler")
    if sampler not in SAMPLERS:
        errors.append(f"sampler: must be one of {SAMPLERS}")
    _check_sampler_fields(config, errors)
    if sampler == "phmc":
        _check_positive_int(config, "L", errors)
        _check_positive_float(config, "epsilon", errors)
        if config.get("score_kind", "quadratic") not in ("linear", "quadratic"):
            errors.append("score_kind: must be 'linear' or 'quadratic'")
    if sampler == "hmc-reference":
        _check_positive_int(config, "L", errors)
        _check_positive_float(config, "epsilon", errors)
        if config.get("model") == "poisson":
            errors.append("sampler: hmc-reference needs the exact likelihood; only the lgssm model has one")
    if sampler == "pmmh" and not _check_positive_float(config, "rw_scale", errors):
        pass
    theta_init = config.get("theta_init", "prior")
    if not (theta_init == "prior" or isinstance(theta_init, dict)):
        errors.append("theta_init: must be 'prior' or an object of component values")
    elif isinstance(theta_init, dict) and model is not None:
        arr = _theta_from_dict(model, theta_init, errors, "theta_init")
        if arr is not None and not model.in_support(arr):
            errors.append("theta_init: outside the prior support")
    return errors


def _resolve_theta_init(model, config, chain_index=0):
    init = config.get("theta_init", "prior")
    if init == "prior":
        rng = _substream(config["seed"], 9, chain_index)
        theta = model.sample_prior(rng)
        # prior draws of sigma can be astronomically large; redraw a few
        # times rather than start the chain in a guaranteed-degenerate spot
        for _ in range(100):
            if model.in_support(theta) and np.all(np.abs(theta) < 1e3):
                break
            theta = model.sample_prior(rng)
        return theta
    return np.array([float(init[n]) for n in model.param_names])


def _sampler_config(config, seed):
    return SamplerConfig(
        K=config["K"],
        L=config.get("L", 1),
        epsilon=config.get("epsilon", 0.1),
        N=config["N"],
        burn_in=config.get("burn_in", 0),
        thin=config.get("thin", 1),
        rw_scale=config.get("rw_scale", 0.1),
        seed=seed,
        ess_threshold_fraction=config.get("ess_threshold_fraction", 0.5),
        resampling=config.get("resampling", "systematic"),
        reuse_current_loglik=config.get("reuse_current_loglik", False),
    )


def _run_one_chain(config, chain_index=0):
    model = _build_model(config)
    y, _ = read_dataset(config["dataset"])
    y = model.check_observations(y)
    cfg = _sampler_config(config, _chain_seed(config["seed"], 1, chain_index))
    theta_init = _resolve_theta_init(model, config, chain_index)
    sampler = config["sampler"]
    if sampler == "pmmh":
        return pmmh(model, y, cfg, model.param_vector(theta_init))
    if sampler == "phmc":
        return phmc(
            model, y, cfg, model.param_vector(theta_init),
            score_kind=config.get("score_kind", "quadratic"),
        )
    # hmc-reference: exact Kalman likelihood plus prior, FD gradients
    d = int(config.get("d", 1))

    def log_post(theta):
        if not model.in_support(theta):
            return -np.inf
        return kalman_log_likelihood(theta, y, d) + model.log_prior(theta)

    def grad_log_post(theta):
        if not model.in_support(theta):
            return np.full(model.d_theta, np.nan)
        return finite_difference_score(log_post, theta, 1e-5)

    out = hmc(log_post, grad_log_post, cfg, model.param_vector(theta_init))
    return out


def cmd_sample(config):
    out = _run_one_chain(config)
    model = _build_model(config)
    out_dir = Path(config["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)

    kept_iters = [
        k
        for k in range(1, config["K"] + 1)
        if k > config.get("burn_in", 0)
        and (k - config.get("burn_in", 0)) % config.get("thin", 1) == 0
    ]
    d = model.d_theta
    header = ["iter"] + [f"param_{i + 1}" for i in range(d)] + ["log_z", "accepted"]
    rows = []
    for it, (pv, traj, log_z) in zip(kept_iters, out.draws):
        rows.append((it, *pv.values, log_z, bool(out.accepted[it - 1])))
    write_csv(out_dir / "chain.csv", header, rows)

    t_len = 0
    for _, traj, _ in out.draws:
        if traj is not None:
            t_len = len(traj)
            break
    lat_header = ["iter"] + [f"h_{t + 1}" for t in range(t_len)]
    lat_rows = []
    for it, (_, traj, _) in zip(kept_iters, out.draws):
        if traj is not None:
            lat_rows.append((it, *traj))
    write_csv(out_dir / "latents.csv", lat_header, lat_rows)

    summary = summarize_chain(out, max_lag=config.get("max_lag", 50)).as_dict()
    summary["sampler"] = config["sampler"]
    summary["n_divergent"] = out.n_divergent
    summary["n_degenerate"] = out.n_degenerate
    summary["n_out_of_support"] = out.n_out_of_support
    summary["param_names"] = list(model.param_names)
    with open(out_dir / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep


def validate_sweep(config):
    errors = []
    kind = config.get("kind")
    if kind not in SWEEP_KINDS:
        errors.append(f"kind: must be one of {SWEEP_KINDS}")
        return errors
    if not isinstance(config.get("seed"), int):
        errors.append("seed: must be an integer")
    if "out_dir" not in config:
        errors.append("out_dir: required")
    _check_positive_int(config, "chains", errors)
    _check_sampler_fields(config, errors)
    if kind == "epsilon_L_grid":
        _check_common(config, errors)
        _check_dataset(config, errors)
        for key in ("grid_epsilon", "grid_L"):
            grid = config.get(key)
            if not (isinstance(grid, list) and grid):
                errors.append(f"{key}: must be a non-empty list")
    elif kind == "particles":
        _check_common(config, errors)
        _check_dataset(config, errors)
        grid = config.get("grid_N")
        if not (isinstance(grid, list) and grid and all(isinstance(n, int) and n >= 1 for n in grid)):
            errors.append("grid_N: must be a non-empty list of integers >= 1")
        _check_positive_int(config, "L", errors)
        _check_positive_float(config, "epsilon", errors)
    else:  # dimension
        grid = config.get("grid_d")
        if not (isinstance(grid, list) and grid and all(isinstance(v, int) and v >= 1 for v in grid)):
            errors.append("grid_d: must be a non-empty list of integers >= 1")
        _check_positive_int(config, "T", errors)
    return errors


def _worker_chain(task):
    """Run one chain of a sweep; module-level for the process pool."""
    out = _run_one_chain(task["config"], task["chain_index"])
    return out.acceptance_rate


def _run_chain_batch(tasks, workers):
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_worker_chain, tasks))
    return [_worker_chain(t) for t in tasks]


def _workers():
    try:
        return max(1, int(os.environ.get("PHMC_WORKERS", "1")))
    except ValueError:
        return 1


def cmd_sweep(config):
    kind = config["kind"]
    chains = config["chains"]
    workers = _workers()
    out_dir = Path(config["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []

    if kind == "epsilon_L_grid":
        for eps in config["grid_epsilon"]:
            for L in config["grid_L"]:
                sub = dict(config)
                sub.update(sampler="phmc", epsilon=float(eps), L=int(L))
                sub["seed"] = _chain_seed(config["seed"], 2, int(round(eps * 1e6)), int(L))
                tasks = [{"config": sub, "chain_index": c} for c in range(chains)]
                rates = _run_chain_batch(tasks, workers)
                rows.append(
                    (eps, L, float(np.median(rates)), float(np.std(rates, ddof=1)) if chains > 1 else 0.0, chains)
                )
        write_csv(
            out_dir / "sweep.csv",
            ["epsilon", "L", "median_acceptance", "sd_acceptance", "chains"],
            rows,
        )
    elif kind == "particles":
        medians = []
        for n_particles in config["grid_N"]:
            sub = dict(config)
            sub.update(sampler="phmc", N=int(n_particles))
            sub["seed"] = _chain_seed(config["seed"], 3, int(n_particles))
            tasks = [{"config": sub, "chain_index": c} for c in range(chains)]
            rates = _run_chain_batch(tasks, workers)
            med = float(np.median(rates))
            medians.append(med)
            rows.append(
                (n_particles, med, float(np.std(rates, ddof=1)) if chains > 1 else 0.0, chains)
            )
        if any(b < a for a, b in zip(medians, medians[1:])):
            print(
                "warning: median acceptance rate is not non-decreasing in N",
                file=sys.stderr,
            )
        write_csv(
            out_dir / "sweep.csv",
            ["N", "median_acceptance", "sd_acceptance", "chains"],
            rows,
        )
    else:  # dimension
        for d in config["grid_d"]:
            d_theta = d + 3
            eps = 0.025 * d_theta ** (-0.25)
            L = max(1, int(round(5.0 * d_theta**0.25)))
            truth = {f"kappa_{j + 1}": _DIM_SWEEP_TRUTH["kappa"] for j in range(d)}
            truth.update(
                sigma_y=_DIM_SWEEP_TRUTH["sigma_y"],
                sigma_h=_DIM_SWEEP_TRUTH["sigma_h"],
                rho=_DIM_SWEEP_TRUTH["rho"],
            )
            model = make_lgssm_model(d)
            theta_true = np.array([truth[n] for n in model.param_names])
            h, y = simulate_dataset(
                model, theta_true, config["T"], _chain_seed(config["seed"], 4, d)
            )
            ds_path = out_dir / f"dataset_d{d}.csv"
            write_csv(
                ds_path,
                ["t", "y", "h"],
                [(t + 1, y[t], h[t]) for t in range(len(y))],
            )
            for sampler in ("phmc", "pmmh"):
                sub = dict(config)
                sub.update(
                    model="lgssm",
                    d=d,
                    dataset=str(ds_path),
                    sampler=sampler,
                    epsilon=eps,
                    L=L,
                    rw_scale=eps,
                )
                sub["seed"] = _chain_seed(config["seed"], 5, d, 0 if sampler == "phmc" else 1)
                tasks = [{"config": sub, "chain_index": c} for c in range(chains)]
                rates = _run_chain_batch(tasks, workers)
                rows.append(
                    (
                        sampler,
                        d,
                        d_theta,
                        eps,
                        L,
                        float(np.median(rates)),
                        float(np.std(rates, ddof=1)) if chains > 1 else 0.0,
                        chains,
                    )
                )
        write_csv(
            out_dir / "sweep.csv",
            ["sampler", "d", "d_theta", "epsilon", "L", "median_acceptance", "sd_acceptance", "chains"],
            rows,
        )
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point

_COMMANDS = {
    "simulate": (validate_simulate, cmd_simulate),
    "grad-variance": (validate_grad_variance, cmd_grad_variance),
    "sample": (validate_sample, cmd_sample),
    "sweep": (validate_sweep, cmd_sweep),
}


def _apply_overrides(config, args):
    if args.out is not None:
        config["out_dir"] = args.out
    for item in args.set or []:
        if "=" not in item:
            raise ValueError(f"--set expects KEY=VALUE, got {item!r}")
        key, _, raw = item.partition("=")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        config[key] = value
    return config


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="phmc", description="particle MCMC experiment driver"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument(
            "--set",
            action="append",
            metavar="KEY=VALUE",
            help="override a top-level config field (VALUE parsed as JSON)",
        )
    args = parser.parse_args(argv)

    try:
        with open(args.config, encoding="utf-8") as fh:
            config = json.load(fh)
        config = _apply_overrides(config, args)
    except (OSError, ValueError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG

    validate, run = _COMMANDS[args.command]
    errors = validate(config)
    if errors:
        for e in errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    start = time.perf_counter()
    try:
        code = run(config)
    except (DegenerateFilterError, DegenerateBackwardKernelError, DivergenceError) as err:
        print(f"runtime error: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, FloatingPointError, OSError) as err:
        print(f"runtime error: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    if code == EXIT_OK:
        write_manifest(config["out_dir"], config, time.perf_counter() - start)
    return code


if __name__ == "__main__":
    sys.exit(main())
