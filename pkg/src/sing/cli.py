"""Command-line interface.

Subcommands::

    sing simulate   seeded toy data (X, Y and the planted truth)
    sing decompose  full joint decomposition of two datasets
    sing lngca      per-dataset component extraction (stage 1)
    sing match      greedy pairing of score columns (stage 2)
    sing permtest   joint-rank permutation test (stage 3)
    sing export     plot-ready CSVs (image grids, network matrices, scores)

Stages 1-3 write into one directory that ``decompose --init-from`` reads
to run the joint solve. Exit status is 0 on success, 2 for invalid input
and 3 for numeric failure.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .errors import InvalidInputError, MissingRankError, NumericError, SingError
from .io import read_json, read_matrix, write_json, write_matrix
from .lngca import estimate_mixing_ols, lngca
from .matcher import greedy_match, perm_test_joint_rank
from .pipeline import SingConfig, StageInit, preprocess_pair, sing_decompose
from .preprocess import double_center, standardize_iterative, whiten
from .simgen import ToySpec, generate_toy, vec_to_net
from .solver import RHO_LADDER

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERIC = 3


def _ext(args):
    return ".bin" if getattr(args, "binary", False) else ".csv"


def _write(out, name, M, args):
    return write_matrix(Path(out) / f"{name}{_ext(args)}", M).name


def _rho_value(text):
    if text in RHO_LADDER:
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"--rho must be one of {', '.join(RHO_LADDER)} or a number, got {text!r}"
        ) from None


def _manifest(command, args, **extra):
    out = {"command": command, "version": __version__, "seed": getattr(args, "seed", None)}
    out.update(extra)
    return out


def _shape(M):
    return list(np.shape(M))


def cmd_simulate(args):
    spec = ToySpec(n=args.n, grid=args.grid, nodes=args.nodes, r_j=args.r_j, r_ind=args.r_ind,
                   noise_sd=args.noise_sd, seed=args.seed)
    X, Y, truth = generate_toy(spec)
    out = Path(args.out)
    files = [_write(out, "X", X, args), _write(out, "Y", Y, args)]
    for name in ("M_j", "M_ix", "M_iy", "S_jx", "S_jy", "S_ix", "S_iy", "D_x", "D_y"):
        files.append("truth/" + _write(out / "truth", name, getattr(truth, name), args))
    spec_dict = {k: getattr(spec, k) for k in ("n", "grid", "nodes", "r_j", "r_ind", "noise_sd", "seed")}
    write_json(out / "manifest.json", _manifest("simulate", args, spec=spec_dict, files=files))
    return EXIT_OK


def _config(args, **over):
    cfg = SingConfig(
        rank_x=getattr(args, "rank_x", None),
        rank_y=getattr(args, "rank_y", None),
        rank_j=getattr(args, "rank_j", None),
        standardize=args.standardize,
        individual=not getattr(args, "no_individual", False),
        rho_extent=getattr(args, "rho", "small"),
        alpha=args.alpha,
        n_perm=getattr(args, "n_perm", 1000),
        alpha_level=getattr(args, "alpha_level", 0.01),
        restarts=args.restarts,
        max_iter=args.max_iter,
        tol=args.tol,
        seed=args.seed,
        divisor=args.divisor,
        ols_scores=getattr(args, "ols_scores", False),
        estimate_ranks=getattr(args, "estimate_ranks", False),
    )
    for k, v in over.items():
        setattr(cfg, k, v)
    return cfg


def _load_init(directory):
    d = Path(directory)
    ux = d / "Ux_matched.csv" if (d / "Ux_matched.csv").exists() else d / "Ux_matched.bin"
    uy = d / "Uy_matched.csv" if (d / "Uy_matched.csv").exists() else d / "Uy_matched.bin"
    test = read_json(d / "rank_test.json")
    return StageInit(Ux=read_matrix(ux, header=False), Uy=read_matrix(uy, header=False),
                     r_j=int(test["r_j"]))


def cmd_decompose(args):
    X = read_matrix(args.x)
    Y = read_matrix(args.y)
    cfg = _config(args)
    init = _load_init(args.init_from) if args.init_from else None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = sing_decompose(X, Y, cfg, init=init)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)

    out = Path(args.out)
    files = [_write(out, name, M, args) for name, M in result.arrays().items()]
    files += [_write(out, "scale_x", result.scale_x, args), _write(out, "scale_y", result.scale_y, args),
              _write(out, "Ux", result.Ux, args), _write(out, "Uy", result.Uy, args)]
    diag = dict(result.diagnostics)
    manifest = _manifest(
        "decompose", args,
        config=cfg.to_dict(),
        rho=cfg.rho_extent,
        rho_numeric=diag.get("rho"),
        r_j=result.r_j,
        inputs={"x": str(args.x), "y": str(args.y), "x_shape": _shape(X), "y_shape": _shape(Y),
                "init_from": str(args.init_from) if args.init_from else None},
        diagnostics=diag,
        warnings=[str(w.message) for w in caught],
        files=files,
    )
    write_json(out / "manifest.json", manifest)
    return EXIT_OK


def cmd_lngca(args):
    if args.y is None and args.rank_y is not None:
        raise InvalidInputError("--rank-y given without --y")
    X = read_matrix(args.x)
    cfg = _config(args)
    if args.y is not None:
        Xc, Yc = preprocess_pair(X, read_matrix(args.y), cfg.standardize)
        sets = [("x", Xc, args.rank_x), ("y", Yc, args.rank_y)]
    else:
        Xc = standardize_iterative(X) if cfg.standardize else double_center(X)
        sets = [("x", Xc, args.rank_x)]

    out = Path(args.out)
    files, report = [], {}
    for tag, data, rank in sets:
        if rank is None:
            raise MissingRankError(f"--rank-{tag} is required: supply the number of non-Gaussian components")
        wh = whiten(data, divisor=cfg.divisor)
        dec = lngca(data, rank, alpha=cfg.alpha, restarts=cfg.restarts, seed=cfg.seed,
                    max_iter=cfg.max_iter, tol=cfg.tol, whitener=wh)
        M = estimate_mixing_ols(dec.S, data)
        files += [_write(out, f"U{tag}", dec.U, args), _write(out, f"S{tag}", dec.S, args),
                  _write(out, f"M{tag}", M, args), _write(out, f"jb_{tag}", dec.jb_values, args)]
        report[tag] = {
            "rank": rank,
            "jb_values": dec.jb_values,
            "converged": bool(dec.converged),
            "objective": dec.objective,
            "best_restart": dec.best_restart,
            "max_feasibility_error": dec.max_feasibility_error,
        }
    write_json(out / "lngca_manifest.json",
               _manifest("lngca", args, config=cfg.to_dict(), results=report, files=files))
    return EXIT_OK


def cmd_match(args):
    Mx = read_matrix(args.mx, header=False)
    My = read_matrix(args.my, header=False)
    Ux = read_matrix(args.ux, header=False) if args.ux else None
    Uy = read_matrix(args.uy, header=False) if args.uy else None
    res = greedy_match(Mx - Mx.mean(axis=0), My - My.mean(axis=0), Ux, Uy)
    out = Path(args.out)
    files = [_write(out, "Mx_matched", res.Mx, args), _write(out, "My_matched", res.My, args),
             _write(out, "order_x", res.order_x, args), _write(out, "order_y", res.order_y, args),
             _write(out, "matched_distances", res.matched_distances, args)]
    if Ux is not None:
        files.append(_write(out, "Ux_matched", res.Ux, args))
    if Uy is not None:
        files.append(_write(out, "Uy_matched", res.Uy, args))
    write_json(out / "match_manifest.json", _manifest(
        "match", args, order_x=res.order_x, order_y=res.order_y,
        matched_distances=res.matched_distances, files=files))
    return EXIT_OK


def cmd_permtest(args):
    Mx = read_matrix(args.mx, header=False)
    My = read_matrix(args.my, header=False)
    test = perm_test_joint_rank(Mx, My, n_perm=args.n_perm, alpha_level=args.alpha_level,
                                seed=args.seed)
    out = Path(args.out)
    report = {
        "r_j": test.r_j,
        "pvalues_fwer": test.pvalues_fwer,
        "correlations": test.correlations,
        "n_perm": test.n_perm,
        "alpha_level": test.alpha_level,
        "seed": test.seed,
        "permuted": test.permuted,
        "version": __version__,
    }
    write_json(out / "rank_test.json", report)
    _write(out, "pvalues", test.pvalues_fwer, args)
    return EXIT_OK


def _grid_side(p, grid):
    side = grid if grid else int(round(np.sqrt(p)))
    if side * side != p:
        raise InvalidInputError(f"cannot reshape {p} loadings into a square grid; pass --grid")
    return side


def cmd_export(args):
    src = Path(args.result)
    out = Path(args.out)
    files = []

    def load(name):
        for ext in (".csv", ".bin"):
            path = src / f"{name}{ext}"
            if path.exists() and path.stat().st_size > 0:
                return read_matrix(path, header=False)
        return None

    for block in ("S_jx", "S_ix"):
        S = load(block)
        if S is None:
            continue
        side = _grid_side(S.shape[1], args.grid)
        for k, row in enumerate(S):
            files.append(_write(out, f"image_{block}_{k + 1}", row.reshape(side, side), args))
    diag = np.nan if args.net_diag == "nan" else float(args.net_diag)
    for block in ("S_jy", "S_iy"):
        S = load(block)
        if S is None:
            continue
        for k, row in enumerate(S):
            files.append(_write(out, f"net_{block}_{k + 1}", vec_to_net(row, diag), args))
    Mjx, Mjy = load("M_jx"), load("M_jy")
    if Mjx is not None and Mjy is not None:
        r = Mjx.shape[1]
        cols = [np.arange(1, Mjx.shape[0] + 1)] + [Mjx[:, k] for k in range(r)] + [Mjy[:, k] for k in range(r)]
        header = ["subject"] + [f"M_jx_{k + 1}" for k in range(r)] + [f"M_jy_{k + 1}" for k in range(r)]
        path = write_matrix(out / "scores_joint.csv", np.column_stack(cols), fmt="csv", header=header)
        files.append(path.name)
    write_json(out / "export_manifest.json", _manifest("export", args, source=str(src), files=files))
    return EXIT_OK


def _add_fit_options(p, ranks=True):
    if ranks:
        p.add_argument("--rank-x", type=int, default=None, help="non-Gaussian components in X")
        p.add_argument("--rank-y", type=int, default=None, help="non-Gaussian components in Y")
    p.add_argument("--standardize", action="store_true", help="standardize features instead of double-centering")
    p.add_argument("--alpha", type=float, default=0.8, help="skewness weight in the JB statistic")
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--max-iter", type=int, default=1500)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--divisor", choices=("p", "p-1"), default="p")
    p.add_argument("--seed", type=int, default=0)


def _add_output(p, required=True):
    p.add_argument("--out", required=required, help="output directory")
    p.add_argument("--binary", action="store_true", help="write matrices in the binary format")


def build_parser():
    parser = argparse.ArgumentParser(prog="sing", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write seeded toy datasets")
    p.add_argument("--n", type=int, default=48)
    p.add_argument("--grid", type=int, default=33)
    p.add_argument("--nodes", type=int, default=100)
    p.add_argument("--r-j", type=int, default=2)
    p.add_argument("--r-ind", type=int, default=2)
    p.add_argument("--noise-sd", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    _add_output(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("decompose", help="joint decomposition of two datasets")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    _add_fit_options(p)
    p.add_argument("--rank-j", type=int, default=None, help="override the permutation-test joint rank")
    p.add_argument("--rho", type=_rho_value, default="small",
                   help="small, medium, large or a positive number")
    p.add_argument("--n-perm", type=int, default=1000)
    p.add_argument("--alpha-level", type=float, default=0.01)
    p.add_argument("--no-individual", action="store_true")
    p.add_argument("--ols-scores", action="store_true", help="re-estimate scores by least squares")
    p.add_argument("--estimate-ranks", action="store_true",
                   help="pick missing ranks with a Monte Carlo JB screen (heuristic)")
    p.add_argument("--init-from", default=None,
                   help="directory with Ux_matched, Uy_matched and rank_test.json from staged runs")
    _add_output(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("lngca", help="per-dataset component extraction")
    p.add_argument("--x", required=True)
    p.add_argument("--y", default=None)
    _add_fit_options(p)
    _add_output(p)
    p.set_defaults(func=cmd_lngca)

    p = sub.add_parser("match", help="greedy chordal matching of score columns")
    p.add_argument("--mx", required=True)
    p.add_argument("--my", required=True)
    p.add_argument("--ux", default=None)
    p.add_argument("--uy", default=None)
    _add_output(p)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("permtest", help="joint-rank permutation test on matched scores")
    p.add_argument("--mx", required=True)
    p.add_argument("--my", required=True)
    p.add_argument("--n-perm", type=int, default=1000)
    p.add_argument("--alpha-level", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    _add_output(p)
    p.set_defaults(func=cmd_permtest)

    p = sub.add_parser("export", help="plot-ready CSVs from a decompose output directory")
    p.add_argument("--result", required=True)
    p.add_argument("--grid", type=int, default=None, help="image side length (default sqrt(p_x))")
    p.add_argument("--net-diag", default="0", help="diagonal value for network matrices, or nan")
    _add_output(p)
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (NumericError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"sing {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (SingError, ValueError, OSError) as exc:
        print(f"sing {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
