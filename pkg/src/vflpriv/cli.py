"""Command-line experiment runner.

Subcommands cover model training, the score-based and black-box attacks, the
two defenses, closed-form evaluation and the three plot-ready sweeps. A
key=value config file can seed any flag; explicit flags win. Exit codes:
0 success, 2 bad configuration or input, 3 solver failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import blackbox, defense, metrics, numerics
from .attacks import AttackError, run_attack
from .dataset import DataError, Dataset, SyntheticSpec, load_dataset, synthesize
from .model import (TrainConfig, TrainingError, VflModel, VflSplit, accuracy,
                    predict, train)
from .system import SystemError_, build_system

_CONFIG_ERRORS = (DataError, metrics.MetricsError, ValueError, OSError, KeyError)
_SOLVER_ERRORS = (AttackError, TrainingError, SystemError_,
                  numerics.NumericsError, np.linalg.LinAlgError)

DESK_N = 200
DESK_TRIALS = 20
FULL_N = 1000
FULL_TRIALS = 100


def read_config(path) -> dict:
    """Parse a key=value file; blank lines and #-comments are skipped."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise DataError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def _resolve_window(args) -> None:
    """Translate --passive-features I..J into the (start, d) window."""
    if getattr(args, "passive_features", None):
        lo, hi = (int(s) for s in args.passive_features.split(".."))
        if hi < lo:
            raise DataError("--passive-features range must be non-decreasing")
        args.start, args.d = lo, hi - lo + 1


def _load_data(args) -> Dataset:
    if args.data:
        return load_dataset(args.data, label_col=args.label_col,
                            train_fraction=args.train_frac, seed=args.seed)
    return synthesize(SyntheticSpec(n=args.synth_n, d_t=args.synth_dt,
                                    k=args.synth_k, seed=args.seed))


def _emit(rows, header, out_path):
    if out_path:
        metrics.write_csv(out_path, header, rows)
    else:
        print(",".join(header))
        for row in rows:
            print(",".join(str(c) for c in row))


def cmd_train(args) -> int:
    ds = _load_data(args)
    split_cfg = VflSplit.contiguous(ds.d_t, args.start, args.d)
    cfg = TrainConfig(lam=args.lam, seed=args.seed)
    model = train(ds, split_cfg, cfg)
    if args.out:
        model.save(args.out)
    print(f"accuracy={accuracy(model, ds):.6f}")
    return 0


def cmd_attack(args) -> int:
    ds = _load_data(args)
    split_cfg = VflSplit.contiguous(ds.d_t, args.start, args.d)
    if args.model:
        model = VflModel.load(args.model)
    else:
        model = train(ds, split_cfg, TrainConfig(lam=args.lam, seed=args.seed))
    rng = np.random.default_rng(args.seed)
    rows = np.flatnonzero(ds.test_mask)[:args.n]
    out = []
    for name in args.attacks.split(","):
        mse = metrics.attack_mse_on_rows(model, ds, rows, name.strip(),
                                         rng=rng, init=args.init)
        out.append([name.strip(), args.d, len(rows), repr(mse)])
    _emit(out, ["attack", "d", "n", "mse"], args.out)
    return 0


def _blackbox_trial_mse(case: int, n: int, rng: np.random.Generator,
                        w: float, b: float) -> float:
    x = rng.uniform(0.0, 1.0, size=n)
    v = w * x + b
    if case == 1:
        est = blackbox.bb_case1(v)
    elif case == 2:
        est = blackbox.bb_case2(v)
    else:
        est = blackbox.bb_case3(v)
    return metrics.empirical_mse(x[None, :], est.x_hat[None, :])


def cmd_blackbox(args) -> int:
    rng = np.random.default_rng(args.seed)
    lo, hi = (int(s) for s in args.n_grid.split(".."))
    if case_params := {1: (1.0, 0.0), 2: (1.0, 1.0), 3: (1.0, -2.0)}.get(args.case):
        w, b = case_params
    else:
        raise DataError(f"unknown case {args.case}")
    if args.w is not None:
        w = args.w
    if args.b is not None:
        b = args.b
    out = []
    for n in range(lo, hi + 1):
        vals = [_blackbox_trial_mse(args.case, n, rng, w, b)
                for _ in range(args.trials)]
        out.append([n, repr(float(np.mean(vals)))])
    _emit(out, ["n", "mse"], args.out)
    return 0


def cmd_defend(args) -> int:
    ds = _load_data(args)
    split_cfg = VflSplit.contiguous(ds.d_t, args.start, args.d)
    model = train(ds, split_cfg, TrainConfig(lam=args.lam, seed=args.seed))
    rows = np.flatnonzero(ds.test_mask)[:args.n]
    act, pas = list(split_cfg.active), list(split_cfg.passive)
    out = []
    if args.scheme == "pps1":
        mom = metrics.moments(ds, pas)
        probe = build_system(model, ds.x[rows[0], act],
                             predict(model, ds.x[rows[0], act], ds.x[rows[0], pas]))
        h = defense.pps1_optimal_h(probe, mom.k0)
        revealed = defense.pps1_reveal_params(model, h)
        truths, estimates = [], []
        for i in rows:
            y_act, x_pas = ds.x[i, act], ds.x[i, pas]
            c = predict(model, y_act, x_pas)
            sys_ = build_system(revealed, y_act, c, source="defended")
            estimates.append(run_attack(args.attack, sys_).x_hat)
            truths.append(x_pas)
        mse = metrics.empirical_mse(np.array(truths), np.array(estimates))
        out.append(["pps1", "", repr(mse), repr(0.0)])
    else:
        alphas = [float(a) for a in args.alpha.split(",")]
        for alpha in alphas:
            truths, estimates, kls = [], [], []
            for i in rows:
                y_act, x_pas = ds.x[i, act], ds.x[i, pas]
                z = model.logits(y_act, x_pas)
                c = predict(model, y_act, x_pas)
                if args.scheme in ("s1", "s2"):
                    probe = build_system(model, y_act, c)
                    plan = defense.pps2_optimal_direction(probe, alpha, args.scheme)
                    c_noisy = defense.apply_scheme(z, plan, args.scheme)
                else:
                    c_noisy = defense.apply_scheme(z, alpha, args.scheme)
                sys_ = build_system(model, y_act, c_noisy, source="noisy")
                estimates.append(run_attack(args.attack, sys_).x_hat)
                truths.append(x_pas)
                kls.append(metrics.kl_divergence(c, c_noisy))
            mse = metrics.empirical_mse(np.array(truths), np.array(estimates))
            out.append([args.scheme, alpha, repr(mse), repr(float(np.mean(kls)))])
    _emit(out, ["scheme", "alpha", "mse", "avg_kl_bits"], args.out)
    return 0


def cmd_evaluate(args) -> int:
    ds = _load_data(args)
    split_cfg = VflSplit.contiguous(ds.d_t, args.start, args.d)
    model = train(ds, split_cfg, TrainConfig(lam=args.lam, seed=args.seed))
    pas = list(split_cfg.passive)
    act = list(split_cfg.active)
    mom = metrics.moments(ds, pas)
    i0 = int(np.flatnonzero(ds.test_mask)[0])
    sys_ = build_system(model, ds.x[i0, act],
                        predict(model, ds.x[i0, act], ds.x[i0, pas]))
    reports = metrics.closed_form_mse(sys_, mom)
    out = [[r.attack, repr(r.closed_form), repr(r.lower), repr(r.upper),
            repr(r.mu_lower)] for r in reports.values()]
    _emit(out, ["attack", "closed_form", "lower", "upper", "mu_lower"], args.out)
    return 0


def cmd_figure1(args) -> int:
    ds = _load_data(args)
    n_pred = FULL_N if args.full else args.n
    grid = [int(d) for d in args.d_grid.split(",")]
    out = []
    for d in grid:
        for name in args.attacks.split(","):
            mse = metrics.average_over_space(ds, d, name.strip(), n_pred=n_pred,
                                             train_cfg=TrainConfig(lam=args.lam),
                                             seed=args.seed)
            out.append([d, name.strip(), repr(mse)])
    _emit(out, ["d", "attack", "mse"], args.out)
    return 0


def cmd_figure12(args) -> int:
    args.trials = FULL_TRIALS if args.full else args.trials
    return cmd_blackbox(args)


def cmd_tradeoff(args) -> int:
    ds = _load_data(args)
    split_cfg = VflSplit.contiguous(ds.d_t, args.start, args.d)
    model = train(ds, split_cfg, TrainConfig(lam=args.lam, seed=args.seed))
    base_acc = accuracy(model, ds)
    rows = np.flatnonzero(ds.test_mask)[:args.n]
    act, pas = list(split_cfg.active), list(split_cfg.passive)
    out = []
    sweep = ([("s1", a) for a in (0.1, 1.0, 10.0)]
             + [("s2", a) for a in (0.1, 1.0, 10.0)]
             + [("s3", a) for a in (0.1, 0.5, 0.9)]
             + [("class_label", e) for e in (0.01, 0.1)])
    for scheme, param in sweep:
        truths, estimates, kls, agree = [], [], [], []
        for i in rows:
            y_act, x_pas = ds.x[i, act], ds.x[i, pas]
            z = model.logits(y_act, x_pas)
            c = predict(model, y_act, x_pas)
            if scheme in ("s1", "s2"):
                probe = build_system(model, y_act, c)
                plan = defense.pps2_optimal_direction(probe, param, scheme)
                c_noisy = defense.apply_scheme(z, plan, scheme)
            else:
                c_noisy = defense.apply_scheme(z, param, scheme)
            # the original label must attain the maximal noisy score
            agree.append(c_noisy[int(np.argmax(c))] == c_noisy.max())
            sys_ = build_system(model, y_act, c_noisy, source="noisy")
            estimates.append(run_attack("half_star", sys_).x_hat)
            truths.append(x_pas)
            kls.append(metrics.kl_divergence(c, c_noisy))
        mse = metrics.empirical_mse(np.array(truths), np.array(estimates))
        acc = base_acc if all(agree) else float("nan")
        out.append([scheme, param, repr(float(np.mean(kls))), repr(mse),
                    repr(acc)])
    _emit(out, ["scheme", "param", "avg_kl_bits", "mse_half_star", "accuracy"],
          args.out)
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file; flags override")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--data", help="CSV path; omitted means synthetic data")
    p.add_argument("--label-col", type=int, default=-1)
    p.add_argument("--train-frac", type=float, default=0.8)
    p.add_argument("--synth-n", type=int, default=2000)
    p.add_argument("--synth-dt", type=int, default=10)
    p.add_argument("--synth-k", type=int, default=2)
    p.add_argument("--d", type=int, default=4, help="passive feature count")
    p.add_argument("--start", type=int, default=0, help="passive window start")
    p.add_argument("--passive-features", metavar="I..J",
                   help="inclusive index range; overrides --start/--d")
    p.add_argument("--lam", "--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--n", type=int, default=DESK_N, help="prediction count")
    p.add_argument("--full", action="store_true", help="full-scale run sizes")
    p.add_argument("--out", help="output CSV path (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vflpriv",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the split logistic model")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("attack", help="score-based reconstruction attacks")
    _add_common(p)
    p.add_argument("--model", help="trained model JSON (skips training)")
    p.add_argument("--attacks", "--method", dest="attacks",
                   default="half,ls,half_star,rcc2")
    p.add_argument("--init", choices=("zeros", "half", "random"),
                   default="half")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("blackbox", help="single-feature black-box attack sweep")
    _add_common(p)
    p.add_argument("--case", type=int, default=2, choices=(1, 2, 3))
    p.add_argument("--n-grid", default="1..100")
    p.add_argument("--trials", type=int, default=DESK_TRIALS)
    p.add_argument("--w", type=float, default=None)
    p.add_argument("--b", type=float, default=None)
    p.set_defaults(func=cmd_blackbox)

    p = sub.add_parser("defend", help="apply one defense and measure MSE/KL")
    _add_common(p)
    p.add_argument("--scheme", default="s3",
                   choices=("pps1", "s1", "s2", "s3", "class_label"))
    p.add_argument("--alpha", default="0.5", help="comma list of budgets")
    p.add_argument("--attack", default="half_star")
    p.set_defaults(func=cmd_defend)

    p = sub.add_parser("evaluate", help="closed-form MSE values and bounds")
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("figure1", help="MSE-vs-d sweep over attacks")
    _add_common(p)
    p.add_argument("--d-grid", default="1,2,4,6")
    p.add_argument("--attacks", default="rg,zero,half,ls,clamped_ls,half_star,rcc2")
    p.set_defaults(func=cmd_figure1)

    p = sub.add_parser("figure12", help="black-box MSE vs sample count")
    _add_common(p)
    p.add_argument("--case", type=int, default=2, choices=(1, 2, 3))
    p.add_argument("--n-grid", default="1..100")
    p.add_argument("--trials", type=int, default=DESK_TRIALS)
    p.add_argument("--w", type=float, default=None)
    p.add_argument("--b", type=float, default=None)
    p.set_defaults(func=cmd_figure12)

    p = sub.add_parser("tradeoff", help="defense KL/MSE/accuracy sweep")
    _add_common(p)
    p.set_defaults(func=cmd_tradeoff)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args, remaining = parser.parse_known_args(argv)
    try:
        if args.config:
            cfg = read_config(args.config)
            known = {a.dest for a in parser._actions}
            for sp in parser._subparsers._group_actions[0].choices.values():
                known |= {a.dest for a in sp._actions}
            bad = set(cfg) - known
            if bad:
                raise DataError(f"unknown config keys: {sorted(bad)}")
            # config seeds the defaults; explicit flags already won above,
            # so re-parse with config-derived defaults underneath
            sub = parser._subparsers._group_actions[0].choices[args.command]
            typed = {}
            for key, value in cfg.items():
                for action in sub._actions:
                    if action.dest == key:
                        typed[key] = (action.type(value) if action.type
                                      else value)
            sub.set_defaults(**typed)
            args = parser.parse_args(argv)
        if remaining:
            raise DataError(f"unrecognized arguments: {remaining}")
        _resolve_window(args)
        return args.func(args)
    except _SOLVER_ERRORS as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    except _CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
