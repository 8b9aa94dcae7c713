"""Command-line interface: ``priorest {qfi,curve,prioritise,simulate}``.

Exit codes: 0 on success, 2 for invalid input, 3 when a solver fails.
Set ``PRIOREST_LOG`` to a logging level name for diagnostics.
"""

import argparse
import json
import logging
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import bounds, fisher, model as models, prioritised, simulate
from .errors import PriorestError, RankDeficientError, SolverError

log = logging.getLogger("priorest")

PHI_GRID = (-0.04, -0.015, 0.01, 0.035, 0.06)
DELTA_GRID = (0.46, 0.485, 0.51, 0.535, 0.56)
WEIGHTED_FIXTURES = ("w1.8", "w1.4", "w1.0", "w0.6", "w0.2")


def _encode(a):
    return {"re": np.real(a).tolist(), "im": np.imag(a).tolist()}


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=1) + "\n")


def _builtin_model(args):
    if args.model_file:
        base = models.load_model(args.model_file)
    elif args.model == "fock":
        base = models.fock_displacement(args.n)
    else:
        base = models.phase_dephasing(args.phi, args.delta)
    return base, models.n_copy(base, args.copies)


def _load_povm(spec):
    if spec.startswith("builtin:"):
        name = spec.split(":", 1)[1]
        ref = resources.files("priorest") / "data" / f"two_copy_{name}.json"
        if not ref.is_file():
            raise fisher.ValidationError(f"no built-in POVM {name!r}")
        with resources.as_file(ref) as path:
            return name, fisher.load_povm(path)
    return Path(spec).stem, fisher.load_povm(spec)


def _scaling(base, copies):
    j = fisher.qfi(base)
    if abs(j[0, 1]) > 1e-9 * np.sqrt(j[0, 0] * j[1, 1]):
        return None
    return j


def cmd_qfi(args, out):
    base, m = _builtin_model(args)
    j = fisher.qfi(m)
    slds = []
    for i, label in enumerate(m.labels):
        fam = fisher.sld(m, i)
        slds.append({"label": label, "particular": _encode(fam.particular),
                     "kernel_basis": [_encode(k) for k in fam.kernel_basis]})
    _write_json(out / "qfi.json", {"labels": list(m.labels), "theta": list(m.theta), "qfi": j.tolist(), "sld": slds})
    print(json.dumps({"qfi": j.tolist()}))


def cmd_curve(args, out):
    base, m = _builtin_model(args)
    if args.weights:
        a, b = (float(v) for v in args.weights.split(","))
        trace = out / "sdp_trace.csv" if log.isEnabledFor(logging.DEBUG) else None
        res = bounds.nagaoka_hayashi(m, np.diag([a, b]), full_output=True, trace_path=trace)
        _write_json(out / "bound.json", {"a": a, "b": b, "C": res.value, "variances": res.variances.tolist(),
                                         "gap": res.solution.gap})
        print(json.dumps({"C": res.value}))
        return
    curve = bounds.sweep(m, n_points=args.points, threads=args.threads)
    j = _scaling(base, args.copies)
    scaled = bounds.scaled_curve(curve, j, args.copies) if j is not None else None
    if scaled is None:
        log.warning("single-copy QFI is not diagonal; writing raw vertices only")
    bounds.write_halfplanes_csv(scaled if (args.scaled and scaled is not None) else curve, out / "halfplanes.csv")
    bounds.write_vertices_csv(curve, out / "vertices.csv", scaled=scaled)
    show = scaled if (args.scaled and scaled is not None) else curve
    summary = {"points": args.points, "failed": curve.status.count("failed"),
               "intercepts": [show.intercept(0).tolist(), show.intercept(1).tolist()],
               "max_gap": float(np.max(curve.gaps))}
    print(json.dumps(summary))


def cmd_prioritise(args, out):
    base, m = _builtin_model(args)
    p = args.priority
    try:
        report = prioritised.check(m, p)
        body = report.to_json()
        povm = report.fine_povm
    except RankDeficientError as exc:
        log.info("%s", exc)
        coeffs, f_oo, povm = prioritised.sld_family_search(m, p, threads=args.threads)
        f = fisher.classical_fisher(m, povm)
        j = fisher.qfi(m)
        possible = f_oo > prioritised.WITNESS_TOL
        body = {"possible": bool(possible), "witnesses": [], "fisher": f.tolist(),
                "mse_point": [1.0 / j[p, p], 1.0 / f_oo] if possible else None,
                "search": {"coefficients": coeffs.tolist(), "f_oo": f_oo,
                           "result": "found" if possible else "not found"}}
        if not possible:
            povm = None
    _write_json(out / "report.json", body)
    if povm is not None:
        fisher.save_povm(povm, out / "povm.json")
    print(json.dumps({"possible": body["possible"], "fisher": body["fisher"], "mse_point": body["mse_point"]}))


def _simulate_one(args, base, m, name, povm, out):
    coeffs = simulate.EstimatorCoefficients.from_povm(povm) if povm.estimator is not None \
        else simulate.score_estimator(m, povm)
    rec = simulate.sample(m, povm, args.shots, args.seed)
    est = simulate.estimate(coeffs, rec)
    boot = simulate.bootstrap_mse(rec, coeffs, args.resample_shots, args.resamples, args.repeats,
                                  seed=args.seed, threads=args.threads)
    j = _scaling(base, args.copies)
    factor = args.resample_shots * args.copies * (np.diag(j) if j is not None else np.ones(2))
    _write_json(out / "record.json", {"counts": rec.counts.tolist(), "shots": rec.shots, "seed": rec.seed})
    with open(out / "estimates.csv", "w", newline="") as fh:
        fh.write("parameter,estimate\n")
        for label, v in zip(m.labels, est):
            fh.write(f"{label},{v:.17g}\n")
    with open(out / "bootstrap.csv", "w", newline="") as fh:
        fh.write("parameter,mse,std,scaled_mse,scaled_std\n")
        for k, label in enumerate(m.labels):
            vals = (boot.mse[k], boot.std[k], boot.mse[k] * factor[k], boot.std[k] * factor[k])
            fh.write(label + "," + ",".join(format(v, ".17g") for v in vals) + "\n")
    summary = {"povm": name, "estimate": est.tolist(), "scaled_mse": (boot.mse * factor).tolist(),
               "scaled_std": (boot.std * factor).tolist()}
    if base.info.get("family") == "phase-dephasing":
        copies = args.copies

        def family(phi, delta):
            return models.n_copy(models.phase_dephasing(phi, delta), copies)

        offsets = {}
        for tag, grid in (("phi", [(v, base.theta[1]) for v in PHI_GRID]),
                          ("delta", [(base.theta[0], v) for v in DELTA_GRID])):
            scan = simulate.bias_scan(family, povm, coeffs, grid, args.shots, args.seed)
            simulate.write_bias_csv(scan, m.labels, out / f"bias_{tag}.csv")
            k = 0 if tag == "phi" else 1
            offsets[tag] = [float(scan.offset[k]), float(scan.offset_std[k])]
        summary["bias_offsets"] = offsets
    _write_json(out / "summary.json", summary)
    return summary


def cmd_simulate(args, out):
    base, m = _builtin_model(args)
    specs = args.povm_file or ["builtin:phi"]
    if specs == ["builtin:weighted"]:
        specs = [f"builtin:{w}" for w in WEIGHTED_FIXTURES]
    results = []
    for spec in specs:
        name, povm = _load_povm(spec)
        sub = out / name if len(specs) > 1 else out
        sub.mkdir(parents=True, exist_ok=True)
        results.append(_simulate_one(args, base, m, name, povm, sub))
    for r in results:
        print(json.dumps(r))


def _add_model_flags(p, copies=1):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--model", choices=("phase-dephasing", "fock"), default="phase-dephasing")
    src.add_argument("--model-file", metavar="PATH")
    p.add_argument("--phi", type=float, default=0.0)
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--copies", type=int, default=copies)
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("--threads", type=int, default=1)


def build_parser():
    parser = argparse.ArgumentParser(prog="priorest", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("qfi", help="QFI matrix and SLD families")
    _add_model_flags(p)
    p.set_defaults(func=cmd_qfi)

    p = sub.add_parser("curve", help="Nagaoka-Hayashi trade-off curve")
    _add_model_flags(p)
    p.add_argument("--points", type=int, default=40)
    p.add_argument("--weights", metavar="a,b", help="evaluate one bound at W = diag(a, b)")
    p.add_argument("--scaled", action="store_true", help="report QFI-scaled variances")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("prioritise", help="prioritised-measurement check and construction")
    _add_model_flags(p)
    p.add_argument("--priority", type=int, choices=(0, 1), default=0)
    p.set_defaults(func=cmd_prioritise)

    p = sub.add_parser("simulate", help="sampling, bootstrap MSE and bias scans")
    _add_model_flags(p, copies=2)
    p.add_argument("--povm-file", action="append", metavar="PATH",
                   help="POVM JSON, builtin:NAME or builtin:weighted; repeatable")
    p.add_argument("--shots", type=int, default=10000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--resample-shots", type=int, default=200)
    p.add_argument("--resamples", type=int, default=10000)
    p.add_argument("--repeats", type=int, default=500)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None):
    level = os.environ.get("PRIOREST_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        args.func(args, args.out)
    except SolverError as exc:
        print(f"priorest: solver failure: {exc}", file=sys.stderr)
        return 3
    except (PriorestError, OSError) as exc:
        print(f"priorest: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
