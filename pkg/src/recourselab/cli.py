"""Command-line entry point wiring the pipeline stages.

Subcommands: synth, train, gen, scenarios, fit, predict, simulate, evaluate,
serve. Exit codes: 2 usage, 3 validation failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from . import awp as awp_mod
from . import dataset as ds
from . import preference, recourse, study, tree as tree_mod
from .metrics import FeatureWeights
from .schema import ApplicantProfile, default_schema, validate_profile

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_IO = 4


class ValidationError(Exception):
    pass


def _load_json(path: str):
    with open(path) as f:
        return json.load(f)


def cmd_synth(args) -> int:
    cfg = ds.LabelingConfig.from_json_dict(_load_json(args.config)) if args.config \
        else ds.LabelingConfig()
    schema = default_schema()
    labeled = ds.synthesize(args.n, args.seed, cfg, schema)
    ds.write_csv(args.out, labeled, schema, args.seed, cfg)
    approved = sum(lp.decision for lp in labeled)
    print(f"synth: wrote {len(labeled)} profiles ({approved} approved) to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    t0 = time.time()
    labeled = ds.read_csv(args.data)
    tree, acc = tree_mod.train(labeled, split_seed=args.seed, min_leaf=args.min_leaf)
    tree_mod.save_tree(args.out, tree, seed=args.seed, accuracy=acc)
    n_leaves = len(tree.leaves())
    print(f"train: test accuracy {acc:.4f}, {n_leaves} leaves, "
          f"{time.time() - t0:.1f}s, saved to {args.out}")
    return EXIT_OK


def _read_profile(path: str) -> ApplicantProfile:
    x = ApplicantProfile.from_dict(_load_json(path))
    violations = validate_profile(x)
    if violations:
        raise ValidationError(f"invalid profile: {violations}")
    return x


def cmd_gen(args) -> int:
    tree = tree_mod.load_tree(args.tree)
    x = _read_profile(args.profile)
    w = None
    if args.weights:
        w = FeatureWeights.from_json_dict(_load_json(args.weights).get("weights",
                                          _load_json(args.weights)))
    cfg = recourse.GenerationConfig(k=args.k)
    out = recourse.generate_top_k(tree, x, cfg=cfg, w=w,
                                  use_graph_search=args.graph_search)
    recourse.write_recourses(args.out, out)
    print(f"gen: {len(out)} recourses written to {args.out}"
          + (" (fewer than requested)" if len(out) < args.k else ""))
    return EXIT_OK


def cmd_scenarios(args) -> int:
    tree = tree_mod.load_tree(args.tree)
    labeled = ds.read_csv(args.data)
    w = FeatureWeights.from_json_dict(_load_json(args.weights)) if args.weights \
        else study.GLOBAL_CONSTRUCTION_WEIGHTS
    builders = {
        "tradeoff": lambda: study.build_tradeoff_scenarios(
            tree, labeled, w, args.n, args.seed, margin=args.margin),
        "probing": lambda: study.build_probing_scenarios(
            tree, labeled, w, args.n, args.seed, margin=args.margin),
        "rounding": lambda: study.build_rounding_scenarios(
            tree, labeled, args.n, args.seed),
    }
    scenarios, complete = builders[args.kind]()
    study.write_scenarios_jsonl(args.out, scenarios)
    note = "" if complete else " (WARNING: fewer than requested)"
    print(f"scenarios: {len(scenarios)} {args.kind} scenarios to {args.out}{note}")
    return EXIT_OK


def cmd_fit(args) -> int:
    comparisons = preference.read_comparisons_jsonl(args.responses)
    model = preference.fit_bt(comparisons, reg=args.reg)
    with open(args.out, "w") as f:
        json.dump(model.to_json_dict(), f, indent=2)
    w = preference.weights_from_beta(model)
    print(f"fit: {len(comparisons)} comparisons, converged={model.converged}, "
          f"weights={[round(v, 3) for v in w.values]}")
    return EXIT_OK


def cmd_predict(args) -> int:
    x = _read_profile(args.profile)
    doc = _load_json(args.candidates)
    candidates = [recourse.Recourse.from_json_dict(rd)
                  for rd in doc.get("recourses", doc)]
    w = FeatureWeights.from_json_dict(_load_json(args.weights).get("weights",
                                      _load_json(args.weights)))
    alpha = awp_mod.load_thresholds(args.thresholds) if args.thresholds \
        else awp_mod.Thresholds()
    pred = awp_mod.predict(x, candidates, w, alpha)
    out = json.dumps(pred.to_json_dict(), indent=2)
    if args.out:
        with open(args.out, "w") as f:
            f.write(out + "\n")
    print(out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    tree = tree_mod.load_tree(args.tree)
    labeled = ds.read_csv(args.data)
    report = study.simulate_cohort(tree, labeled, n_users=args.users,
                                   tau=args.tau, seed=args.seed)
    if args.report:
        with open(args.report, "w") as f:
            json.dump(report.to_json_dict(), f, indent=2)
    print(f"simulate: {args.users} users, tau={args.tau}")
    print(f"  both-acceptable pairs evaluated: {report.n_awp_evaluated}")
    acc = "n/a" if report.awp_accuracy is None else f"{report.awp_accuracy:.4f}"
    print(f"  two-stage prediction accuracy: {acc}")
    print(f"  bins: {report.bins}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    scenarios = study.read_scenarios_jsonl(args.scenarios)
    responses = []
    with open(args.responses) as f:
        for line in f:
            line = line.strip()
            if line:
                doc = json.loads(line)
                responses.append(study.ScenarioResponse(
                    doc["scenario_id"], doc["choice"], doc.get("reason", "")))
    w = FeatureWeights.from_json_dict(_load_json(args.weights).get("weights",
                                      _load_json(args.weights)))
    alpha = awp_mod.load_thresholds(args.thresholds) if args.thresholds \
        else awp_mod.Thresholds()
    report = study.evaluate_session(responses, w, alpha, scenarios)
    if args.out:
        with open(args.out, "w") as f:
            json.dump(report.to_json_dict(), f, indent=2)
    print(report.render_table())
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(data_dir=args.data_dir, tree_path=args.tree,
                     dataset_path=args.data)
    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="recourselab",
                                description="Personalized recourse pipeline")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate the labeled synthetic dataset")
    sp.add_argument("--n", type=int, default=100_000)
    sp.add_argument("--seed", type=int, default=7)
    sp.add_argument("--out", required=True)
    sp.add_argument("--config", help="LabelingConfig JSON")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("train", help="train the decision-tree classifier")
    sp.add_argument("--data", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--min-leaf", type=int, default=5)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("gen", help="generate top-K recourses for a profile")
    sp.add_argument("--tree", required=True)
    sp.add_argument("--profile", required=True, help="profile JSON file")
    sp.add_argument("--k", type=int, default=15)
    sp.add_argument("--weights", help="weights JSON (optional)")
    sp.add_argument("--graph-search", action="store_true",
                    help="cross-check with the all-pairs shortest-path route")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("scenarios", help="build study scenarios")
    sp.add_argument("--tree", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--kind", choices=["tradeoff", "probing", "rounding"],
                    default="tradeoff")
    sp.add_argument("--n", type=int, default=20)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--margin", type=float, default=0.1)
    sp.add_argument("--weights", help="construction weights JSON")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_scenarios)

    sp = sub.add_parser("fit", help="fit a per-user preference model")
    sp.add_argument("--responses", required=True, help="PairwiseComparison JSONL")
    sp.add_argument("--reg", type=float, default=preference.DEFAULT_REG)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("predict", help="two-stage choice prediction")
    sp.add_argument("--profile", required=True)
    sp.add_argument("--candidates", required=True)
    sp.add_argument("--weights", required=True)
    sp.add_argument("--thresholds")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("simulate", help="simulated cohort pipeline")
    sp.add_argument("--tree", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--users", type=int, default=41)
    sp.add_argument("--tau", type=float, default=0.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--report", help="write cohort report JSON here")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("evaluate", help="evaluate responses against scenarios")
    sp.add_argument("--scenarios", required=True)
    sp.add_argument("--responses", required=True)
    sp.add_argument("--weights", required=True)
    sp.add_argument("--thresholds")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("serve", help="run the elicitation session service")
    sp.add_argument("--tree", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--data-dir", required=True)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8000)
    sp.set_defaults(func=cmd_serve)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if e.code is not None else EXIT_USAGE
    try:
        return args.func(args)
    except (ValidationError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
