"""Command-line front end: run, analyze, serve.

Exit codes: 0 = run completed with no qualifying rows, 1 = counterexamples
found (falsify/fuzz) or target met (synthesize), 2 = configuration or
protocol error. The inverted exit 1 makes "did it falsify" scriptable.
"""

import argparse
import csv
import json
import os
import sys

from . import falsify
from .errors import ConfigInvalid, FalsifyKitError
from .space import Point, build_space, domain_from_json
from .table import import_csv

_CONFIG_KEYS = {"space", "property", "sampler", "mode", "budget", "stop_on_first",
                "seed", "simulator", "objective", "output_dir",
                "restart_on_stagnation", "restart_after"}
_SPACE_KEYS = {"domain", "distributions", "constraints"}


def load_config_doc(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"{path} is not valid JSON: {exc}")
    if not isinstance(doc, dict):
        raise ConfigInvalid("config must be a JSON object")
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise ConfigInvalid(f"unknown keys {sorted(unknown)}", field=sorted(unknown)[0])
    return doc


def space_from_doc(doc):
    if not isinstance(doc, dict) or "domain" not in doc:
        raise ConfigInvalid("space requires a 'domain' tree", "space.domain")
    unknown = set(doc) - _SPACE_KEYS
    if unknown:
        raise ConfigInvalid(f"unknown space keys {sorted(unknown)}",
                            f"space.{sorted(unknown)[0]}")
    return build_space(domain_from_json(doc["domain"]),
                       distributions=doc.get("distributions"),
                       constraints=doc.get("constraints"))


def _simulator_from_doc(doc):
    if not isinstance(doc, dict):
        raise ConfigInvalid("simulator must be an object", "simulator")
    kind = doc.get("kind")
    if kind == "in_process":
        unknown = set(doc) - {"kind", "name", "params"}
        if unknown:
            raise ConfigInvalid(f"unknown simulator keys {sorted(unknown)}",
                                f"simulator.{sorted(unknown)[0]}")
        if "name" not in doc:
            raise ConfigInvalid("in_process simulator needs a name", "simulator.name")
        return falsify.InProcessSim(doc["name"], doc.get("params", {}))
    if kind == "socket":
        unknown = set(doc) - {"kind", "host", "port", "timeout"}
        if unknown:
            raise ConfigInvalid(f"unknown simulator keys {sorted(unknown)}",
                                f"simulator.{sorted(unknown)[0]}")
        return falsify.SocketSim(doc.get("host", "127.0.0.1"),
                                 int(doc.get("port", 8200)),
                                 float(doc.get("timeout", 300.0)))
    raise ConfigInvalid(f"unknown simulator kind {kind!r}", "simulator.kind")


def build_run_config(doc, seed=None, budget=None, mode=None, simulator=None):
    """ConfigDocument -> RunConfig, applying CLI overrides."""
    for key in ("space", "sampler", "mode", "budget", "seed", "simulator"):
        if key not in doc:
            raise ConfigInvalid(f"missing required key {key!r}", key)
    space = space_from_doc(doc["space"])
    sampler = doc["sampler"]
    if not isinstance(sampler, dict) or "kind" not in sampler:
        raise ConfigInvalid("sampler must be an object with a 'kind'", "sampler")
    return falsify.RunConfig(
        space=space,
        prop=doc.get("property"),
        sampler=sampler,
        mode=mode if mode is not None else doc["mode"],
        budget=budget if budget is not None else doc["budget"],
        seed=int(seed if seed is not None else doc["seed"]),
        simulator=simulator if simulator is not None else _simulator_from_doc(doc["simulator"]),
        stop_on_first=bool(doc.get("stop_on_first", False)),
        objective=doc.get("objective"),
        restart_on_stagnation=bool(doc.get("restart_on_stagnation", False)),
        restart_after=int(doc.get("restart_after", 100)),
    )


# ---------------------------------------------------------------------------
# Output artifacts
# ---------------------------------------------------------------------------

def _write_runs_csv(path, result, space):
    header = ["run_id", "score", "satisfied", "status",
              *space.ordered, *space.unordered]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for rec in result.all_runs:
            if rec.error is None:
                score = format(rec.score, ".17g")
                sat = str(bool(rec.satisfied)).lower()
                status = "ok"
            else:
                score, sat, status = "", "", "error"
            cells = [rec.run_id, score, sat, status]
            for p in space.ordered:
                cells.append(format(rec.point.value(p), ".17g"))
            for p in space.unordered:
                cells.append(json.dumps(rec.point.value(p), separators=(",", ":")))
            writer.writerow(cells)


def _summary_doc(config, result):
    best_point = None
    best_score = None
    if result.best is not None:
        best_point = dict(sorted(result.best[0].assignments.items()))
        best_score = result.best[1]
    errors = sum(1 for r in result.all_runs if r.error is not None)
    return {
        "mode": config.mode,
        "seed": config.seed,
        "budget": config.budget,
        "simulations_used": result.simulations_used,
        "counterexamples": len(result.counterexamples),
        "simulator_errors": errors,
        "best_score": best_score,
        "best_point": best_point,
    }


def _execute(config, out_dir):
    result = falsify.run(config)
    os.makedirs(out_dir, exist_ok=True)
    result.counterexamples.export_csv(os.path.join(out_dir, "error_table.csv"))
    _write_runs_csv(os.path.join(out_dir, "runs.csv"), result, config.space)
    summary = _summary_doc(config, result)
    with open(os.path.join(out_dir, "summary.json"), "w", newline="") as fh:
        fh.write(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    print(f"{config.mode}: {summary['counterexamples']} qualifying rows "
          f"in {summary['simulations_used']} simulations "
          f"({result.wall_time:.2f}s wall time); artifacts in {out_dir}",
          file=sys.stderr)
    return 1 if len(result.counterexamples) else 0


def cmd_run(args):
    doc = load_config_doc(args.config)
    config = build_run_config(doc, seed=args.seed, budget=args.budget, mode=args.mode)
    out_dir = args.out or doc.get("output_dir", "out")
    return _execute(config, out_dir)


def cmd_serve(args):
    doc = load_config_doc(args.config)
    host, _, port = args.listen.rpartition(":")
    if not host or not port.isdigit():
        raise ConfigInvalid(f"--listen expects HOST:PORT, got {args.listen!r}")
    sim = falsify.SocketSim(host, int(port), float(args.timeout))
    config = build_run_config(doc, seed=args.seed, budget=args.budget,
                              mode=args.mode, simulator=sim)
    out_dir = args.out or doc.get("output_dir", "out")
    return _execute(config, out_dir)


def cmd_analyze(args):
    with open(args.space) as fh:
        doc = json.load(fh)
    space = space_from_doc(doc["space"] if "space" in doc else doc)
    table = import_csv(space, args.table)
    out = {"rows": len(table)}
    if args.pca:
        report = table.pca_analyze()
        out["pca"] = {
            "columns": list(report.columns),
            "components": report.components.tolist(),
            "explained_variance": report.explained_variance.tolist(),
            "mean": report.mean.tolist(),
        }
    if args.recurrent is not None:
        report = table.recurrent_values(args.recurrent)
        out["recurrent"] = {
            "per_column": {path: [[v, f] for v, f in pairs]
                           for path, pairs in report.per_column.items()},
            "combinations": [{"columns": list(c.columns), "values": list(c.values),
                              "support": c.support} for c in report.combinations],
        }
    if args.k_closest is not None:
        anchor_doc, k = args.k_closest
        anchor = Point(json.loads(anchor_doc))
        rows = table.select_k_closest(anchor, int(k))
        out["k_closest"] = [
            {"run_id": r.run_id, "score": r.score,
             "point": dict(sorted(table.row_point(r).assignments.items()))}
            for r in rows
        ]
    json.dump(out, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


def make_parser():
    parser = argparse.ArgumentParser(
        prog="falsify-kit",
        description="Simulation-guided falsification and parameter synthesis")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a campaign from a config file")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int, default=None, help="override config seed")
    p_run.add_argument("--budget", type=int, default=None, help="override budget")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--mode", choices=falsify.MODES, default=None)
    p_run.set_defaults(fn=cmd_run)

    p_serve = sub.add_parser("serve",
                             help="run a campaign against one external socket simulator")
    p_serve.add_argument("--config", required=True)
    p_serve.add_argument("--listen", required=True, metavar="HOST:PORT")
    p_serve.add_argument("--timeout", type=float, default=300.0)
    p_serve.add_argument("--seed", type=int, default=None)
    p_serve.add_argument("--budget", type=int, default=None)
    p_serve.add_argument("--out", default=None)
    p_serve.add_argument("--mode", choices=falsify.MODES, default=None)
    p_serve.set_defaults(fn=cmd_serve)

    p_an = sub.add_parser("analyze", help="analyze an exported error table")
    p_an.add_argument("--table", required=True)
    p_an.add_argument("--space", required=True,
                      help="JSON file with the space document (or a full config)")
    p_an.add_argument("--pca", action="store_true")
    p_an.add_argument("--recurrent", type=float, default=None, metavar="THRESHOLD")
    p_an.add_argument("--k-closest", nargs=2, default=None,
                      metavar=("ANCHOR_JSON", "K"))
    p_an.set_defaults(fn=cmd_analyze)
    return parser


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except FalsifyKitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"invalid argument: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
