"""Command line front end: interactive REPL plus batch subcommands.

The REPL is a thin client of the HTTP service (in-process by default,
remote with --server); batch subcommands (fit-poly, experiment run,
plot-reach, make-packs) run the library directly.

Exit codes: 0 ok, 2 validation problem, 3 an analysis exceeded its caps.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .client import ApiClient, ApiError
from .models import fit_polynomial, load_csv_columns, load_model, r_squared, save_model
from .packs import builtin_packs, write_pack_files
from .predicates import DomainPack, QuestionType
from .reachability import AnalysisCaps, box_from_json
from .session import EngineConfig

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CAPS = 3

#: question keywords, longest first so prefix matching is unambiguous
QUESTION_FORMS: tuple[tuple[str, str, str], ...] = (
    ("what_are_the_usual_circumstances_in_which", "circumstances", "usually"),
    ("what_are_the_circumstances_in_which", "circumstances", "strict"),
    ("what_do_you_usually_do_when", "what_do_you_do_when", "usually"),
    ("what_do_you_do_when", "what_do_you_do_when", "strict"),
    ("when_do_you_usually", "when_do_you", "usually"),
    ("when_do_you", "when_do_you", "strict"),
)


class QuestionSyntaxError(ValueError):
    pass


def _split_top_level_or(text: str) -> list[str]:
    parts: list[str] = []
    depth = 0
    buf: list[str] = []
    tokens = text.replace("(", " ( ").replace(")", " ) ").split()
    for tok in tokens:
        if tok == "(":
            depth += 1
        elif tok == ")":
            depth -= 1
            if depth < 0:
                raise QuestionSyntaxError("unbalanced parentheses")
        if tok == "or" and depth == 0:
            parts.append(" ".join(buf))
            buf = []
        else:
            buf.append(tok)
    if depth != 0:
        raise QuestionSyntaxError("unbalanced parentheses")
    parts.append(" ".join(buf))
    return [p for p in parts if p.strip()]


def _parse_clause(text: str) -> list[str]:
    text = text.strip()
    if text.startswith("and"):
        inner = text[3:].strip()
        if not (inner.startswith("(") and inner.endswith(")")):
            raise QuestionSyntaxError(f"malformed conjunction: {text!r}")
        names = [t.strip() for t in inner[1:-1].replace("(", "").replace(")", "").split(",")]
        names = [n for n in names if n]
        if not names:
            raise QuestionSyntaxError("empty conjunction")
        return names
    if "(" in text or ")" in text or "," in text:
        raise QuestionSyntaxError(f"malformed clause: {text!r}")
    if " " in text:
        raise QuestionSyntaxError(f"expected a single predicate, got {text!r}")
    return [text]


def parse_question(line: str) -> tuple[str, str, list[list[str]]]:
    """Parse `when_do_you ...?`-style question lines into an API payload."""
    line = line.strip()
    if not line.endswith("?"):
        raise QuestionSyntaxError("questions end with '?'")
    line = line[:-1].strip()
    for keyword, qtype, strength in QUESTION_FORMS:
        if line == keyword or line.startswith(keyword + " "):
            content = line[len(keyword):].strip()
            if not content:
                raise QuestionSyntaxError("question needs content")
            dnf = [_parse_clause(c) for c in _split_top_level_or(content)]
            return qtype, strength, dnf
    raise QuestionSyntaxError(
        "unknown question form; expected one of: "
        + ", ".join(k for k, _, _ in QUESTION_FORMS)
    )


# --- config -------------------------------------------------------------------


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    raw = Path(path).read_bytes()
    if path.endswith(".toml"):
        try:
            import tomllib  # py311+
        except ModuleNotFoundError:
            import tomli as tomllib
        return tomllib.loads(raw.decode())
    return json.loads(raw.decode())


def engine_config_from(config: dict) -> EngineConfig:
    caps_cfg = config.get("caps", {})
    caps = AnalysisCaps(
        max_boxes=int(caps_cfg.get("max_boxes", AnalysisCaps().max_boxes)),
        max_depth=int(caps_cfg.get("max_depth", AnalysisCaps().max_depth)),
    )
    smt = None
    smt_cfg = config.get("smt", {})
    if smt_cfg.get("command"):
        from .decision import SmtBackend

        smt = SmtBackend(smt_cfg["command"], int(smt_cfg.get("timeout_ms", 5000)))
    return EngineConfig(
        alpha=float(config.get("alpha", 0.1)),
        n_sample=int(config.get("n_sample", 32)),
        shell_samples=int(config.get("shell_samples", 20)),
        caps=caps,
        force_k=config.get("force_k"),
        smt=smt,
    )


def _resolve_pack(pack_arg: str, model_arg: str | None):
    builtin = builtin_packs() if pack_arg in ("idp", "cpu") else None
    if builtin is not None:
        pack, model = builtin[pack_arg]
        if model_arg:
            model = load_model(model_arg)
        return pack, model
    pack = DomainPack.load(pack_arg)
    if not model_arg:
        raise SystemExit("a --model file is required with a pack file")
    return pack, load_model(model_arg)


# --- repl ----------------------------------------------------------------------


def _page(lines: list[str], out, interactive: bool, page_size: int = 20) -> None:
    for i, line in enumerate(lines):
        print(line, file=out)
        if interactive and i + 1 < len(lines) and (i + 1) % page_size == 0:
            try:
                input("--More--")
            except EOFError:
                break


def _render_description(payload: dict, ordinal: int | None) -> list[str]:
    status = payload.get("status")
    if status == "no_situation":
        return [f"!! {payload.get('message')}"]
    if status == "exited":
        return ["session closed."]
    head = f"answer (epsilon={payload.get('epsilon')}"
    if ordinal is not None:
        head += f", state {ordinal}"
    head += ", coarse: analysis caps hit)" if payload.get("degraded") else ")"
    lines = [head + ":"]
    if payload.get("selected_predicate"):
        lines.append(f"  auto-ignored predicate: {payload['selected_predicate']}")
    for c in payload.get("conditions", []):
        lines.append(f"  [uv={c['unique_volume']:.4f} tv={c['total_volume']:.4f}] {c['text']}")
    if not payload.get("conditions"):
        lines.append("  (empty description)")
    return lines


def _install_completer(client: ApiClient, pack_name: str) -> None:
    try:
        import readline
    except ImportError:
        return
    all_preds = [p["name"] for p in client.predicates(pack_name)]
    by_type = {
        qt.value: [p["name"] for p in client.predicates(pack_name, qt.value)]
        for qt in QuestionType
    }
    commands = ["ma", "la", "b", "history ", "ignore ", "aps", "exit", "dump "]
    keywords = [k for k, _, _ in QUESTION_FORMS]

    def complete(text: str, state: int):
        buf = readline.get_line_buffer()
        pool = commands + [k + " " for k in keywords]
        for keyword, qtype, _ in QUESTION_FORMS:
            if buf.startswith(keyword + " "):
                pool = by_type.get(qtype, all_preds)
                break
        else:
            if buf.startswith(("ignore ", "dump ")):
                pool = all_preds
        options = [w for w in pool if w.startswith(text)]
        return options[state] if state < len(options) else None

    readline.set_completer(complete)
    readline.parse_and_bind("tab: complete")


def run_repl(args) -> int:
    config = engine_config_from(load_config(args.config))
    if args.server:
        client = ApiClient.remote(args.server)
        pack_id, model_id = args.pack, args.model or args.pack
    else:
        from .service import create_app

        builtin = args.pack in ("idp", "cpu")
        app = create_app(config=config, include_builtin=builtin, patience=args.patience)
        client = ApiClient.in_process(app)
        if builtin:
            pack_id = model_id = args.pack
        else:
            pack, model = _resolve_pack(args.pack, args.model)
            from .models import model_to_json

            pack_id = client.upload_pack(pack.to_json())
            model_id = client.upload_model(pack_id, model_to_json(model))
    client.create_session(pack_id, model_id, args.epsilon, args.seed)
    interactive = sys.stdin.isatty()
    if interactive:
        _install_completer(client, pack_id)
    out = sys.stdout
    print(f"session on pack {pack_id!r} (epsilon={args.epsilon}); ask a question, "
          f"then steer with ma | la | b | history <t> | ignore <pred> | aps; exit to quit.", file=out)
    degraded_seen = False
    ordinals: dict[int, str] = {}

    def refresh_ordinals() -> int | None:
        nodes = client.history()["nodes"]
        ordinals.clear()
        for i, node in enumerate(nodes, start=1):
            ordinals[i] = node["id"]
        current = client.history()["current"]
        for i, node in enumerate(nodes, start=1):
            if node["id"] == current:
                return i
        return None

    while True:
        try:
            line = input("> ").strip()
        except EOFError:
            client.respond("exit")
            break
        if not line:
            continue
        try:
            if line in ("exit", "quit"):
                client.respond("exit")
                print("bye.", file=out)
                break
            if line.endswith("?"):
                qtype, strength, dnf = parse_question(line)
                payload = client.ask(qtype, strength, dnf)
            elif line in ("ma", "la"):
                payload = client.respond(line)
            elif line == "b":
                client.respond("break")
                print("(noted; ask another question or exit)", file=out)
                continue
            elif line.startswith("history"):
                arg = line.split(maxsplit=1)[1] if " " in line else ""
                refresh_ordinals()
                target = ordinals.get(int(arg)) if arg.isdigit() else None
                if target is None:
                    print(f"?? unknown history index {arg!r}", file=out)
                    continue
                payload = client.respond("history", target)
            elif line.startswith("ignore"):
                arg = line.split(maxsplit=1)[1] if " " in line else ""
                payload = client.respond("ignore", arg)
            elif line.startswith("aps"):
                arg = line.split(maxsplit=1)[1] if " " in line else "ma"
                payload = client.respond("aps", arg)
            elif line.startswith("dump"):
                arg = line.split(maxsplit=1)[1] if " " in line else "reach.json"
                reach = client._unwrap(client._http.get(f"/sessions/{client.session_id}/reach"))
                Path(arg).write_text(json.dumps(reach, indent=2) + "\n")
                print(f"reach set written to {arg}", file=out)
                continue
            else:
                print("?? commands: <question>? | ma | la | b | history <t> | "
                      "ignore <pred> | aps [ma|la] | dump <path> | exit", file=out)
                continue
        except QuestionSyntaxError as exc:
            print(f"?? {exc}", file=out)
            continue
        except ApiError as exc:
            for v in exc.violations:
                print(f"?? {v}", file=out)
            if not exc.violations:
                print(f"?? {exc}", file=out)
            continue
        degraded_seen = degraded_seen or bool(payload.get("degraded"))
        _page(_render_description(payload, refresh_ordinals()), out, interactive)
    return EXIT_CAPS if degraded_seen else EXIT_OK


# --- batch subcommands -----------------------------------------------------------


def run_fit_poly(args) -> int:
    inputs = args.inputs.split(",")
    outputs = args.outputs.split(",")
    try:
        X, Y = load_csv_columns(args.csv, inputs, outputs)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    rng = np.random.default_rng(args.seed)
    idx = rng.permutation(len(X))
    cut = int(round((1.0 - args.test_fraction) * len(X)))
    train, test = idx[:cut], idx[cut:]
    try:
        model = fit_polynomial(X[train], Y[train], args.degree, inputs, outputs)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    train_r2 = r_squared(model, X[train], Y[train])
    print(f"train R2: {train_r2:.4f}")
    if len(test):
        print(f"test R2: {r_squared(model, X[test], Y[test]):.4f}")
    if args.out:
        save_model(model, args.out)
        print(f"model written to {args.out}")
    return EXIT_OK


def run_experiment(args) -> int:
    from .experiments import DESK_CAPS, run_experiment

    try:
        pack, model = _resolve_pack(args.pack, args.model)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    if args.labels:
        pack = pack.with_labels(json.loads(Path(args.labels).read_text()))
    config = engine_config_from(load_config(args.config)) if args.config else EngineConfig(caps=DESK_CAPS)
    report = run_experiment(pack, model, args.runs, args.seed, config=config)
    Path(args.out).write_text(report.to_csv())
    print(f"{report.runs_completed} runs completed; report written to {args.out}")
    if args.table:
        Path(args.table).write_text(report.render_table() + "\n")
        print(f"table written to {args.table}")
    return EXIT_OK


def run_plot_reach(args) -> int:
    from .plotting import reach_density_grid, write_pgm

    try:
        dump = json.loads(Path(args.reach).read_text())
        bounding = box_from_json(dump["input_bounding"])
        boxes = [box_from_json(p["input"]) for p in dump["pairs"]]
        grid = reach_density_grid(boxes, bounding, args.x, args.y, args.resolution)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    write_pgm(grid, args.out)
    print(f"{len(boxes)} boxes projected onto ({args.x}, {args.y}) -> {args.out}")
    return EXIT_OK


def run_serve(args) -> int:
    import socket

    import uvicorn

    from .service import create_app

    config = engine_config_from(load_config(args.config))
    app = create_app(config=config, data_dir=args.data_dir)
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    sock.bind((args.host, args.port))
    sock.listen(128)  # queue connections arriving before the loop is up
    host, port = sock.getsockname()[:2]
    print(f"listening on {host}:{port}", flush=True)
    server = uvicorn.Server(uvicorn.Config(app, log_level="warning"))
    server.run(sockets=[sock])
    return EXIT_OK


def run_make_packs(args) -> int:
    written = write_pack_files(args.out)
    for path in written:
        print(path)
    return EXIT_OK


# --- entry point -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="boxplain", description=__doc__)
    parser.add_argument("--config", help="TOML or JSON config file", default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("repl", help="interactive question/steering loop")
    p.add_argument("--pack", default="idp", help="builtin pack name (idp|cpu) or a pack file")
    p.add_argument("--model", default=None, help="model file (required for pack files)")
    p.add_argument("--server", default=None, help="base URL of a running server; default in-process")
    p.add_argument("--epsilon", type=float, default=0.25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--patience", type=float, default=2.0)
    p.set_defaults(func=run_repl)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--data-dir", default=None)
    p.set_defaults(func=run_serve)

    p = sub.add_parser("fit-poly", help="least-squares polynomial fit from a CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--inputs", required=True, help="comma-separated input columns")
    p.add_argument("--outputs", required=True, help="comma-separated output columns")
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("--test-fraction", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="write the fitted model JSON here")
    p.set_defaults(func=run_fit_poly)

    exp = sub.add_parser("experiment", help="synthetic-user experiment batches")
    exp_sub = exp.add_subparsers(dest="experiment_command", required=True)
    p = exp_sub.add_parser("run", help="run scripted sessions and aggregate metric deltas")
    p.add_argument("--pack", required=True, help="builtin pack name (idp|cpu) or a pack file")
    p.add_argument("--model", default=None)
    p.add_argument("--labels", default=None, help="MA/LA sidecar JSON")
    p.add_argument("--runs", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--table", default=None)
    p.set_defaults(func=run_experiment)

    p = sub.add_parser("plot-reach", help="grayscale 2-D projection of a reach dump")
    p.add_argument("--reach", required=True, help="reach-set JSON dump")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--resolution", type=int, default=128)
    p.add_argument("--out", required=True)
    p.set_defaults(func=run_plot_reach)

    p = sub.add_parser("make-packs", help="write the builtin packs, models, labels, and dataset")
    p.add_argument("--out", required=True)
    p.set_defaults(func=run_make_packs)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
