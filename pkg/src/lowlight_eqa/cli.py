"""``lowlight-eqa`` command line: degrade, genqa, eval, report, selftest.

Settings come from flags, then the ``--config`` file (TOML or JSON), then
built-in defaults. The file may hold top-level ``seed`` / ``jobs`` and one
table per subcommand, plus ``[sampling]`` and ``[qa]`` tables for the
degradation sampler and QA thresholds.

Exit codes: 0 success, 1 usage, 2 I/O, 3 invariant failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .configfile import load_config_file
from .errors import AssetError, ConfigError, EmptyReportError, StructuralError

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_INVARIANT = 0, 1, 2, 3

log = logging.getLogger("lowlight_eqa")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _common(suppress: bool) -> argparse.ArgumentParser:
    # subcommands suppress defaults so they do not clobber flags given before the command name
    common = _Parser(add_help=False, argument_default=argparse.SUPPRESS if suppress else None)
    common.add_argument("--config", help="TOML or JSON settings file")
    common.add_argument("--seed", type=int, help="global seed (default 0)")
    common.add_argument("--jobs", type=int, help="worker count (default 1)")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS if suppress else False)
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lowlight-eqa", description=__doc__.splitlines()[0], parents=[_common(False)])
    common = _common(True)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("degrade", parents=[common], help="write noise-free and noisy variants for each level")
    p.add_argument("--manifest", help="JSON Lines frame manifest")
    p.add_argument("--levels", help="e.g. L1,L5 or L0..L5 (default L0..L5)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--ladder-coupled", action="store_true", default=None, help="tie K and r to the level")
    p.add_argument("--profile", help="sensor profile TOML (default: bundled profile)")
    p.add_argument("--components", help="noise components, comma separated (default shot,read,row,quant)")

    p = sub.add_parser("genqa", parents=[common], help="generate multiple-choice questions from annotated frames")
    p.add_argument("--manifest", help="JSON Lines frame manifest with depth/semantic/overseg assets")
    p.add_argument("--out", help="output QA JSONL (default qa.jsonl)")
    p.add_argument("--cache", help="directory for the per-frame statistics cache")
    p.add_argument("--tables", help="class / room / palette tables JSON (default: bundled tables)")
    p.add_argument("--review-csv", help="also write a CSV sheet for manual verification")

    p = sub.add_parser("eval", parents=[common], help="query a model over QA pairs and conditions")
    p.add_argument("--qa", help="QA JSONL")
    p.add_argument("--images", help="root of degraded images")
    p.add_argument("--llie-images", help="root of enhanced images (same layout), for +llie conditions")
    p.add_argument("--model", help="endpoint descriptor (TOML/JSON) or stub:<kind>")
    p.add_argument("--conditions", help="e.g. L0,L1..L5+noise or 'table' (default table)")
    p.add_argument("--out", help="append-only JSONL journal")
    p.add_argument("--rate-limit", type=float, help="max requests per second")
    p.add_argument("--max-retries", type=int, help="retries on transient errors (default 4)")

    p = sub.add_parser("report", parents=[common], help="score a journal")
    p.add_argument("--journal", help="JSONL journal written by eval")
    p.add_argument("--format", choices=("csv", "json", "md"), help="default md")
    p.add_argument("--out", help="write here instead of stdout")

    sub.add_parser("selftest", parents=[common], help="run the statistical invariant checks")
    return parser


class Settings:
    """Flag > config section > config top level > default lookup."""

    def __init__(self, args: argparse.Namespace, config: dict):
        self.args, self.config = args, config
        self.section = config.get(args.command, {})

    def get(self, name: str, default=None):
        value = getattr(self.args, name, None)
        if value is not None:
            return value
        key = name.replace("-", "_")
        if key in self.section:
            return self.section[key]
        return self.config.get(key, default)

    def require(self, name: str):
        value = self.get(name)
        if value is None:
            raise UsageError(f"{self.args.command}: --{name.replace('_', '-')} is required")
        return value


def _cmd_degrade(s: Settings) -> int:
    from .degradation import SynthesisOptions, load_manifest, parse_levels, process_dataset
    from .raw_noise import COMPONENTS, load_profile
    from .unprocessor import SamplingConfig

    manifest = load_manifest(s.require("manifest"))
    levels = s.get("levels", "L0..L5")
    levels = parse_levels(levels if isinstance(levels, str) else list(levels))
    components = s.get("components", ",".join(COMPONENTS))
    components = tuple(c.strip() for c in components.split(",") if c.strip()) if isinstance(components, str) else tuple(components)
    options = SynthesisOptions(
        sampling=SamplingConfig.from_dict(s.config.get("sampling", {})),
        profile=load_profile(s.get("profile")),
        ladder_coupled=bool(s.get("ladder_coupled", False)),
        components=components,
    )
    report = process_dataset(manifest, levels, s.require("out"), int(s.get("seed", 0)), options, int(s.get("jobs", 1)))
    print(json.dumps(report.to_dict(), sort_keys=True))
    return EXIT_IO if report.failures else EXIT_OK


def _cmd_genqa(s: Settings) -> int:
    from .degradation import load_manifest
    from .qa import QAConfig, export_review_sheet, generate_corpus, load_tables, write_qa_jsonl

    manifest = load_manifest(s.require("manifest"), require=("rgb", "depth", "semantic", "overseg"))
    qa_cfg = dict(s.config.get("qa", {}))
    unknown = set(qa_cfg) - set(QAConfig.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown [qa] keys {sorted(unknown)}")
    qa_cfg["global_seed"] = int(s.get("seed", qa_cfg.get("global_seed", 0)))
    config = QAConfig(**qa_cfg)
    tables = load_tables(s.get("tables"))
    pairs = generate_corpus(manifest, tables, config, s.get("cache"), int(s.get("jobs", 1)))
    out = s.get("out", "qa.jsonl")
    n = write_qa_jsonl(pairs, out)
    if s.get("review_csv"):
        export_review_sheet(pairs, manifest, s.get("review_csv"))
    counts: dict[str, int] = {}
    for qa in pairs:
        counts[qa.family] = counts.get(qa.family, 0) + 1
    print(json.dumps({"frames": len(manifest), "qa_pairs": n, "per_family": counts, "out": str(out)}, sort_keys=True))
    return EXIT_OK


def _cmd_eval(s: Settings) -> int:
    from .evaluation import StubModel, load_model, parse_conditions, run_eval, score
    from .qa import read_qa_jsonl

    model = load_model(s.require("model"))
    if isinstance(model, StubModel) and s.get("seed") is not None:
        model.seed = int(s.get("seed"))
    qa_set = read_qa_jsonl(s.require("qa"))
    conditions = parse_conditions(s.get("conditions", "table"))
    records = run_eval(
        model,
        qa_set,
        s.get("images") if model.blind else s.require("images"),
        conditions,
        journal=s.require("out"),
        llie_root=s.get("llie_images"),
        jobs=int(s.get("jobs", 4)),
        max_retries=int(s.get("max_retries", 4)),
        rate_limit=s.get("rate_limit"),
    )
    failed = sum(r.status != "ok" for r in records)
    report = score(records)
    print(json.dumps({"records": len(records), "failed": failed, "overall": str(report.overall[model.model_id].percent)}))
    return EXIT_OK


def _cmd_report(s: Settings) -> int:
    from .evaluation import latest_records, read_journal, score

    journal = Path(s.require("journal"))
    if not journal.exists():
        raise AssetError(f"journal not found: {journal}")
    text = score(latest_records(read_journal(journal)).values()).render(s.get("format", "md"))
    out = s.get("out")
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_selftest(s: Settings) -> int:
    from .selftest import run_selftest

    results = run_selftest(int(s.get("seed", 0)))
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_INVARIANT if failed else EXIT_OK


COMMANDS = {
    "degrade": _cmd_degrade,
    "genqa": _cmd_genqa,
    "eval": _cmd_eval,
    "report": _cmd_report,
    "selftest": _cmd_selftest,
}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
        config = load_config_file(args.config) if args.config else {}
        return COMMANDS[args.command](Settings(args, config))
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, EmptyReportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (AssetError, StructuralError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except AssertionError as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
