"""Command-line front-end: ``synth``, ``run`` and ``report``.

Exit codes: 0 success, 2 usage or config error, 3 I/O failure, 4 internal
invariant violation (a clean split that leaks test data into training).
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .data import DescriptorSet, read_dataset_csv, write_dataset_csv
from .errors import ConfigError, LabError, LeakageError, ParameterError
from .experiments import (
    METHODS,
    ExperimentRecord,
    Job,
    MethodConfig,
    leakage_jobs,
    leakage_table,
    read_results_csv,
    run_jobs,
    write_aggregate_csv,
    write_leakage_csv,
    write_results_csv,
)
from .synthetic import SynthSpec, generate

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_INVARIANT = 0, 2, 3, 4
OUT_ENV = "ENPROLAB_OUT"
FIGURES = ("fig1", "fig2", "fig3")
EXPERIMENTS = ("grid", "leakage")


class UsageError(Exception):
    pass


# --- manifests -------------------------------------------------------------

def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def write_manifest(target: Path, source_hash: str, extra: dict | None = None) -> None:
    """Sidecar ``<file>.manifest.json`` naming the producing config and tool version."""
    body = {"file": target.name, "config_sha256": source_hash, "tool": "enprolab", "tool_version": __version__,
            "file_sha256": _sha256(target.read_bytes())}
    if extra:
        body.update(extra)
    Path(str(target) + ".manifest.json").write_text(json.dumps(body, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _out_dir(flag: str | None, configured: str | None = None) -> Path:
    return Path(flag or configured or os.environ.get(OUT_ENV) or "results")


# --- run configuration -----------------------------------------------------

@dataclass
class RunConfig:
    dataset_path: str | None
    synth: SynthSpec | None
    methods: list[MethodConfig]
    n_labeled: list[int]
    fractions: list[float]
    leak: list[bool]
    seeds: list[int]
    experiment: str = "grid"
    holdout: float = 0.5
    output_dir: str | None = None
    source_hash: str = ""
    extra: dict = field(default_factory=dict)

    def load_data(self) -> DescriptorSet:
        if self.dataset_path:
            return read_dataset_csv(self.dataset_path)
        return generate(self.synth)

    def jobs(self) -> list[Job]:
        if self.experiment == "leakage":
            return leakage_jobs(self.methods, self.n_labeled, self.fractions, self.seeds, self.holdout)
        return [Job(cfg, n, f, lk, s, self.holdout)
                for cfg in self.methods for n in self.n_labeled for f in self.fractions
                for lk in self.leak for s in self.seeds]


def _line_of(text: str, section: str, key: str | None = None) -> int:
    current = None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if key is None and current == section:
                return no
        elif current == section and key is not None and line.split("=", 1)[0].split(":", 1)[0].strip().lower() == key.lower():
            return no
    return 0


def _parse_list(raw: str, conv, what: str):
    items = [x.strip() for x in raw.replace(";", ",").split(",") if x.strip()]
    if not items:
        raise ValueError(f"{what} is empty")
    return [conv(x) for x in items]


def _parse_bool(raw: str) -> bool:
    v = raw.strip().lower()
    if v in ("true", "yes", "1", "on"):
        return True
    if v in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_groups(raw: str, default_noise: float) -> tuple[tuple[int, float], ...]:
    out = []
    for item in _parse_list(raw, str, "groups"):
        dim, _, noise = item.partition(":")
        out.append((int(dim), float(noise) if noise else default_noise))
    return tuple(out)


_METHOD_FIELDS = {f.name: f for f in fields(MethodConfig) if f.name != "method"}


def _method_field(key: str):
    # exact case first: C (SVM cost) and c (pseudo-classes) are different knobs
    if key in _METHOD_FIELDS:
        return _METHOD_FIELDS[key]
    hits = [f for name, f in _METHOD_FIELDS.items() if name.lower() == key.lower()]
    return hits[0] if len(hits) == 1 else None


def _method_overrides(section: configparser.SectionProxy, where) -> dict:
    out = {}
    for key, raw in section.items():
        f = _method_field(key)
        if f is None:
            raise ConfigError(f"{where(key)}unknown method parameter {key!r}")
        try:
            if f.type in ("bool", bool):
                out[f.name] = _parse_bool(raw)
            elif f.type in ("int", int):
                out[f.name] = int(raw)
            elif f.type in ("str", str):
                out[f.name] = raw.strip()
            else:
                out[f.name] = float(raw)
        except ValueError as exc:
            raise ConfigError(f"{where(key)}{exc}") from None
    return out


def parse_config(text: str, name: str = "<config>") -> RunConfig:
    """Parse the INI-style run configuration. Errors carry ``name:line:`` prefixes."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), default_section="__none__")
    parser.optionxform = str
    try:
        parser.read_string(text, source=name)
    except configparser.Error as exc:
        lineno = getattr(exc, "lineno", None)
        if lineno is None and getattr(exc, "errors", None):
            lineno = exc.errors[0][0]
        raise ConfigError(f"{name}:{lineno or 0}: {exc.message if hasattr(exc, 'message') else exc}".splitlines()[0]) from None

    def where(section, key=None):
        return lambda k=key: f"{name}:{_line_of(text, section, k)}: [{section}] "

    def get(section, key, conv, default=None, required=False):
        if not parser.has_option(section, key):
            if required:
                raise ConfigError(f"{name}:{_line_of(text, section)}: [{section}] missing required key {key!r}")
            return default
        try:
            return conv(parser.get(section, key))
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{where(section, key)()}{key}: {exc}") from None

    for sec in ("dataset", "split", "methods"):
        if not parser.has_section(sec):
            raise ConfigError(f"{name}:0: missing section [{sec}]")

    dataset_path = get("dataset", "path", str)
    synth = None
    if not dataset_path:
        noise = get("dataset", "noise", float, 3.5)
        try:
            synth = SynthSpec(
                class_count=get("dataset", "classes", int, 6),
                samples_per_class=get("dataset", "per_class", int, 100),
                groups=get("dataset", "groups", lambda r: _parse_groups(r, noise), ((16, noise), (32, noise))),
                manifold_strength=get("dataset", "manifold_strength", float, 0.8),
                seed=get("dataset", "seed", int, 0),
                class_spread=get("dataset", "class_spread", float, 2.5),
                curve_radius=get("dataset", "curve_radius", float, 2.0),
            )
            synth.validate()
        except ParameterError as exc:
            raise ConfigError(f"{name}:{_line_of(text, 'dataset')}: [dataset] {exc}") from None

    ids = get("methods", "ids", lambda r: _parse_list(r, str, "ids"), required=True)
    unknown = [m for m in ids if m not in METHODS]
    if unknown:
        raise ConfigError(f"{where('methods', 'ids')()}unknown method id(s) {', '.join(unknown)}; valid ids: {', '.join(METHODS)}")
    shared = _method_overrides(parser["defaults"], where("defaults")) if parser.has_section("defaults") else {}
    methods = []
    for mid in ids:
        sec = f"method.{mid}"
        own = _method_overrides(parser[sec], where(sec)) if parser.has_section(sec) else {}
        cfg = MethodConfig(mid, **{**shared, **own})
        try:
            cfg.validate()
        except ConfigError as exc:
            raise ConfigError(f"{name}:{_line_of(text, sec if own else 'methods')}: {exc}") from None
        methods.append(cfg)

    experiment = get("split", "experiment", str, "grid").strip()
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"{where('split', 'experiment')()}experiment must be one of {EXPERIMENTS}")
    cfg = RunConfig(
        dataset_path=dataset_path,
        synth=synth,
        methods=methods,
        n_labeled=get("split", "n_labeled", lambda r: _parse_list(r, int, "n_labeled"), required=True),
        fractions=get("split", "fractions", lambda r: _parse_list(r, float, "fractions"), [0.5]),
        leak=get("split", "leak", lambda r: _parse_list(r, _parse_bool, "leak"), [False]),
        seeds=get("split", "seeds", lambda r: _parse_list(r, int, "seeds"), required=True),
        experiment=experiment,
        holdout=get("split", "holdout", float, 0.5),
        output_dir=get("output", "dir", str) if parser.has_section("output") else None,
        source_hash=_sha256(text.encode("utf-8")),
    )
    if any(not 0 < f <= 1 for f in cfg.fractions):
        raise ConfigError(f"{where('split', 'fractions')()}fractions must lie in (0, 1]")
    if not 0 < cfg.holdout < 1:
        raise ConfigError(f"{where('split', 'holdout')()}holdout must lie in (0, 1)")
    if any(n < 0 for n in cfg.n_labeled):
        raise ConfigError(f"{where('split', 'n_labeled')()}n_labeled must be non-negative")
    return cfg


def preset_path(name: str) -> Path:
    return Path(str(resources.files("enprolab") / "presets" / f"{name}.cfg"))


def load_config(path: str) -> RunConfig:
    p = Path(path)
    if not p.exists() and p.suffix == "" and preset_path(path).exists():
        p = preset_path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    return parse_config(text, str(path))


# --- commands --------------------------------------------------------------

def cmd_synth(args) -> int:
    try:
        groups = tuple((int(d), args.noise) for d in _parse_list(args.groups, str, "groups"))
    except ValueError as exc:
        raise UsageError(f"--groups: {exc}") from None
    spec = SynthSpec(args.classes, args.per_class, groups, args.manifold_strength, args.seed,
                     args.class_spread, args.curve_radius)
    try:
        spec.validate()
    except ParameterError as exc:
        raise UsageError(str(exc)) from None
    out = Path(args.out) if args.out and args.out.endswith(".csv") else _out_dir(args.out) / f"synth_seed{args.seed}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_dataset_csv(generate(spec), out)
    echo = asdict(spec)
    echo["groups"] = [list(g) for g in spec.groups]
    write_manifest(out, _sha256(json.dumps(echo, sort_keys=True).encode()), {"spec": echo, "seed": spec.seed})
    print(f"wrote {out} ({spec.class_count * spec.samples_per_class} rows, {sum(d for d, _ in groups)} feature columns)")
    return EXIT_OK


def _summary(records: list[ExperimentRecord]) -> str:
    from .experiments import aggregate

    rows = aggregate(records)
    head = f"{'method':<16} {'labels':>6} {'fraction':>8} {'leak':>5} {'MAP %':>7} {'std %':>6}"
    lines = [head, "-" * len(head)]
    for r in rows:
        lines.append(f"{r['method']:<16} {r['n_labeled']:>6} {r['unlabeled_fraction']:>8.2f} {str(r['leak']).lower():>5} "
                     f"{100 * r['map_mean']:>7.2f} {100 * r['map_std']:>6.2f}")
    return "\n".join(lines)


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seeds = [args.seed]
    data = cfg.load_data()
    records = run_jobs(data, cfg.jobs(), args.jobs)
    out = _out_dir(args.out, cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "runs.csv", out / "aggregate.csv"]
    write_results_csv(records, written[0])
    write_aggregate_csv(records, written[1])
    if cfg.experiment == "leakage":
        written.append(out / "leakage.csv")
        write_leakage_csv(leakage_table(records), written[-1])
    for path in written:
        write_manifest(path, cfg.source_hash)
    print(_summary(records))
    print("wrote " + ", ".join(str(p) for p in written))
    return EXIT_OK


def _panel_rows(records, x_of, series_of, value_of):
    cells: dict[tuple, list[float]] = {}
    for r in records:
        cells.setdefault((x_of(r), series_of(r)), []).append(value_of(r))
    rows = []
    for (x, s), v in sorted(cells.items()):
        std = float(np.std(v, ddof=1)) if len(v) > 1 else 0.0
        rows.append({"x": x, "series": s, "mean": float(np.mean(v)), "std": std})
    return rows


def report_panels(records: list[ExperimentRecord], figure: str) -> dict[str, list[dict]]:
    """Tidy (x, series, mean, std) rows for each panel of a figure."""
    panels: dict[str, list[dict]] = {}
    if figure == "fig1":
        rows = leakage_table(records)
        for n in sorted({r.n_labeled for r in rows}):
            sel = [r for r in rows if r.n_labeled == n]
            panels[f"fig1_labels{n}"] = [{"x": r.unlabeled_fraction, "series": r.method, "mean": r.delta_mean, "std": r.delta_std}
                                         for r in sorted(sel, key=lambda r: (r.unlabeled_fraction, r.method))]
    elif figure == "fig2":
        clean = [r for r in records if not r.leak]
        for name, members in (("baselines", ("svm_linear", "svm_chi2", "lapsvm_chi2", "enpro")),
                              ("ablations", ("enpro", "enpro_uniform", "enpro_nosigmoid"))):
            sel = [r for r in clean if r.method in members]
            if sel:
                panels[f"fig2_{name}"] = _panel_rows(sel, lambda r: r.n_labeled, lambda r: r.method, lambda r: r.map)
    elif figure == "fig3":
        clean = [r for r in records if not r.leak]
        for n in sorted({r.n_labeled for r in clean}):
            sel = [r for r in clean if r.n_labeled == n]
            panels[f"fig3_labels{n}"] = _panel_rows(sel, lambda r: r.unlabeled_fraction, lambda r: r.method, lambda r: r.map)
    else:
        raise UsageError(f"unknown figure {figure!r}; expected one of {FIGURES}")
    return {k: v for k, v in panels.items() if v}


def cmd_report(args) -> int:
    src = Path(args.results)
    try:
        raw = src.read_bytes()
    except FileNotFoundError:
        raise UsageError(f"results file not found: {src}") from None
    if not raw.strip():
        raise UsageError(f"{src}: results file is empty")
    try:
        records = read_results_csv(src)
    except ConfigError as exc:
        raise UsageError(str(exc)) from None
    if not records:
        raise UsageError(f"{src}: results file has no rows")
    panels = report_panels(records, args.figure)
    if not panels:
        raise UsageError(f"{src}: no rows usable for {args.figure}")
    out = _out_dir(args.out) if args.out else src.parent / args.figure
    out.mkdir(parents=True, exist_ok=True)
    import csv

    for name, rows in panels.items():
        path = out / f"{name}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "series", "mean", "std"])
            for r in rows:
                w.writerow([r["x"], r["series"], repr(r["mean"]), repr(r["std"])])
        write_manifest(path, _sha256(raw), {"figure": args.figure})
        print(f"wrote {path}")
    return EXIT_OK


# --- entry point -----------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="enprolab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"enprolab {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="generate a synthetic histogram dataset")
    s.add_argument("--classes", type=int, default=6)
    s.add_argument("--per-class", type=int, default=100)
    s.add_argument("--groups", default="16,32", help="comma-separated group dimensions")
    s.add_argument("--noise", type=float, default=3.5, help="noise scale, in units of mean bin mass")
    s.add_argument("--manifold-strength", type=float, default=0.8)
    s.add_argument("--class-spread", type=float, default=2.5)
    s.add_argument("--curve-radius", type=float, default=2.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", help=f"CSV path or directory (default ${OUT_ENV} or ./results)")
    s.set_defaults(func=cmd_synth)

    r = sub.add_parser("run", help="run an experiment grid from a config file or preset (fig1, fig2, fig3)")
    r.add_argument("config")
    r.add_argument("--seed", type=int, help="run a single split seed instead of the configured list")
    r.add_argument("--jobs", type=int, default=1, help="worker processes")
    r.add_argument("--out", help="output directory")
    r.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="turn a runs.csv into tidy per-panel plot data")
    rep.add_argument("results")
    rep.add_argument("--figure", required=True, choices=FIGURES)
    rep.add_argument("--out", help="output directory (default: <results dir>/<figure>)")
    rep.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "jobs", 1) is not None and getattr(args, "jobs", 1) < 1:
            raise UsageError("--jobs must be at least 1")
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"enprolab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LeakageError as exc:
        print(f"enprolab: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except OSError as exc:
        print(f"enprolab: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except LabError as exc:
        print(f"enprolab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
