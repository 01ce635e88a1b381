"""Evaluation driver: config loading, method runs, logs, reports, sweeps.

A YAML config declares corpus paths, prices, and a method roster; the
driver runs each method over an evaluation set, writing one JSONL call
log per method (``runs/<method>/calls.jsonl``) and a row-level results
CSV (``results_<evalset>.csv``). Reports aggregate those artifacts into
accuracy, cost, latency, marginal-cost, and tool-usage tables plus
plot-ready scatter CSVs.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field, replace
from decimal import Decimal
from pathlib import Path

import yaml

from .agent import AgentBudget, Geocoder, GoogleGeocodeProvider, ToolCallRecord, run_tool_chain, trace_statistics
from .baselines import (
    CountyCentroidTable,
    HeuristicParams,
    default_entity_extractor,
    gazetteer_resolver,
    heuristic_geoparse,
    load_gazetteer,
    packaged_gazetteer,
    predict_county_centroid,
    predict_ner_pipeline,
)
from .corpus import (
    GROUND_TRUTH_HEADER,
    EvalSet,
    GrantAbstract,
    MalformedRow,
    SplitConfig,
    load_ground_truth,
    redact_patentee,
    sample_fixed,
    split_corpus,
)
from .gateway import (
    FixtureBackend,
    LiveBackend,
    ModelConfig,
    PriceTable,
    RunRecord,
    TokenUsage,
    default_price_table,
)
from .geo import Coordinate, haversine_km
from .metrics import (
    BASELINE_SECONDS_PER_GRANT,
    MethodSummary,
    ZeroHitRate,
    bootstrap_ci,
    latency_summary,
    marginal_cost_per_hit,
    pareto_frontier,
    summarize_errors,
)
from .prompts import build_one_shot_prompt
from .runners import EnsembleConfig, Prediction, run_ensemble, run_one_shot


class ConfigInvalid(ValueError):
    """The config document is missing fields or violates an invariant."""


class DataMissing(FileNotFoundError):
    """A referenced data file does not exist."""


class NoResults(ValueError):
    """Report generation found no results CSV in the run directory."""


class AxisInapplicable(ValueError):
    """The sweep axis does not apply to the roster's model configs."""


PIPELINES = (
    "one_shot",
    "tool_chain",
    "ensemble",
    "county_centroid",
    "heuristic_geoparse",
    "ner_pipeline",
    "ingest_external",
)

_LLM_PIPELINES = ("one_shot", "tool_chain", "ensemble")

# Per-pipeline field discipline: MethodSpec fields outside these sets
# are rejected so method declarations stay minimal and unambiguous.
_ALLOWED_FIELDS = {
    "one_shot": {"model", "fixture_script", "redact_names", "sweep_fixtures"},
    "ensemble": {"model", "ensemble", "fixture_script", "redact_names", "sweep_fixtures"},
    "tool_chain": {"model", "budget", "fixture_script", "geocode_cache", "sweep_fixtures"},
    "county_centroid": set(),
    "heuristic_geoparse": {"params", "gazetteer"},
    "ner_pipeline": {"gazetteer"},
    "ingest_external": {"predictions_file", "total_cost_usd", "latency_s_per_grant"},
}
_REQUIRED_FIELDS = {
    "one_shot": {"model"},
    "ensemble": {"model", "ensemble"},
    "tool_chain": {"model"},
    "county_centroid": set(),
    "heuristic_geoparse": {"params"},
    "ner_pipeline": set(),
    "ingest_external": {"predictions_file"},
}


@dataclass
class MethodSpec:
    """One roster entry: a pipeline plus exactly the fields it needs."""

    method_id: str
    pipeline: str
    model: ModelConfig | None = None
    ensemble: EnsembleConfig | None = None
    budget: AgentBudget | None = None
    params: HeuristicParams | None = None
    fixture_script: Path | None = None
    geocode_cache: Path | None = None
    gazetteer: Path | None = None
    predictions_file: Path | None = None
    total_cost_usd: Decimal = Decimal(0)
    latency_s_per_grant: float = 0.0
    redact_names: bool = False
    sweep_fixtures: dict[str, Path] = field(default_factory=dict)

    def validate(self) -> None:
        if self.pipeline not in PIPELINES:
            raise ConfigInvalid(f"{self.method_id}: unknown pipeline {self.pipeline!r}")
        present = {
            name
            for name, value in (
                ("model", self.model),
                ("ensemble", self.ensemble),
                ("budget", self.budget),
                ("params", self.params),
                ("fixture_script", self.fixture_script),
                ("geocode_cache", self.geocode_cache),
                ("gazetteer", self.gazetteer),
                ("predictions_file", self.predictions_file),
                ("redact_names", self.redact_names or None),
                ("sweep_fixtures", self.sweep_fixtures or None),
            )
            if value is not None
        }
        missing = _REQUIRED_FIELDS[self.pipeline] - present
        if missing:
            raise ConfigInvalid(f"{self.method_id}: pipeline {self.pipeline} requires {sorted(missing)}")
        extra = present - _ALLOWED_FIELDS[self.pipeline]
        if extra:
            raise ConfigInvalid(f"{self.method_id}: fields {sorted(extra)} not applicable to {self.pipeline}")


@dataclass
class HarnessConfig:
    """Parsed configuration document."""

    config_dir: Path
    ground_truth: Path
    split: SplitConfig
    evalsets: dict[str, dict]
    default_evalset: str
    prices: PriceTable
    backend_kind: str
    endpoint: str | None
    county_table: CountyCentroidTable
    methods: dict[str, MethodSpec]
    parallelism: int
    output_dir: Path


@dataclass
class RunManifest:
    """Everything one evaluation run needs."""

    config: HarnessConfig
    evalset: str
    methods: list[MethodSpec]
    seed: int = 42
    parallelism: int = 1
    dry_run: bool = False
    max_rows: int | None = None
    output_dir: Path = Path("runs_out")

    def __post_init__(self):
        if self.parallelism < 1:
            raise ConfigInvalid("parallelism must be >= 1")


@dataclass
class RunOutcome:
    run_dir: Path
    cells: int
    failures: int
    predictions: dict[str, list[Prediction]]


def _resolve(config_dir: Path, value: str | None) -> Path | None:
    if value is None:
        return None
    p = Path(value)
    return p if p.is_absolute() else config_dir / p


def load_config(path: str | Path) -> HarnessConfig:
    """Parse and validate the YAML config document."""
    path = Path(path)
    if not path.exists():
        raise ConfigInvalid(f"config file {path} does not exist")
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigInvalid(f"bad YAML: {exc}") from exc
    config_dir = path.parent

    try:
        corpus_doc = doc.get("corpus") or {}
        ground_truth = _resolve(config_dir, corpus_doc.get("ground_truth"))
        if ground_truth is None:
            raise ConfigInvalid("corpus.ground_truth is required")

        split_doc = doc.get("split") or {}
        split = SplitConfig(seed=int(split_doc.get("seed", 42)), dev_fraction=float(split_doc.get("dev_fraction", 0.2)))

        prices = default_price_table()
        for model_id, spec in (doc.get("prices") or {}).items():
            prices.set_price(model_id, str(spec["input"]), str(spec["output"]))

        backend_doc = doc.get("backend") or {"kind": "fixture"}
        backend_kind = backend_doc.get("kind", "fixture")
        if backend_kind not in ("fixture", "live"):
            raise ConfigInvalid(f"backend.kind must be fixture or live, got {backend_kind!r}")

        data_doc = doc.get("data") or {}
        county_path = _resolve(config_dir, data_doc.get("county_table"))
        county_table = CountyCentroidTable.from_csv(county_path) if county_path else CountyCentroidTable.packaged()

        methods: dict[str, MethodSpec] = {}
        for m in doc.get("methods") or []:
            spec = _parse_method(m, config_dir)
            if spec.method_id in methods:
                raise ConfigInvalid(f"duplicate method_id {spec.method_id!r}")
            methods[spec.method_id] = spec
        if not methods:
            raise ConfigInvalid("at least one method is required")

        evalsets = doc.get("evalsets") or {"all": {"from": "all"}}
        default_evalset = doc.get("default_evalset") or next(iter(evalsets))
        if default_evalset not in evalsets:
            raise ConfigInvalid(f"default_evalset {default_evalset!r} is not declared")

        return HarnessConfig(
            config_dir=config_dir,
            ground_truth=ground_truth,
            split=split,
            evalsets=evalsets,
            default_evalset=default_evalset,
            prices=prices,
            backend_kind=backend_kind,
            endpoint=backend_doc.get("endpoint"),
            county_table=county_table,
            methods=methods,
            parallelism=int(doc.get("parallelism", 1)),
            output_dir=_resolve(config_dir, doc.get("output_dir", "runs_out")),
        )
    except ConfigInvalid:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigInvalid(str(exc)) from exc


def _parse_method(doc: dict, config_dir: Path) -> MethodSpec:
    try:
        model_doc = doc.get("model")
        model = None
        if model_doc is not None:
            model = ModelConfig(
                model_id=model_doc["model_id"],
                temperature=model_doc.get("temperature"),
                reasoning_effort=model_doc.get("reasoning_effort"),
                seed=model_doc.get("seed"),
                max_output_tokens=model_doc.get("max_output_tokens"),
            )
        ensemble_doc = doc.get("ensemble")
        ensemble = None
        if ensemble_doc is not None:
            seeds = tuple(ensemble_doc.get("seeds", range(ensemble_doc.get("k", 5))))
            ensemble = EnsembleConfig(
                k=int(ensemble_doc.get("k", 5)),
                eps_km=float(ensemble_doc.get("eps_km", 0.5)),
                min_cluster=int(ensemble_doc.get("min_cluster", 3)),
                seeds=seeds,
            )
        budget_doc = doc.get("budget")
        budget = None
        if budget_doc is not None:
            budget = AgentBudget(
                max_tool_calls=int(budget_doc.get("max_tool_calls", 10)),
                max_geocode_failures=int(budget_doc.get("max_geocode_failures", 6)),
            )
        params_doc = doc.get("params")
        params = None
        if params_doc is not None:
            params = HeuristicParams(
                confidence_threshold=float(params_doc["confidence_threshold"]),
                bbox_margin_deg=float(params_doc["bbox_margin_deg"]),
                distance_gate_km=float(params_doc["distance_gate_km"]),
            )
        spec = MethodSpec(
            method_id=str(doc["method_id"]),
            pipeline=str(doc["pipeline"]),
            model=model,
            ensemble=ensemble,
            budget=budget,
            params=params,
            fixture_script=_resolve(config_dir, doc.get("fixture_script")),
            geocode_cache=_resolve(config_dir, doc.get("geocode_cache")),
            gazetteer=_resolve(config_dir, doc.get("gazetteer")),
            predictions_file=_resolve(config_dir, doc.get("predictions_file")),
            total_cost_usd=Decimal(str(doc.get("total_cost_usd", 0))),
            latency_s_per_grant=float(doc.get("latency_s_per_grant", 0.0)),
            redact_names=bool(doc.get("redact_names", False)),
            sweep_fixtures={str(k): _resolve(config_dir, v) for k, v in (doc.get("sweep_fixtures") or {}).items()},
        )
    except ConfigInvalid:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigInvalid(f"bad method declaration: {exc}") from exc
    spec.validate()
    return spec


def build_manifest(
    config: HarnessConfig,
    evalset: str | None = None,
    methods: list[str] | None = None,
    seed: int = 42,
    dry_run: bool = False,
    max_rows: int | None = None,
    output_dir: str | Path | None = None,
) -> RunManifest:
    name = evalset or config.default_evalset
    if name not in config.evalsets:
        raise ConfigInvalid(f"unknown evalset {name!r}")
    if methods:
        unknown = [m for m in methods if m not in config.methods]
        if unknown:
            raise ConfigInvalid(f"unknown methods {unknown}")
        roster = [config.methods[m] for m in methods]
    else:
        roster = list(config.methods.values())
    return RunManifest(
        config=config,
        evalset=name,
        methods=roster,
        seed=seed,
        parallelism=config.parallelism,
        dry_run=dry_run,
        max_rows=max_rows,
        output_dir=Path(output_dir) if output_dir else config.output_dir,
    )


def resolve_evalset(config: HarnessConfig, name: str, rows: list[GrantAbstract]) -> EvalSet:
    """Materialize a declared evalset against the loaded corpus."""
    doc = config.evalsets[name]
    source = doc.get("from", "all")
    if source == "all":
        members = EvalSet("all", tuple(sorted(r.row_id for r in rows)))
    elif source in ("dev", "test"):
        dev, test = split_corpus(rows, config.split)
        members = dev if source == "dev" else test
    else:
        raise ConfigInvalid(f"evalset {name!r}: unknown source {source!r}")
    if doc.get("require_truth"):
        with_truth = {r.row_id for r in rows if r.ground_truth is not None}
        members = EvalSet(members.name, tuple(m for m in members.members if m in with_truth))
    if "n" in doc:
        members = sample_fixed(members, int(doc["n"]), int(doc.get("seed", config.split.seed)))
    return EvalSet(name, members.members)


def _check_files(manifest: RunManifest) -> None:
    config = manifest.config
    if not config.ground_truth.exists():
        raise DataMissing(f"ground truth file {config.ground_truth} is missing")
    for spec in manifest.methods:
        for label, p in (
            ("fixture_script", spec.fixture_script),
            ("geocode_cache", spec.geocode_cache),
            ("gazetteer", spec.gazetteer),
            ("predictions_file", spec.predictions_file),
        ):
            if p is not None and not Path(p).exists():
                raise DataMissing(f"{spec.method_id}: {label} {p} is missing")
        if (
            config.backend_kind == "fixture"
            and spec.pipeline in _LLM_PIPELINES
            and spec.fixture_script is None
        ):
            raise ConfigInvalid(f"{spec.method_id}: fixture backend requires fixture_script")


def _make_backend(spec: MethodSpec, config: HarnessConfig):
    if config.backend_kind == "fixture":
        return FixtureBackend.from_jsonl(spec.fixture_script)
    if not config.endpoint:
        raise ConfigInvalid("live backend requires backend.endpoint")
    return LiveBackend(config.endpoint)


def _baseline_prediction(
    method_id: str, grant: GrantAbstract, coordinate: Coordinate, flag: str, latency_s: float
) -> Prediction:
    run = RunRecord(
        method_id=method_id,
        row_id=grant.row_id,
        usage=TokenUsage(),
        latency_s=latency_s,
        cost_usd=Decimal(0),
        raw_response=f"{coordinate.lat:.6f}, {coordinate.lon:.6f} [{flag}]",
    )
    error = haversine_km(coordinate, grant.ground_truth) if grant.ground_truth else None
    return Prediction(method_id, grant.row_id, coordinate, error, run)


def ingest_external_predictions(
    path: str | Path,
    method_id: str,
    grants: list[GrantAbstract],
    total_cost_usd: Decimal = Decimal(0),
    latency_s_per_grant: float = 0.0,
) -> list[Prediction]:
    """Load externally produced coordinates (CSV ``row_id,lat,lon``).

    Predictions carry zero token usage; the configured total cost is
    spread evenly across the file's rows. Unknown row ids and bad
    coordinates are malformed.
    """
    path = Path(path)
    known = {g.row_id: g for g in grants}
    out: list[Prediction] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration as exc:
            raise MalformedRow(f"{path}: empty file, header required") from exc
        if header != ["row_id", "lat", "lon"]:
            raise MalformedRow(f"{path}: bad header {header!r}")
        data_rows = [row for row in reader if row]
    if not data_rows:
        return []
    per_row_cost = Decimal(total_cost_usd) / len(data_rows)
    for lineno, row in enumerate(data_rows, start=2):
        if len(row) != 3:
            raise MalformedRow(f"{path}:{lineno}: expected 3 columns")
        row_id, lat_txt, lon_txt = row
        grant = known.get(row_id)
        if grant is None:
            raise MalformedRow(f"{path}:{lineno}: unknown row_id {row_id!r}")
        try:
            coordinate = Coordinate(float(lat_txt), float(lon_txt))
        except ValueError as exc:
            raise MalformedRow(f"{path}:{lineno}: {exc}") from exc
        run = RunRecord(
            method_id=method_id,
            row_id=row_id,
            usage=TokenUsage(),
            latency_s=latency_s_per_grant,
            cost_usd=per_row_cost,
            raw_response=f"{coordinate.lat}, {coordinate.lon}",
        )
        error = haversine_km(coordinate, grant.ground_truth) if grant.ground_truth else None
        out.append(Prediction(method_id, row_id, coordinate, error, run))
    return out


def _failed_prediction(method_id: str, grant: GrantAbstract, reason: str) -> Prediction:
    run = RunRecord(
        method_id=method_id,
        row_id=grant.row_id,
        usage=TokenUsage(),
        latency_s=0.0,
        cost_usd=Decimal(0),
        failed=True,
        reason=reason,
    )
    return Prediction(method_id, grant.row_id, None, None, run)


def _run_method(
    spec: MethodSpec, grants: list[GrantAbstract], config: HarnessConfig, seed: int = 42
) -> list[Prediction]:
    if spec.pipeline == "ingest_external":
        by_id = {
            p.row_id: p
            for p in ingest_external_predictions(
                spec.predictions_file, spec.method_id, grants, spec.total_cost_usd, spec.latency_s_per_grant
            )
        }
        return [by_id.get(g.row_id) or _failed_prediction(spec.method_id, g, "MissingExternalRow") for g in grants]

    if spec.pipeline in ("county_centroid", "heuristic_geoparse", "ner_pipeline"):
        gazetteer = load_gazetteer(spec.gazetteer) if spec.gazetteer else packaged_gazetteer()
        out = []
        for grant in grants:
            start = time.perf_counter()
            if spec.pipeline == "county_centroid":
                coordinate, flag = predict_county_centroid(grant.text, config.county_table)
            elif spec.pipeline == "heuristic_geoparse":
                coordinate, flag = heuristic_geoparse(
                    grant.text, gazetteer_resolver(gazetteer), config.county_table, spec.params
                )
            else:
                coordinate, flag = predict_ner_pipeline(
                    grant.text, default_entity_extractor, gazetteer, config.county_table
                )
            out.append(
                _baseline_prediction(spec.method_id, grant, coordinate, flag, time.perf_counter() - start)
            )
        return out

    backend = _make_backend(spec, config)
    model = spec.model
    if model.seed is None and spec.pipeline != "ensemble":
        model = replace(model, seed=seed)  # manifest seed as the default
    geocoder = None
    if spec.pipeline == "tool_chain":
        provider = GoogleGeocodeProvider() if config.backend_kind == "live" else None
        geocoder = Geocoder(provider=provider, cache_path=spec.geocode_cache)
    out = []
    for grant in grants:
        if spec.redact_names:
            grant = GrantAbstract.from_text(grant.row_id, redact_patentee(grant.text), grant.ground_truth)
        if spec.pipeline == "one_shot":
            out.append(run_one_shot(backend, model, grant, spec.method_id, config.prices))
        elif spec.pipeline == "ensemble":
            out.append(run_ensemble(backend, model, spec.ensemble, grant, spec.method_id, config.prices))
        else:  # tool_chain
            out.append(
                run_tool_chain(
                    backend, geocoder, model, grant,
                    spec.budget or AgentBudget(), spec.method_id, config.prices,
                )
            )
    return out


def _request_summary(spec: MethodSpec, grant: GrantAbstract) -> str:
    if spec.pipeline in _LLM_PIPELINES:
        return build_one_shot_prompt(grant.text)[:160] if spec.pipeline != "tool_chain" else grant.text[:160]
    return f"{spec.pipeline}:{grant.row_id}"


def _log_record(prediction: Prediction, request_summary: str) -> dict:
    run = prediction.run
    return {
        "method_id": run.method_id,
        "row_id": run.row_id,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "request": request_summary,
        "response": run.raw_response[:500],
        "tool_calls": [
            {
                "turn_index": r.turn_index,
                "tool_name": r.tool_name,
                "arguments": r.arguments,
                "result": r.result,
                "selected": r.selected,
            }
            for r in run.tool_calls
        ],
        "usage": {"input_tokens": run.usage.input_tokens, "output_tokens": run.usage.output_tokens},
        "latency_s": run.latency_s,
        "cost_usd": str(run.cost_usd),
        "final_coordinate": (
            [prediction.coordinate.lat, prediction.coordinate.lon] if prediction.coordinate else None
        ),
        "failed": run.failed,
        "reason": run.reason,
    }


def _write_results_csv(
    path: Path,
    grants: list[GrantAbstract],
    roster: list[MethodSpec],
    predictions: dict[str, list[Prediction]],
) -> None:
    header = list(GROUND_TRUTH_HEADER)
    for spec in roster:
        header += [f"{spec.method_id}_lat", f"{spec.method_id}_lon", f"{spec.method_id}_error_km", f"{spec.method_id}_failed"]
    by_key = {(mid, p.row_id): p for mid, preds in predictions.items() for p in preds}
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for g in grants:
            row = [
                g.row_id,
                g.text,
                g.word_count,
                g.fingerprint,
                f"{g.ground_truth.lat:.6f}" if g.ground_truth else "",
                f"{g.ground_truth.lon:.6f}" if g.ground_truth else "",
            ]
            for spec in roster:
                p = by_key[(spec.method_id, g.row_id)]
                row += [
                    f"{p.coordinate.lat:.6f}" if p.coordinate else "",
                    f"{p.coordinate.lon:.6f}" if p.coordinate else "",
                    f"{p.error_km:.6f}" if p.error_km is not None else "",
                    "true" if p.run.failed else "false",
                ]
            writer.writerow(row)


def run_evaluation(manifest: RunManifest) -> RunOutcome:
    """Run every roster method over the evaluation set.

    Writes ``runs/<method>/calls.jsonl`` and ``results_<evalset>.csv``
    under the manifest's output directory. Per-row failures are recorded
    as failed rows, never aborting the run. In dry-run mode the config
    and data files are validated and the planned call matrix is printed;
    nothing external is touched and nothing is written.
    """
    config = manifest.config
    _check_files(manifest)
    rows = load_ground_truth(config.ground_truth)
    evalset = resolve_evalset(config, manifest.evalset, rows)
    by_id = {r.row_id: r for r in rows}
    grants = [by_id[m] for m in evalset.members]
    if manifest.max_rows is not None:
        grants = grants[: manifest.max_rows]

    if manifest.dry_run:
        print(f"dry run: evalset {manifest.evalset!r}, {len(grants)} grants x {len(manifest.methods)} methods")
        for spec in manifest.methods:
            print(f"  {spec.method_id}: pipeline={spec.pipeline} rows={len(grants)}")
        print(f"planned cells: {len(grants) * len(manifest.methods)}, external calls: 0")
        return RunOutcome(manifest.output_dir, len(grants) * len(manifest.methods), 0, {})

    run_dir = manifest.output_dir
    run_dir.mkdir(parents=True, exist_ok=True)
    predictions: dict[str, list[Prediction]] = {}
    failures = 0
    for spec in manifest.methods:
        preds = _run_method(spec, grants, config, manifest.seed)
        predictions[spec.method_id] = preds
        failures += sum(1 for p in preds if p.run.failed)
        method_dir = run_dir / "runs" / spec.method_id
        method_dir.mkdir(parents=True, exist_ok=True)
        with (method_dir / "calls.jsonl").open("w", encoding="utf-8") as fh:
            for grant, p in zip(grants, preds):
                fh.write(json.dumps(_log_record(p, _request_summary(spec, grant))) + "\n")

    _write_results_csv(run_dir / f"results_{manifest.evalset}.csv", grants, manifest.methods, predictions)
    return RunOutcome(run_dir, len(grants) * len(manifest.methods), failures, predictions)


# --- report generation -----------------------------------------------------


def _read_results(run_dir: Path) -> tuple[list[str], dict[str, dict[str, dict]]]:
    """Parse results CSVs into {method: {row_id: cells}}."""
    paths = sorted(run_dir.glob("results_*.csv"))
    if not paths:
        raise NoResults(f"no results_*.csv under {run_dir}")
    methods: list[str] = []
    table: dict[str, dict[str, dict]] = {}
    for path in paths:
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            for col in reader.fieldnames or []:
                if col.endswith("_error_km"):
                    mid = col[: -len("_error_km")]
                    if mid not in methods:
                        methods.append(mid)
                        table[mid] = {}
            for row in reader:
                for mid in methods:
                    table[mid][row["row_id"]] = {
                        "error_km": float(row[f"{mid}_error_km"]) if row.get(f"{mid}_error_km") else None,
                        "failed": row.get(f"{mid}_failed") == "true",
                    }
    return methods, table


def _read_logs(run_dir: Path, method_id: str) -> list[dict]:
    path = run_dir / "runs" / method_id / "calls.jsonl"
    if not path.exists():
        return []
    records = []
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def _log_predictions(method_id: str, logs: list[dict]) -> list[Prediction]:
    """Rebuild lightweight Predictions from a call log for trace stats."""
    preds = []
    for rec in logs:
        run = RunRecord(
            method_id=method_id,
            row_id=rec["row_id"],
            usage=TokenUsage(rec["usage"]["input_tokens"], rec["usage"]["output_tokens"]),
            latency_s=rec["latency_s"],
            cost_usd=Decimal(rec["cost_usd"]),
            tool_calls=[
                ToolCallRecord(
                    turn_index=tc["turn_index"],
                    tool_name=tc["tool_name"],
                    arguments=tc["arguments"],
                    result=tc["result"],
                    selected=tc["selected"],
                )
                for tc in rec.get("tool_calls", [])
            ],
            raw_response=rec.get("response", ""),
            failed=rec["failed"],
            reason=rec.get("reason"),
        )
        coord = rec.get("final_coordinate")
        preds.append(
            Prediction(
                method_id,
                rec["row_id"],
                Coordinate(coord[0], coord[1]) if coord else None,
                None,
                run,
            )
        )
    return preds


def build_method_summary(
    method_id: str,
    errors: list[float],
    logs: list[dict],
    ci_seed: int = 42,
    resamples: int = 10_000,
    baseline_s_per_grant: float = BASELINE_SECONDS_PER_GRANT,
) -> MethodSummary:
    stats = summarize_errors(errors)
    ci = bootstrap_ci(errors, resamples=resamples, seed=ci_seed)
    located = sum(1 for rec in logs if rec.get("final_coordinate"))
    total_cost = sum((Decimal(rec["cost_usd"]) for rec in logs), Decimal(0))
    cost_per_located = (total_cost / located) if located else Decimal(0)
    latencies = [rec["latency_s"] for rec in logs if rec.get("final_coordinate")]
    lat = latency_summary(latencies or [0.0], baseline_s_per_grant)
    hit_pp = stats.bands[10.0] * 100.0
    try:
        marginal = marginal_cost_per_hit(cost_per_located * 1000, hit_pp)
    except ZeroHitRate:
        marginal = None
    return MethodSummary(
        method_id=method_id,
        stats=stats,
        ci=ci,
        cost_per_located=cost_per_located,
        cost_per_1k=cost_per_located * 1000,
        hours_per_1k=lat.hours_per_1k,
        speedup_vs_baseline=lat.speedup_vs_baseline,
        marginal_cost_per_hit_pp=marginal,
    )


def generate_report(
    run_dir: str | Path,
    ci_seed: int = 42,
    resamples: int = 10_000,
    baseline_s_per_grant: float = BASELINE_SECONDS_PER_GRANT,
) -> Path:
    """Write report.md plus plot-ready CSVs for a completed run."""
    run_dir = Path(run_dir)
    methods, table = _read_results(run_dir)
    summaries: list[MethodSummary] = []
    tool_preds: list[Prediction] = []
    seconds_per_grant: dict[str, float] = {}
    for mid in methods:
        errors = [cells["error_km"] for cells in table[mid].values() if cells["error_km"] is not None]
        logs = _read_logs(run_dir, mid)
        if errors:
            summaries.append(
                build_method_summary(mid, errors, logs, ci_seed, resamples, baseline_s_per_grant)
            )
        lat_values = [rec["latency_s"] for rec in logs]
        if lat_values:
            seconds_per_grant[mid] = sum(lat_values) / len(lat_values)
        preds = _log_predictions(mid, logs)
        if any(p.run.tool_calls for p in preds):
            tool_preds.extend(preds)
    if not summaries:
        raise NoResults(f"no scored rows in {run_dir}")
    summaries.sort(key=lambda s: s.stats.mean)

    lines = ["# Run report", ""]
    lines += ["## Accuracy", ""]
    lines += ["| ID | n | Mean ± 95% CI (km) | Median (km) | ≤10 km (%) |", "|---|---|---|---|---|"]
    for s in summaries:
        lines.append(
            f"| {s.method_id} | {s.stats.n} | {s.stats.mean:.1f} [{s.ci.lo:.1f}, {s.ci.hi:.1f}] "
            f"| {s.stats.median:.1f} | {s.stats.bands[10.0] * 100:.1f} |"
        )
    lines += ["", "## Detailed performance", ""]
    lines += [
        "| Method | n | mean | median | sd | min | Q1 | Q3 | max | ≤1 km | ≤5 km | ≤10 km | ≤25 km | ≤50 km |",
        "|---|---|---|---|---|---|---|---|---|---|---|---|---|---|",
    ]
    for s in summaries:
        st = s.stats
        bands = " | ".join(f"{st.bands[t] * 100:.1f}%" for t in (1.0, 5.0, 10.0, 25.0, 50.0))
        lines.append(
            f"| {s.method_id} | {st.n} | {st.mean:.2f} | {st.median:.2f} | {st.sd:.2f} "
            f"| {st.min:.2f} | {st.q1:.2f} | {st.q3:.2f} | {st.max:.2f} | {bands} |"
        )
    lines += ["", "## Cost efficiency", ""]
    lines += ["| ID | Cost / located (USD) | Cost per 1k | Mean error (km) |", "|---|---|---|---|"]
    for s in summaries:
        lines.append(
            f"| {s.method_id} | {s.cost_per_located:.5f} | {s.cost_per_1k:.2f} | {s.stats.mean:.1f} |"
        )
    lines += ["", "## Processing time", ""]
    lines += ["| ID | Hours per located | Hours per 1k | Speedup vs. baseline |", "|---|---|---|---|"]
    for s in summaries:
        lines.append(
            f"| {s.method_id} | {s.hours_per_1k / 1000:.4f} | {s.hours_per_1k:.3f} | {s.speedup_vs_baseline:,.0f}× |"
        )
    lines += ["", "## Marginal cost of high-precision accuracy", ""]
    lines += ["| ID | ≤10 km hit-rate | Cost per 1k (USD) | Cost per +1% ≤10 km hit (USD) |", "|---|---|---|---|"]
    for s in summaries:
        marginal = f"{s.marginal_cost_per_hit_pp:.2f}" if s.marginal_cost_per_hit_pp is not None else "n/a"
        lines.append(
            f"| {s.method_id} | {s.stats.bands[10.0] * 100:.1f}% | {s.cost_per_1k:.2f} | {marginal} |"
        )
    if tool_preds:
        lines += ["", "## Tool usage", ""]
        lines += [
            "| Method | Calls / entry (mean) | geo:cent ratio | First-call success | Mean selected index |",
            "|---|---|---|---|---|",
        ]
        for mid, stats in sorted(trace_statistics(tool_preds).items()):
            ratio = f"{stats.geocode_centroid_ratio:.2f}:1" if stats.geocode_centroid_ratio else "n/a"
            fcs = f"{stats.first_call_success_rate * 100:.1f}%" if stats.first_call_success_rate is not None else "n/a"
            msi = f"{stats.mean_selected_index:.2f}" if stats.mean_selected_index is not None else "n/a"
            lines.append(f"| {mid} | {stats.calls_per_entry_mean:.2f} | {ratio} | {fcs} | {msi} |")

    cost_points = [
        {"id": s.method_id, "cost_per_1k": float(s.cost_per_1k), "mean_error_km": s.stats.mean}
        for s in summaries
    ]
    _write_scatter_csv(run_dir / "cost_vs_error.csv", ["id", "cost_per_1k", "mean_error_km"], cost_points)
    _write_scatter_csv(
        run_dir / "pareto_frontier.csv", ["id", "cost_per_1k", "mean_error_km"], pareto_frontier(cost_points)
    )
    latency_points = [
        {
            "id": s.method_id,
            "seconds_per_grant": seconds_per_grant.get(s.method_id, 0.0),
            "mean_error_km": s.stats.mean,
        }
        for s in summaries
    ]
    _write_scatter_csv(
        run_dir / "latency_vs_error.csv", ["id", "seconds_per_grant", "mean_error_km"], latency_points
    )

    report_path = run_dir / "report.md"
    report_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return report_path


def _write_scatter_csv(path: Path, header: list[str], points: list[dict]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for p in points:
            writer.writerow([p[h] for h in header])


# --- parameter sweeps ------------------------------------------------------

SWEEP_AXES = ("temperature", "reasoning_effort")


def sweep(manifest: RunManifest, axis: str, values: list) -> Path:
    """Clone the roster per axis value, run each, and tabulate results.

    temperature sweeps require rosters whose models use temperature (not
    reasoning effort), and vice versa; a mismatch raises
    AxisInapplicable. Writes sweep.csv and sweep_report.md.
    """
    if axis not in SWEEP_AXES:
        raise AxisInapplicable(f"unknown axis {axis!r}")
    for spec in manifest.methods:
        if spec.pipeline not in _LLM_PIPELINES or spec.model is None:
            raise AxisInapplicable(f"{spec.method_id}: pipeline {spec.pipeline} has no {axis}")
        if axis == "temperature" and spec.model.reasoning_effort is not None:
            raise AxisInapplicable(f"{spec.method_id}: model is reasoning-effort based")
        if axis == "reasoning_effort" and spec.model.temperature is not None:
            raise AxisInapplicable(f"{spec.method_id}: model is temperature based")

    run_dir = manifest.output_dir
    run_dir.mkdir(parents=True, exist_ok=True)
    rows_out: list[dict] = []
    for value in values:
        clones = []
        for spec in manifest.methods:
            if axis == "temperature":
                model = replace(spec.model, temperature=float(value))
            else:
                model = replace(spec.model, reasoning_effort=str(value))
            clone = replace(
                spec,
                method_id=f"{spec.method_id}__{axis}_{value}",
                model=model,
                fixture_script=spec.sweep_fixtures.get(str(value), spec.fixture_script),
            )
            clones.append(clone)
        sub = RunManifest(
            config=manifest.config,
            evalset=manifest.evalset,
            methods=clones,
            seed=manifest.seed,
            parallelism=manifest.parallelism,
            dry_run=False,
            max_rows=manifest.max_rows,
            output_dir=run_dir / f"{axis}_{value}",
        )
        outcome = run_evaluation(sub)
        for clone, base in zip(clones, manifest.methods):
            preds = outcome.predictions[clone.method_id]
            errors = [p.error_km for p in preds if p.error_km is not None]
            tokens = [p.run.usage.input_tokens + p.run.usage.output_tokens for p in preds]
            rows_out.append(
                {
                    "axis_value": value,
                    "method_id": base.method_id,
                    "mean_error_km": sum(errors) / len(errors) if errors else None,
                    "tokens_per_entry": sum(tokens) / len(tokens) if tokens else 0.0,
                }
            )

    csv_path = run_dir / "sweep.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["axis_value", "method_id", "mean_error_km", "tokens_per_entry"])
        for r in rows_out:
            mean = f"{r['mean_error_km']:.4f}" if r["mean_error_km"] is not None else ""
            writer.writerow([r["axis_value"], r["method_id"], mean, f"{r['tokens_per_entry']:.1f}"])

    lines = [f"# Sweep report: {axis}", "", "| Value | Method | Mean error (km) | Tokens / entry |", "|---|---|---|---|"]
    for r in rows_out:
        mean = f"{r['mean_error_km']:.2f}" if r["mean_error_km"] is not None else "n/a"
        lines.append(f"| {r['axis_value']} | {r['method_id']} | {mean} | {r['tokens_per_entry']:.1f} |")
    report_path = run_dir / "sweep_report.md"
    report_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return report_path
