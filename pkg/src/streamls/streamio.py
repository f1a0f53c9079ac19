"""Stream ingestion, run configuration, metrics and report files."""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass
from typing import AbstractSet, Iterator, Sequence

from .constraints import (
    IndependenceOracle,
    KnapsackSpec,
    Matchoid,
    PartitionMatroid,
    UniformMatroid,
)
from .errors import ConfigError, ParseError
from .localsearch import Selection, SessionReport, StreamingSession
from .objectives import (
    CoverageOracle,
    CutOracle,
    DecomposableOracle,
    DppKernel,
    Element,
    LogDetOracle,
    SequentialDppOracle,
    ValueOracle,
    load_kernel,
    reservoir_sample,
    sample_size_bound,
    seqdpp_conditional_value,
    suggest_logdet_offset,
)
from .unconstrained import DoubleGreedyConfig

_RESERVED_COLUMNS = {"id", "groups"}


def _parse_groups(cell: str) -> frozenset[str]:
    return frozenset(g for g in cell.split(";") if g)


def load_stream(
    path: str,
    fmt: str = "csv",
    d: int = 0,
    capacities: Sequence[float] | None = None,
) -> Iterator[Element]:
    """Yield elements in file order.

    CSV needs a header; ``id`` is required, ``cost_1..cost_d`` and
    ``groups`` (semicolon-separated labels) are recognized, any other
    column is a numeric feature. JSONL rows are objects with the same
    keys (``costs`` as an array). Costs are divided by ``capacities``
    when given.
    """
    if fmt not in ("csv", "jsonl"):
        raise ConfigError(f"unknown stream format {fmt!r}")
    caps = [float(c) for c in capacities] if capacities is not None else None
    if caps is not None:
        if any(c <= 0 for c in caps):
            raise ConfigError("capacities must be positive")
        if d and len(caps) != d:
            raise ConfigError("capacities length must equal the knapsack count")
        d = len(caps)
    seen: set[int] = set()

    def finish(eid: int, features, costs, groups, line: int) -> Element:
        if eid in seen:
            raise ParseError(f"duplicate element id {eid}", line)
        seen.add(eid)
        if len(costs) != d:
            raise ParseError(f"element {eid} has {len(costs)} costs, expected {d}", line)
        for c in costs:
            if c < 0:
                raise ParseError(f"element {eid} has negative cost {c}", line)
        if caps is not None:
            costs = [c / cap for c, cap in zip(costs, caps)]
        return Element(
            id=eid,
            features=tuple(features) if features else None,
            costs=tuple(costs),
            groups=groups,
        )

    if fmt == "csv":
        yield from _load_csv(path, d, finish)
    else:
        yield from _load_jsonl(path, d, finish)


def _load_csv(path: str, d: int, finish) -> Iterator[Element]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return
        header = [h.strip() for h in header]
        if "id" not in header:
            raise ParseError("missing required column 'id'", 1)
        cost_cols = [f"cost_{j}" for j in range(1, d + 1)]
        for col in cost_cols:
            if col not in header:
                raise ParseError(f"missing required column {col!r}", 1)
        feature_cols = [
            h for h in header if h not in _RESERVED_COLUMNS and h not in cost_cols
        ]
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"expected {len(header)} fields, found {len(row)}", lineno
                )
            record = dict(zip(header, (cell.strip() for cell in row)))
            try:
                eid = int(record["id"])
            except ValueError:
                raise ParseError(f"malformed id {record['id']!r}", lineno) from None
            try:
                costs = [float(record[c]) if record[c] else 0.0 for c in cost_cols]
                features = [
                    float(record[c]) for c in feature_cols if record.get(c, "") != ""
                ]
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            groups = _parse_groups(record.get("groups", ""))
            yield finish(eid, features, costs, groups, lineno)


def _load_jsonl(path: str, d: int, finish) -> Iterator[Element]:
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"bad json: {exc.msg}", lineno) from None
            if "id" not in obj:
                raise ParseError("missing required field 'id'", lineno)
            yield finish(
                int(obj["id"]),
                [float(x) for x in obj.get("features") or []],
                [float(x) for x in obj.get("costs") or []],
                frozenset(str(g) for g in obj.get("groups") or []),
                lineno,
            )


# ---------------------------------------------------------------------------
# Summary metrics
# ---------------------------------------------------------------------------


def summary_metrics(
    selected: AbstractSet[int],
    references: Sequence[AbstractSet[int]],
) -> tuple[float, float, float]:
    """Mean precision, recall and F-score against reference summaries.

    Matching is by element id. An empty selection scores precision 1
    against an empty reference and 0 otherwise; F is 0 when P + R = 0.
    """
    if not references:
        raise ConfigError("at least one reference summary is required")
    p_total = r_total = f_total = 0.0
    for ref in references:
        hits = len(selected & ref)
        if selected:
            precision = hits / len(selected)
        else:
            precision = 1.0 if not ref else 0.0
        recall = hits / len(ref) if ref else 1.0
        f_score = (
            2.0 * precision * recall / (precision + recall)
            if precision + recall > 0
            else 0.0
        )
        p_total += precision
        r_total += recall
        f_total += f_score
    n = len(references)
    return p_total / n, r_total / n, f_total / n


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------


def parse_kv_file(path: str) -> dict[str, str]:
    """Flat ``key = value`` lines; '#' starts a comment."""
    out: dict[str, str] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"expected 'key = value', found {line!r}", lineno)
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


@dataclass
class RunConfig:
    stream: str = ""
    format: str = "csv"
    objective: str = "coverage"
    kernel: str | None = None
    offset: str = "auto"
    edges: str | None = None
    segment: int = 0
    constraint: str = "none"
    knapsacks: int = 0
    capacities: tuple[float, ...] = ()
    alpha: str = "auto"
    mode: str = "deterministic"
    eps: float = 0.2
    k: str = "auto"
    swap_margin: float = 1.0
    seed: int = 0
    dec_eps: float = 0.5
    dec_delta: float = 0.1
    dec_k: int = 3
    report: str | None = None
    references: str | None = None

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        raw = parse_kv_file(path)
        cfg = cls()
        for key, value in raw.items():
            if not hasattr(cfg, key):
                raise ConfigError(f"unknown config key {key!r}")
            current = getattr(cfg, key)
            if isinstance(current, bool):
                setattr(cfg, key, value.lower() in ("1", "true", "yes"))
            elif isinstance(current, int):
                setattr(cfg, key, int(value))
            elif isinstance(current, float):
                setattr(cfg, key, float(value))
            elif key == "capacities":
                cfg.capacities = tuple(float(x) for x in value.split(",") if x)
            else:
                setattr(cfg, key, value)
        if cfg.knapsacks and not cfg.capacities:
            cfg.capacities = tuple(1.0 for _ in range(cfg.knapsacks))
        if cfg.knapsacks and len(cfg.capacities) != cfg.knapsacks:
            raise ConfigError("capacities length must equal the knapsack count")
        return cfg

    def prune_config(self) -> DoubleGreedyConfig:
        return DoubleGreedyConfig(mode=self.mode, seed=self.seed)

    def alpha_value(self) -> float | None:
        return None if self.alpha == "auto" else float(self.alpha)

    def k_value(self) -> int | None:
        return None if self.k == "auto" else int(self.k)

    def reference_sets(self) -> list[frozenset[int]]:
        if not self.references:
            return []
        return [
            frozenset(int(x) for x in part.split(",") if x)
            for part in self.references.split("|")
        ]


def build_constraint(spec: str) -> IndependenceOracle:
    """Constraint DSL: none | uniform:N | partition:a=1,b=2 | matchoid:a=1;b=2[;p=2]."""
    spec = spec.strip()
    if spec in ("", "none"):
        return UniformMatroid(1 << 30)
    kind, _, body = spec.partition(":")
    if kind == "uniform":
        return UniformMatroid(int(body))
    if kind == "partition":
        limits = {}
        for chunk in body.split(","):
            label, _, limit = chunk.partition("=")
            if not label or not limit:
                raise ConfigError(f"bad partition block {chunk!r}")
            limits[label.strip()] = int(limit)
        return PartitionMatroid(limits)
    if kind == "matchoid":
        parts: list[tuple[IndependenceOracle, frozenset[int] | str]] = []
        p: int | None = None
        for chunk in body.split(";"):
            label, _, limit = chunk.partition("=")
            if not label or not limit:
                raise ConfigError(f"bad matchoid part {chunk!r}")
            if label.strip() == "p":
                p = int(limit)
                continue
            parts.append((UniformMatroid(int(limit)), label.strip()))
        return Matchoid(parts, p=p)
    raise ConfigError(f"unknown constraint spec {spec!r}")


def _coverage_components(elements: Sequence[Element]):
    def make(e: Element):
        def component(s: frozenset[Element]) -> float:
            if not e.groups:
                return 0.0
            covered: set[str] = set()
            for x in s:
                covered |= x.groups
            return len(e.groups & covered) / len(e.groups)

        return component

    return {e.id: make(e) for e in elements}


def build_objective(
    cfg: RunConfig, elements: Sequence[Element]
) -> tuple[ValueOracle, DppKernel | None]:
    """Instantiate the configured oracle over the loaded stream."""
    if cfg.objective == "coverage":
        return CoverageOracle({e.id: e.groups for e in elements}), None
    if cfg.objective == "cut":
        if not cfg.edges:
            raise ConfigError("cut objective needs an 'edges' file")
        edge_list = []
        with open(cfg.edges) as fh:
            for lineno, line in enumerate(fh, start=1):
                fields = line.split()
                if not fields:
                    continue
                if len(fields) not in (2, 3):
                    raise ParseError("expected 'u v [weight]'", lineno)
                w = float(fields[2]) if len(fields) == 3 else 1.0
                edge_list.append((int(fields[0]), int(fields[1]), w))
        return CutOracle(edge_list, nodes=[e.id for e in elements]), None
    if cfg.objective in ("logdet", "seqdpp"):
        if not cfg.kernel:
            raise ConfigError(f"{cfg.objective} objective needs a 'kernel' file")
        kernel = load_kernel(cfg.kernel)
        offset = (
            suggest_logdet_offset(kernel.matrix)
            if cfg.offset == "auto"
            else float(cfg.offset)
        )
        kernel = DppKernel(kernel.matrix, offset=offset, ids=kernel.ids)
        if cfg.objective == "logdet":
            return LogDetOracle(kernel), kernel
        return SequentialDppOracle(kernel), kernel
    if cfg.objective == "decomposable":
        components = _coverage_components(elements)
        bound = sample_size_bound(
            cfg.dec_k, cfg.dec_eps, cfg.dec_delta, max(2, len(elements))
        )
        capacity = min(bound, len(elements))
        rng = random.Random(cfg.seed)
        sample: list[Element] = []
        for position, e in enumerate(elements, start=1):
            reservoir_sample(position, sample, capacity, e, rng)
        return DecomposableOracle(components, elements, sample), None
    raise ConfigError(f"unknown objective {cfg.objective!r}")


# ---------------------------------------------------------------------------
# Sequential-DPP segment driver
# ---------------------------------------------------------------------------


class SegmentedDppSession:
    """Closes a segment every ``segment_size`` elements and conditions the
    next segment's oracle on what was just selected."""

    def __init__(
        self,
        kernel: DppKernel,
        segment_size: int,
        constraint_factory,
        knapsacks: KnapsackSpec | None = None,
        *,
        k: int | None = None,
        eps: float = 0.2,
        alpha: float | None = None,
        prune: DoubleGreedyConfig = DoubleGreedyConfig(),
        swap_margin: float = 1.0,
    ):
        if segment_size < 1:
            raise ConfigError("segment size must be at least 1")
        self.kernel = kernel
        self.segment_size = segment_size
        self._constraint_factory = constraint_factory
        self._session_kwargs = dict(
            knapsacks=knapsacks, k=k, eps=eps, alpha=alpha, prune=prune,
            swap_margin=swap_margin,
        )
        self.prev: frozenset[Element] = frozenset()
        self.selected: set[Element] = set()
        self.conditional_total = 0.0
        self.segments_closed = 0
        self.pushed = 0
        self.seconds_total = 0.0
        self._buffer: list[Element] = []
        self._segment_session = self._open_segment()

    def _open_segment(self) -> StreamingSession:
        oracle = SequentialDppOracle(self.kernel, prev=self.prev)
        return StreamingSession(
            oracle, self._constraint_factory(), **self._session_kwargs
        )

    def _close_segment(self) -> None:
        selection = self._segment_session.snapshot()
        segment = frozenset(self._buffer)
        self.conditional_total += seqdpp_conditional_value(
            self.kernel, selection.elements, self.prev, segment
        )
        self.selected |= selection.elements
        self.prev = selection.elements
        self.segments_closed += 1
        self.seconds_total += self._segment_session.seconds_total
        self._buffer = []
        self._segment_session = self._open_segment()

    def push(self, e: Element) -> None:
        self.pushed += 1
        self._buffer.append(e)
        self._segment_session.push(e)
        if len(self._buffer) >= self.segment_size:
            self._close_segment()

    def snapshot(self) -> Selection:
        """Selected-so-far plus the running segment's current best."""
        current = self._segment_session.snapshot()
        combined = frozenset(self.selected | current.elements)
        value = self.conditional_total
        if self._buffer:
            value += seqdpp_conditional_value(
                self.kernel, current.elements, self.prev, frozenset(self._buffer)
            )
        return Selection(combined, value)

    def close(self) -> SessionReport:
        if self._buffer:
            self._close_segment()
        return SessionReport(
            selection=Selection(frozenset(self.selected), self.conditional_total),
            pushed=self.pushed,
            seconds_total=self.seconds_total,
            stats={"segments": self.segments_closed},
        )


# ---------------------------------------------------------------------------
# Report files
# ---------------------------------------------------------------------------


def format_value(value) -> str:
    if isinstance(value, (tuple, list)):
        return "[" + ", ".join(str(int(v)) for v in value) + "]"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_value(text: str):
    text = text.strip()
    if text.startswith("[") and text.endswith("]"):
        inner = text[1:-1].strip()
        if not inner:
            return ()
        return tuple(int(x) for x in inner.split(","))
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def write_report(
    path: str,
    fields: dict[str, object],
    table: Sequence[dict[str, object]] | None = None,
) -> None:
    """Line-delimited ``key = value`` report plus an optional TSV table."""
    with open(path, "w") as fh:
        for key, value in fields.items():
            fh.write(f"{key} = {format_value(value)}\n")
        if table:
            columns = list(table[0])
            fh.write("\n[table]\n")
            fh.write("\t".join(columns) + "\n")
            for row in table:
                fh.write("\t".join(format_value(row[c]) for c in columns) + "\n")


def parse_report(path: str) -> tuple[dict[str, object], list[dict[str, object]]]:
    fields: dict[str, object] = {}
    table: list[dict[str, object]] = []
    columns: list[str] | None = None
    in_table = False
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if line.strip() == "[table]":
                in_table = True
                continue
            if in_table:
                cells = line.split("\t")
                if columns is None:
                    columns = cells
                else:
                    table.append(
                        {c: parse_value(v) for c, v in zip(columns, cells)}
                    )
                continue
            if "=" not in line:
                raise ParseError(f"expected 'key = value', found {line!r}", lineno)
            key, value = line.split("=", 1)
            fields[key.strip()] = parse_value(value)
    return fields, table
