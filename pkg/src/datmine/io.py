"""File formats: everything the pipeline reads or writes.

Text formats
    course spec      key = value pairs plus [videos]/[problems]/[forums]
                     sections listing component ids in catalog order
    cohort plan      same format family; [archetype NAME] sections
    events           JSON lines (learner_id, timestamp, category, component_id)
    metadata         CSV learner_id,grade,certified,education_level,income_tier
    patterns         CSV learner_id,pattern,count,grade
    ldp sweep        CSV n,p_cond,ci_lo,ci_hi,p_base
    embeddings       CSV learner_id,e0..e9 with a .meta.json provenance sidecar
    scatter          CSV learner_id,x,y,grade plus an SVG rendering; the SVG
                     maps grade 0 -> blue (#2166ac), 1 -> red (#b2182b) by
                     linear interpolation, gray (#999999) when ungraded
    loss curve       CSV epoch,loss

Binary formats (little-endian, magic + u32 header length + JSON header)
    cohort archive   magic DATCOH01; header carries the course and learner
                     records; body is per learner, per category: u32 entry
                     count then (u16 day, u16 component) pairs
    distance matrix  magic DATDIST1; header carries ids and a source digest
                     for cache validation; body is the condensed float64
                     upper triangle

Every command writes a RunManifest JSON sidecar recording arguments, seeds,
and input digests.  Manifests contain timestamps, so byte-identity of a
rerun is defined over all outputs except the manifest itself.
"""

from __future__ import annotations

import csv
import hashlib
import json
import struct
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import __version__
from .behavior import CutoffResult, PatternFrequency
from .dat import CATEGORIES, CourseSpec, Dat
from .embedding import DistanceMatrix, EmbeddingMatrix
from .forum_lag import GroupGradeResult, OffsetSeries
from .ingest import Cohort, LearnerRecord, LearnerTrajectories, RawEvent
from .synth import Archetype, CohortPlan, SyntheticCohort

_COHORT_MAGIC = b"DATCOH01"
_DIST_MAGIC = b"DATDIST1"


def _read_exact(fh, n: int, path: str | Path) -> bytes:
    """Read exactly n bytes or raise the uniform truncation error."""
    data = fh.read(n)
    if len(data) != n:
        raise ValueError(f"{path}: file truncated")
    return data


# ---------------------------------------------------------------------------
# generic key/value + section text format


def parse_spec_text(text: str) -> tuple[dict[str, str], list[tuple[str, dict[str, str], list[str]]]]:
    """Parse the key=value/[section] format shared by course and plan files.

    Returns (top-level pairs, sections) where each section is
    (section header, pairs, bare item lines).  '#' starts a comment.
    """
    top: dict[str, str] = {}
    sections: list[tuple[str, dict[str, str], list[str]]] = []
    current: tuple[str, dict[str, str], list[str]] | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = (line[1:-1].strip(), {}, [])
            sections.append(current)
            continue
        if "=" in line:
            key, _, value = line.partition("=")
            target = top if current is None else current[1]
            key = key.strip()
            if key in target:
                raise ValueError(f"line {lineno}: duplicate key {key!r}")
            target[key] = value.strip()
            continue
        if current is None:
            raise ValueError(f"line {lineno}: bare value {line!r} outside any section")
        current[2].append(line)
    return top, sections


def read_course_spec(path: str | Path) -> CourseSpec:
    """Load a course definition: launch, duration_days, component catalogs."""
    top, sections = parse_spec_text(Path(path).read_text(encoding="utf-8"))
    try:
        launch_text = top["launch"]
        duration = int(top["duration_days"])
    except KeyError as exc:
        raise ValueError(f"course spec is missing key {exc}") from None
    launch = datetime.fromisoformat(launch_text.replace("Z", "+00:00"))
    catalogs: dict[str, tuple[str, ...]] = {}
    section_names = {"videos": "video", "problems": "problem", "forums": "forum"}
    for name, pairs, items in sections:
        category = section_names.get(name)
        if category is None:
            raise ValueError(f"unknown course spec section [{name}]")
        if pairs:
            raise ValueError(f"section [{name}] must contain only component ids")
        catalogs[category] = tuple(items)
    missing = [s for s, c in section_names.items() if c not in catalogs]
    if missing:
        raise ValueError(f"course spec is missing sections: {missing}")
    return CourseSpec(launch, duration, catalogs)


def write_course_spec(spec: CourseSpec, path: str | Path) -> None:
    lines = [
        f"launch = {spec.launch.strftime('%Y-%m-%dT%H:%M:%SZ')}",
        f"duration_days = {spec.duration_days}",
        "",
    ]
    for section, category in (("videos", "video"), ("problems", "problem"),
                              ("forums", "forum")):
        lines.append(f"[{section}]")
        lines.extend(spec.catalogs[category])
        lines.append("")
    Path(path).write_text("\n".join(lines), encoding="utf-8")


def _parse_range(value: str, what: str) -> tuple[int, int]:
    parts = value.split()
    if len(parts) != 2:
        raise ValueError(f"{what} expects 'lo hi', got {value!r}")
    lo, hi = int(parts[0]), int(parts[1])
    return lo, hi


def read_cohort_plan(path: str | Path) -> CohortPlan:
    """Load a generator plan: top-level knobs plus [archetype NAME] sections."""
    top, sections = parse_spec_text(Path(path).read_text(encoding="utf-8"))
    try:
        n_learners = int(top["n_learners"])
    except KeyError:
        raise ValueError("cohort plan is missing n_learners") from None
    seed = int(top.get("seed", "0"))
    threshold = float(top.get("certified_threshold", "0.6"))
    dup = float(top.get("duplicate_event_prob", "0.0"))

    archetypes: list[Archetype] = []
    for name, pairs, items in sections:
        parts = name.split(None, 1)
        if len(parts) != 2 or parts[0] != "archetype":
            raise ValueError(f"unknown plan section [{name}]")
        if items:
            raise ValueError(f"section [{name}] takes key = value lines only")
        arch_name = parts[1]
        kwargs: dict = {"name": arch_name, "proportion": float(pairs.pop("proportion"))}
        if "activity_prob" in pairs:
            kwargs["activity_prob"] = float(pairs.pop("activity_prob"))
        if "videos_per_day" in pairs:
            kwargs["videos_per_day"] = _parse_range(pairs.pop("videos_per_day"),
                                                    "videos_per_day")
        pattern_counts = {}
        for pattern in ("return_recent", "return_long", "return_skipped"):
            if pattern in pairs:
                pattern_counts[pattern] = _parse_range(pairs.pop(pattern), pattern)
        if pattern_counts:
            kwargs["pattern_counts"] = pattern_counts
        if "dropout" in pairs:
            kwargs["dropout"] = _parse_range(pairs.pop("dropout"), "dropout")
        if "forum_base_prob" in pairs:
            kwargs["forum_base_prob"] = float(pairs.pop("forum_base_prob"))
        if "forum_kernel" in pairs:
            kernel: dict[int, float] = {}
            for token in pairs.pop("forum_kernel").split():
                offset_text, _, prob_text = token.partition(":")
                kernel[int(offset_text)] = float(prob_text)
            kwargs["forum_kernel"] = kernel
        if "problem_prob" in pairs:
            kwargs["problem_prob"] = float(pairs.pop("problem_prob"))
        if "grade_base" in pairs:
            kwargs["grade_base"] = float(pairs.pop("grade_base"))
        coeffs = {}
        for pattern in ("return_recent", "return_long", "return_skipped"):
            key = f"grade_coeff_{pattern}"
            if key in pairs:
                coeffs[pattern] = float(pairs.pop(key))
        if coeffs:
            kwargs["grade_coeffs"] = coeffs
        if "grade_noise" in pairs:
            kwargs["grade_noise"] = float(pairs.pop("grade_noise"))
        if pairs:
            raise ValueError(f"unknown keys in [{name}]: {sorted(pairs)}")
        archetypes.append(Archetype(**kwargs))
    if not archetypes:
        raise ValueError("cohort plan defines no archetypes")
    return CohortPlan(n_learners, tuple(archetypes), seed=seed,
                      certified_threshold=threshold, duplicate_event_prob=dup)


# ---------------------------------------------------------------------------
# events + metadata


def write_events_jsonl(events: Iterable[RawEvent], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for event in events:
            ts = event.timestamp.astimezone(timezone.utc)
            fh.write(json.dumps({
                "learner_id": event.learner_id,
                "timestamp": ts.strftime("%Y-%m-%dT%H:%M:%SZ"),
                "category": event.category,
                "component_id": event.component_id,
            }, sort_keys=True))
            fh.write("\n")


def write_metadata_csv(records: Iterable[LearnerRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["learner_id", "grade", "certified",
                         "education_level", "income_tier"])
        for r in records:
            grade = "" if r.grade is None else f"{r.grade:.10g}"
            writer.writerow([r.learner_id, grade,
                             "true" if r.certified else "false",
                             r.education_level, r.income_tier])


def read_metadata_csv(path: str | Path) -> list[LearnerRecord]:
    records: list[LearnerRecord] = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"learner_id", "grade", "certified",
                    "education_level", "income_tier"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(
                f"metadata must have columns {sorted(required)}, "
                f"got {reader.fieldnames}"
            )
        for lineno, row in enumerate(reader, start=2):
            grade_text = (row["grade"] or "").strip()
            try:
                records.append(LearnerRecord(
                    learner_id=row["learner_id"],
                    grade=float(grade_text) if grade_text else None,
                    certified=row["certified"].strip().lower() == "true",
                    education_level=row["education_level"].strip() or "unknown",
                    income_tier=row["income_tier"].strip() or "unknown",
                ))
            except ValueError as exc:
                raise ValueError(f"metadata line {lineno}: {exc}") from None
    return records


# ---------------------------------------------------------------------------
# cohort archive


def write_cohort_archive(cohort: Cohort, path: str | Path) -> None:
    """Binary archive: JSON header (course + records) + packed entries."""
    ids = cohort.learner_ids
    spec = cohort.spec
    header = {
        "version": 1,
        "course": {
            "launch": spec.launch.strftime("%Y-%m-%dT%H:%M:%SZ"),
            "duration_days": spec.duration_days,
            "catalogs": {c: list(spec.catalogs[c]) for c in CATEGORIES},
        },
        "learners": [
            {
                "learner_id": i,
                "grade": cohort.record(i).grade,
                "certified": cohort.record(i).certified,
                "education_level": cohort.record(i).education_level,
                "income_tier": cohort.record(i).income_tier,
            }
            for i in ids
        ],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_COHORT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for learner_id in ids:
            for category in CATEGORIES:
                entries = cohort.dat(learner_id, category).entries
                fh.write(struct.pack("<I", len(entries)))
                for day, comp in entries:
                    fh.write(struct.pack("<HH", day, comp))


def read_cohort_archive(path: str | Path) -> Cohort:
    with open(path, "rb") as fh:
        magic = fh.read(len(_COHORT_MAGIC))
        if magic != _COHORT_MAGIC:
            raise ValueError(f"{path}: not a cohort archive (magic {magic!r})")
        (header_len,) = struct.unpack("<I", _read_exact(fh, 4, path))
        header = json.loads(_read_exact(fh, header_len, path).decode("utf-8"))
        if header.get("version") != 1:
            raise ValueError(f"unsupported cohort archive version {header.get('version')}")
        course = header["course"]
        spec = CourseSpec(
            datetime.fromisoformat(course["launch"].replace("Z", "+00:00")),
            int(course["duration_days"]),
            {c: tuple(course["catalogs"][c]) for c in CATEGORIES},
        )
        learners: dict[str, LearnerTrajectories] = {}
        for meta in header["learners"]:
            learner_id = meta["learner_id"]
            record = LearnerRecord(
                learner_id,
                meta["grade"],
                bool(meta["certified"]),
                meta["education_level"],
                meta["income_tier"],
            )
            dats = {}
            for category in CATEGORIES:
                (count,) = struct.unpack("<I", _read_exact(fh, 4, path))
                raw = _read_exact(fh, count * 4, path)
                entries = tuple(struct.unpack_from("<HH", raw, k * 4)
                                for k in range(count))
                dats[category] = Dat(learner_id, category, entries)
            learners[learner_id] = LearnerTrajectories(record, dats)
    return Cohort(spec, learners)


# ---------------------------------------------------------------------------
# distance matrix


def write_distance_matrix(dm: DistanceMatrix, path: str | Path,
                          source_digest: str = "") -> None:
    header = {
        "version": 1,
        "n": dm.n,
        "learner_ids": list(dm.learner_ids),
        "source_digest": source_digest,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_DIST_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(dm.condensed, dtype="<f8").tobytes())


def read_distance_matrix(path: str | Path) -> tuple[DistanceMatrix, str]:
    """Returns (matrix, source_digest recorded at write time)."""
    with open(path, "rb") as fh:
        magic = fh.read(len(_DIST_MAGIC))
        if magic != _DIST_MAGIC:
            raise ValueError(f"{path}: not a distance matrix file (magic {magic!r})")
        (header_len,) = struct.unpack("<I", _read_exact(fh, 4, path))
        header = json.loads(_read_exact(fh, header_len, path).decode("utf-8"))
        if header.get("version") != 1:
            raise ValueError(f"unsupported distance matrix version {header.get('version')}")
        ids = tuple(header["learner_ids"])
        n = int(header["n"])
        condensed = np.frombuffer(_read_exact(fh, n * (n - 1) // 2 * 8, path),
                                  dtype="<f8").copy()
    return DistanceMatrix(ids, condensed), str(header.get("source_digest", ""))


# ---------------------------------------------------------------------------
# CSV artifacts


def write_embedding_csv(matrix: EmbeddingMatrix, path: str | Path) -> None:
    """CSV learner_id,e0..e{k-1} plus a .meta.json provenance sidecar."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["learner_id"] + [f"e{i}" for i in range(matrix.n_dims)])
        for learner_id, row in zip(matrix.learner_ids, matrix.values):
            writer.writerow([learner_id] + [repr(float(v)) for v in row])
    meta = {"pipeline": matrix.pipeline, "seed": matrix.seed,
            "n_learners": matrix.n_learners, "n_dims": matrix.n_dims}
    meta_path = path.with_suffix(path.suffix + ".meta.json")
    meta_path.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n",
                         encoding="utf-8")


def read_embedding_csv(path: str | Path) -> EmbeddingMatrix:
    path = Path(path)
    ids: list[str] = []
    rows: list[list[float]] = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "learner_id":
            raise ValueError(f"{path}: not an embedding CSV")
        for row in reader:
            ids.append(row[0])
            rows.append([float(v) for v in row[1:]])
    meta_path = path.with_suffix(path.suffix + ".meta.json")
    pipeline = "unknown"
    seed = None
    if meta_path.exists():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        pipeline = meta.get("pipeline", "unknown")
        seed = meta.get("seed")
    return EmbeddingMatrix(tuple(ids), np.asarray(rows, dtype=np.float64),
                           pipeline=pipeline, seed=seed)


def write_patterns_csv(rows: Sequence[PatternFrequency],
                       grades: Mapping[str, float | None],
                       path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["learner_id", "pattern", "count", "grade"])
        for row in rows:
            grade = grades.get(row.learner_id)
            writer.writerow([row.learner_id, row.pattern, row.count,
                             "" if grade is None else f"{grade:.10g}"])


def cutoff_result_to_dict(result: CutoffResult) -> dict:
    return {
        "pattern": result.pattern,
        "degenerate": result.degenerate,
        "reason": result.reason,
        "cutoff": result.cutoff,
        "p_value": result.p_value,
        "log10_p": result.log10_p,
        "p_bonferroni": result.p_bonferroni,
        "n_below": result.n_below,
        "n_above": result.n_above,
        "n_tests": result.n_tests,
        "audit": [asdict(row) for row in result.rows],
    }


def write_ldp_csv(series: OffsetSeries, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "p_cond", "ci_lo", "ci_hi", "p_base"])
        for offset, p_cond, lo, hi, p_base in series.rows():
            writer.writerow([
                offset,
                "" if p_cond is None else repr(float(p_cond)),
                "" if lo is None else repr(float(lo)),
                "" if hi is None else repr(float(hi)),
                repr(float(p_base)),
            ])


def group_grade_to_dict(result: GroupGradeResult) -> dict:
    return asdict(result)


def write_loss_curve_csv(losses: Sequence[float], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss"])
        for epoch, loss in enumerate(losses, start=1):
            writer.writerow([epoch, repr(float(loss))])


# ---------------------------------------------------------------------------
# scatter CSV + SVG


def write_scatter_csv(coords: EmbeddingMatrix,
                      grades: Mapping[str, float | None],
                      path: str | Path) -> None:
    if coords.n_dims != 2:
        raise ValueError(f"scatter needs 2-D coordinates, got {coords.n_dims}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["learner_id", "x", "y", "grade"])
        for learner_id, (x, y) in zip(coords.learner_ids, coords.values):
            grade = grades.get(learner_id)
            writer.writerow([learner_id, repr(float(x)), repr(float(y)),
                             "" if grade is None else f"{grade:.10g}"])


def _grade_color(grade: float | None) -> str:
    # linear ramp: grade 0 -> #2166ac (blue), 1 -> #b2182b (red)
    if grade is None:
        return "#999999"
    g = min(1.0, max(0.0, grade))
    lo = (0x21, 0x66, 0xac)
    hi = (0xb2, 0x18, 0x2b)
    r, gr, b = (round(a + (c - a) * g) for a, c in zip(lo, hi))
    return f"#{r:02x}{gr:02x}{b:02x}"


def write_scatter_svg(coords: EmbeddingMatrix,
                      grades: Mapping[str, float | None],
                      path: str | Path,
                      width: int = 640, height: int = 480) -> None:
    """Standalone SVG scatter with grade mapped to the blue-red ramp."""
    if coords.n_dims != 2:
        raise ValueError(f"scatter needs 2-D coordinates, got {coords.n_dims}")
    values = coords.values
    margin = 24.0
    x_min, y_min = values.min(axis=0)
    x_max, y_max = values.max(axis=0)
    x_span = (x_max - x_min) or 1.0
    y_span = (y_max - y_min) or 1.0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white" '
        f'stroke="#cccccc"/>',
    ]
    for learner_id, (x, y) in zip(coords.learner_ids, coords.values):
        px = margin + (x - x_min) / x_span * (width - 2 * margin)
        # SVG y axis points down; flip so larger y plots higher
        py = height - margin - (y - y_min) / y_span * (height - 2 * margin)
        color = _grade_color(grades.get(learner_id))
        parts.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="3" '
                     f'fill="{color}" fill-opacity="0.8"/>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# ground truth + manifest


def write_groundtruth_json(synthetic: SyntheticCohort, path: str | Path) -> None:
    payload = {
        "seed": synthetic.plan.seed,
        "n_learners": synthetic.plan.n_learners,
        "archetypes": [a.name for a in synthetic.plan.archetypes],
        "learners": {
            t.learner_id: {
                "archetype": t.archetype,
                "pattern_counts": dict(t.pattern_counts),
                "grade": t.grade,
                "certified": t.certified,
                "group_y": t.group_y,
                "n_video_days": t.n_video_days,
                "dropout_day": t.dropout_day,
            }
            for t in synthetic.truth
        },
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                          encoding="utf-8")


def read_groundtruth_json(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass(frozen=True)
class RunManifest:
    """Provenance sidecar written next to every command's primary output."""

    command: str
    arguments: tuple[str, ...]
    seed: int | None
    input_digests: Mapping[str, str]
    tool_version: str
    started_at: str
    finished_at: str


def write_manifest(manifest: RunManifest, primary_out: str | Path) -> Path:
    path = Path(str(primary_out) + ".manifest.json")
    payload = {
        "command": manifest.command,
        "arguments": list(manifest.arguments),
        "seed": manifest.seed,
        "input_digests": dict(manifest.input_digests),
        "tool_version": manifest.tool_version,
        "started_at": manifest.started_at,
        "finished_at": manifest.finished_at,
    }
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")
    return path


def make_manifest(command: str, arguments: Sequence[str], seed: int | None,
                  inputs: Sequence[str | Path], started_at: datetime) -> RunManifest:
    digests = {str(p): file_digest(p) for p in inputs if Path(p).is_file()}
    return RunManifest(
        command=command,
        arguments=tuple(str(a) for a in arguments),
        seed=seed,
        input_digests=digests,
        tool_version=__version__,
        started_at=started_at.strftime("%Y-%m-%dT%H:%M:%S.%fZ"),
        finished_at=datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ"),
    )
