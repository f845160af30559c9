"""Speaker embedding corpora, trial lists, and score files.

On-disk formats:

* text embeddings: one record per line, ``<utt_id> <spk_id> <F|M> <v1> ... <vD>``,
  single-space separated, ``.`` decimal separator, ``#`` comment lines ignored.
* binary embeddings: magic ``XVC1``, little-endian u32 dimension, u32 record
  count, then per record u16-prefixed utt/spk ids, u8 gender (0=F, 1=M) and
  the vector as 64-bit IEEE floats. Round-trips are bit exact.
* trial list: ``<enroll_spk> <test_utt> <target|nontarget>`` per line.
* score file: ``<enroll_spk> <test_utt> <score>`` with six decimal places.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

GENDERS = ("F", "M")
SUBSETS = ("enrollment", "trial", "pool", "training")
LABELS = ("target", "nontarget")

_BINARY_MAGIC = b"XVC1"


def _frozen_vector(values) -> np.ndarray:
    vec = np.array(values, dtype=np.float64, copy=True)
    vec.flags.writeable = False
    return vec


@dataclass(frozen=True)
class Embedding:
    """One utterance's fixed-dimension speaker vector with labels."""

    utt_id: str
    spk_id: str
    gender: str
    vector: np.ndarray

    def __post_init__(self):
        if not self.utt_id or not self.spk_id:
            raise ValueError("utt_id and spk_id must be non-empty")
        if self.gender not in GENDERS:
            raise ValueError(f"gender must be one of {GENDERS}, got {self.gender!r}")
        vec = np.asarray(self.vector, dtype=np.float64)
        if vec.ndim != 1 or vec.size == 0:
            raise ValueError(f"embedding {self.utt_id!r}: vector must be non-empty and 1-D")
        if not np.all(np.isfinite(vec)):
            raise ValueError(f"embedding {self.utt_id!r}: non-finite coordinate")
        object.__setattr__(self, "vector", _frozen_vector(vec))

    @property
    def dim(self) -> int:
        return int(self.vector.shape[0])


@dataclass(frozen=True)
class Corpus:
    """An immutable collection of embeddings sharing one dimension.

    ``subset`` tags what the corpus is used for; the loaders leave it unset.
    Empty corpora are representable (splits may produce them) but the file
    loaders and all consumers that need data reject them.
    """

    name: str
    records: tuple[Embedding, ...]
    subset: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if self.subset is not None and self.subset not in SUBSETS:
            raise ValueError(f"subset must be one of {SUBSETS}, got {self.subset!r}")
        dims = {r.dim for r in self.records}
        if len(dims) > 1:
            raise ValueError(f"corpus {self.name!r}: inconsistent dimensions {sorted(dims)}")
        seen: dict[str, str] = {}
        spk_gender: dict[str, str] = {}
        for rec in self.records:
            if rec.utt_id in seen:
                raise ValueError(f"corpus {self.name!r}: duplicate utt_id {rec.utt_id!r}")
            seen[rec.utt_id] = rec.spk_id
            prev = spk_gender.setdefault(rec.spk_id, rec.gender)
            if prev != rec.gender:
                raise ValueError(
                    f"corpus {self.name!r}: speaker {rec.spk_id!r} has conflicting genders"
                )

    def __len__(self) -> int:
        return len(self.records)

    @property
    def dim(self) -> int:
        if not self.records:
            raise ValueError(f"corpus {self.name!r} is empty, dimension undefined")
        return self.records[0].dim

    def matrix(self) -> np.ndarray:
        """All vectors stacked as an (N, D) float64 array."""
        if not self.records:
            raise ValueError(f"corpus {self.name!r} is empty")
        return np.stack([r.vector for r in self.records])

    def by_speaker(self) -> dict[str, list[Embedding]]:
        groups: dict[str, list[Embedding]] = {}
        for rec in self.records:
            groups.setdefault(rec.spk_id, []).append(rec)
        return groups

    def by_utt(self) -> dict[str, Embedding]:
        return {r.utt_id: r for r in self.records}

    def speaker_gender(self) -> dict[str, str]:
        return {r.spk_id: r.gender for r in self.records}


@dataclass(frozen=True)
class TrialEntry:
    enroll_spk: str
    test_utt: str
    label: str

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValueError(f"trial label must be one of {LABELS}, got {self.label!r}")


@dataclass(frozen=True)
class TrialList:
    """Labeled verification trials; (enroll_spk, test_utt) pairs are unique."""

    entries: tuple[TrialEntry, ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        seen = set()
        for e in self.entries:
            key = (e.enroll_spk, e.test_utt)
            if key in seen:
                raise ValueError(f"duplicate trial pair {key}")
            seen.add(key)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def n_target(self) -> int:
        return sum(1 for e in self.entries if e.label == "target")

    @property
    def n_nontarget(self) -> int:
        return sum(1 for e in self.entries if e.label == "nontarget")


@dataclass(frozen=True)
class ScoreEntry:
    enroll_spk: str
    test_utt: str
    score: float
    label: str | None = None

    def __post_init__(self):
        if not np.isfinite(self.score):
            raise ValueError(
                f"score for ({self.enroll_spk}, {self.test_utt}) is not finite"
            )
        if self.label is not None and self.label not in LABELS:
            raise ValueError(f"score label must be one of {LABELS}, got {self.label!r}")


@dataclass(frozen=True)
class ScoreSet:
    """Verification LLR scores, optionally labeled for metric computation."""

    entries: tuple[ScoreEntry, ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))

    def __len__(self) -> int:
        return len(self.entries)

    def _labeled(self, label: str) -> np.ndarray:
        if any(e.label is None for e in self.entries):
            raise ValueError("score set has unlabeled entries; labels are required")
        return np.array(
            [e.score for e in self.entries if e.label == label], dtype=np.float64
        )

    def target_scores(self) -> np.ndarray:
        return self._labeled("target")

    def nontarget_scores(self) -> np.ndarray:
        return self._labeled("nontarget")

    def with_labels_from(self, trials: TrialList) -> "ScoreSet":
        """Attach labels by joining on (enroll_spk, test_utt)."""
        lookup = {(t.enroll_spk, t.test_utt): t.label for t in trials.entries}
        out = []
        for e in self.entries:
            key = (e.enroll_spk, e.test_utt)
            if key not in lookup:
                raise ValueError(f"score pair {key} not present in trial list")
            out.append(ScoreEntry(e.enroll_spk, e.test_utt, e.score, lookup[key]))
        return ScoreSet(tuple(out))

    @classmethod
    def from_arrays(cls, target_scores, nontarget_scores) -> "ScoreSet":
        """Build a labeled score set from raw score arrays (synthetic ids)."""
        entries = [
            ScoreEntry(f"t{i}", f"t{i}_u", float(s), "target")
            for i, s in enumerate(np.asarray(target_scores, dtype=np.float64))
        ]
        entries += [
            ScoreEntry(f"n{i}", f"n{i}_u", float(s), "nontarget")
            for i, s in enumerate(np.asarray(nontarget_scores, dtype=np.float64))
        ]
        return cls(tuple(entries))


def _check_id(token: str, what: str) -> str:
    if not token or any(c.isspace() for c in token):
        raise ValueError(f"{what} {token!r} must be non-empty and contain no whitespace")
    return token


def _format_coord(value: float) -> str:
    # positional notation, up to 9 significant digits, never scientific
    return np.format_float_positional(
        value, precision=9, unique=True, fractional=False, trim="-"
    )


def load_embeddings(path, format: str = "text") -> Corpus:
    """Load a corpus from a text or binary embedding file."""
    path = Path(path)
    if format == "text":
        records = _load_text(path)
    elif format == "binary":
        records = _load_binary(path)
    else:
        raise ValueError(f"unknown embedding format {format!r}")
    if not records:
        raise ValueError(f"{path}: empty corpus")
    return Corpus(name=path.stem, records=tuple(records))


def _load_text(path: Path) -> list[Embedding]:
    records = []
    dim = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            fields = stripped.split()
            if len(fields) < 4:
                raise ValueError(
                    f"{path}:{lineno}: expected 'utt spk gender v1 ...', got {len(fields)} fields"
                )
            utt_id, spk_id, gender = fields[0], fields[1], fields[2]
            if gender not in GENDERS:
                raise ValueError(f"{path}:{lineno}: gender must be F or M, got {gender!r}")
            try:
                vector = [float(tok) for tok in fields[3:]]
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad coordinate: {exc}") from None
            if dim is None:
                dim = len(vector)
            elif len(vector) != dim:
                raise ValueError(
                    f"{path}:{lineno}: dimension mismatch, expected {dim} coordinates, "
                    f"got {len(vector)}"
                )
            try:
                records.append(Embedding(utt_id, spk_id, gender, vector))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return records


def _load_binary(path: Path) -> list[Embedding]:
    blob = Path(path).read_bytes()
    if len(blob) < 12 or blob[:4] != _BINARY_MAGIC:
        raise ValueError(f"{path}: not a binary embedding file (bad magic)")
    dim, count = struct.unpack_from("<II", blob, 4)
    offset = 12
    records = []
    try:
        for i in range(count):
            (id_len,) = struct.unpack_from("<H", blob, offset)
            offset += 2
            utt_id = blob[offset : offset + id_len].decode("utf-8")
            offset += id_len
            (spk_len,) = struct.unpack_from("<H", blob, offset)
            offset += 2
            spk_id = blob[offset : offset + spk_len].decode("utf-8")
            offset += spk_len
            (gender_code,) = struct.unpack_from("<B", blob, offset)
            offset += 1
            if gender_code not in (0, 1):
                raise ValueError(f"record {i}: bad gender byte {gender_code}")
            vector = np.frombuffer(blob, dtype="<f8", count=dim, offset=offset)
            if vector.size != dim:
                raise ValueError(f"record {i}: truncated vector")
            offset += 8 * dim
            records.append(Embedding(utt_id, spk_id, GENDERS[gender_code], vector))
    except (struct.error, UnicodeDecodeError) as exc:
        raise ValueError(f"{path}: truncated or corrupt record {len(records)}: {exc}") from None
    if offset != len(blob):
        raise ValueError(f"{path}: {len(blob) - offset} trailing bytes after {count} records")
    return records


def save_embeddings(corpus: Corpus, path, format: str = "text") -> None:
    """Write a corpus; binary round-trips bit exactly, text to 9 significant digits."""
    if len(corpus) == 0:
        raise ValueError("cannot save an empty corpus")
    path = Path(path)
    if format == "text":
        lines = []
        for rec in corpus.records:
            _check_id(rec.utt_id, "utt_id")
            _check_id(rec.spk_id, "spk_id")
            coords = " ".join(_format_coord(v) for v in rec.vector)
            lines.append(f"{rec.utt_id} {rec.spk_id} {rec.gender} {coords}\n")
        path.write_text("".join(lines), encoding="utf-8")
    elif format == "binary":
        parts = [_BINARY_MAGIC, struct.pack("<II", corpus.dim, len(corpus))]
        for rec in corpus.records:
            utt = rec.utt_id.encode("utf-8")
            spk = rec.spk_id.encode("utf-8")
            if len(utt) > 0xFFFF or len(spk) > 0xFFFF:
                raise ValueError(f"id too long for binary format: {rec.utt_id!r}")
            parts.append(struct.pack("<H", len(utt)))
            parts.append(utt)
            parts.append(struct.pack("<H", len(spk)))
            parts.append(spk)
            parts.append(struct.pack("<B", GENDERS.index(rec.gender)))
            parts.append(np.ascontiguousarray(rec.vector, dtype="<f8").tobytes())
        path.write_bytes(b"".join(parts))
    else:
        raise ValueError(f"unknown embedding format {format!r}")


@dataclass(frozen=True)
class TrialPolicy:
    """Rules for trial generation.

    Impostor pairs are same-gender unless ``same_gender_only`` is off.
    ``max_nontargets`` caps the impostor count by seeded subsampling of the
    exhaustive candidate list; ``None`` keeps all candidates.
    """

    same_gender_only: bool = True
    max_nontargets: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.max_nontargets is not None and self.max_nontargets < 0:
            raise ValueError("max_nontargets must be non-negative")


def make_trials(enroll: Corpus, trial: Corpus, policy: TrialPolicy | None = None) -> TrialList:
    """Enumerate target and impostor trials between two corpora.

    Targets pair each enrollment speaker with every trial utterance of the
    same speaker, excluding utterances that also appear in that speaker's
    enrollment set. Impostors pair enrollment speakers with other speakers'
    trial utterances per the policy.
    """
    policy = policy or TrialPolicy()
    if len(enroll) == 0 or len(trial) == 0:
        raise ValueError("enrollment and trial corpora must be non-empty")
    if enroll.dim != trial.dim:
        raise ValueError(
            f"dimension mismatch: enrollment D={enroll.dim}, trial D={trial.dim}"
        )

    enroll_groups = enroll.by_speaker()
    enroll_gender = enroll.speaker_gender()
    trial_records = sorted(trial.records, key=lambda r: r.utt_id)
    speakers = sorted(enroll_groups)

    entries: list[TrialEntry] = []
    for spk in speakers:
        own_utts = {r.utt_id for r in enroll_groups[spk]}
        targets = [
            r.utt_id
            for r in trial_records
            if r.spk_id == spk and r.utt_id not in own_utts
        ]
        if not targets:
            warnings.warn(f"enrollment speaker {spk!r} has no trial utterances")
        entries.extend(TrialEntry(spk, utt, "target") for utt in targets)

    candidates = []
    for spk in speakers:
        gender = enroll_gender[spk]
        for rec in trial_records:
            if rec.spk_id == spk:
                continue
            if policy.same_gender_only and rec.gender != gender:
                continue
            candidates.append(TrialEntry(spk, rec.utt_id, "nontarget"))
    if policy.max_nontargets is not None and policy.max_nontargets < len(candidates):
        rng = np.random.default_rng(policy.seed)
        keep = rng.choice(len(candidates), size=policy.max_nontargets, replace=False)
        candidates = [candidates[i] for i in sorted(keep)]
    entries.extend(candidates)
    return TrialList(tuple(entries))


def save_trials(trials: TrialList, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in trials.entries:
            _check_id(e.enroll_spk, "enroll_spk")
            _check_id(e.test_utt, "test_utt")
            fh.write(f"{e.enroll_spk} {e.test_utt} {e.label}\n")


def load_trials(path) -> TrialList:
    path = Path(path)
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            fields = stripped.split()
            if len(fields) != 3:
                raise ValueError(f"{path}:{lineno}: expected 'spk utt label'")
            if fields[2] not in LABELS:
                raise ValueError(f"{path}:{lineno}: bad label {fields[2]!r}")
            entries.append(TrialEntry(*fields))
    if not entries:
        raise ValueError(f"{path}: empty trial list")
    return TrialList(tuple(entries))


def save_scores(scores: ScoreSet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in scores.entries:
            _check_id(e.enroll_spk, "enroll_spk")
            _check_id(e.test_utt, "test_utt")
            fh.write(f"{e.enroll_spk} {e.test_utt} {e.score:.6f}\n")


def load_scores(path) -> ScoreSet:
    path = Path(path)
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            fields = stripped.split()
            if len(fields) != 3:
                raise ValueError(f"{path}:{lineno}: expected 'spk utt score'")
            try:
                score = float(fields[2])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bad score {fields[2]!r}") from None
            entries.append(ScoreEntry(fields[0], fields[1], score))
    if not entries:
        raise ValueError(f"{path}: empty score file")
    return ScoreSet(tuple(entries))
