"""End-to-end runs: baseline vs focus-anchored prompting, ablations, k sweeps."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

import yaml
from sklearn.base import BaseEstimator

from .csu import ALL_KINDS, CsuIdentifier, CsuKind, CsuSet, SentenceCsus, match_polysemous, parse_kinds
from .embeddings import load_embeddings
from .lexicon import TranslationMap, multi_translation_set, parse_lexicon
from .llm_client import BackendConfig, BackendError, LLMClient, detect_task_failure
from .metrics import Corpus, MetricReport, score_corpus
from .prompts import PromptTemplateSet, build_enhanced_prompt, default_templates, load_templates
from .semantic_filter import ClusterParams, PolysemyFilter
from .validation import check_k, check_pair, check_sentences, pair_key

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = Path(__file__).with_name("data") / "default_config.yaml"

# Reference polysemous-word counts for the MUSE dictionaries, printed next to
# our own counts by ``extract-poly``. Not expected to match exactly.
REFERENCE_POLY_COUNTS = {"en-zh": 423, "zh-en": 537, "en-de": 3727, "de-en": 2639}


@dataclass(frozen=True)
class ExperimentConfig:
    pair: Tuple[str, str]
    source_path: Optional[str] = None
    reference_path: Optional[str] = None
    lexicon_path: Optional[str] = None
    embeddings_path: Optional[str] = None
    k: Optional[int] = 8
    enabled_kinds: FrozenSet[CsuKind] = ALL_KINDS
    poly_mode: str = "filtered"
    cluster_params: ClusterParams = field(default_factory=ClusterParams)
    backend: Optional[BackendConfig] = None
    elicitation_backend: Optional[BackendConfig] = None
    templates: Optional[PromptTemplateSet] = None
    templates_path: Optional[str] = None
    output_dir: str = "runs"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "pair", check_pair(self.pair))
        object.__setattr__(self, "k", check_k(self.k))
        object.__setattr__(self, "enabled_kinds", parse_kinds(self.enabled_kinds))
        if self.poly_mode not in ("off", "simple", "filtered"):
            raise ValueError(f"poly_mode must be off, simple or filtered, got {self.poly_mode!r}")
        if self.poly_mode == "filtered" and not (self.lexicon_path and self.embeddings_path):
            raise ValueError("poly_mode=filtered needs lexicon_path and embeddings_path")
        if self.poly_mode == "simple" and not self.lexicon_path:
            raise ValueError("poly_mode=simple needs lexicon_path")
        if self.templates is None:
            object.__setattr__(self, "templates", default_templates(self.pair))

    @property
    def source_lang(self) -> str:
        return self.pair[0]

    @property
    def target_lang(self) -> str:
        return self.pair[1]

    def to_dict(self) -> dict:
        return {
            "pair": pair_key(self.pair),
            "source_path": self.source_path,
            "reference_path": self.reference_path,
            "lexicon_path": self.lexicon_path,
            "embeddings_path": self.embeddings_path,
            "k": self.k,
            "enabled_kinds": sorted(k.value for k in self.enabled_kinds),
            "poly_mode": self.poly_mode,
            "cluster": self.cluster_params.to_dict(),
            "backend": self.backend.to_dict() if self.backend else None,
            "elicitation_backend": self.elicitation_backend.to_dict() if self.elicitation_backend else None,
            "templates": self.templates.to_dict(),
            "seed": self.seed,
        }


def _resolve(base: Path, value):
    if value is None:
        return None
    p = Path(os.path.expanduser(str(value)))
    return str(p if p.is_absolute() else (base / p))


def config_from_dict(data: Mapping, base_dir=".") -> ExperimentConfig:
    base = Path(base_dir)
    d = dict(data)
    k = d.get("k", 8)
    if isinstance(k, str) and k.lower() in ("inf", "none", "max"):
        k = None
    backend = None
    if d.get("backend"):
        b = dict(d["backend"])
        b["cache_path"] = _resolve(base, b.get("cache_path"))
        backend = BackendConfig.from_dict(b)
    elicit = None
    if d.get("elicitation_backend"):
        b = dict(d["elicitation_backend"])
        b["cache_path"] = _resolve(base, b.get("cache_path"))
        elicit = BackendConfig.from_dict(b)
    pair = check_pair(d["pair"])
    templates = None
    templates_path = _resolve(base, d.get("templates_path"))
    if templates_path:
        sets = load_templates(templates_path)
        templates = sets.get(pair_key(pair))
        if templates is None:
            raise ValueError(f"{templates_path} has no templates for {pair_key(pair)}")
    return ExperimentConfig(
        pair=pair,
        source_path=_resolve(base, d.get("source_path")),
        reference_path=_resolve(base, d.get("reference_path")),
        lexicon_path=_resolve(base, d.get("lexicon_path")),
        embeddings_path=_resolve(base, d.get("embeddings_path")),
        k=k,
        enabled_kinds=d.get("enabled_kinds", [kind.value for kind in CsuKind]),
        poly_mode=d.get("poly_mode", "filtered"),
        cluster_params=ClusterParams(**d.get("cluster", {})),
        backend=backend,
        elicitation_backend=elicit,
        templates=templates,
        templates_path=templates_path,
        output_dir=_resolve(base, d.get("output_dir", "runs")),
        seed=int(d.get("seed", 0)),
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    return config_from_dict(data, base_dir=path.parent)


def file_digest(path) -> Optional[str]:
    if not path:
        return None
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# test sets

@dataclass(frozen=True)
class ParallelTestSet:
    sources: Tuple[str, ...]
    references: Tuple[str, ...]
    ids: Tuple[int, ...]

    def __len__(self) -> int:
        return len(self.sources)

    def corpus(self, hypotheses: Sequence[str], lang: str) -> Corpus:
        return Corpus(tuple(hypotheses), self.references, lang)


def _read_segments(path) -> List[str]:
    text = Path(path).read_bytes().decode("utf-8")
    lines = [ln.rstrip("\r") for ln in text.split("\n")]
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def load_parallel_testset(source_path, reference_path) -> ParallelTestSet:
    src = _read_segments(source_path)
    ref = _read_segments(reference_path)
    if len(src) != len(ref):
        raise ValueError(f"source and reference line counts differ: {len(src)} ≠ {len(ref)}")
    return ParallelTestSet(tuple(src), tuple(ref), tuple(range(len(src))))


# systems

@dataclass(frozen=True)
class SystemSpec:
    name: str
    focus: bool = True
    enabled_kinds: FrozenSet[CsuKind] = ALL_KINDS
    poly_mode: str = "filtered"


def baseline_spec() -> SystemSpec:
    return SystemSpec("baseline", focus=False, enabled_kinds=frozenset(), poly_mode="off")


def dfa_spec(config: ExperimentConfig, name: str = "dfa") -> SystemSpec:
    return SystemSpec(name, True, config.enabled_kinds, config.poly_mode)


def ablation_specs(config: ExperimentConfig) -> List[SystemSpec]:
    kinds = config.enabled_kinds
    specs = [baseline_spec(), dfa_spec(config)]
    for kind, label in ((CsuKind.POLYSEMOUS, "poly"), (CsuKind.DOMAIN, "domain"), (CsuKind.CULTURAL, "culture")):
        specs.append(SystemSpec(f"dfa-{label}", True, kinds - {kind}, config.poly_mode))
    if config.lexicon_path and config.poly_mode == "filtered":
        specs.append(SystemSpec("dfa+simple-poly", True, kinds, "simple"))
    return specs


@dataclass
class SystemResult:
    name: str
    per_sentence: List[dict]
    metrics: MetricReport
    failure_rate: float
    translation_requests: int
    external_score: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "metrics": self.metrics.to_dict(),
            "failure_rate": self.failure_rate,
            "translation_requests": self.translation_requests,
            "external_score": self.external_score,
        }


class ResourceCache:
    """Lexicon, embeddings, poly sets and clients loaded once per run."""

    def __init__(self, config: ExperimentConfig, client: Optional[LLMClient] = None,
                 elicitation_client: Optional[LLMClient] = None):
        self.config = config
        self._client = client
        self._elicitation_client = elicitation_client
        self._tmap: Optional[TranslationMap] = None
        self._poly: Dict[str, FrozenSet[str]] = {}
        self.poly_stats: Dict[str, dict] = {}

    @property
    def client(self) -> LLMClient:
        if self._client is None:
            if self.config.backend is None:
                raise ValueError("config has no backend")
            self._client = LLMClient(self.config.backend)
        return self._client

    @property
    def elicitation_client(self) -> LLMClient:
        if self._elicitation_client is None:
            if self.config.elicitation_backend is None:
                return self.client
            self._elicitation_client = LLMClient(self.config.elicitation_backend)
        return self._elicitation_client

    def translation_map(self) -> TranslationMap:
        if self._tmap is None:
            self._tmap = parse_lexicon(Path(self.config.lexicon_path), *self.config.pair)
        return self._tmap

    def poly_set(self, mode: str) -> FrozenSet[str]:
        if mode == "off" or not self.config.lexicon_path:
            return frozenset()
        if mode not in self._poly:
            tmap = self.translation_map()
            est = PolysemyFilter(mode=mode, **self.config.cluster_params.to_dict())
            if mode == "filtered":
                vocab = tmap.target_vocabulary(multi_translation_set(tmap))
                table = load_embeddings(Path(self.config.embeddings_path), vocab_filter=vocab,
                                        language=self.config.target_lang)
                est.fit(tmap, embeddings=table)
                self.poly_stats[mode] = est.extraction_.stats()
            else:
                est.fit(tmap)
                self.poly_stats[mode] = {"candidates": len(est.poly_set_), "filtered": len(est.poly_set_)}
            self._poly[mode] = est.poly_set_
        return self._poly[mode]

    def provenance(self) -> dict:
        cfg = self.config
        digests = {
            "source": file_digest(cfg.source_path),
            "reference": file_digest(cfg.reference_path),
            "lexicon": file_digest(cfg.lexicon_path) if cfg.lexicon_path else None,
            "embeddings": file_digest(cfg.embeddings_path) if cfg.embeddings_path else None,
            "templates": file_digest(cfg.templates_path) if cfg.templates_path else None,
            "cache": self.client.cache.digest() if cfg.backend else None,
        }
        if cfg.elicitation_backend:
            digests["elicitation_cache"] = self.elicitation_client.cache.digest()
        return {
            "config": cfg.to_dict(),
            "digests": digests,
            "poly_stats": {m: self.poly_stats[m] for m in sorted(self.poly_stats)},
        }


class FocusAnchoredTranslator(BaseEstimator):
    """Translate sentences, optionally naming their CSUs in the prompt.

    Parameters
    ----------
    pair : str or tuple
        Language pair such as ``"en-zh"``.
    llm : LLMClient
        Translation backend.
    k : int or None, default=8
    enabled_kinds : iterable
        CSU kinds to inject; empty gives plain base prompts.
    poly_set : iterable of str, optional
    elicitation_llm : LLMClient, optional
        Defaults to ``llm``.
    templates : PromptTemplateSet, optional
    n_workers : int, default=1
        Sentences processed concurrently; request issuance is still bounded
        by the client's concurrency limit.
    """

    def __init__(self, pair="en-zh", llm=None, k: Optional[int] = 8,
                 enabled_kinds=("polysemous", "domain", "cultural"), poly_set=None,
                 elicitation_llm=None, templates=None, n_workers: int = 1):
        self.pair = pair
        self.llm = llm
        self.k = k
        self.enabled_kinds = enabled_kinds
        self.poly_set = poly_set
        self.elicitation_llm = elicitation_llm
        self.templates = templates
        self.n_workers = n_workers

    def fit(self, X=None, y=None):
        self.pair_ = check_pair(self.pair)
        if self.llm is None:
            raise ValueError("llm backend is required")
        self.templates_ = self.templates or default_templates(self.pair_)
        self.enabled_kinds_ = parse_kinds(self.enabled_kinds)
        self.identifier_ = CsuIdentifier(
            lang=self.pair_[0], k=self.k, enabled_kinds=self.enabled_kinds_, poly_set=self.poly_set,
            llm=self.elicitation_llm or self.llm, templates=self.templates_, target_lang=self.pair_[1],
        ).fit()
        return self

    def _one(self, sid, sentence: str, csus: Optional[CsuSet]) -> dict:
        if csus is None and self.enabled_kinds_:
            csus = self.identifier_.identify(sentence, sid).assemble(self.identifier_.k_, self.enabled_kinds_)
        csus = csus or CsuSet((), self.identifier_.k_)
        prompt = build_enhanced_prompt(sentence, csus, self.templates_, sentence_id=sid)
        try:
            result = self.llm.translate(prompt, self.pair_[1])
        except BackendError as exc:
            if exc.sentence_id is None:
                exc.sentence_id = sid
            raise
        return {
            "id": sid,
            "source": sentence,
            "prompt": prompt.text,
            "csus": [r.to_dict() for r in csus.records],
            "raw": result.raw_output,
            "extracted": result.extracted,
            "failed": detect_task_failure(result.extracted, sentence, self.pair_[1]),
        }

    def translate(self, sentences: Sequence[str], ids: Optional[Sequence] = None,
                  csu_sets: Optional[Sequence[Optional[CsuSet]]] = None) -> List[dict]:
        """Per-sentence records, in input order.

        On a backend error the completed records are attached to the raised
        exception as ``partial_records`` before it propagates.
        """
        from sklearn.utils.validation import check_is_fitted

        check_is_fitted(self, "pair_")
        sentences = check_sentences(sentences)
        ids = list(range(len(sentences))) if ids is None else list(ids)
        csu_sets = [None] * len(sentences) if csu_sets is None else list(csu_sets)
        done: Dict[int, dict] = {}
        with ThreadPoolExecutor(max_workers=max(1, self.n_workers)) as pool:
            futures = [pool.submit(self._one, sid, s, c) for sid, s, c in zip(ids, sentences, csu_sets)]
            error = None
            for i, fut in enumerate(futures):
                try:
                    done[i] = fut.result()
                except BackendError as exc:
                    error = error or exc
        if error is not None:
            error.partial_records = [done[i] for i in sorted(done)]
            raise error
        return [done[i] for i in range(len(sentences))]

    def predict(self, X) -> List[str]:
        return [r["extracted"] for r in self.translate(X)]


def _identify_all(testset: ParallelTestSet, config: ExperimentConfig, res: ResourceCache,
                  kinds_needed: FrozenSet[CsuKind], poly_modes: Sequence[str]) -> Tuple[List[SentenceCsus], Dict[str, List[list]]]:
    """One elicitation pass shared by every system, plus poly matches per mode."""
    needs_elicit = bool(kinds_needed & {CsuKind.DOMAIN, CsuKind.CULTURAL})
    identifier = None
    if needs_elicit:
        identifier = CsuIdentifier(
            lang=config.source_lang, k=None, enabled_kinds={CsuKind.DOMAIN, CsuKind.CULTURAL},
            llm=res.elicitation_client, templates=config.templates, target_lang=config.target_lang,
        ).fit()

    def work(i):
        if identifier is None:
            return SentenceCsus()
        return identifier.identify(testset.sources[i], testset.ids[i])

    workers = res.elicitation_client.config.concurrency_limit if needs_elicit else 1
    with ThreadPoolExecutor(max_workers=workers) as pool:
        internal = list(pool.map(work, range(len(testset))))
    poly_by_mode = {}
    for mode in poly_modes:
        pset = res.poly_set(mode)
        poly_by_mode[mode] = [match_polysemous(s, config.source_lang, pset) if pset else [] for s in testset.sources]
    return internal, poly_by_mode


def _csu_sets_for(spec: SystemSpec, internal, poly_by_mode, k) -> List[Optional[CsuSet]]:
    if not spec.focus:
        return [CsuSet((), k) for _ in internal]
    out = []
    for i, found in enumerate(internal):
        merged = SentenceCsus(poly=poly_by_mode.get(spec.poly_mode, [[]] * len(internal))[i],
                              dom=found.dom, cul=found.cul)
        out.append(merged.assemble(k, spec.enabled_kinds))
    return out


def _run_specs(config: ExperimentConfig, specs: Sequence[SystemSpec], res: ResourceCache,
               testset: ParallelTestSet, k_values: Sequence[Optional[int]] = None) -> Dict[str, SystemResult]:
    kinds_needed = frozenset().union(*(s.enabled_kinds for s in specs if s.focus))
    modes = sorted({s.poly_mode for s in specs if s.focus and CsuKind.POLYSEMOUS in s.enabled_kinds})
    internal, poly_by_mode = _identify_all(testset, config, res, kinds_needed, modes)
    translator = FocusAnchoredTranslator(
        pair=config.pair, llm=res.client, k=config.k, enabled_kinds=(),
        templates=config.templates, n_workers=res.client.config.concurrency_limit,
    ).fit()
    results: Dict[str, SystemResult] = {}
    runs = [(spec, config.k, spec.name) for spec in specs]
    if k_values is not None:
        runs = [(specs[0], k, f"{specs[0].name}@k={'inf' if k is None else k}") for k in k_values]
    for spec, k, name in runs:
        csu_sets = _csu_sets_for(spec, internal, poly_by_mode, k)
        try:
            records = translator.translate(testset.sources, testset.ids, csu_sets)
        except BackendError as exc:
            _persist_partial(config, name, getattr(exc, "partial_records", []), testset)
            raise
        for rec in records:
            rec["reference"] = testset.references[rec["id"]]
        hyps = [r["extracted"] for r in records]
        metrics = score_corpus(testset.corpus(hyps, config.target_lang))
        failure_rate = sum(r["failed"] for r in records) / len(records)
        results[name] = SystemResult(name, records, metrics, failure_rate, len(records))
    return results


def _persist_partial(config: ExperimentConfig, name: str, records: List[dict], testset: ParallelTestSet) -> None:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"partial_{name}.jsonl"
    lines = []
    for rec in records:
        rec = dict(rec, reference=testset.references[rec["id"]])
        lines.append(json.dumps(rec, ensure_ascii=False, sort_keys=True))
    _atomic_write(path, "".join(f"{ln}\n" for ln in lines))
    logger.error("backend failure in %s; %d partial records written to %s", name, len(records), path)


@dataclass
class ExperimentReport:
    systems: Dict[str, SystemResult]
    provenance: dict
    k_sweep: Optional[List[Tuple[Optional[int], str]]] = None

    @property
    def per_system(self) -> Dict[str, dict]:
        return {name: r.to_dict() for name, r in self.systems.items()}

    @property
    def per_sentence(self) -> Dict[str, List[dict]]:
        return {name: r.per_sentence for name, r in self.systems.items()}

    def set_external_scores(self, scores: Mapping[str, float]) -> None:
        for name, value in scores.items():
            self.systems[name].external_score = float(value)

    def to_dict(self) -> dict:
        d = {
            "per_system": self.per_system,
            "per_sentence": self.per_sentence,
            "provenance": self.provenance,
        }
        if self.k_sweep is not None:
            d["k_sweep"] = [{"k": "inf" if k is None else k, "system": name} for k, name in self.k_sweep]
        return d


def _load_testset(config: ExperimentConfig) -> ParallelTestSet:
    if not (config.source_path and config.reference_path):
        raise ValueError("config needs source_path and reference_path")
    return load_parallel_testset(config.source_path, config.reference_path)


def run_system(config: ExperimentConfig, system: str = "dfa", client: Optional[LLMClient] = None,
               elicitation_client: Optional[LLMClient] = None) -> ExperimentReport:
    """Run ``baseline`` or ``dfa`` over the configured test set."""
    if system not in ("baseline", "dfa"):
        raise ValueError(f"system must be 'baseline' or 'dfa', got {system!r}")
    res = ResourceCache(config, client, elicitation_client)
    testset = _load_testset(config)
    spec = baseline_spec() if system == "baseline" else dfa_spec(config)
    systems = _run_specs(config, [spec], res, testset)
    return ExperimentReport(systems, res.provenance())


def run_ablation_suite(config: ExperimentConfig, client: Optional[LLMClient] = None,
                       elicitation_client: Optional[LLMClient] = None) -> ExperimentReport:
    """Baseline, full DFA, one row per removed CSU kind, and unfiltered polysemy."""
    res = ResourceCache(config, client, elicitation_client)
    testset = _load_testset(config)
    systems = _run_specs(config, ablation_specs(config), res, testset)
    return ExperimentReport(systems, res.provenance())


def k_sweep(config: ExperimentConfig, ks: Sequence[Optional[int]], client: Optional[LLMClient] = None,
            elicitation_client: Optional[LLMClient] = None) -> ExperimentReport:
    """The dfa system once per k (None = uncapped), sharing one identification pass."""
    ks = [check_k(k) for k in ks]
    if not ks:
        raise ValueError("ks must not be empty")
    res = ResourceCache(config, client, elicitation_client)
    testset = _load_testset(config)
    systems = _run_specs(config, [dfa_spec(config)], res, testset, k_values=ks)
    names = list(systems)
    return ExperimentReport(systems, res.provenance(), k_sweep=list(zip(ks, names)))


def k_sweep_series(report: ExperimentReport) -> List[Tuple[Optional[int], MetricReport]]:
    return [(k, report.systems[name].metrics) for k, name in (report.k_sweep or [])]


# rendering

def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.2f}"


SUMMARY_COLUMNS = ["system", "bleu", "bleu4", "chrf2", "failure_rate", "external_score"]


def summary_csv(report: ExperimentReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for name, r in report.systems.items():
        m = r.metrics
        w.writerow([name, f"{m.bleu:.4f}", f"{m.bleu4:.4f}", f"{m.chrf2:.4f}", f"{r.failure_rate:.4f}",
                    "" if r.external_score is None else f"{r.external_score:.4f}"])
    return buf.getvalue()


def summary_markdown(report: ExperimentReport) -> str:
    lines = ["| System | BLEU | BLEU4 | chrF2 | Failure rate | External |",
             "|---|---:|---:|---:|---:|---:|"]
    for name, r in report.systems.items():
        m = r.metrics
        lines.append(f"| {name} | {_fmt(m.bleu)} | {_fmt(m.bleu4)} | {_fmt(m.chrf2)} | "
                     f"{_fmt(100 * r.failure_rate)}% | {_fmt(r.external_score)} |")
    sig = next(iter(report.systems.values())).metrics.signature if report.systems else ""
    lines += ["", f"Signature: `{sig}`", ""]
    return "\n".join(lines)


def k_sweep_csv(report: ExperimentReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "bleu", "bleu4", "chrf2", "failure_rate", "external_score"])
    for k, name in report.k_sweep or []:
        r = report.systems[name]
        m = r.metrics
        w.writerow(["inf" if k is None else k, f"{m.bleu:.4f}", f"{m.bleu4:.4f}", f"{m.chrf2:.4f}",
                    f"{r.failure_rate:.4f}", "" if r.external_score is None else f"{r.external_score:.4f}"])
    return buf.getvalue()


def render_report(report: ExperimentReport, output_dir) -> List[Path]:
    """Write report.json, summary.csv, summary.md (and k_sweep.csv).

    The directory is checked for writability before anything is written;
    each file is written to a temp file and renamed into place.
    """
    out = Path(output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise PermissionError(f"cannot create output directory {out}: {exc}") from exc
    if not os.access(out, os.W_OK | os.X_OK):
        raise PermissionError(f"output directory {out} is not writable")
    files = {
        "report.json": json.dumps(report.to_dict(), ensure_ascii=False, sort_keys=True, indent=2) + "\n",
        "summary.csv": summary_csv(report),
        "summary.md": summary_markdown(report),
    }
    if report.k_sweep is not None:
        files["k_sweep.csv"] = k_sweep_csv(report)
    written = []
    for name, text in files.items():
        _atomic_write(out / name, text)
        written.append(out / name)
    return written


def replace_backend(config: ExperimentConfig, **changes) -> ExperimentConfig:
    return replace(config, backend=replace(config.backend, **changes))
