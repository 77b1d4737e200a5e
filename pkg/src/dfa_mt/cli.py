"""Command line entry point: ``dfa-mt <subcommand>``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import experiment as exp
from .csu import CsuIdentifier
from .embeddings import load_embeddings
from .llm_client import BackendError
from .lexicon import multi_translation_set, parse_lexicon
from .metrics import Corpus, score_corpus
from .prompts import builtin_template_sets, dump_templates, load_templates
from .semantic_filter import ClusterParams, build_polysemous_csu_set, write_csu_set
from .validation import check_pair, pair_key


def _parse_k(value: str):
    if value.lower() in ("inf", "none", "max"):
        return None
    return int(value)


def _add_config(p):
    p.add_argument("--config", "-c", required=True, help="experiment YAML file")
    p.add_argument("--output-dir", "-o", help="override output_dir from the config")


def _config(args):
    cfg = exp.load_config(args.config)
    if getattr(args, "output_dir", None):
        from dataclasses import replace
        cfg = replace(cfg, output_dir=args.output_dir)
    return cfg


def cmd_extract_poly(args) -> int:
    src, tgt = check_pair(args.pair)
    tmap = parse_lexicon(Path(args.lexicon), src, tgt)
    candidates = multi_translation_set(tmap)
    params = ClusterParams(args.threshold, args.linkage, args.min_embedded)
    table = load_embeddings(Path(args.embeddings), vocab_filter=tmap.target_vocabulary(candidates), language=tgt)
    extraction = build_polysemous_csu_set(tmap, table, params)
    provenance = {
        "pair": pair_key((src, tgt)),
        "lexicon": str(args.lexicon),
        "lexicon_sha256": exp.file_digest(args.lexicon),
        "embeddings": str(args.embeddings),
        "embeddings_sha256": exp.file_digest(args.embeddings),
        "lexicon_skipped_lines": tmap.skipped_lines,
        "embedding_dim": table.dim,
        "embedding_zero_dropped": table.zero_dropped,
        "reference_count": exp.REFERENCE_POLY_COUNTS.get(pair_key((src, tgt))),
    }
    words_path, stats_path = write_csu_set(extraction, args.out, provenance)
    ref = provenance["reference_count"]
    print(f"{pair_key((src, tgt))}: candidates={extraction.candidates} filtered={extraction.filtered} "
          f"oov_dropped={extraction.oov_dropped} reference={ref if ref is not None else '-'}")
    print(f"wrote {words_path} and {stats_path}")
    return 0


def cmd_identify(args) -> int:
    cfg = _config(args)
    res = exp.ResourceCache(cfg)
    k = cfg.k if args.k is None else _parse_k(args.k)
    poly = res.poly_set(cfg.poly_mode)
    needs_llm = any(kind.value in ("domain", "cultural") for kind in cfg.enabled_kinds)
    ident = CsuIdentifier(lang=cfg.source_lang, k=k, enabled_kinds=cfg.enabled_kinds, poly_set=poly,
                          llm=res.elicitation_client if needs_llm else None, templates=cfg.templates,
                          target_lang=cfg.target_lang).fit()
    sentences = exp._read_segments(args.input)
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for sid, sentence in enumerate(sentences):
            if not sentence.strip():
                continue
            csus = ident.identify(sentence, sid).assemble(k, cfg.enabled_kinds)
            out.write(csus.to_json(sid) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _finish(report, cfg, args) -> int:
    if getattr(args, "external", None):
        report.set_external_scores(dict(_parse_external(x) for x in args.external))
    for path in exp.render_report(report, cfg.output_dir):
        print(f"wrote {path}")
    print(exp.summary_markdown(report))
    return 0


def _parse_external(item: str):
    name, _, value = item.partition("=")
    return name, float(value)


def cmd_translate(args) -> int:
    cfg = _config(args)
    return _finish(exp.run_system(cfg, args.system), cfg, args)


def cmd_ablate(args) -> int:
    cfg = _config(args)
    return _finish(exp.run_ablation_suite(cfg), cfg, args)


def cmd_k_sweep(args) -> int:
    cfg = _config(args)
    ks = [_parse_k(x) for x in args.ks.split(",") if x.strip()]
    return _finish(exp.k_sweep(cfg, ks), cfg, args)


def cmd_score(args) -> int:
    hyps = exp._read_segments(args.hyp)
    refs = exp._read_segments(args.ref)
    report = score_corpus(Corpus(hyps, refs, args.lang))
    d = report.to_dict()
    if args.external is not None:
        d["external_score"] = args.external
    print(json.dumps(d, ensure_ascii=False, indent=2, sort_keys=True))
    return 0


def cmd_dump_templates(args) -> int:
    sets = builtin_template_sets() if not args.templates else list(load_templates(args.templates).values())
    text = dump_templates(sets)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dfa-mt", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract-poly", help="lexicon + embeddings -> polysemous word list")
    p.add_argument("--lexicon", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--pair", required=True, help="e.g. en-zh")
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--linkage", choices=["average", "complete"], default="average")
    p.add_argument("--min-embedded", type=int, default=2)
    p.set_defaults(func=cmd_extract_poly)

    p = sub.add_parser("identify", help="sentences -> CSU JSON Lines")
    _add_config(p)
    p.add_argument("--input", "-i", required=True, help="one sentence per line")
    p.add_argument("--out")
    p.add_argument("--k", help="override k ('inf' for no cap)")
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("translate", help="run one system")
    _add_config(p)
    p.add_argument("--system", choices=["baseline", "dfa"], default="dfa")
    p.add_argument("--external", action="append", metavar="SYSTEM=SCORE")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("ablate", help="baseline, dfa and ablation rows")
    _add_config(p)
    p.add_argument("--external", action="append", metavar="SYSTEM=SCORE")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("k-sweep", help="dfa once per k")
    _add_config(p)
    p.add_argument("--ks", default="1,2,4,8,16,inf")
    p.add_argument("--external", action="append", metavar="SYSTEM=SCORE")
    p.set_defaults(func=cmd_k_sweep)

    p = sub.add_parser("score", help="BLEU / BLEU4 / chrF2 for existing outputs")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--lang", required=True, help="target language")
    p.add_argument("--external", type=float, help="score from an outside metric, copied into the output")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("dump-templates", help="print prompt templates as YAML")
    p.add_argument("--templates", help="template file to show instead of the built-ins")
    p.add_argument("--out")
    p.set_defaults(func=cmd_dump_templates)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError, BackendError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
