"""Translation and elicitation prompt construction.

Prompts carry CSU surfaces only, never dictionary translations of them:
listing candidate translations makes models emit several alternatives at
once instead of picking one.
"""
from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Tuple, Union

import yaml

from .validation import check_pair, check_sentence, pair_key

PLACEHOLDER = "{sentence}"

ELICITATION_QUESTION = (
    "Please identify domain-specific terms and culturally unique vocabulary from the following sentences:"
)
REPLY_FORMAT_INSTRUCTION = (
    "Answer with exactly two labeled lists in the form "
    "\"domain: term1, term2; cultural: term1, term2\", copying each term exactly as it appears "
    "in the sentence and writing (none) for an empty list."
)
DEFAULT_ELICITATION_TEMPLATE = f"{ELICITATION_QUESTION} {PLACEHOLDER}"

_ZH_BASE = {"zh": "提供这句话的中文翻译:", "en": "提供这句话的英文翻译:"}
_ZH_FOCUS = "请保证下列词语的准确翻译:"
_EN_FOCUS = "Ensure that the following words are accurately translated:"

BUILTIN_TEMPLATES: Dict[str, Dict[str, str]] = {
    "en-zh": {"base_instruction": _ZH_BASE["zh"], "focus_header": _ZH_FOCUS},
    "zh-en": {"base_instruction": _ZH_BASE["en"], "focus_header": _ZH_FOCUS},
    "en-de": {"base_instruction": "Provide the German translation for this sentence:", "focus_header": _EN_FOCUS},
    "de-en": {"base_instruction": "Provide the English translation for this sentence:", "focus_header": _EN_FOCUS},
}

# The wording used in exploratory runs before the final templates were fixed;
# kept so those runs can be replicated.
CAREFUL_NOTE_FOCUS_HEADER = "Note: the following should be translated carefully:"


class PromptContractError(ValueError):
    """A prompt was requested with CSUs that are not in the sentence."""


@dataclass(frozen=True)
class PromptTemplateSet:
    pair: Tuple[str, str]
    base_instruction: str
    focus_header: str
    elicitation_template: str = DEFAULT_ELICITATION_TEMPLATE

    def __post_init__(self):
        object.__setattr__(self, "pair", check_pair(self.pair))
        if self.elicitation_template.count(PLACEHOLDER) != 1:
            raise ValueError(f"elicitation_template must contain {PLACEHOLDER!r} exactly once")
        if not self.base_instruction.strip() or not self.focus_header.strip():
            raise ValueError("base_instruction and focus_header must be non-empty")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pair"] = pair_key(self.pair)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "PromptTemplateSet":
        return cls(
            pair=check_pair(d["pair"]),
            base_instruction=d["base_instruction"],
            focus_header=d["focus_header"],
            elicitation_template=d.get("elicitation_template", DEFAULT_ELICITATION_TEMPLATE),
        )


@dataclass(frozen=True)
class PromptSpec:
    text: str
    sentence_id: object = None
    csu_surfaces: Tuple[str, ...] = ()
    purpose: str = "translate"

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.text.encode("utf-8")).hexdigest()


def default_templates(pair) -> PromptTemplateSet:
    key = pair_key(pair)
    if key not in BUILTIN_TEMPLATES:
        raise KeyError(f"no built-in templates for {key}; supply a template file")
    return PromptTemplateSet(pair=check_pair(key), **BUILTIN_TEMPLATES[key])


def builtin_template_sets() -> List[PromptTemplateSet]:
    return [default_templates(k) for k in BUILTIN_TEMPLATES]


def load_templates(path: Union[str, Path]) -> Dict[str, PromptTemplateSet]:
    """Read a YAML template file: a list of mappings (or one mapping) keyed like PromptTemplateSet."""
    data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, Mapping) and "templates" in data:
        data = data["templates"]
    if isinstance(data, Mapping):
        data = [data]
    sets = [PromptTemplateSet.from_dict(d) for d in data or ()]
    return {pair_key(t.pair): t for t in sets}


def dump_templates(sets: Iterable[PromptTemplateSet] = None) -> str:
    sets = builtin_template_sets() if sets is None else list(sets)
    return yaml.safe_dump({"templates": [t.to_dict() for t in sets]}, allow_unicode=True, sort_keys=False)


def build_base_prompt(sentence: str, templates: PromptTemplateSet, sentence_id=None) -> PromptSpec:
    check_sentence(sentence)
    return PromptSpec(f"{templates.base_instruction} {sentence}", sentence_id, ())


def build_enhanced_prompt(sentence: str, csus, templates: PromptTemplateSet, sentence_id=None) -> PromptSpec:
    """Base prompt followed by the focus header and the CSU surfaces.

    ``csus`` is a CsuSet or any sequence of surface strings. With no CSUs
    the result is exactly the base prompt.
    """
    check_sentence(sentence)
    surfaces = tuple(getattr(csus, "surfaces", csus) or ())
    if not surfaces:
        return build_base_prompt(sentence, templates, sentence_id)
    missing = [s for s in surfaces if s not in sentence]
    if missing:
        raise PromptContractError(f"CSU surfaces not found in the sentence: {missing}")
    text = f"{templates.base_instruction} {sentence} {templates.focus_header} {', '.join(surfaces)}"
    return PromptSpec(text, sentence_id, surfaces)


def build_elicitation_prompt(sentence: str, templates: PromptTemplateSet, sentence_id=None) -> PromptSpec:
    check_sentence(sentence)
    head, tail = templates.elicitation_template.split(PLACEHOLDER)
    text = f"{head}{sentence}{tail}\n{REPLY_FORMAT_INSTRUCTION}"
    return PromptSpec(text, sentence_id, (), purpose="elicit")
