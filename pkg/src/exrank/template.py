"""Instruction prompt rendering: task definition, example slots, target input.

The grammar is frozen on purpose: the scorer conditions on byte-exact prompts,
so every separator is a single space and the prompt always ends with the
"Output:" cue.
"""

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .corpus import Task, serialize_label


@dataclass(frozen=True)
class Candidate:
    """An (input, output) training pair usable as an in-context example."""

    id: int
    input: str
    output: str


@dataclass(frozen=True)
class TemplateSet:
    definitions: dict  # Task -> definition text
    example_block: str  # holds {index}/{input}/{output}
    target_block: str  # holds {input}


def _read_asset(directory, name):
    if directory is not None:
        return (Path(directory) / name).read_text(encoding="utf-8").strip()
    return resources.files("exrank.templates").joinpath(name).read_text(encoding="utf-8").strip()


def load_templates(template_dir=None):
    """Load definition and block assets; template_dir overrides the built-ins."""
    return TemplateSet(
        definitions={t: _read_asset(template_dir, f"def_{t.value}.txt") for t in Task},
        example_block=_read_asset(template_dir, "example_block.txt"),
        target_block=_read_asset(template_dir, "target_block.txt"),
    )


_DEFAULT = None


def default_templates():
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = load_templates()
    return _DEFAULT


def definition_for(task, templates=None):
    templates = templates or default_templates()
    return templates.definitions[Task(task)]


def render(definition, examples, input_text, k, templates=None):
    """Render the full instruction prompt with the first k examples."""
    if k < 0 or k > len(examples):
        raise ValueError(f"k={k} outside [0, {len(examples)}]")
    templates = templates or default_templates()
    parts = [f"Definition: {definition}"]
    for i in range(k):
        ex = examples[i]
        parts.append(
            templates.example_block.format(index=i + 1, input=ex.input, output=ex.output)
        )
    parts.append(templates.target_block.format(input=input_text))
    return " ".join(parts)


def atsc_input(text, aspect):
    """Splice the designated aspect onto the review text."""
    if not aspect:
        raise ValueError("aspect must be non-empty")
    return f"{text} The aspect is {aspect}."


def candidate_text(candidate):
    """Retriever-side rendering of a candidate pair."""
    return f"Input: {candidate.input} Output: {candidate.output}"


def query_text(input_text):
    """Retriever-side rendering of a query (no Output clause)."""
    return f"Input: {input_text}"


def task_input(sample, task):
    """The prompt-side input string for a sample under one subtask."""
    if Task(task) == Task.ATSC:
        return atsc_input(sample.text, sample.aspect)
    return sample.text


def make_candidate(sample, task):
    """Turn a training sample into an in-context example for a subtask."""
    return Candidate(
        id=sample.id,
        input=task_input(sample, task),
        output=serialize_label(sample, task),
    )
