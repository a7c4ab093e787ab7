"""Reader and writer for the numbered 21-line question file format.

Each example is 22 lines: lines ``1 ...`` through ``20 ...`` hold one
context sentence each (tokens space-separated), line 21 holds the gapped
question, a tab, the answer, two tabs, and the ``|``-separated candidate
list, and a blank line closes the example.  Files are UTF-8 with LF line
endings.  Reading tolerates trailing whitespace on a line; writing never
produces any.
"""

from __future__ import annotations

from pathlib import Path

from . import ClozereaderError
from .clozegen import ClozeExample, N_CANDIDATES
from .tagger import WordType

N_CONTEXT_LINES = 20
CANDIDATE_SEP = "|"


class CbtFormatError(ClozereaderError):
    """A structural violation in a question file, with its line number."""


def example_lines(example: ClozeExample) -> list[str]:
    """The 22 lines (last one blank) encoding one example."""
    lines = []
    for i, sentence in enumerate(example.context, start=1):
        lines.append(f"{i} {' '.join(sentence)}")
    question = " ".join(example.question)
    candidates = CANDIDATE_SEP.join(example.candidates)
    lines.append(f"{N_CONTEXT_LINES + 1} {question}\t{example.answer}\t\t{candidates}")
    lines.append("")
    return lines


def write_examples(examples: list[ClozeExample], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for example in examples:
            fh.write("\n".join(example_lines(example)))
            fh.write("\n")


def read_examples(path: str | Path, word_type: WordType | None = None) -> list[ClozeExample]:
    """Parse a question file, raising on the first violation."""
    collected: list[ClozeExample] = []
    for item in _parse(Path(path), strict=True):
        if isinstance(item, ClozeExample):
            item.word_type = word_type
            collected.append(item)
    return collected


def validate_file(path: str | Path) -> list[str]:
    """Collect every violation in the file instead of stopping at the
    first.  An empty list means the file is clean."""
    violations: list[str] = []
    for item in _parse(Path(path), strict=False):
        if isinstance(item, str):
            violations.append(item)
    return violations


def _parse(path: Path, strict: bool):
    """Yield ClozeExample objects and (when not strict) violation strings.

    When strict, the first violation raises CbtFormatError instead.
    """
    stem = path.stem
    text = path.read_text("utf-8")
    lines = text.splitlines()

    def problem(lineno: int, message: str):
        full = f"{path.name}:{lineno}: {message}"
        if strict:
            raise CbtFormatError(full)
        return full

    block: list[tuple[int, str]] = []
    ordinal = 0

    def flush():
        nonlocal ordinal
        if not block:
            return None
        result = _parse_block(block, stem, ordinal, problem)
        block.clear()
        ordinal += 1
        return result

    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip()
        if not line:
            item = flush()
            if item is not None:
                yield item
            continue
        block.append((lineno, line))
    item = flush()
    if item is not None:
        yield item


def _parse_block(block, stem, ordinal, problem):
    if len(block) != N_CONTEXT_LINES + 1:
        return problem(
            block[0][0],
            f"example has {len(block)} lines, expected {N_CONTEXT_LINES + 1}",
        )

    context: list[list[str]] = []
    for expected, (lineno, line) in zip(range(1, N_CONTEXT_LINES + 1), block):
        number, _, rest = line.partition(" ")
        if number != str(expected):
            return problem(lineno, f"expected line number {expected}, got {number!r}")
        tokens = rest.split()
        if not tokens:
            return problem(lineno, "empty context sentence")
        context.append(tokens)

    lineno, line = block[N_CONTEXT_LINES]
    number, _, rest = line.partition(" ")
    if number != str(N_CONTEXT_LINES + 1):
        return problem(
            lineno, f"expected line number {N_CONTEXT_LINES + 1}, got {number!r}"
        )
    fields = rest.split("\t")
    if len(fields) != 4 or fields[2] != "":
        return problem(
            lineno,
            "question line must be question<TAB>answer<TAB><TAB>candidates",
        )
    question_text, answer, _, candidate_text = fields
    question = question_text.split()
    if not question:
        return problem(lineno, "empty question")
    if not answer or len(answer.split()) != 1:
        return problem(lineno, f"answer must be a single token, got {answer!r}")
    candidates = candidate_text.split(CANDIDATE_SEP)
    if len(candidates) != N_CANDIDATES or any(not c for c in candidates):
        return problem(
            lineno,
            f"expected {N_CANDIDATES} non-empty candidates, got {candidate_text!r}",
        )
    if answer not in candidates:
        return problem(lineno, f"answer {answer!r} not among candidates")

    return ClozeExample(
        context=context,
        question=question,
        answer=answer,
        candidates=candidates,
        word_type=None,
        source=(stem, ordinal),
    )
