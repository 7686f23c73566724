import pytest

from exrank.corpus import AspectLabel, Polarity, Sample, Task
from exrank.template import (
    Candidate,
    atsc_input,
    candidate_text,
    definition_for,
    load_templates,
    make_candidate,
    query_text,
    render,
    task_input,
)


def test_zero_example_prompt():
    out = render("D", [], "t", 0)
    assert "D" in out and "t" in out
    assert "Example" not in out
    assert out.endswith("Output:")


def test_single_example_positions():
    ex = Candidate(id=0, input="The food was good.", output="food: positive")
    out = render("Extract pairs.", [ex], "The staff was rude.", 1)
    assert "Input: The food was good. Output: food: positive" in out
    assert out.index("The food was good.") < out.index("The staff was rude.")


def test_example_blocks_ordered():
    exs = [Candidate(id=i, input=f"x{i}", output=f"y{i}") for i in range(2)]
    out = render("D", exs, "q", 2)
    assert out.index("Example 1-") < out.index("Example 2-")
    assert out.index("x0") < out.index("x1")


def test_render_k_bounds():
    ex = Candidate(id=0, input="a", output="b")
    with pytest.raises(ValueError):
        render("D", [ex], "q", 2)
    with pytest.raises(ValueError):
        render("D", [ex], "q", -1)


def test_render_uses_first_k():
    exs = [Candidate(id=i, input=f"x{i}", output=f"y{i}") for i in range(3)]
    out = render("D", exs, "q", 1)
    assert "x0" in out and "x1" not in out


def test_atsc_input_splice():
    assert (
        atsc_input("Serves really good sushi.", "sushi")
        == "Serves really good sushi. The aspect is sushi."
    )


def test_atsc_input_empty_review():
    assert atsc_input("", "a") == " The aspect is a."


def test_atsc_input_requires_aspect():
    with pytest.raises(ValueError):
        atsc_input("x", "")


def test_atsc_splice_lands_in_input_slot():
    spliced = atsc_input("Nice spot.", "decor")
    out = render("D", [], spliced, 0)
    assert f"Input: {spliced} Output:" in out


def test_candidate_text():
    assert candidate_text(Candidate(id=0, input="a", output="b")) == "Input: a Output: b"


def test_query_text_has_no_output_clause():
    out = query_text("a")
    assert out == "Input: a"
    assert "Output" not in out


def test_identical_content_renders_identically():
    a = Candidate(id=1, input="x", output="y")
    b = Candidate(id=2, input="x", output="y")
    assert candidate_text(a) == candidate_text(b)


def test_make_candidate_aspe():
    s = Sample(id=3, text="The food was good .",
               labels=[AspectLabel("food", Polarity.POSITIVE)])
    c = make_candidate(s, Task.ASPE)
    assert c.id == 3
    assert c.input == "The food was good ."
    assert c.output == "food: positive"


def test_task_input_atsc():
    s = Sample(id=0, text="Nice.", labels=[AspectLabel("food", Polarity.POSITIVE)],
               aspect="food")
    assert task_input(s, Task.ATSC) == "Nice. The aspect is food."
    assert task_input(s, Task.ASPE) == "Nice."


def test_definitions_distinct_per_task():
    defs = {t: definition_for(t) for t in Task}
    assert len(set(defs.values())) == 3


def test_template_dir_override(tmp_path):
    for t in Task:
        (tmp_path / f"def_{t.value}.txt").write_text(f"CUSTOM {t.value}")
    (tmp_path / "example_block.txt").write_text("EX{index} IN={input} OUT={output}")
    (tmp_path / "target_block.txt").write_text("TARGET={input}")
    ts = load_templates(tmp_path)
    out = render(definition_for(Task.ASPE, ts),
                 [Candidate(id=0, input="a", output="b")], "q", 1, templates=ts)
    assert "Definition: CUSTOM aspe" in out
    assert "EX1 IN=a OUT=b" in out
    assert "TARGET=q" in out
