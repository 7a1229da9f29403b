import random
import re
from pathlib import Path

from hypothesis import given, strategies as st

from tmbench.instance_gen import ALPHABETS, BenchmarkInstance, GenConfig, generate_dataset
from tmbench.tag_core import run
from tmbench.transcript_io import (
    SLOTS,
    TranscriptRecord,
    format_ground_truth,
    ground_truth_records,
    iter_transcripts,
    load_template,
    parse_transcript,
    read_transcripts,
    render_prompt,
    write_transcripts,
)

DATA = Path(__file__).parent / "data"


def roman_instance(worked, max_steps=30):
    system, init = worked["roman"]
    return BenchmarkInstance("roman", system, init, max_steps, run(system, init, max_steps))


# --- prompts --------------------------------------------------------------

def test_golden_prompt(worked):
    assert render_prompt(roman_instance(worked)) == (DATA / "golden_prompt_roman.txt").read_text("utf-8")


def test_prompt_contents(worked):
    prompt = render_prompt(roman_instance(worked))
    assert "Init: [B A E E C]" in prompt
    assert "\nB : D\n" in prompt
    assert "Alphabet: {A, B, C, D, E}" in prompt
    assert "or 30 steps" in prompt
    assert prompt.count("## The Only Problem to Solve:") == 1


def test_template_differs_only_in_slots(worked):
    template = load_template()
    assert all(slot in template for slot in SLOTS)
    prompt = render_prompt(roman_instance(worked))
    # the text between slots survives verbatim and in order
    pos = 0
    for chunk in re.split("|".join(map(re.escape, SLOTS)), template):
        found = prompt.find(chunk, pos)
        assert found >= pos
        pos = found + len(chunk)


def test_brace_symbols_are_not_resubstituted():
    data = generate_dataset(GenConfig(alphabet_kind="custom", alphabet_size=2, custom_symbols=("{m}", "{RULES}"), count=1))
    prompt = render_prompt(data[0])
    assert "Alphabet: {{m}, {RULES}}" in prompt


def test_greek_prompt_is_utf8_clean():
    inst = generate_dataset(GenConfig(alphabet_kind="greek", count=1, seed=3))[0]
    prompt = render_prompt(inst)
    assert prompt.encode("utf-8").decode("utf-8") == prompt
    assert "α" in prompt and render_prompt(inst) == prompt


# --- ground truth format --------------------------------------------------

def test_ground_truth_format(worked):
    text = format_ground_truth(roman_instance(worked))
    assert text.startswith("Simulation steps:\n### step 0:\n- Action: Init\n- Queue State: [B A E E C]\n")
    assert "### step 1:\n- Head Symbol: B\n- Action: Append D to the end of the queue. Remove B A from the head.\n" in text
    assert "### step 18:" in text and "- Queue State: [D] <halt>" in text
    assert "### step 19:" not in text


def test_zero_transition_instance():
    inst = generate_dataset(GenConfig(m=3, init_len_min=1, init_len_max=2, count=1))[0]
    text = format_ground_truth(inst)
    assert text.count("### step") == 1 and "<halt>" in text


# --- parsing --------------------------------------------------------------

def test_divergent_case():
    got = parse_transcript((DATA / "divergent_case.txt").read_text("utf-8"))
    d = got.as_dict()
    assert [i for i, _ in got.steps] == [0, 1, 2, 18, 19]
    assert d[2] == tuple("CECDBB")
    assert d[19] == tuple("AEEE" * 9)
    assert got.halt_claimed_at is None


def test_no_steps():
    got = parse_transcript("I could not solve this.")
    assert got.steps == [] and "no steps found" in got.warnings


def test_tolerates_markdown_and_repeats():
    text = (
        "Sure!\n**Step 0:**\n* **Queue State:** [A, B]\n"
        "## Step 1\nQueue state: [B C]\nwait, correction\n- Queue State: [B D]  (after deletion)\n"
        "### step 1:\n- Queue State: [Z]\n"
        "### step 2:\n- Queue State: [D] <halt>\n"
    )
    got = parse_transcript(text)
    assert got.steps == [(0, ("A", "B")), (1, ("B", "D")), (2, ("D",))]
    assert got.halt_claimed_at == 2
    assert any("using the last" in w for w in got.warnings)
    assert any("repeated" in w for w in got.warnings)


def test_out_of_order_keeps_first():
    text = "### step 2:\n- Queue State: [A]\n### step 1:\n- Queue State: [B]\n"
    got = parse_transcript(text)
    assert got.steps == [(2, ("A",))]


def test_symbols_are_case_sensitive():
    got = parse_transcript("### step 1:\n- Queue State: [a B]\n")
    assert got.as_dict()[1] == ("a", "B")


@st.composite
def instances(draw):
    kind = draw(st.sampled_from(sorted(ALPHABETS)))
    cfg = GenConfig(
        m=draw(st.integers(1, 4)), alphabet_kind=kind, alphabet_size=draw(st.integers(1, 8)),
        seed=draw(st.integers(0, 2**32)), count=1, max_steps=draw(st.integers(1, 40)),
    )
    return generate_dataset(cfg)[0]


@given(instances())
def test_round_trip_property(inst):
    got = parse_transcript(format_ground_truth(inst))
    assert tuple(q for _, q in got.steps) == inst.trace.steps
    assert got.halt_claimed_at == inst.trace.halt_step


def test_round_trip_1000_instances():
    for k, kind in enumerate(sorted(ALPHABETS)):
        for inst in generate_dataset(GenConfig(alphabet_kind=kind, seed=100 + k, count=250)):
            got = parse_transcript(format_ground_truth(inst))
            assert [i for i, _ in got.steps] == list(range(len(inst.trace.steps)))
            assert tuple(q for _, q in got.steps) == inst.trace.steps
            assert got.halt_claimed_at == inst.trace.halt_step


@given(st.text())
def test_parser_is_total_on_text(text):
    got = parse_transcript(text)
    indices = [i for i, _ in got.steps]
    assert indices == sorted(set(indices))


def test_parser_is_total_on_random_bytes():
    rng = random.Random(0)
    pieces = ["### step ", "Queue State: [", "]", "<halt>", "\n", " ", "A", "7", "step", "[", ","]
    for n in range(10_000):
        if n % 2:
            raw = bytes(rng.randrange(256) for _ in range(rng.randrange(200)))
            text = raw.decode("utf-8", errors="replace")
        else:
            text = "".join(rng.choice(pieces) for _ in range(rng.randrange(40)))
        parse_transcript(text)


# --- transcript files -----------------------------------------------------

def test_transcript_file_round_trip(tmp_path):
    data = generate_dataset(GenConfig(count=5, seed=2))
    records = ground_truth_records(reversed(data))
    records.append(TranscriptRecord("tm-2-99999", "m", "p", None, error="http: HTTP 500", attempts=4))
    path = tmp_path / "t.jsonl"
    write_transcripts(path, records)
    back = list(iter_transcripts(path))
    assert [r.id for r in back] == sorted(r.id for r in records)
    assert {r.id: r for r in back} == {r.id: r for r in records}
    assert not (tmp_path / "t.jsonl.tmp").exists()


def test_torn_last_line_is_skipped(tmp_path):
    data = generate_dataset(GenConfig(count=2, seed=2))
    path = tmp_path / "t.jsonl"
    write_transcripts(path, ground_truth_records(data))
    with open(path, "a", encoding="utf-8") as fh:
        fh.write('{"id": "tm-2-0000')
    assert list(read_transcripts(path)) == [d.id for d in data]
