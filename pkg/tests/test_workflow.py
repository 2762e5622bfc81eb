import json
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from conftest import MB, chain_template, rule
from tierscope.errors import InvalidTemplate, ScaleOverflow, SpecFormatError, UnknownRuleKind, UnknownTemplate
from tierscope.workflow import (
    RULE_KINDS,
    SINK,
    SOURCE,
    ScalingRule,
    Stage,
    TemplateEdge,
    builtin_template,
    load_template,
    loads_template,
    project,
    template_to_dict,
    validate,
)


def test_linear_rule_scales_volume_and_keeps_access_size():
    t = chain_template([10 * MB, 10 * MB])
    e = project(t, data_scale=4).edges[0].props
    assert e.volume == 40 * MB
    assert e.access_size == 1 * MB
    assert e.access_count == 40


@pytest.mark.parametrize("kind", RULE_KINDS)
def test_identity_scale_returns_base_values(kind):
    t = chain_template([10 * MB + 7, 3 * MB], kind=kind)
    for te, pe in zip(t.edges, project(t, 1, 1).edges):
        assert pe.props.volume == te.rule.base_volume
        assert pe.props.access_size == te.rule.base_access_size
        assert pe.props.access_count == te.rule.base_access_count


def test_inverse_rule_divides_by_task_scale():
    t = chain_template([12 * MB, 1 * MB], kind="volume_inverse_in_task_scale")
    assert project(t, task_scale=3).edges[0].props.volume == 4 * MB


def test_fixed_access_size_rule_grows_with_both_scales():
    t = chain_template([8 * MB, 1 * MB], kind="access_size_fixed_volume_linear")
    p = project(t, data_scale=2, task_scale=3).edges[0].props
    assert p.volume == 48 * MB and p.access_size == 1 * MB


def test_constant_rule_ignores_scale():
    t = chain_template([5 * MB, 1 * MB], kind="constant")
    assert project(t, Fraction(7, 2), 9).edges[0].props.volume == 5 * MB


def test_partial_last_access_rounds_up():
    t = chain_template([10 * MB, 1 * MB])
    p = project(t, data_scale=Fraction(1, 3)).edges[0].props
    assert p.volume == -(-10 * MB // 3)
    assert p.access_count == 4  # 3.33 MB in 1 MB accesses


def test_unknown_rule_kind():
    t = chain_template([MB, MB])
    bad = TemplateEdge(SOURCE, "A", ScalingRule("quadratic", 1, MB, MB))
    t = type(t)(t.stages, (bad,) + t.edges[1:], t.initial_data_tier, t.final_data_tier)
    with pytest.raises(UnknownRuleKind):
        project(t)


def test_scale_overflow():
    t = chain_template([2**40, MB])
    with pytest.raises(ScaleOverflow):
        project(t, data_scale=2**30)


def test_nonpositive_scale_rejected():
    t = chain_template([MB, MB])
    with pytest.raises(ValueError):
        project(t, data_scale=0)
    with pytest.raises(ValueError):
        project(t, task_scale=0)


def test_validate_clean_chain():
    assert validate(chain_template([MB, MB, MB])) == []


def test_validate_level_order():
    t = chain_template([MB, MB, MB])
    back = TemplateEdge("B", "A", rule(MB))
    t = type(t)(t.stages, t.edges + (back,), t.initial_data_tier, t.final_data_tier)
    v = validate(t)
    assert [x.message for x in v] == ["level-order violated"]
    assert "B->A" in v[0].where


def test_validate_empty_candidate_set():
    t = chain_template([MB, MB])
    t = type(t)((Stage("A", 0, ()),), t.edges, t.initial_data_tier, t.final_data_tier)
    v = validate(t)
    assert [x.message for x in v] == ["empty candidate tier set"]


def test_invalid_template_refuses_projection():
    t = chain_template([MB, MB])
    t = type(t)((Stage("A", 0, ()),), t.edges, t.initial_data_tier, t.final_data_tier)
    with pytest.raises(InvalidTemplate) as exc:
        project(t)
    assert exc.value.violations[0].code == "empty-tiers"


def test_builtin_genome5_shape():
    t = builtin_template("genome5")
    assert len(t.stages) == 5 and t.levels == 3
    names = {s.name for s in t.stages}
    assert {"individuals", "sifting", "individuals_merge", "frequency", "mutation_overlap"} == names
    merge_in = [e.src for e in t.edges if e.dst == "individuals_merge"]
    assert merge_in == ["individuals"]
    # fan-in at the merge level: both level-2 stages read from merge and sifting
    for consumer in ("frequency", "mutation_overlap"):
        assert sorted(e.src for e in t.edges if e.dst == consumer) == ["individuals_merge", "sifting"]
    assert validate(t) == []


def test_builtin_chain9_shape():
    t = builtin_template("chain9")
    assert len(t.stages) == 9 and t.levels == 9
    assert len(t.edges) == 10
    assert validate(t) == []


@pytest.mark.parametrize("k", [1, 2, 3])
def test_builtin_mlloop4_unrolled(k):
    t = builtin_template("mlloop4", iterations=k)
    assert len(t.stages) == 4 * k and t.levels == 4 * k
    assert validate(t) == []


def test_builtin_unknown():
    with pytest.raises(UnknownTemplate):
        builtin_template("montage")


def test_spec_file_round_trip(tmp_path):
    t = builtin_template("genome5")
    p = tmp_path / "wf.json"
    p.write_text(json.dumps(template_to_dict(t)))
    assert load_template(p) == t
    assert load_template("builtin:genome5") == t


def test_spec_file_rejects_unknown_keys():
    doc = template_to_dict(builtin_template("chain9"))
    doc["stages"][0]["color"] = "red"
    with pytest.raises(SpecFormatError, match="color"):
        loads_template(json.dumps(doc))


def test_spec_file_reports_line_on_syntax_error():
    with pytest.raises(SpecFormatError, match="line 2"):
        loads_template('{\n  "stages": [,]\n}')


# ---------------------------------------------------------------- properties

volumes = st.integers(min_value=1, max_value=2**34)
scales = st.fractions(min_value=Fraction(1, 64), max_value=64, max_denominator=64)


@st.composite
def templates(draw):
    n = draw(st.integers(1, 5))
    vols = draw(st.lists(volumes, min_size=n + 1, max_size=n + 1))
    kind = draw(st.sampled_from(RULE_KINDS))
    return chain_template(vols, kind=kind)


@settings(max_examples=250, deadline=None)
@given(templates(), scales, st.integers(1, 64))
def test_projection_preserves_topology(t, ds, ts):
    d = project(t, ds, ts)
    assert [(e.src, e.dst) for e in d.edges] == [(e.src, e.dst) for e in t.edges]
    assert d.stages == t.stages


@settings(max_examples=250, deadline=None)
@given(templates(), scales, st.integers(1, 64))
def test_access_count_brackets_volume(t, ds, ts):
    for e in project(t, ds, ts).edges:
        p = e.props
        assert p.volume > 0 and p.access_size > 0
        assert p.access_count * p.access_size >= p.volume > (p.access_count - 1) * p.access_size


@settings(max_examples=250, deadline=None)
@given(volumes, scales, scales)
def test_linear_rule_monotone_in_data_scale(v, a, b):
    t = chain_template([v, MB])
    lo, hi = sorted((a, b))
    assert project(t, lo).edges[0].props.volume <= project(t, hi).edges[0].props.volume


@settings(max_examples=250, deadline=None)
@given(templates())
def test_projection_round_trip_at_unit_scale(t):
    for te, pe in zip(t.edges, project(t).edges):
        assert (pe.props.access_count, pe.props.access_size, pe.props.volume) == (
            te.rule.base_access_count,
            te.rule.base_access_size,
            te.rule.base_volume,
        )
