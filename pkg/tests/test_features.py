import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xcalib.features import (
    BowMode,
    Family,
    aggregate_attributions,
    assemble,
    bow_property_features,
    clsprob_features,
    kamath_features,
)
from xcalib.properties import annotate, default_scheme, property_space
from xcalib.types import Attribution, ExplainerKind, Task

from helpers import nli_instance, qa_instance


def lime_attr(phis, phi0=0.0):
    return Attribution(phi0=phi0, phis=tuple(phis), explainer=ExplainerKind.LIME, config_digest="t")


def shap_attr(phis, phi0=0.0):
    return Attribution(phi0=phi0, phis=tuple(phis), explainer=ExplainerKind.SHAP, config_digest="t")


@pytest.fixture
def qa_inst():
    # question: Obama(NNP); context: won(VB) x y; predicted span = (2, 3)
    return qa_instance(
        ["Obama"], ["won", "x", "y"], span=(2, 3), tags=["NNP", "VB", "NN", "NN"]
    )


class TestAggregation:
    def test_direct_sum(self, qa_inst):
        scheme = default_scheme(Task.QA)
        props = annotate(qa_inst, scheme)
        space = property_space(scheme)
        agg = aggregate_attributions(lime_attr([0.5, -0.2, 0.3, 0.1]), props, space)
        assert agg["Question|NNP"] == pytest.approx(0.5)
        assert agg["Context|VB"] == pytest.approx(-0.2)
        assert agg["Answer|NN"] == pytest.approx(0.3)
        assert agg["Context|NNP"] == 0.0

    def test_zero_attributions(self, qa_inst):
        scheme = default_scheme(Task.QA)
        agg = aggregate_attributions(
            lime_attr([0.0] * 4), annotate(qa_inst, scheme), property_space(scheme)
        )
        assert all(v == 0.0 for v in agg.values())

    def test_segment_partition_identity(self, qa_inst):
        scheme = default_scheme(Task.QA)
        rng = np.random.default_rng(0)
        phis = rng.normal(size=4)
        agg = aggregate_attributions(lime_attr(phis), annotate(qa_inst, scheme), property_space(scheme))
        segment_sum = agg["Question"] + agg["Context"] + agg["Answer"]
        assert segment_sum == pytest.approx(phis.sum(), abs=1e-12)

    def test_length_mismatch(self, qa_inst):
        scheme = default_scheme(Task.QA)
        with pytest.raises(ValueError):
            aggregate_attributions(
                lime_attr([0.1]), annotate(qa_inst, scheme), property_space(scheme)
            )

    @settings(max_examples=30)
    @given(
        st.lists(st.floats(-5, 5), min_size=4, max_size=4),
        st.lists(st.floats(-5, 5), min_size=4, max_size=4),
        st.floats(-3, 3),
        st.floats(-3, 3),
    )
    def test_linearity(self, phi, psi, a, b):
        inst = qa_instance(["Obama"], ["won", "x", "y"], span=(2, 3),
                           tags=["NNP", "VB", "NN", "NN"])
        scheme = default_scheme(Task.QA)
        props = annotate(inst, scheme)
        space = property_space(scheme)
        combo = [a * p + b * q for p, q in zip(phi, psi)]
        left = aggregate_attributions(lime_attr(combo), props, space)
        agg_p = aggregate_attributions(lime_attr(phi), props, space)
        agg_q = aggregate_attributions(lime_attr(psi), props, space)
        for key in space:
            assert abs(left[key] - (a * agg_p[key] + b * agg_q[key])) < 1e-9


class TestBaseFeatures:
    def test_kamath_values(self):
        inst = qa_instance(
            ["who"], ["c"] * 120, span=(50, 53),
            top_probs=(("1", 0.6), ("2", 0.2), ("3", 0.1), ("4", 0.05), ("5", 0.05)),
        )
        feats = kamath_features(inst)
        assert list(feats.values()) == [0.6, 0.2, 0.1, 0.05, 0.05, 120.0, 3.0]

    def test_kamath_padding(self):
        inst = qa_instance(["who"], ["a", "b"], span=(1, 2), top_probs=(("1", 0.9), ("2", 0.1)))
        feats = kamath_features(inst)
        assert list(feats.values())[:5] == [0.9, 0.1, 0.0, 0.0, 0.0]

    def test_kamath_count_is_7(self):
        inst = qa_instance(["who"], ["a", "b"], span=(1, 2))
        assert len(kamath_features(inst)) == 7

    def test_kamath_rejects_nli(self):
        with pytest.raises(ValueError):
            kamath_features(nli_instance(["a"], ["b"]))

    def test_clsprob_values(self):
        inst = nli_instance(["a"], ["b"])
        assert list(clsprob_features(inst).values()) == [0.7, 0.2]

    def test_clsprob_degenerate_distribution(self):
        inst = nli_instance(["a"], ["b"], dist=(("entailment", 1.0), ("contradiction", 0.0), ("neutral", 0.0)))
        assert list(clsprob_features(inst).values()) == [1.0, 0.0]

    def test_clsprob_missing_distribution(self):
        inst = nli_instance(["a"], ["b"], dist=(("entailment", 1.0),))
        with pytest.raises(ValueError):
            clsprob_features(inst)

    def test_clsprob_count_is_2(self):
        assert len(clsprob_features(nli_instance(["a"], ["b"]))) == 2


class TestBowFeatures:
    def test_counts(self):
        inst = qa_instance(["Obama", "Biden", "Harris"], ["won", "x"], span=(4, 5),
                           tags=["NNP", "NNP", "NNP", "VB", "NN"])
        scheme = default_scheme(Task.QA)
        bow = bow_property_features(annotate(inst, scheme), property_space(scheme))
        assert bow["Question|NNP"] == 3.0
        assert bow["Context|NNP"] == 0.0

    def test_binary_mode(self):
        inst = qa_instance(["Obama", "Biden"], ["x"], span=(2, 3), tags=["NNP", "NNP", "NN"])
        scheme = default_scheme(Task.QA)
        bow = bow_property_features(annotate(inst, scheme), property_space(scheme), mode=BowMode.BINARY)
        assert bow["Question|NNP"] == 1.0


class TestAssemble:
    def test_qa_family_widths(self, qa_inst):
        scheme = default_scheme(Task.QA)
        attr = lime_attr([0.1, 0.2, 0.3, 0.4])
        assert len(assemble(qa_inst, scheme, Family.KAMATH)) == 7
        assert len(assemble(qa_inst, scheme, Family.BOW_PROP)) == 85
        assert len(assemble(qa_inst, scheme, Family.LIME_CAL, attribution=attr)) == 163
        shap = shap_attr([0.1, 0.2, 0.3, 0.4])
        assert len(assemble(qa_inst, scheme, Family.SHAP_CAL, attribution=shap)) == 163

    def test_nli_family_widths(self):
        inst = nli_instance(["a", "cat"], ["the", "cat"], tags=["DT", "NN", "DT", "NN"])
        scheme = default_scheme(Task.NLI)
        attr = lime_attr([0.1, 0.2, 0.3, 0.4])
        assert len(assemble(inst, scheme, Family.CLS_PROB)) == 2
        assert len(assemble(inst, scheme, Family.BOW_PROP)) == 104
        assert len(assemble(inst, scheme, Family.LIME_CAL, attribution=attr)) == 206

    def test_bowprop_is_prefix_of_limecal(self, qa_inst):
        scheme = default_scheme(Task.QA)
        bow = assemble(qa_inst, scheme, Family.BOW_PROP)
        lime = assemble(qa_inst, scheme, Family.LIME_CAL, attribution=lime_attr([0.1, 0.2, 0.3, 0.4]))
        assert lime.names[: len(bow.names)] == bow.names
        assert np.array_equal(lime.values[: len(bow.values)], bow.values)

    def test_attr_family_requires_attribution(self, qa_inst):
        scheme = default_scheme(Task.QA)
        with pytest.raises(ValueError):
            assemble(qa_inst, scheme, Family.LIME_CAL)
        with pytest.raises(ValueError):
            assemble(qa_inst, scheme, Family.BOW_PROP, attribution=lime_attr([0.0] * 4))

    def test_explainer_family_consistency(self, qa_inst):
        scheme = default_scheme(Task.QA)
        with pytest.raises(ValueError, match="expects"):
            assemble(qa_inst, scheme, Family.SHAP_CAL, attribution=lime_attr([0.0] * 4))

    def test_maxprob_not_assemblable(self, qa_inst):
        with pytest.raises(ValueError):
            assemble(qa_inst, default_scheme(Task.QA), Family.MAX_PROB)

    def test_feature_order_stable_across_instances(self):
        scheme = default_scheme(Task.QA)
        a = qa_instance(["who"], ["x", "y"], span=(1, 2), tags=["WP", "NN", "NN"])
        b = qa_instance(["Obama", "won"], ["z", "w", "v"], span=(3, 4),
                        tags=["NNP", "VBD", "NN", "NN", "NN"])
        fa = assemble(a, scheme, Family.BOW_PROP)
        fb = assemble(b, scheme, Family.BOW_PROP)
        assert fa.names == fb.names
