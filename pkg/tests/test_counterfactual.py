import numpy as np
import pytest

from cfbounds.counterfactual import (
    CausalQuery,
    Intervention,
    PreparedQuery,
    QueryKind,
    build_twin,
    evaluate,
    mutilate,
)
from cfbounds.data import Dataset
from cfbounds.errors import MissingPriorError, SchemaError, UndefinedQuery
from cfbounds.oracle import backdoor_ace
from cfbounds.pgm import Variable, variable_elimination
from cfbounds.scm import scm_to_bn
from tests.conftest import make_query
from tests.goldens import DO_I_NO, DO_I_YES, SIX_QUERIES

DO_YES = Intervention("I", "yes")
DO_NO = Intervention("I", "no")


class TestMutilate:
    def test_intervened_equation_is_constant(self, scm_full):
        cut = mutilate(scm_full, DO_YES)
        eq = cut.equations["I"]
        assert eq.exo_parent is None
        assert eq.endo_parents == ()
        assert eq.mapping.shape == (1, 1)
        assert eq.evaluate(0, []) == 0

    def test_orphaned_exo_dropped_with_prior(self, scm_full):
        cut = mutilate(scm_full, DO_YES)
        assert {u.name for u in cut.exogenous} == {"W", "U"}
        assert set(cut.priors) == {"W", "U"}
        # the untouched equations are shared, not copied
        assert cut.equations["A"] is scm_full.equations["A"]

    def test_compiled_intervention_is_certain(self, scm_full):
        net = scm_to_bn(mutilate(scm_full, DO_YES))
        f = variable_elimination(net, ["I"])
        assert f.get({"I": "yes"}) == 1.0

    def test_unknown_variable(self, scm_full):
        with pytest.raises(SchemaError):
            mutilate(scm_full, Intervention("Z", "yes"))

    def test_unknown_state(self, scm_full):
        with pytest.raises(SchemaError):
            mutilate(scm_full, Intervention("I", "maybe"))

    def test_interventional_marginals(self, scm_full):
        for iv, expect in [(DO_YES, DO_I_YES), (DO_NO, DO_I_NO)]:
            net = scm_to_bn(mutilate(scm_full, iv))
            f = variable_elimination(net, ["A"])
            assert f.get({"A": "yes"}) == pytest.approx(expect, abs=1e-12)


class TestTwin:
    def test_pns_twin_shape(self, scm_full):
        twin = build_twin(scm_full, [[DO_YES], [DO_NO]])
        endo = {v.name for v in twin.scm.endogenous}
        assert endo == {
            "M", "I", "A",
            "M'", "I'", "A'",
            "M''", "I''", "A''",
        }
        assert {u.name for u in twin.scm.exogenous} == {"W", "V", "U"}
        assert twin.world_name("A", 2) == "A''"

    def test_intervened_copy_is_parentless(self, scm_full):
        twin = build_twin(scm_full, [[DO_YES]])
        eq = twin.scm.equations["I'"]
        assert eq.exo_parent is None
        assert eq.endo_parents == ()

    def test_copies_share_exogenous_parents(self, scm_full):
        twin = build_twin(scm_full, [[DO_YES]])
        assert twin.scm.equations["A'"].exo_parent == scm_full.equations["A"].exo_parent

    def test_real_world_marginal_preserved(self, scm_full):
        twin = build_twin(scm_full, [[DO_YES]])
        direct = variable_elimination(scm_to_bn(scm_full), ["A"]).get({"A": "yes"})
        joined = variable_elimination(twin.net, ["A"]).get({"A": "yes"})
        assert joined == pytest.approx(direct, abs=1e-9)

    def test_hypothetical_marginal_is_interventional(self, scm_full):
        twin = build_twin(scm_full, [[DO_YES]])
        cut = variable_elimination(scm_to_bn(mutilate(scm_full, DO_YES)), ["A"])
        hypo = variable_elimination(twin.net, ["A'"])
        assert hypo.get({"A'": "yes"}) == pytest.approx(cut.get({"A": "yes"}), abs=1e-9)

    def test_double_intervention_in_one_world(self, scm_full):
        with pytest.raises(SchemaError):
            build_twin(scm_full, [[DO_YES, DO_NO]])

    def test_label_validation(self, scm_full):
        with pytest.raises(SchemaError):
            build_twin(scm_full, [[DO_YES]], labels=["a", "b"])
        with pytest.raises(SchemaError):
            build_twin(scm_full, [[DO_YES], [DO_NO]], labels=["a", "a"])
        with pytest.raises(SchemaError):
            build_twin(scm_full, [[DO_YES]], labels=[""])

    def test_world_name_rejects_strangers(self, scm_full):
        twin = build_twin(scm_full, [[DO_YES]])
        with pytest.raises(SchemaError):
            twin.world_name("V", 1)


class TestEvaluate:
    @pytest.mark.parametrize("kind", [k.value for k in QueryKind])
    def test_demo_model_matches_goldens(self, scm_full, kind):
        got = evaluate(scm_full, make_query(kind))
        assert got == pytest.approx(SIX_QUERIES[kind], abs=1e-9)

    @pytest.mark.parametrize("kind", [k.value for k in QueryKind])
    def test_canonical_form_agrees(self, scm_canonical, kind):
        got = evaluate(scm_canonical, make_query(kind))
        assert got == pytest.approx(SIX_QUERIES[kind], abs=1e-9)

    def test_pns_within_frechet_envelope(self, scm_full):
        pns = evaluate(scm_full, make_query("PNS"))
        assert pns <= min(DO_I_YES, 1.0 - DO_I_NO) + 1e-9
        assert pns >= max(0.0, DO_I_YES - DO_I_NO) - 1e-9

    def test_priorless_model_rejected(self, skeleton):
        with pytest.raises(MissingPriorError):
            evaluate(skeleton, make_query("ACE"))

    def test_prepared_query_matches_evaluate(self, scm_full, six_queries):
        for q in six_queries:
            prepared = PreparedQuery(scm_full, q)
            assert prepared.evaluate_with_priors(scm_full.priors) == evaluate(
                scm_full, q
            )

    def test_prepared_query_checks_prior_cover(self, scm_full):
        prepared = PreparedQuery(scm_full, make_query("CondDiff"))
        with pytest.raises(MissingPriorError):
            prepared.evaluate_with_priors({"W": scm_full.priors["W"]})


class TestUndefined:
    def _always_no_model(self, skeleton):
        # U_I state u4 is the constant-no behaviour, so I never fires
        priors = {
            "U_M": (1.0, 0.0),
            "U_I": (0.0, 0.0, 0.0, 1.0),
            "U_A": tuple([1.0] + [0.0] * 15),
        }
        return skeleton.with_priors(priors)

    def test_pn_undefined_when_cause_never_occurs(self, skeleton):
        model = self._always_no_model(skeleton)
        with pytest.raises(UndefinedQuery):
            evaluate(model, make_query("PN"))

    def test_cond_diff_undefined_too(self, skeleton):
        model = self._always_no_model(skeleton)
        with pytest.raises(UndefinedQuery):
            evaluate(model, make_query("CondDiff"))

    def test_ace_still_defined(self, skeleton):
        # interventions bypass the observational zero
        model = self._always_no_model(skeleton)
        ace = evaluate(model, make_query("ACE"))
        assert ace == pytest.approx(0.0, abs=1e-12)


class TestQueryValidation:
    def test_cause_must_differ_from_effect(self):
        with pytest.raises(SchemaError):
            make_query("PN", cause="A", effect="A")

    def test_states_must_differ(self):
        with pytest.raises(SchemaError):
            CausalQuery(QueryKind.PN, "I", "A", "yes", "yes", "yes", "no")
        with pytest.raises(SchemaError):
            CausalQuery(QueryKind.PN, "I", "A", "yes", "no", "no", "no")

    def test_unknown_variable(self, scm_full):
        with pytest.raises(SchemaError):
            PreparedQuery(scm_full, make_query("PN", cause="Z"))

    def test_unknown_state(self, scm_full):
        q = CausalQuery(QueryKind.PN, "I", "A", "often", "no", "yes", "no")
        with pytest.raises(SchemaError):
            PreparedQuery(scm_full, q)

    def test_non_ancestor_cause_warns(self, scm_full):
        with pytest.warns(UserWarning, match="not an ancestor"):
            prepared = PreparedQuery(scm_full, make_query("ACE", cause="A", effect="M"))
        got = prepared.evaluate_with_priors(scm_full.priors)
        assert got == pytest.approx(0.0, abs=1e-12)


class TestBackdoorIdentity:
    def test_markovian_ace_equals_adjusted_estimate(self, scm_full):
        # feed the exact model joint to the adjustment formula
        net = scm_to_bn(scm_full)
        joint = variable_elimination(net, ["M", "I", "A"])
        schema = [Variable(n, ("yes", "no")) for n in ("M", "I", "A")]
        rows = []
        for m in ("yes", "no"):
            for i in ("yes", "no"):
                for a in ("yes", "no"):
                    w = joint.get({"M": m, "I": i, "A": a})
                    rows.append(({"M": m, "I": i, "A": a}, w))
        data = Dataset.from_rows(schema, rows)
        adjusted = backdoor_ace(data, "I", "A", ["M"], "yes", "no", "yes")
        ace = evaluate(scm_full, make_query("ACE"))
        assert adjusted == pytest.approx(ace, abs=1e-9)
