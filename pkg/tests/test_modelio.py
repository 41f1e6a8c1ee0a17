import json

import numpy as np
import pytest

from cfbounds.counterfactual import Intervention, QueryKind, mutilate
from cfbounds.data import read_counts
from cfbounds.demo import write_demo_files
from cfbounds.errors import SchemaError
from cfbounds.modelio import (
    load_binarization,
    load_manifest,
    load_model,
    load_queries,
    save_model,
)
from cfbounds.pgm import Dag, Variable
from cfbounds.scm import Scm

YN = ("yes", "no")


def _write(tmp_path, doc, name="f.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


def _tiny_model_doc(table):
    return {
        "variables": {"X": ["yes", "no"], "U": ["u1", "u2"]},
        "edges": [["U", "X"]],
        "equations": {"X": {"exo": "U", "parents": [], "table": table}},
    }


class TestModelRoundtrip:
    def test_skeleton(self, dag, tmp_path):
        path = tmp_path / "skeleton.json"
        save_model(path, dag)
        back = load_model(path)
        assert isinstance(back, Dag)
        assert back.variables == dag.variables
        assert back.edges == dag.edges

    def test_full_model(self, scm_canonical, tmp_path):
        path = tmp_path / "model.json"
        save_model(path, scm_canonical)
        back = load_model(path)
        assert isinstance(back, Scm)
        assert list(back.equations) == list(scm_canonical.equations)
        for name, eq in scm_canonical.equations.items():
            other = back.equations[name]
            assert other.child == eq.child
            assert other.exo_parent == eq.exo_parent
            np.testing.assert_array_equal(other.mapping, eq.mapping)
        for name, prior in scm_canonical.priors.items():
            np.testing.assert_array_equal(back.priors[name], prior)

    def test_priorless_model(self, skeleton, tmp_path):
        path = tmp_path / "model.json"
        save_model(path, skeleton)
        back = load_model(path)
        assert isinstance(back, Scm)
        assert not back.has_priors

    def test_demo_files_load(self, tmp_path):
        paths = write_demo_files(tmp_path)
        skeleton = load_model(paths["skeleton"])
        model = load_model(paths["model"])
        counts = read_counts(paths["counts"])
        assert isinstance(skeleton, Dag)
        assert isinstance(model, Scm)
        assert model.has_priors
        assert counts.total_weight == 830
        variables = {v.name: v for v in model.endogenous}
        queries = load_queries(paths["queries"], variables)
        assert [q.kind for q in queries] == list(QueryKind)
        assert {(q.cause, q.effect) for q in queries} == {("I", "A")}

    def test_constant_equation_has_no_file_form(self, scm_full, tmp_path):
        cut = mutilate(scm_full, Intervention("I", "yes"))
        with pytest.raises(SchemaError):
            save_model(tmp_path / "cut.json", cut)


class TestModelParsing:
    def test_tables_accept_labels_and_indices(self, tmp_path):
        by_label = load_model(_write(tmp_path, _tiny_model_doc(["yes", "no"]), "a.json"))
        by_index = load_model(_write(tmp_path, _tiny_model_doc([0, 1]), "b.json"))
        np.testing.assert_array_equal(
            by_label.equations["X"].mapping, by_index.equations["X"].mapping
        )

    def test_unknown_top_level_key(self, tmp_path):
        doc = _tiny_model_doc([0, 1])
        doc["comment"] = "hi"
        with pytest.raises(SchemaError, match="unknown keys"):
            load_model(_write(tmp_path, doc))

    def test_unknown_equation_key(self, tmp_path):
        doc = _tiny_model_doc([0, 1])
        doc["equations"]["X"]["note"] = "hi"
        with pytest.raises(SchemaError, match="unknown keys"):
            load_model(_write(tmp_path, doc))

    def test_priors_require_equations(self, tmp_path):
        doc = {
            "variables": {"X": ["yes", "no"]},
            "edges": [],
            "priors": {"X": [0.5, 0.5]},
        }
        with pytest.raises(SchemaError, match="requires 'equations'"):
            load_model(_write(tmp_path, doc))

    def test_missing_exo_edge(self, tmp_path):
        doc = _tiny_model_doc([0, 1])
        doc["edges"] = []
        with pytest.raises(SchemaError, match="undeclared arcs"):
            load_model(_write(tmp_path, doc))

    def test_stray_edge(self, tmp_path):
        doc = _tiny_model_doc([0, 1])
        doc["variables"]["Y"] = ["yes", "no"]
        doc["edges"].append(["Y", "X"])
        with pytest.raises(SchemaError):
            load_model(_write(tmp_path, doc))

    def test_wrong_table_length(self, tmp_path):
        with pytest.raises(SchemaError, match="expected 2"):
            load_model(_write(tmp_path, _tiny_model_doc([0, 1, 0])))

    def test_unknown_label_in_table(self, tmp_path):
        with pytest.raises(SchemaError):
            load_model(_write(tmp_path, _tiny_model_doc(["yes", "maybe"])))

    def test_index_out_of_range(self, tmp_path):
        with pytest.raises(SchemaError):
            load_model(_write(tmp_path, _tiny_model_doc([0, 2])))

    def test_bool_entry_rejected(self, tmp_path):
        with pytest.raises(SchemaError):
            load_model(_write(tmp_path, _tiny_model_doc([0, True])))

    def test_float_entry_rejected(self, tmp_path):
        with pytest.raises(SchemaError):
            load_model(_write(tmp_path, _tiny_model_doc([0, 1.0])))

    def test_variable_neither_child_nor_exo(self, tmp_path):
        doc = _tiny_model_doc([0, 1])
        doc["variables"]["Z"] = ["yes", "no"]
        with pytest.raises(SchemaError, match="neither"):
            load_model(_write(tmp_path, doc))

    def test_edge_endpoint_undeclared(self, tmp_path):
        doc = {"variables": {"X": ["yes", "no"]}, "edges": [["X", "Y"]]}
        with pytest.raises(SchemaError, match="not declared"):
            load_model(_write(tmp_path, doc))

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "f.json"
        path.write_text("{", encoding="utf-8")
        with pytest.raises(SchemaError, match="invalid JSON"):
            load_model(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_model(tmp_path / "nope.json")


class TestQueries:
    def _variables(self):
        return {
            "I": Variable("I", YN),
            "A": Variable("A", YN),
            "T": Variable("T", ("high", "mid", "low")),
        }

    def test_binary_defaults(self, tmp_path):
        path = _write(tmp_path, [{"kind": "PN", "cause": "I", "effect": "A"}])
        (q,) = load_queries(path, self._variables())
        assert q.kind is QueryKind.PN
        assert (q.cause_positive, q.cause_negative) == ("yes", "no")
        assert (q.effect_positive, q.effect_negative) == ("yes", "no")

    def test_explicit_states_win(self, tmp_path):
        path = _write(
            tmp_path,
            [
                {
                    "kind": "ACE",
                    "cause": "I",
                    "effect": "A",
                    "cause_positive_state": "no",
                    "cause_negative_state": "yes",
                }
            ],
        )
        (q,) = load_queries(path, self._variables())
        assert (q.cause_positive, q.cause_negative) == ("no", "yes")

    def test_multi_state_needs_help(self, tmp_path):
        path = _write(tmp_path, [{"kind": "PS", "cause": "T", "effect": "A"}])
        with pytest.raises(SchemaError, match="binarization"):
            load_queries(path, self._variables())

    def test_multi_state_with_explicit_states(self, tmp_path):
        path = _write(
            tmp_path,
            [
                {
                    "kind": "PS",
                    "cause": "T",
                    "effect": "A",
                    "cause_positive_state": "high",
                    "cause_negative_state": "low",
                }
            ],
        )
        (q,) = load_queries(path, self._variables())
        assert (q.cause_positive, q.cause_negative) == ("high", "low")

    def test_multi_state_partial_states_ambiguous(self, tmp_path):
        path = _write(
            tmp_path,
            [{"kind": "PS", "cause": "T", "effect": "A", "cause_positive_state": "high"}],
        )
        with pytest.raises(SchemaError, match="ambiguous"):
            load_queries(path, self._variables())

    def test_binarization_labels_fill_in(self, tmp_path):
        from cfbounds.data import BinarizationMap, BinarySpec

        variables = {
            "T": Variable("T", ("lush", "barren")),
            "A": Variable("A", YN),
        }
        bmap = BinarizationMap(
            {"T": BinarySpec(("high", "mid"), ("low",), "barren", "lush")}
        )
        path = _write(tmp_path, [{"kind": "PN", "cause": "T", "effect": "A"}])
        (q,) = load_queries(path, variables, bmap)
        assert (q.cause_positive, q.cause_negative) == ("barren", "lush")

    def test_unknown_kind(self, tmp_path):
        path = _write(tmp_path, [{"kind": "PNX", "cause": "I", "effect": "A"}])
        with pytest.raises(SchemaError, match="unknown kind"):
            load_queries(path, self._variables())

    def test_unknown_variable(self, tmp_path):
        path = _write(tmp_path, [{"kind": "PN", "cause": "Z", "effect": "A"}])
        with pytest.raises(SchemaError):
            load_queries(path, self._variables())

    def test_unknown_query_key(self, tmp_path):
        path = _write(
            tmp_path, [{"kind": "PN", "cause": "I", "effect": "A", "weight": 2}]
        )
        with pytest.raises(SchemaError, match="unknown keys"):
            load_queries(path, self._variables())

    def test_empty_list_rejected(self, tmp_path):
        path = _write(tmp_path, [])
        with pytest.raises(SchemaError):
            load_queries(path, self._variables())

    def test_equal_explicit_states_rejected(self, tmp_path):
        path = _write(
            tmp_path,
            [
                {
                    "kind": "PN",
                    "cause": "I",
                    "effect": "A",
                    "cause_positive_state": "yes",
                    "cause_negative_state": "yes",
                }
            ],
        )
        with pytest.raises(SchemaError):
            load_queries(path, self._variables())


class TestBinarizationFile:
    def test_defaults_and_overrides(self, tmp_path):
        path = _write(
            tmp_path,
            {
                "T": {"positive": ["high", "mid"], "negative": ["low"]},
                "K": {
                    "positive": ["on"],
                    "negative": ["off"],
                    "positive_label": "yes",
                    "negative_label": "no",
                },
            },
        )
        bmap = load_binarization(path)
        assert bmap.positive_state("T") == "positive"
        assert bmap.negative_state("T") == "negative"
        assert bmap.positive_state("K") == "yes"
        assert bmap.negative_state("K") == "no"

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(SchemaError):
            load_binarization(_write(tmp_path, {}))

    def test_non_list_side_rejected(self, tmp_path):
        doc = {"T": {"positive": "high", "negative": ["low"]}}
        with pytest.raises(SchemaError):
            load_binarization(_write(tmp_path, doc))

    def test_unknown_entry_key(self, tmp_path):
        doc = {"T": {"positive": ["a"], "negative": ["b"], "color": "red"}}
        with pytest.raises(SchemaError, match="unknown keys"):
            load_binarization(_write(tmp_path, doc))


class TestManifest:
    def test_full_manifest(self, tmp_path):
        doc = {
            "runs": 50,
            "max_iter": 200,
            "tol": 1e-8,
            "seed": 7,
            "workers": 2,
            "guard": 1000000,
        }
        assert load_manifest(_write(tmp_path, doc)) == doc

    def test_empty_manifest(self, tmp_path):
        assert load_manifest(_write(tmp_path, {})) == {}

    def test_unknown_key(self, tmp_path):
        with pytest.raises(SchemaError, match="unknown keys"):
            load_manifest(_write(tmp_path, {"iterations": 5}))

    def test_integer_fields_checked(self, tmp_path):
        with pytest.raises(SchemaError):
            load_manifest(_write(tmp_path, {"runs": 2.5}))
        with pytest.raises(SchemaError):
            load_manifest(_write(tmp_path, {"workers": True}))

    def test_tol_must_be_number(self, tmp_path):
        with pytest.raises(SchemaError):
            load_manifest(_write(tmp_path, {"tol": "tight"}))
