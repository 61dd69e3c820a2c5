"""Bayesian network bridge: DAG-induced stagings and the joint oracle."""

import itertools

import numpy as np
import pytest

from stagedtree.bn import (
    DagSpec,
    bn_joint_oracle,
    format_dag_file,
    model_from_dag,
    naive_dag,
    parse_dag_file,
    staging_from_dag,
)
from stagedtree.errors import DagError
from stagedtree.tree import (
    EventTree,
    VariableSpec,
    atom_probability,
    build_event_tree,
)

from conftest import binary_tree, binary_vars, random_dag, staging_from_maps


class TestDagSpec:
    def test_parents_must_precede_child(self):
        variables = tuple(binary_vars("a b"))
        with pytest.raises(DagError):
            DagSpec(variables, ((), (2,)))
        with pytest.raises(DagError):
            DagSpec(variables, ((1,), ()))

    def test_first_variable_cannot_have_parents(self):
        variables = tuple(binary_vars("c x"))
        with pytest.raises(DagError):
            DagSpec(variables, ((0,), ()))

    def test_cpt_rows_must_normalize(self):
        variables = tuple(binary_vars("a b"))
        cpts = (np.array([[0.5, 0.5]]), np.array([[0.6, 0.6], [0.5, 0.5]]))
        with pytest.raises(DagError, match="not normalized"):
            DagSpec(variables, ((), (0,)), cpts)


class TestStagingFromDag:
    def test_common_cause_staging(self):
        # x1 -> x2 and x1 -> x3: the x3 depth pairs vertices by the x1 digit
        tree = binary_tree("x1 x2 x3")
        dag = DagSpec(tree.variables, ((), (0,), (0,)))
        staging = staging_from_dag(dag, tree)
        assert staging.stage_maps[1].tolist() == [0, 1]
        assert staging.stage_maps[2].tolist() == [0, 0, 1, 1]

    def test_naive_classifier_has_class_many_stages_per_depth(self):
        tree = binary_tree("c x1 x2 x3")
        dag = naive_dag(tree.class_var, tree.feature_vars)
        staging = staging_from_dag(dag, tree)
        for d in range(1, 4):
            assert staging.n_stages(d) == 2  # exactly |C| stages per feature
            digits = np.unravel_index(np.arange(tree.n_vertices(d)), tree.cardinalities[:d])
            assert staging.stage_maps[d].tolist() == digits[0].tolist()

    def test_empty_parent_sets_give_independence_staging(self):
        tree = binary_tree("c x1 x2")
        dag = DagSpec(tree.variables, ((), (), ()))
        staging = staging_from_dag(dag, tree)
        assert all(staging.n_stages(d) == 1 for d in range(3))

    def test_stage_count_is_parent_configuration_count(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            dag = random_dag(rng)
            tree = build_event_tree(dag.variables[0], dag.variables[1:])
            staging = staging_from_dag(dag, tree)
            for d in range(tree.n_depths):
                assert staging.n_stages(d) == dag.n_parent_configs(d)

    def test_order_mismatch_rejected(self):
        tree = binary_tree("c x1")
        dag = DagSpec(tuple(binary_vars("x1 c")), ((), (0,)))
        with pytest.raises(DagError):
            staging_from_dag(dag, tree)


class TestJointOracle:
    def test_uniform_cpts(self):
        variables = tuple(binary_vars("a b c"))
        cpts = (
            np.full((1, 2), 0.5),
            np.full((2, 2), 0.5),
            np.full((4, 2), 0.5),
        )
        dag = DagSpec(variables, ((), (0,), (0, 1)), cpts)
        for outcome in itertools.product((0, 1), repeat=3):
            assert bn_joint_oracle(dag, outcome) == 0.125

    def test_five_vertex_factorization_reproduced_termwise(self):
        # edges 1->3, 1->4, 2->4, 3->5, 4->5
        rng = np.random.default_rng(6)
        variables = tuple(binary_vars("v1 v2 v3 v4 v5"))
        parents = ((), (), (0,), (0, 1), (2, 3))
        cpts = tuple(
            rng.dirichlet((1, 1), size=int(np.prod([2] * len(ps), initial=1)))
            for ps in parents
        )
        dag = DagSpec(variables, parents, cpts)
        for outcome in itertools.product((0, 1), repeat=5):
            x1, x2, x3, x4, x5 = outcome
            expected = (
                cpts[0][0, x1]
                * cpts[1][0, x2]
                * cpts[2][x1, x3]
                * cpts[3][2 * x1 + x2, x4]
                * cpts[4][2 * x3 + x4, x5]
            )
            assert bn_joint_oracle(dag, outcome) == pytest.approx(expected, abs=1e-16)

    def test_oracle_requires_cpts(self):
        dag = DagSpec(tuple(binary_vars("a b")), ((), (0,)))
        with pytest.raises(DagError):
            bn_joint_oracle(dag, (0, 0))


class TestModelEquality:
    def test_converted_model_matches_oracle_on_all_atoms(self):
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(40):
            dag = random_dag(rng)
            model = model_from_dag(dag)
            for outcome in model.tree.iter_atoms():
                diff = abs(
                    bn_joint_oracle(dag, outcome) - atom_probability(model, outcome)
                )
                worst = max(worst, diff)
        assert worst < 1e-12

    def test_naive_conversion_satisfies_naive_stage_bound(self):
        rng = np.random.default_rng(88)
        class_var = VariableSpec("c", ("0", "1", "2"))
        features = tuple(binary_vars("x1 x2"))
        dag = naive_dag(class_var, features)
        tree = build_event_tree(class_var, features)
        staging = staging_from_dag(dag, tree)
        for d in range(1, tree.n_depths):
            assert staging.n_stages(d) == 3


class TestStrictContainmentWitness:
    def test_cross_staging_matches_no_dag(self):
        # staging pairing prefixes (0,0) with (1,1) at the last depth
        tree = binary_tree("x1 x2 x3")
        cross = staging_from_maps([[0], [0, 1], [0, 1, 1, 0]])
        all_dag_stagings = []
        for p2 in ((), (0,)):
            for p3 in ((), (0,), (1,), (0, 1)):
                dag = DagSpec(tree.variables, ((), p2, p3))
                all_dag_stagings.append(staging_from_dag(dag, tree))
        assert len(all_dag_stagings) == 8
        assert all(cross != s for s in all_dag_stagings)


class TestDagFile:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(55)
        dag = random_dag(rng)
        path = tmp_path / "model.dag"
        path.write_text(format_dag_file(dag), encoding="utf-8")
        parsed = parse_dag_file(path)
        assert parsed.variables == dag.variables
        assert parsed.parent_sets == dag.parent_sets
        for a, b in zip(parsed.cpts, dag.cpts):
            assert np.array_equal(a, b)

    def test_parse_without_cpts(self, tmp_path):
        path = tmp_path / "m.dag"
        path.write_text(
            "# class first\nc | levels: no,yes\nx | levels: a,b | parents: c\n",
            encoding="utf-8",
        )
        dag = parse_dag_file(path)
        assert dag.cpts is None
        assert dag.parent_sets == ((), (0,))

    def test_undeclared_parent(self, tmp_path):
        path = tmp_path / "m.dag"
        path.write_text("c | levels: 0,1 | parents: ghost\n", encoding="utf-8")
        with pytest.raises(DagError, match="ghost"):
            parse_dag_file(path)

    def test_wrong_cpt_length(self, tmp_path):
        path = tmp_path / "m.dag"
        path.write_text("c | levels: 0,1 | cpt: 0.3 0.3 0.4\n", encoding="utf-8")
        with pytest.raises(DagError, match="cpt"):
            parse_dag_file(path)

    def test_missing_levels(self, tmp_path):
        path = tmp_path / "m.dag"
        path.write_text("c | parents:\n", encoding="utf-8")
        with pytest.raises(DagError, match="levels"):
            parse_dag_file(path)

    def test_unknown_segment(self, tmp_path):
        path = tmp_path / "m.dag"
        path.write_text("c | levels: 0,1 | prior: 0.5\n", encoding="utf-8")
        with pytest.raises(DagError, match="prior"):
            parse_dag_file(path)
