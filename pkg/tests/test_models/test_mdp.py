#!/usr/bin/python3
"""Test the finite MDP module for expected behavior and documentation"""
import inspect
from models import mdp
from models.mdp import (ChainError, FeatureMap, FiniteMdp, InducedChain,
                        Policy)
import numpy as np
import pep8
import unittest


def single_action(P, rewards=None, gamma=0.9):
    """a one-action MDP with the given chain and its only policy"""
    P = np.asarray(P, dtype=float)
    n = len(P)
    rewards = np.zeros((n, n)) if rewards is None else rewards
    return FiniteMdp(P[None], rewards, gamma), Policy(np.ones((n, 1)))


class TestMdpDocs(unittest.TestCase):
    """Tests to check the documentation and style of the mdp module"""

    @classmethod
    def setUpClass(cls):
        """Set up for docstring tests"""
        cls.funcs = [f for f in inspect.getmembers(mdp, inspect.isfunction)
                     if f[1].__module__ == mdp.__name__]
        for klass in (FiniteMdp, Policy, FeatureMap, InducedChain):
            cls.funcs += [f for f in inspect.getmembers(klass,
                                                        inspect.isfunction)
                          if not f[0].startswith("__")]

    def test_pep8_conformance(self):
        """Test that mdp.py and its tests conform to PEP8."""
        pep8s = pep8.StyleGuide(quiet=True)
        result = pep8s.check_files(['models/mdp.py',
                                    'tests/test_models/test_mdp.py'])
        self.assertEqual(result.total_errors, 0,
                         "Found code style errors (and warnings).")

    def test_module_docstring(self):
        """Test for the mdp.py module docstring"""
        self.assertIsNot(mdp.__doc__, None, "mdp.py needs a docstring")
        self.assertTrue(len(mdp.__doc__) >= 1, "mdp.py needs a docstring")

    def test_func_docstrings(self):
        """Test for the presence of docstrings in functions and methods"""
        for func in self.funcs:
            with self.subTest(function=func):
                self.assertIsNot(func[1].__doc__, None,
                                 "{:s} needs a docstring".format(func[0]))
                self.assertTrue(len(func[1].__doc__) >= 1,
                                "{:s} needs a docstring".format(func[0]))


class TestModelClasses(unittest.TestCase):
    """Test the validation done by the model classes"""

    def test_rejects_non_stochastic_rows(self):
        """transition rows must sum to one"""
        with self.assertRaises(ValueError):
            single_action([[0.5, 0.4], [0.5, 0.5]])
        with self.assertRaises(ValueError):
            single_action([[1.5, -0.5], [0.5, 0.5]])

    def test_rejects_bad_gamma_and_shapes(self):
        """γ must lie in (0, 1) and rewards must be n x n"""
        P = np.eye(2)[None]
        for gamma in (0.0, 1.0, 1.5):
            with self.subTest(gamma=gamma):
                with self.assertRaises(ValueError):
                    FiniteMdp(P, np.zeros((2, 2)), gamma)
        with self.assertRaises(ValueError):
            FiniteMdp(P, np.zeros(2), 0.9)

    def test_tables_are_read_only(self):
        """the stored arrays cannot be modified"""
        model, policy = single_action([[0.5, 0.5], [0.5, 0.5]])
        with self.assertRaises(ValueError):
            model.transitions[0, 0, 0] = 1.0
        with self.assertRaises(ValueError):
            policy.probs[0, 0] = 0.0

    def test_policy_rows(self):
        """policy rows must be distributions"""
        with self.assertRaises(ValueError):
            Policy([[0.7, 0.7]])

    def test_feature_rank(self):
        """rank-deficient features are rejected unless declared"""
        phi = np.array([[1.0, 2.0], [2.0, 4.0], [0.0, 0.0]])
        with self.assertRaises(ValueError):
            FeatureMap(phi)
        features = FeatureMap(phi, require_full_rank=False)
        self.assertEqual(features.rank, 1)
        basis = features.span_basis()
        self.assertEqual(basis.shape, (2, 1))
        np.testing.assert_allclose(np.abs(basis[:, 0]),
                                   np.array([1.0, 2.0]) / np.sqrt(5.0))

    def test_tabular(self):
        """tabular features are the identity"""
        features = FeatureMap.tabular(3)
        np.testing.assert_array_equal(features.phi, np.eye(3))
        np.testing.assert_array_equal(features(1), [0.0, 1.0, 0.0])
        self.assertTrue(features.full_rank)


class TestInducedChain(unittest.TestCase):
    """Test stationary distributions and true values"""

    def test_symmetric_chain(self):
        """the uniform 2-state chain has d = [0.5, 0.5]"""
        chain = mdp.induced_chain(*single_action([[0.5, 0.5], [0.5, 0.5]]))
        np.testing.assert_allclose(chain.d, [0.5, 0.5], atol=1e-12)

    def test_asymmetric_chain(self):
        """[[0.9, 0.1], [0.5, 0.5]] has d = [5/6, 1/6]"""
        chain = mdp.induced_chain(*single_action([[0.9, 0.1], [0.5, 0.5]]))
        np.testing.assert_allclose(chain.d, [5 / 6, 1 / 6], atol=1e-12)
        np.testing.assert_allclose(chain.d @ chain.Ppi, chain.d, atol=1e-12)
        np.testing.assert_allclose(chain.D, np.diag(chain.d))

    def test_periodic_chain_fails(self):
        """the deterministic 2-cycle is periodic"""
        with self.assertRaises(ChainError):
            mdp.induced_chain(*single_action([[0.0, 1.0], [1.0, 0.0]]))

    def test_reducible_chain_fails(self):
        """two closed classes have no unique stationary distribution"""
        with self.assertRaises(ChainError):
            mdp.stationary_distribution(np.eye(2))
        with self.assertRaises(ChainError):
            mdp.stationary_distribution([[1.0, 0.0], [0.5, 0.5]])

    def test_policy_shape_checked(self):
        """a policy for another MDP is rejected"""
        model, _ = single_action([[0.5, 0.5], [0.5, 0.5]])
        with self.assertRaises(ValueError):
            mdp.induced_chain(model, Policy(np.ones((3, 1))))

    def test_single_state_value(self):
        """r = 1 and γ = 0.5 give V = 2"""
        model, policy = single_action([[1.0]], np.ones((1, 1)), 0.5)
        chain = mdp.induced_chain(model, policy)
        np.testing.assert_allclose(mdp.true_values(chain, 0.5), [2.0])

    def test_two_cycle_values(self):
        """rewards (1, 0) on the 2-cycle with γ = 0.9"""
        chain = InducedChain(Ppi=[[0.0, 1.0], [1.0, 0.0]], rbar=[1.0, 0.0],
                             d=[0.5, 0.5])
        np.testing.assert_allclose(mdp.true_values(chain, 0.9),
                                   [100 / 19, 90 / 19], rtol=1e-12)

    def test_zero_rewards(self):
        """no reward means no value"""
        chain = mdp.induced_chain(*single_action([[0.9, 0.1], [0.5, 0.5]]))
        np.testing.assert_array_equal(mdp.true_values(chain, 0.9), [0, 0])

    def test_bellman_identity(self):
        """V = r̄ + γ P V on the random walk"""
        model, policy, _, _ = mdp.gen_random_walk_100(3)
        chain = mdp.induced_chain(model, policy)
        values = mdp.true_values(chain, model.gamma)
        np.testing.assert_allclose(
            values, chain.rbar + model.gamma * chain.Ppi @ values,
            rtol=0, atol=1e-10)

    def test_inconsistent_distribution(self):
        """InducedChain checks d against Ppi"""
        with self.assertRaises(ChainError):
            InducedChain(Ppi=[[0.9, 0.1], [0.5, 0.5]], rbar=[0, 0],
                         d=[0.5, 0.5])


class TestSampling(unittest.TestCase):
    """Test sample_step"""

    def test_deterministic_step(self):
        """a point-mass policy and transition give the unique outcome"""
        P = np.zeros((2, 2, 2))
        P[0] = [[0.0, 1.0], [1.0, 0.0]]
        P[1] = np.eye(2)
        rewards = np.array([[0.0, 3.0], [0.0, 0.0]])
        model = FiniteMdp(P, rewards, 0.9)
        policy = Policy([[1.0, 0.0], [0.0, 1.0]])
        rng = np.random.default_rng(0)
        self.assertEqual(mdp.sample_step(model, policy, 0, rng),
                         (0, 1, 3.0))

    def test_replay(self):
        """equal seeds replay the same trajectory"""
        model, policy, _, _ = mdp.gen_random_walk_100(1)
        trajectories = []
        for _ in range(2):
            rng = np.random.default_rng(42)
            state, steps = 0, []
            for _ in range(50):
                step = mdp.sample_step(model, policy, state, rng)
                steps.append(step)
                state = step[1]
            trajectories.append(steps)
        self.assertEqual(trajectories[0], trajectories[1])

    def test_empirical_frequencies(self):
        """next-state frequencies match P[a][s] within 4.5 standard errors"""
        model, policy, _, _ = mdp.gen_random_mdp(4, 2, 2, seed=5)
        rng = np.random.default_rng(11)
        counts = np.zeros((2, 4))
        for _ in range(100000):
            action, nxt, _ = mdp.sample_step(model, policy, 0, rng)
            counts[action, nxt] += 1
        for action in range(2):
            total = counts[action].sum()
            expected = model.transitions[action, 0]
            se = np.sqrt(expected * (1 - expected) / total)
            self.assertTrue(np.all(np.abs(counts[action] / total - expected) <=
                                   4.5 * se))
        share = counts.sum(axis=1) / counts.sum()
        se = np.sqrt(policy.probs[0] * (1 - policy.probs[0]) / 100000)
        self.assertTrue(np.all(np.abs(share - policy.probs[0]) <= 4.5 * se))

    def test_absorbing_state_rejected(self):
        """no step is taken from an absorbing state"""
        model, behavior, _, _, _ = mdp.gen_random_chain()
        with self.assertRaises(ValueError):
            mdp.sample_step(model, behavior, 0, np.random.default_rng(0))

    def test_sample_state(self):
        """a point mass is always drawn"""
        rng = np.random.default_rng(0)
        self.assertEqual(mdp.sample_state([0.0, 0.0, 1.0], rng), 2)


class TestGenerators(unittest.TestCase):
    """Test the benchmark environments"""

    def test_random_walk(self):
        """100 states, 5 actions, γ = 0.95, tabular and deterministic"""
        model, policy, features, start = mdp.gen_random_walk_100(7)
        self.assertEqual(model.transitions.shape, (5, 100, 100))
        self.assertEqual(model.gamma, 0.95)
        np.testing.assert_array_equal(features.phi, np.eye(100))
        self.assertTrue(np.all((model.rewards >= 0) & (model.rewards <= 1)))
        self.assertAlmostEqual(start.sum(), 1.0, places=12)
        again = mdp.gen_random_walk_100(7)
        np.testing.assert_array_equal(model.transitions,
                                      again[0].transitions)
        np.testing.assert_array_equal(policy.probs, again[1].probs)
        other = mdp.gen_random_walk_100(8)
        self.assertFalse(np.array_equal(model.rewards, other[0].rewards))
        chain = mdp.induced_chain(model, policy)
        self.assertLessEqual(np.max(np.abs(chain.d @ chain.Ppi - chain.d)),
                             1e-10)

    def test_random_chain_layout(self):
        """L moves left w.p. 0.9 and entering 5 pays 1"""
        model, behavior, target, features, start = mdp.gen_random_chain()
        self.assertEqual(model.n_states, 17)
        self.assertEqual(model.gamma, 0.9)
        self.assertEqual(model.absorbing, (0, 16))
        self.assertEqual(model.transitions[0, 6, 5], 0.9)
        self.assertEqual(model.rewards[6, 5], 1.0)
        self.assertAlmostEqual(model.transitions[1, 6, 7], 0.9)
        for s in (0, 16):
            self.assertEqual(model.transitions[0, s, s], 1.0)
            self.assertEqual(model.transitions[1, s, s], 1.0)
        np.testing.assert_array_equal(behavior.probs[3], [0.5, 0.5])
        np.testing.assert_array_equal(target.probs[3], [0.6, 0.4])
        self.assertEqual(features.phi.shape, (17, 15))
        np.testing.assert_array_equal(features.phi[[0, 16]], 0.0)
        self.assertEqual(start[0], 0.0)

    def test_random_chain_rewards(self):
        """exactly the four transitions into states 5 and 10 pay"""
        model = mdp.gen_random_chain()[0]
        rewarded = sorted(zip(*np.nonzero(model.rewards)))
        self.assertEqual(rewarded, [(4, 5), (6, 5), (9, 10), (11, 10)])

    def test_random_chain_values(self):
        """absorbing states are worth 0; the restarted chain is stationary"""
        model, behavior, target, _, start = mdp.gen_random_chain()
        chain = mdp.induced_chain(model, target, start)
        values = mdp.true_values(chain, model.gamma)
        self.assertEqual(values[0], 0.0)
        self.assertEqual(values[16], 0.0)
        self.assertTrue(np.all(values[1:16] > 0))
        chain = mdp.induced_chain(model, behavior, start)
        self.assertLessEqual(np.max(np.abs(chain.d @ chain.Ppi - chain.d)),
                             1e-10)
        with self.assertRaises(ChainError):
            mdp.induced_chain(model, behavior)

    def test_baird(self):
        """the star counterexample and its rank-7 features"""
        model, behavior, target, features, start, theta0 = mdp.gen_baird()
        self.assertEqual(model.gamma, 0.99)
        self.assertEqual(features.phi.shape, (7, 8))
        self.assertEqual(features.rank, 7)
        np.testing.assert_array_equal(features(0),
                                      [2, 0, 0, 0, 0, 0, 0, 1])
        np.testing.assert_array_equal(features(6),
                                      [0, 0, 0, 0, 0, 0, 1, 2])
        np.testing.assert_array_equal(theta0, [1, 1, 1, 1, 1, 1, 10, 1])
        np.testing.assert_allclose(behavior.probs[0], [6 / 7, 1 / 7])
        np.testing.assert_array_equal(target.probs[0], [0.0, 1.0])
        chain = mdp.induced_chain(model, behavior)
        np.testing.assert_allclose(chain.d, np.full(7, 1 / 7), atol=1e-12)
        Pcont, Pterm, rbar = mdp.policy_matrices(model, target, start)
        np.testing.assert_array_equal(
            mdp.policy_values(Pterm, rbar, model.gamma), np.zeros(7))

    def test_random_mdp(self):
        """random MDPs have full-rank features of the asked size"""
        model, policy, features, start = mdp.gen_random_mdp(6, 3, 4, 1)
        self.assertEqual(model.transitions.shape, (3, 6, 6))
        self.assertEqual(features.phi.shape, (6, 4))
        self.assertTrue(features.full_rank)
        with self.assertRaises(ValueError):
            mdp.gen_random_mdp(3, 2, 4, 1)


class TestImportanceRatios(unittest.TestCase):
    """Test ρ tables"""

    def test_baird_ratios(self):
        """dashed actions get 0, solid ones 7"""
        _, behavior, target, _, _, _ = mdp.gen_baird()
        ratios = mdp.importance_ratios(behavior, target)
        np.testing.assert_allclose(ratios[:, 0], 0.0)
        np.testing.assert_allclose(ratios[:, 1], 7.0)

    def test_uncovered_target(self):
        """π must be absolutely continuous with respect to μ"""
        with self.assertRaises(ValueError):
            mdp.importance_ratios(Policy([[1.0, 0.0]]), Policy([[0.5, 0.5]]))
