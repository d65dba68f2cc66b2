import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from binaf.expr import (
    CATALOG_GENOMES,
    ActivationExpr,
    EncodingType,
    Genome,
    GenomeError,
    RPReLU,
    RSign,
    all_genomes,
    canonicalize,
    catalog_af,
    decode,
    eval_binary,
    eval_unary,
    format_genome,
    parse_genome,
    render_formula,
    search_space_size,
)
from binaf.ops import BINARY_OPS, EPS_DEN, EPS_LOG, UNARY_OPS
from oracles import CATALOG_FORMULAS, central_difference, grad_close


def test_operator_tables():
    assert len(UNARY_OPS) == 22 and len(BINARY_OPS) == 11
    assert [op.index for op in UNARY_OPS if op.n_params] == [19, 20, 21]
    assert [op.index for op in BINARY_OPS if op.n_params] == [10]


@pytest.mark.parametrize(
    "genes",
    [(0, 0), (0, 0, 0, 0), (22, 0, 0), (0, 0, 11), (-1, 0, 0), (0, 0, 0, 0, 0, 11)],
)
def test_invalid_genomes_rejected(genes):
    with pytest.raises(GenomeError):
        Genome.from_genes(genes)


class TestDecode:
    def test_af1(self):
        af = decode(Genome.from_genes([11, 12, 1]))
        x = np.linspace(-5, 5, 101)
        np.testing.assert_allclose(af(x), np.sin(x) - np.cos(x), rtol=0, atol=1e-15)

    def test_zero_operand_is_identity(self):
        af = decode(Genome.from_genes([0, 3, 0]))
        x = np.linspace(-3, 3, 13)
        np.testing.assert_array_equal(af(x), x)

    def test_af9_type2_symbolic(self):
        genome = Genome.from_genes([12, 14, 3, 0, 10, 0])
        t, beta = sp.symbols("x beta")
        assert sp.simplify(_symbolic(genome, t, beta) - (beta * sp.cos(t) + (1 - beta) * sp.atan(t))) == 0
        x = np.linspace(-4, 4, 57)
        np.testing.assert_allclose(decode(genome)(x), CATALOG_FORMULAS["AF9"](x, 0.0, 0.5), atol=1e-15)

    def test_params_initialised(self):
        af = decode(Genome.from_genes([19, 20, 10]), channels=3)
        np.testing.assert_array_equal(af.params["U1"], [0, 0, 0])
        np.testing.assert_array_equal(af.params["U2"], [1, 1, 1])
        np.testing.assert_array_equal(af.params["B1"], [0.5, 0.5, 0.5])

    def test_channel_mismatch(self):
        af = decode(Genome.from_genes([11, 12, 1]), channels=4)
        with pytest.raises(ValueError):
            af.forward(np.zeros((2, 3)))


def _symbolic(genome, t, beta):
    """sympy image of a genome for the parameter-free ops plus lerp (test oracle)."""
    un = {0: lambda v: v, 2: lambda v: -v, 3: lambda v: 0, 11: sp.sin, 12: sp.cos, 14: sp.atan}
    bi = {0: lambda u, v: u + v, 1: lambda u, v: u - v, 10: lambda u, v: beta * u + (1 - beta) * v}
    g = genome.genes
    if genome.encoding is EncodingType.TYPE1:
        return bi[g[2]](un[g[0]](t), un[g[1]](t))
    inner = bi[g[4]](un[g[0]](t), un[g[1]](t))
    return bi[g[5]](un[g[3]](inner), un[g[2]](t))


class TestEvalOps:
    def test_sin_zero(self):
        assert eval_unary(11, np.array([0.0]))[0] == 0.0

    def test_sign_sqrt(self):
        assert eval_unary(6, np.array([-4.0]))[0] == -2.0

    def test_log_guard(self):
        v = eval_unary(7, np.array([0.0]))[0]
        assert v == math.log(EPS_LOG) and np.isfinite(v)

    def test_sub_at_quarter_pi(self):
        t = np.array([math.pi / 4])
        assert abs(eval_binary(1, np.sin(t), np.cos(t))[0]) < 1e-15

    def test_lerp(self):
        assert eval_binary(10, np.array([2.0]), np.array([4.0]), params=[0.5])[0] == 3.0

    def test_div_guard(self):
        v = eval_binary(3, np.array([1.0, -1.0]), np.array([0.0, -0.0]))
        assert np.all(np.isfinite(v))
        np.testing.assert_allclose(v, [1 / EPS_DEN, -1 / EPS_DEN])
        # sign of a tiny negative denominator is kept
        assert eval_binary(3, np.array([1.0]), np.array([-1e-12]))[0] == pytest.approx(-1 / EPS_DEN)

    def test_params_required(self):
        with pytest.raises(ValueError):
            eval_unary(19, np.zeros(3))
        with pytest.raises(ValueError):
            eval_binary(0, np.zeros(3), np.zeros(3), params=[1.0])
        with pytest.raises(ValueError):
            eval_binary(0, np.zeros(3), np.zeros(4))


class TestForwardBackward:
    def test_forward_values(self):
        assert catalog_af("AF1")(np.array([0.0]))[0] == -1.0
        assert catalog_af("AF15")(np.array([0.0]))[0] == 1.0
        assert catalog_af("AF13")(np.array([0.0]))[0] == pytest.approx(1.0, abs=1e-15)

    def test_af13_matches_closed_form(self):
        x = np.linspace(-6, 6, 101)
        np.testing.assert_allclose(catalog_af("AF13")(x), 1 / np.sqrt(1 + x * x) + x, atol=1e-14)

    def test_af1_gradient_at_zero(self):
        af = catalog_af("AF1")
        y, tape = af.forward(np.array([0.0]))
        gx, _ = af.backward(tape, np.ones_like(y))
        assert gx[0] == 1.0

    def test_lerp_beta_gradient(self):
        af = decode(Genome.from_genes([0, 0, 10]))
        # U1 = U2 = x, so feed a two-point trick through channels instead
        af2 = ActivationExpr(Genome.from_genes([21, 21, 10]), 1, {"U1": 2.0, "U2": 4.0})
        y, tape = af2.forward(np.array([0.0]))
        assert y[0] == 3.0
        _, grads = af2.backward(tape, np.ones_like(y))
        assert grads["B1"][0] == -2.0
        assert af.params["B1"][0] == 0.5

    def test_af6_gradient_fd(self):
        af = catalog_af("AF6")
        x = np.array([1.0])
        y, tape = af.forward(x)
        gx, _ = af.backward(tape, np.ones_like(y))
        ok, err = grad_close(gx, central_difference(af, x))
        assert ok, err

    def test_tape_ownership(self):
        a, b = catalog_af("AF1"), catalog_af("AF1")
        y, tape = a.forward(np.zeros(2))
        with pytest.raises(ValueError):
            b.backward(tape, np.ones_like(y))

    def test_channelwise_param_gradient_reduction(self):
        af = ActivationExpr(Genome.from_genes([20, 12, 0]), 3, {"U1": [1.0, 2.0, 3.0]})
        rng = np.random.default_rng(0)
        x = rng.normal(size=(5, 3, 2, 2))
        y, tape = af.forward(x)
        gy = rng.normal(size=y.shape)
        _, grads = af.backward(tape, gy)
        np.testing.assert_allclose(grads["U1"], (gy * x).sum(axis=(0, 2, 3)))
        np.testing.assert_allclose(y, np.array([1.0, 2.0, 3.0]).reshape(1, 3, 1, 1) * x + np.cos(x))

    def test_float32_preserved(self):
        af = catalog_af("AF12", channels=2)
        y = af(np.ones((4, 2), dtype=np.float32))
        assert y.dtype == np.float32


@settings(max_examples=60, deadline=None)
@given(
    genes=st.tuples(st.integers(0, 21), st.integers(0, 21), st.integers(0, 21), st.integers(0, 21),
                    st.integers(0, 10), st.integers(0, 10)),
    shape=st.lists(st.integers(1, 4), min_size=2, max_size=4),
)
def test_shape_preserved(genes, shape):
    af = decode(Genome.from_genes(genes), channels=shape[1])
    x = np.random.default_rng(1).normal(size=shape)
    y, tape = af.forward(x)
    assert y.shape == x.shape
    gx, grads = af.backward(tape, np.ones_like(y))
    assert gx.shape == x.shape
    assert all(g.shape == (shape[1],) for g in grads.values())


def test_all_type1_total_and_finite():
    x = np.random.default_rng(3).uniform(-3, 3, size=(16, 4))
    # keep clear of tan's poles so that "finite" is a fair requirement
    x = np.where(np.abs(np.cos(x)) < 1e-2, 0.3, x)
    for genome in all_genomes("type1"):
        y = decode(genome, channels=4)(x)
        assert np.all(np.isfinite(y)), genome


class TestCatalog:
    @pytest.mark.parametrize("name", list(CATALOG_GENOMES))
    def test_matches_table(self, name):
        rng = np.random.default_rng(7)
        x = rng.uniform(-10, 10, 1000)
        a, b = rng.uniform(-1, 1), rng.uniform(0, 1)
        af = catalog_af(name)
        if "U2" in af.params:
            af.params["U2"][:] = a
        if name != "AF11":
            for k in ("B1", "B2"):
                if k in af.params:
                    af.params[k][:] = b
        else:
            b = af.params["B1"][0]
        want = CATALOG_FORMULAS[name](x, a, b)
        np.testing.assert_allclose(af(x), want, rtol=0, atol=1e-12)

    def test_type_split(self):
        for i in range(1, 11):
            assert catalog_af(f"AF{i}").genome.encoding is EncodingType.TYPE1
        for i in range(11, 16):
            assert catalog_af(f"AF{i}").genome.encoding is EncodingType.TYPE2

    def test_rsign_zero_is_sign(self):
        x = np.linspace(-2, 2, 401)
        r = RSign()
        np.testing.assert_array_equal(r.binarize(x), np.where(x >= 0, 1.0, -1.0))
        np.testing.assert_array_equal(r(x), x)

    def test_rsign_shift(self):
        x = np.linspace(-2, 2, 401)
        r = RSign(alpha=0.3)
        np.testing.assert_array_equal(r.binarize(x), np.where(x - 0.3 >= 0, 1.0, -1.0))

    def test_rprelu_identity(self):
        x = np.linspace(-2, 2, 401)
        np.testing.assert_array_equal(RPReLU(beta=1.0)(x), x)

    def test_rprelu_gradients(self):
        rng = np.random.default_rng(2)
        m = RPReLU(2, gamma=[0.1, -0.2], zeta=[0.3, 0.0], beta=[0.25, 0.5])
        x = rng.normal(size=(6, 2))
        y, tape = m.forward(x)
        gx, grads = m.backward(tape, np.ones_like(y))
        for key in ("gamma", "zeta", "beta"):
            def f(v, key=key):
                mm = m.copy()
                mm.params[key] = v
                return mm(x).sum()
            base = m.params[key].copy()
            num = np.array([(f(base + h * e) - f(base - h * e)) / (2 * h)
                            for e in np.eye(2) for h in [1e-6]])
            np.testing.assert_allclose(grads[key], num, rtol=1e-6, atol=1e-8)

    def test_unknown(self):
        with pytest.raises(KeyError):
            catalog_af("AF16")


def test_search_space_size():
    assert search_space_size("type1") == 5324 == 22 * 22 * 11
    assert search_space_size("type2") == 28_344_976 == 22 ** 4 * 11 ** 2
    assert search_space_size("type1", n_unary=1, n_binary=1) == 1
    assert sum(1 for _ in all_genomes("type1")) == 5324


class TestCanonicalize:
    def test_add_zero(self):
        assert canonicalize(Genome.from_genes([0, 3, 0])).genes == (0, 3, 0)
        assert canonicalize(Genome.from_genes([3, 0, 0])).genes == (0, 3, 0)
        assert canonicalize(Genome.from_genes([0, 3, 1])).genes == (0, 3, 0)

    def test_commutative(self):
        assert canonicalize(Genome.from_genes([12, 11, 0])) == canonicalize(Genome.from_genes([11, 12, 0]))

    def test_sub_not_commutative(self):
        g = Genome.from_genes([11, 12, 1])
        assert canonicalize(g) == g
        assert canonicalize(Genome.from_genes([12, 11, 1])) != g

    def test_idempotent(self):
        for g in all_genomes("type1"):
            c = canonicalize(g)
            assert canonicalize(c) == c

    def test_soundness_type1(self):
        x = np.random.default_rng(5).uniform(-3, 3, 1000)
        x = np.where(np.abs(np.cos(x)) < 1e-2, 0.5, x)
        classes = {}
        for g in all_genomes("type1"):
            classes.setdefault(canonicalize(g), []).append(g)
        assert len(classes) < 5324
        for rep, members in classes.items():
            want = decode(rep)(x)
            for g in members:
                np.testing.assert_allclose(decode(g)(x), want, rtol=0, atol=0)

    @settings(max_examples=300, deadline=None)
    @given(st.tuples(st.integers(0, 21), st.integers(0, 21), st.integers(0, 21), st.integers(0, 21),
                     st.integers(0, 10), st.integers(0, 10)))
    def test_soundness_type2(self, genes):
        x = np.random.default_rng(6).uniform(-3, 3, 1000)
        x = np.where(np.abs(np.cos(x)) < 1e-2, 0.5, x)
        g = Genome.from_genes(genes)
        with np.errstate(all="ignore"):
            a, b = decode(g)(x), decode(canonicalize(g))(x)
        np.testing.assert_array_equal(a, b)


class TestText:
    def test_roundtrip_examples(self):
        for text in ["t1:U11-U12-B1", "t2:U12-U14-U3-U0-B10-B0"]:
            assert format_genome(parse_genome(text)) == text

    @pytest.mark.parametrize("bad", ["t1:U99-U0-B0", "t1:U1-U2", "t3:U1-U2-B0", "U1-U2-B0",
                                     "t1:U1-B2-B0", "t1:U1-U2-U0", "t1:U1-U2-B11", "t1:Ux-U2-B0"])
    def test_parse_errors(self, bad):
        with pytest.raises(GenomeError) as info:
            parse_genome(bad)
        assert "t1:U<0-21>" in str(info.value)

    def test_error_names_token(self):
        with pytest.raises(GenomeError, match="U99"):
            parse_genome("t1:U99-U0-B0")

    @given(st.tuples(st.integers(0, 21), st.integers(0, 21), st.integers(0, 21), st.integers(0, 21),
                     st.integers(0, 10), st.integers(0, 10)), st.booleans())
    def test_roundtrip_property(self, genes, short):
        g = Genome.from_genes(genes[:2] + genes[4:5] if short else genes)
        assert parse_genome(format_genome(g)) == g


class TestRender:
    def test_examples(self):
        assert render_formula(Genome.from_genes([11, 12, 1])) == "sin(x) - cos(x)"
        assert render_formula(Genome.from_genes([19, 0, 0])) == "a + x"
        assert render_formula(catalog_af("AF4").genome) == "b*cos(x) + (1 - b)*x"

    def test_unique_and_stable(self):
        seen = {}
        for g in all_genomes("type1"):
            s = render_formula(g)
            assert s and s == render_formula(g)
            assert s not in seen, (g, seen.get(s))
            seen[s] = g
