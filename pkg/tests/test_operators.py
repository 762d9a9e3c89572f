import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import CONSTANT_PRESERVING, ZOO
from rendition import filters
from rendition.operators import (
    FAMILIES,
    BlackBoxOperator,
    CompositeOperator,
    OperatorSpec,
    SpecParseError,
    as_operator,
    build_operator,
    compose,
    identity,
    parse_spec,
)


class TestBlackBox:
    def test_counts_activations(self):
        op = BlackBoxOperator(lambda x: 2 * x, "double")
        for _ in range(3):
            op(np.ones((2, 2)))
        assert op.activations == 3
        op.reset_activations()
        assert op.activations == 0

    def test_shape_mismatch(self):
        op = BlackBoxOperator(lambda x: x[:1], "crop")
        with pytest.raises(ValueError):
            op(np.ones((3, 3)))

    def test_thread_safe_counter(self):
        op = BlackBoxOperator(lambda x: x + 1, "inc")
        x = np.zeros((2, 2))

        def work():
            for _ in range(500):
                op.evaluate(x)

        threads = [threading.Thread(target=work) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert op.activations == 4000

    def test_as_operator(self):
        assert as_operator("identity").label == "identity"
        op = as_operator(lambda x: x)
        assert as_operator(op) is op
        with pytest.raises(TypeError):
            as_operator(3)


class TestCompose:
    def test_identity_pair(self, rng):
        x = rng.random((6, 6))
        assert np.array_equal(compose(["identity", "identity"])(x), x)

    def test_left_to_right(self, rng):
        x = rng.random((8, 8))
        op = compose(["gamma:g=0.5", "scale:c=3"])
        assert np.allclose(op(x), 3 * np.sqrt(x))

    def test_activation_sum(self):
        a = BlackBoxOperator(lambda x: x, "a")
        b = BlackBoxOperator(lambda x: x, "b")
        c = compose([a, b])
        c(np.zeros((2, 2)))
        c(np.zeros((2, 2)))
        assert a.activations == b.activations == 2
        assert c.activations == 4

    def test_empty(self):
        with pytest.raises(ValueError):
            compose([])
        with pytest.raises(ValueError):
            CompositeOperator([])
        with pytest.raises(SpecParseError):
            parse_spec("compose:[]")

    def test_composite_example(self, rng):
        x = rng.random((32, 32))
        op = build_operator("compose:[unsharp:base=[bilat:ss=10,sr=3],alpha=1;gamma:g=0.65]")
        b = filters.bilateral(x, 10, 3)
        assert np.allclose(op(x), filters.gamma_map(2 * x - b, 0.65))


class TestSpecExamples:
    def test_unsharp_identity_cases(self, rng):
        x = rng.random((10, 10))
        assert np.array_equal(build_operator("unsharp:base=[gauss:size=3,sigma=1],alpha=0")(x), x)
        assert np.array_equal(build_operator("unsharp:base=identity,alpha=5")(x), x)

    def test_sharpening_spec(self, rng):
        x = rng.random((16, 16))
        op = build_operator("unsharp:base=[bilat:ss=2,sr=1.5],alpha=1")
        assert np.allclose(op(x), 2 * x - filters.bilateral(x, 2, 1.5))

    def test_repeat(self, rng):
        x = rng.random((16, 16))
        ref = filters.gaussian_blur(filters.gaussian_blur(x, 3, 1), 3, 1)
        assert np.allclose(build_operator("repeat:n=2,op=[gauss:size=3,sigma=1]")(x), ref)


class TestParser:
    @pytest.mark.parametrize("text", ZOO + ["scale:c=0.5", "resample:q=2,method=bicubic"])
    def test_round_trip_fixed_point(self, text):
        canon = parse_spec(text).canonical()
        assert parse_spec(canon).canonical() == canon

    def test_canonical_forms(self):
        assert parse_spec("gauss:sigma=1,size=5").canonical() == "gauss:size=5,sigma=1"
        assert parse_spec("bilat:ss=2,sr=1.5").canonical() == "bilat:ss=2,sr=1.5"
        assert parse_spec("unsharp:base=identity").canonical() == "unsharp:base=[identity],alpha=1"
        assert parse_spec(" median : h = 2 , w = 2 ").canonical() == "median:h=2,w=2"

    def test_unbracketed_nested(self):
        spec = parse_spec("unsharp:base=bilat:ss=2,sr=1.5,alpha=0.5")
        assert spec.params["alpha"] == 0.5
        assert spec.params["base"].canonical() == "bilat:ss=2,sr=1.5"

    @pytest.mark.parametrize(
        "text,column",
        [
            ("blur:size=3", 1),
            ("gauss:size=5,sigma=1,color=2", 22),
            ("gauss:size=5,sigma=1;", 21),
            ("gauss:size=5,size=5,sigma=1", 14),
            ("gauss:size=5,sigma=", 20),
            ("compose:[identity;warp]", 19),
            ("median:h=2", 1),
            ("gauss:size=2.5,sigma=1", 1),
        ],
    )
    def test_error_columns(self, text, column):
        with pytest.raises(SpecParseError) as info:
            parse_spec(text)
        assert info.value.column == column
        assert "^" in str(info.value)

    def test_validation(self):
        for bad in ["gauss:size=0,sigma=1", "sigmoid:a=-1", "resample:q=1", "resample:q=2,method=nearest",
                    "gamma:g=0", "repeat:n=0,op=identity", "dct:q=0", "disk:d=0"]:
            with pytest.raises(ValueError):
                parse_spec(bad)

    def test_compose_spec_invariants(self):
        with pytest.raises(ValueError):
            OperatorSpec("compose", children=())
        with pytest.raises(ValueError):
            OperatorSpec("gauss", {"size": 3, "sigma": 1}, children=(OperatorSpec("identity"),))


_leaf = st.one_of(
    st.builds(lambda s, g: f"gauss:size={s},sigma={g}", st.integers(1, 9), st.floats(0.1, 9).map(lambda v: round(v, 3))),
    st.builds(lambda d: f"disk:d={d}", st.integers(1, 9)),
    st.builds(lambda a, b: f"bilat:ss={a},sr={b}", st.floats(0.5, 5).map(lambda v: round(v, 2)), st.floats(0.01, 3)),
    st.builds(lambda h, w: f"median:h={h},w={w}", st.integers(1, 5), st.integers(1, 5)),
    st.builds(lambda g: f"gamma:g={g}", st.floats(0.1, 3)),
    st.just("identity"),
)
_specs = st.recursive(
    _leaf,
    lambda inner: st.one_of(
        st.builds(lambda b, a: f"unsharp:base=[{b}],alpha={a}", inner, st.floats(-2, 2)),
        st.builds(lambda n, o: f"repeat:n={n},op=[{o}]", st.integers(1, 4), inner),
        st.lists(inner, min_size=1, max_size=3).map(lambda xs: "compose:[" + ";".join(xs) + "]"),
    ),
    max_leaves=6,
)


@settings(max_examples=150, deadline=None)
@given(_specs)
def test_canonical_round_trip_property(text):
    spec = parse_spec(text)
    canon = spec.canonical()
    again = parse_spec(canon)
    assert again == spec
    assert again.canonical() == canon


class TestZooInvariants:
    @pytest.mark.parametrize("text", ZOO)
    def test_null_preserving(self, text):
        out = build_operator(text)(np.zeros((32, 32)))
        assert np.abs(out).max() <= 1e-12

    @pytest.mark.parametrize("text", CONSTANT_PRESERVING)
    def test_constant_preserving(self, text):
        out = build_operator(text)(np.full((32, 32), 0.42))
        assert np.abs(out - 0.42).max() <= 1e-9

    @pytest.mark.parametrize("text", ZOO)
    def test_deterministic_and_shape_preserving(self, text, rng):
        op = build_operator(text)
        x = rng.random((32, 40))
        a, b = op(x), op(x)
        assert a.shape == x.shape
        assert np.array_equal(a, b)

    @pytest.mark.parametrize("text", ZOO)
    def test_color(self, text, rng):
        x = rng.random((16, 16, 3))
        out = build_operator(text)(x)
        assert out.shape == x.shape
        assert np.all(np.isfinite(out))

    def test_every_family_in_zoo(self):
        used = {parse_spec(s).kind for s in ZOO} | {"scale"}
        assert used == set(FAMILIES)

    def test_identity_helper(self, rng):
        x = rng.random((4, 4))
        assert np.array_equal(identity()(x), x)
