import json
from fractions import Fraction as F

import numpy as np
import pytest

from sinet.gadgets import mid3
from sinet.bits import extract_bits
from sinet.netcore import (
    AffineLayer,
    ParseError,
    ReluNet,
    SizeBudget,
    compose,
    deserialize,
    evaluate,
    fanout,
    identity_net,
    linear_net,
    pad_to_depth,
    parallel,
    passthrough,
    serialize,
    size,
    stack,
)


def hat():
    # 2 relu(x) - 4 relu(x - 1/2) + 2 relu(x - 1)
    l1 = AffineLayer([[1], [1], [1]], [0, F(-1, 2), -1])
    l2 = AffineLayer([[2, -4, 2]], [0])
    return ReluNet([l1, l2])


def relu_net():
    return ReluNet([AffineLayer([[1]], [0]), AffineLayer([[1]], [0])])


def random_net(rng, dims):
    layers = [AffineLayer(rng.normal(size=(o, i)).round(3).tolist(), rng.normal(size=o).round(3).tolist())
              for i, o in zip(dims[:-1], dims[1:])]
    return ReluNet(layers)


def test_identity_eval():
    assert evaluate(identity_net(1), np.array([0.5]))[0] == 0.5


def test_relu_negative_input():
    assert evaluate(relu_net(), np.array([-1.0]))[0] == 0.0


def test_hat_peak():
    assert evaluate(hat(), np.array([0.5]))[0] == 1.0


def test_rational_mode_returns_fractions():
    out = evaluate(hat(), np.array([F(1, 3)], dtype=object), "rational")
    assert out[0] == F(2, 3) and isinstance(out[0], F)


def test_env_selects_mode(monkeypatch):
    monkeypatch.setenv("SINET_MODE", "rational")
    out = evaluate(hat(), np.array([F(1, 3)], dtype=object))
    assert out[0] == F(2, 3)


def test_bad_env_mode(monkeypatch):
    monkeypatch.setenv("SINET_MODE", "decimal")
    with pytest.raises(ValueError):
        evaluate(hat(), np.array([0.1]))


def test_input_dimension_checked():
    with pytest.raises(ValueError):
        evaluate(hat(), np.array([0.1, 0.2]))


def test_batch_shape():
    out = evaluate(hat(), np.array([[0.0], [0.25], [0.5]]))
    assert out.shape == (3, 1)
    assert out[:, 0].tolist() == [0.0, 0.5, 1.0]


def test_layer_chain_checked():
    with pytest.raises(ValueError):
        ReluNet([AffineLayer([[1, 1]], [0]), AffineLayer([[1, 1]], [0])])


def test_bias_length_checked():
    with pytest.raises(ValueError):
        AffineLayer([[1, 2]], [0, 1])


def test_compose_identities():
    net = compose(identity_net(1), identity_net(1))
    assert net.depth == 1
    assert evaluate(net, np.array([0.7]))[0] == 0.7


def test_compose_hat_hat_is_second_tooth():
    net = compose(hat(), hat())
    assert evaluate(net, np.array([F(1, 4)], dtype=object), "rational")[0] == 1


def test_compose_depth_rule():
    a = compose(hat(), relu_net())  # depth 3
    assert a.depth == 3
    assert compose(a, a).depth == 5


def test_compose_dimension_mismatch():
    with pytest.raises(ValueError):
        compose(identity_net(2), identity_net(1))


def test_compose_matches_sequential(rng):
    for _ in range(20):
        a = random_net(rng, [3, 5, 4, 2])
        b = random_net(rng, [2, 6, 3])
        x = rng.normal(size=(50, 3))
        want = evaluate(b, evaluate(a, x))
        got = evaluate(compose(a, b), x)
        assert np.allclose(got, want, rtol=1e-12, atol=1e-12)


def test_compose_exact_in_rational(rng):
    a = random_net(rng, [2, 3, 2])
    b = random_net(rng, [2, 4, 1])
    x = np.array([[F(1, 3), F(-2, 7)], [F(5, 2), F(1, 9)]], dtype=object)
    want = evaluate(b, evaluate(a, x, "rational"), "rational")
    assert (evaluate(compose(a, b), x, "rational") == want).all()


def test_stack_identities():
    out = evaluate(stack([identity_net(1), identity_net(1)]), np.array([0.3, 0.7]))
    assert out.tolist() == [0.3, 0.7]


def test_stack_hat_and_relu():
    out = evaluate(stack([hat(), relu_net()]), np.array([0.5, -1.0]))
    assert out.tolist() == [1.0, 0.0]


def test_stack_width_is_sum(rng):
    nets = [random_net(rng, [2, 3, 1]), random_net(rng, [1, 5, 2])]
    assert stack(nets).width == 8


def test_stack_unequal_depth_without_padding():
    with pytest.raises(ValueError):
        stack([hat(), compose(hat(), hat())], depth_pad=False)


def test_stack_pads_signed_by_default():
    net = stack([identity_net(1), compose(hat(), hat())])
    assert net.depth == 3
    assert evaluate(net, np.array([-2.5, 0.25]))[0] == -2.5


def test_stack_of_bit_nets_width():
    r = 3
    net = stack([extract_bits(6, F(1, 256), r)] * 2)
    assert net.width == 2 * (2 ** (r + 1) + 1) <= 2 * 2 ** (r + 1) + 6


def test_passthrough_variants():
    assert evaluate(passthrough(1, "nonneg", 3), np.array([0.8]))[0] == 0.8
    assert evaluate(passthrough(1, "signed", 3), np.array([-2.5]))[0] == -2.5
    assert evaluate(passthrough(1, "nonneg", 3), np.array([-1.0]))[0] == 0.0
    assert passthrough(2, "nonneg", 3).width == 2
    assert passthrough(2, "signed", 3).width == 4
    with pytest.raises(ValueError):
        passthrough(1, "both")


def test_pad_to_depth():
    net = pad_to_depth(hat(), 4, "nonneg")
    assert net.depth == 4
    assert evaluate(net, np.array([0.5]))[0] == 1.0
    with pytest.raises(ValueError):
        pad_to_depth(compose(hat(), hat()), 2)


def test_parallel_shares_input():
    net = parallel([hat(), relu_net()])
    assert evaluate(net, np.array([0.25])).tolist() == [0.5, 0.25]
    net = parallel([identity_net(1), identity_net(1)], input_maps=[[1], [0]])
    assert evaluate(net, np.array([1.0, 2.0])).tolist() == [2.0, 1.0]


def test_fanout():
    out = evaluate(fanout(2, [[0, 1], [1]]), np.array([3.0, 4.0]))
    assert out.tolist() == [3.0, 4.0, 4.0]


def test_size_conventions():
    assert size(identity_net(1)) == (1, 1, 2)
    assert size(hat()) == (3, 2, 10)
    assert linear_net([[1, 2, 3]]).width == 3


def test_mid_and_bits_sizes():
    w, dpt, _ = size(mid3())
    assert w <= 14 and dpt == 3
    assert size(extract_bits(6, F(1, 256), 3))[:2] == (17, 3)


def test_size_budget():
    assert SizeBudget(1, 1).admits(identity_net(1))
    assert not SizeBudget(2, 2).admits(hat())
    with pytest.raises(ValueError):
        SizeBudget(0, 3)


def test_lipschitz_bound(rng):
    net = random_net(rng, [2, 6, 6, 1])
    lip = net.lipschitz_bound()
    x = rng.normal(size=(200, 2))
    h = rng.normal(size=(200, 2))
    h *= 1e-9 / np.linalg.norm(h, axis=1, keepdims=True)
    diff = np.abs(evaluate(net, x + h) - evaluate(net, x))[:, 0]
    assert (diff <= lip * 1e-9 * (1 + 1e-6) + 1e-15).all()


def test_serialize_roundtrip_identity():
    assert deserialize(serialize(identity_net(1))) == identity_net(1)


def test_serialize_roundtrip_mid():
    net = deserialize(serialize(mid3()))
    assert net == mid3()
    assert evaluate(net, np.array([1.0, 2.0, 3.0]))[0] == 2.0


def test_sparse_roundtrip(rng):
    net = random_net(rng, [3, 4, 2])
    assert deserialize(serialize(net, sparse_layers=True)) == net


def test_wire_format_shape():
    doc = json.loads(serialize(hat()))
    assert doc["version"] == 1 and doc["input_dim"] == 1
    assert doc["layers"][1] == {"weights": [[2.0, -4.0, 2.0]], "bias": [0.0]}


def test_truncated_stream():
    data = serialize(mid3())
    with pytest.raises(ParseError):
        deserialize(data[: len(data) // 2])


def test_bad_layer_reports_index():
    doc = json.loads(serialize(hat()))
    doc["layers"][1]["weights"] = [[1.0, 2.0]]
    with pytest.raises(ParseError, match="layer 1"):
        deserialize(json.dumps(doc))


def test_wrong_version():
    doc = json.loads(serialize(hat()))
    doc["version"] = 7
    with pytest.raises(ParseError):
        deserialize(json.dumps(doc))
