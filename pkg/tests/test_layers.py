import math
import zlib

import numpy as np
import pytest

from helpers import numeric_grad, path_graph, random_graph, rel_error
from specae import tensor as T
from specae.errors import ContractError, DimensionError
from specae.graph import normalize_propagation
from specae.layers import (
    ConvLayer,
    Dense,
    DenseAutoencoder,
    DeconvLayer,
    GraphDecoder,
    VariationalGraphEncoder,
    ae_decode,
    ae_encode,
    conv_forward,
    deconv_forward,
    kl_to_standard_normal,
    reparameterize,
    variational_encode,
)
from specae.optim import Adam


def identity_ae(m, activation="identity"):
    return DenseAutoencoder(
        [Dense(np.eye(m), np.zeros((1, m)), activation, "enc")],
        [Dense(np.eye(m), np.zeros((1, m)), "identity", "dec")],
    )


class TestDenseAutoencoder:
    def test_identity_encoder(self, rng):
        X = rng.standard_normal((4, 3))
        np.testing.assert_array_equal(ae_encode(identity_ae(3), X).data, X)

    def test_relu(self):
        Z = ae_encode(identity_ae(2, "relu"), [[1.0, -1.0]])
        np.testing.assert_array_equal(Z.data, [[1.0, 0.0]])

    def test_decode_shape(self, rng):
        ae = DenseAutoencoder.build(5, 7, 2, rng)
        assert ae_decode(ae, np.zeros((3, 2))).shape == (3, 5)
        assert ae.code_width == 2

    def test_width_mismatch(self, rng):
        ae = DenseAutoencoder.build(5, 7, 2, rng)
        with pytest.raises(DimensionError):
            ae_encode(ae, np.zeros((3, 4)))

    def test_reconstruction_error_decreases(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((4, 3))
        ae = DenseAutoencoder.build(3, 16, 2, rng)
        opt = Adam(ae.parameters(), lr=1e-3)
        errors = []
        for _ in range(50):
            opt.zero_grad()
            err = T.reduce_mean(T.square(ae_decode(ae, ae_encode(ae, X)) - X))
            errors.append(err.item())
            err.backward()
            opt.step()
        assert all(b < a for a, b in zip(errors, errors[1:]))


def two_node():
    return normalize_propagation(path_graph(2))


class TestConv:
    @pytest.mark.parametrize("inside", [False, True])
    def test_alpha_zero(self, rng, inside):
        g = random_graph(6, 3, rng)
        layer = ConvLayer(np.eye(3), 0.0, "identity", inside)
        np.testing.assert_allclose(conv_forward(layer, normalize_propagation(g), g.X).data, g.X)

    def test_alpha_one(self, rng):
        g = random_graph(6, 3, rng)
        S = normalize_propagation(g)
        out = conv_forward(ConvLayer(np.eye(3), 1.0, "identity"), S, g.X)
        np.testing.assert_allclose(out.data, S.toarray() @ g.X, atol=1e-14)

    def test_two_node(self):
        out = conv_forward(ConvLayer(np.eye(1), 0.5, "identity"), two_node(), [[1.0], [0.0]])
        np.testing.assert_allclose(out.data, [[0.75], [0.25]], atol=1e-15)

    def test_alpha_range(self):
        with pytest.raises(ContractError):
            ConvLayer(np.eye(1), 1.5)

    def test_activation_placement(self):
        S = two_node()
        H = [[3.0], [1.0]]
        W = [[-1.0]]
        # mixed = [[2.5], [1.5]] at alpha 0.5
        outside = ConvLayer(W, 0.5, "relu", weights_inside_activation=False)(S, H)
        inside = ConvLayer(W, 0.5, "relu", weights_inside_activation=True)(S, H)
        np.testing.assert_allclose(outside.data, [[-2.5], [-1.5]])
        np.testing.assert_allclose(inside.data, [[0.0], [0.0]])


class TestDeconv:
    def test_alpha_zero(self, rng):
        g = random_graph(6, 3, rng)
        out = deconv_forward(DeconvLayer(np.eye(3), 0.0, "identity"), normalize_propagation(g), g.X)
        np.testing.assert_allclose(out.data, g.X)

    @pytest.mark.parametrize("alpha", [0.0, 0.3, 0.7, 1.0])
    def test_stationary_vector_fixed(self, rng, alpha):
        S = normalize_propagation(random_graph(12, 1, rng))
        v = S.stationary_vector().reshape(-1, 1)
        out = deconv_forward(DeconvLayer(np.eye(1), alpha, "identity"), S, v)
        np.testing.assert_allclose(out.data, v, atol=1e-12)

    def test_two_node(self):
        out = deconv_forward(DeconvLayer(np.eye(1), 0.5, "identity"), two_node(), [[1.0], [0.0]])
        np.testing.assert_allclose(out.data, [[1.25], [-0.25]], atol=1e-15)

    def test_row_mismatch(self):
        with pytest.raises(DimensionError):
            DeconvLayer(np.eye(1), 0.5)(two_node(), np.ones((3, 1)))


class TestVariationalEncoder:
    def setup_method(self):
        rng = np.random.default_rng(3)
        self.graph = random_graph(8, 5, rng)
        self.S = normalize_propagation(self.graph)
        self.enc = VariationalGraphEncoder.build(5, 6, 2, rng)

    def test_eval_mode_returns_mean(self):
        Z, mu, _ = variational_encode(self.enc, self.S, self.graph.X, train_mode=False)
        assert Z is mu

    def test_zero_noise_returns_mean(self):
        Z, mu, _ = variational_encode(self.enc, self.S, self.graph.X, train_mode=True, noise=0.0)
        np.testing.assert_array_equal(Z.data, mu.data)

    def test_train_mode_samples(self):
        rng = np.random.default_rng(0)
        Z, mu, logsigma = variational_encode(self.enc, self.S, self.graph.X, rng)
        eps = np.random.default_rng(0).standard_normal(mu.shape)
        np.testing.assert_allclose(Z.data, mu.data + np.exp(logsigma.data) * eps)

    def test_clamp(self):
        Z = reparameterize(T.Tensor([[0.0]]), T.Tensor([[50.0]]), noise=1.0)
        assert Z.item() == pytest.approx(math.exp(10.0))

    def test_logsigma_head_clamped(self):
        self.enc.logsigma_head.W.data = self.enc.logsigma_head.W.data * 1e6
        _, logsigma = self.enc.moments(self.S, self.graph.X)
        assert np.abs(logsigma.data).max() <= 10.0


class TestKL:
    def test_prior(self):
        assert kl_to_standard_normal(np.zeros((3, 2)), np.zeros((3, 2))).item() == 0.0

    def test_shifted_mean(self):
        assert kl_to_standard_normal([[1.0]], [[0.0]]).item() == pytest.approx(0.5, abs=1e-15)

    def test_wide(self):
        value = kl_to_standard_normal([[0.0]], [[1.0]]).item()
        assert value == pytest.approx(0.5 * (math.e ** 2 - 3), abs=1e-12)
        assert value == pytest.approx(2.19453, abs=1e-5)

    def test_averaged_over_rows(self):
        one = kl_to_standard_normal([[1.0, 0.5]], [[0.2, -0.3]]).item()
        many = kl_to_standard_normal([[1.0, 0.5]] * 4, [[0.2, -0.3]] * 4).item()
        assert many == pytest.approx(one)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            kl_to_standard_normal(np.zeros((2, 2)), np.zeros((2, 3)))


def _layer_stacks():
    """Named (params, forward) pairs covering every trainable layer type."""
    rng = np.random.default_rng(11)
    g = random_graph(7, 4, rng, p=0.4)
    S = normalize_propagation(g)
    X = g.X
    noise = rng.standard_normal((7, 3))
    ae = DenseAutoencoder.build(4, 5, 3, rng)
    # zero biases can map a dead hidden row exactly onto the next relu's kink
    for key, p in ae.parameters().items():
        if key.endswith(".b"):
            p.data = rng.uniform(0.1, 0.5, p.shape)
    stacks = {"dense_ae": (ae.parameters(), lambda: ae.decode(ae.encode(T.Tensor(X))))}
    for inside in (False, True):
        enc = VariationalGraphEncoder.build(4, 5, 3, rng, weights_inside_activation=inside)
        dec = GraphDecoder.build(3, 5, 4, rng, weights_inside_activation=inside)
        params = {**enc.parameters(), **dec.parameters()}

        def fwd(enc=enc, dec=dec):
            Z, mu, ls = variational_encode(enc, S, X, noise=noise)
            return T.concat([dec(S, Z), kl_to_standard_normal(mu, ls) * np.ones((7, 1))], axis=1)

        stacks[f"graph_vae_inside={inside}"] = (params, fwd)
    return stacks


STACKS = _layer_stacks()


@pytest.mark.parametrize("name", sorted(STACKS))
def test_layer_stack_gradients(name):
    params, fwd = STACKS[name]
    rng = np.random.default_rng(zlib.crc32(name.encode()))
    weights = rng.standard_normal(fwd().shape)

    def f():
        return float((fwd().data * weights).sum())

    for p in params.values():
        p.zero_grad()
    (fwd() * weights).sum().backward()
    for key, p in params.items():
        entries = [tuple(rng.integers(0, s) for s in p.shape) for _ in range(6)]
        numeric = numeric_grad(f, p, entries)
        analytic = np.array([p.grad[e] for e in entries])
        assert rel_error(analytic, numeric).max() <= 1e-4, key
