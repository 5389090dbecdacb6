import math
import numpy as np
import pytest
import torch
from hypothesis import given, settings, strategies as st

from dycil.attention import SpatialAttention, SpatialAttentionLayer, TemporalAttention
from dycil.graph import DynamicGraph, Snapshot
from dycil.model import DyCIL, prepare
from dycil.objective import TrainConfig
import oracles


def _identity_layer(d):
    layer = SpatialAttentionLayer(d, d)
    with torch.no_grad():
        for lin in (layer.q, layer.k, layer.v):
            lin.weight.copy_(torch.eye(d))
    return layer


def test_single_neighbor_takes_its_value():
    layer = _identity_layer(2)
    x = torch.tensor([[1.0, 2.0], [3.0, -1.0]])
    out = layer(x, torch.tensor([[0, 1]]), torch.tensor([0.7]))
    torch.testing.assert_close(out[0], x[1])


def test_symmetric_neighbors_split_evenly():
    layer = _identity_layer(2)
    x = torch.tensor([[1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])
    dst, src, beta = layer.attention_weights(x, torch.tensor([[0, 1], [0, 2]]), torch.tensor([0.4, 0.4]))
    torch.testing.assert_close(beta[dst == 0], torch.tensor([0.5, 0.5]), rtol=0, atol=1e-15)


def test_three_neighbor_softmax_by_hand():
    layer = _identity_layer(2)
    x = torch.tensor([[1.0, 2.0], [0.5, 0.0], [-1.0, 1.0], [2.0, 2.0]])
    alpha = torch.tensor([0.3, 0.6, 0.9])
    dst, src, beta = layer.attention_weights(x, torch.tensor([[0, 1], [0, 2], [0, 3]]), alpha)
    logits = [(0.5) / math.sqrt(2) * 0.3, (1.0) / math.sqrt(2) * 0.6, (6.0) / math.sqrt(2) * 0.9]
    z = sum(math.exp(l) for l in logits)
    want = [math.exp(l) / z for l in logits]
    got = beta[dst == 0].detach()
    assert src[dst == 0].tolist() == [1, 2, 3]
    np.testing.assert_allclose(got.numpy(), want, rtol=0, atol=1e-12)


def test_isolated_node_keeps_value():
    torch.manual_seed(0)
    layer = SpatialAttentionLayer(3, 4)
    x = torch.randn(3, 3)
    out = layer(x, torch.tensor([[0, 1]]), torch.tensor([0.5]))
    torch.testing.assert_close(out[2], layer.v(x)[2])
    assert torch.isfinite(layer(x, torch.zeros(0, 2, dtype=torch.long), torch.zeros(0))).all()


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([1, 2, 4]))
def test_attention_weights_sum_to_one(seed, heads):
    g = torch.Generator().manual_seed(seed)
    n = 8
    pairs = torch.combinations(torch.arange(n), 2)
    edges = pairs[torch.rand(len(pairs), generator=g) < 0.4]
    if len(edges) == 0:
        edges = pairs[:1]
    torch.manual_seed(seed)
    layer = SpatialAttentionLayer(5, 8, heads=heads)
    x = 3 * torch.randn(n, 5, generator=g)
    alpha = torch.rand(len(edges), generator=g)
    dst, _, beta = layer.attention_weights(x, edges, alpha)
    beta = beta.reshape(len(dst), -1)
    sums = torch.zeros(n, beta.shape[1]).index_add(0, dst, beta)
    has = torch.zeros(n, dtype=torch.bool)
    has[dst] = True
    assert torch.all((sums[has] - 1).abs() <= 1e-6)


def test_alpha_raises_weight_when_logits_tie():
    layer = _identity_layer(2)
    x = torch.tensor([[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]])
    edges = torch.tensor([[0, 1], [0, 2]])
    prev = None
    for a in (0.1, 0.3, 0.6, 0.9):
        dst, src, beta = layer.attention_weights(x, edges, torch.tensor([a, 0.1]))
        w = float(beta[(dst == 0) & (src == 1)].detach())
        if prev is not None:
            assert w > prev
        prev = w


def test_temporal_single_step_and_uniform():
    torch.manual_seed(1)
    att = TemporalAttention(3, 2)
    spatial = torch.randn(1, 2, 3)
    te = torch.randn(1, 2)
    z, valid, gamma = att(spatial, torch.ones(1, 2, dtype=torch.bool), te)
    s = torch.cat([spatial[0], te.expand(2, 2)], -1)
    torch.testing.assert_close(z[0], att.v(s))

    same = torch.randn(1, 1, 3).expand(4, 1, 3)
    te_zero = torch.tensor([[1.0, 0.0]]).expand(4, 2)  # TE with zero frequencies
    _, _, gamma = att(same, torch.ones(4, 1, dtype=torch.bool), te_zero)
    torch.testing.assert_close(gamma[0, 3], torch.full((4,), 0.25), rtol=0, atol=1e-15)


def test_temporal_three_steps_by_hand():
    torch.manual_seed(2)
    att = TemporalAttention(2, 2)
    spatial = torch.randn(3, 1, 2)
    te = torch.randn(3, 2)
    z, _, gamma = att(spatial, torch.ones(3, 1, dtype=torch.bool), te)
    want = oracles.temporal([spatial[i, 0].numpy() for i in range(3)], [te[i].numpy() for i in range(3)], att)
    np.testing.assert_allclose(z[2, 0].detach().numpy(), want, atol=1e-12)
    assert torch.all(gamma[0].triu(1) == 0)
    torch.testing.assert_close(gamma[0].sum(-1), torch.ones(3), rtol=0, atol=1e-6)


def test_temporal_history_skips_absent_steps():
    torch.manual_seed(3)
    att = TemporalAttention(2, 2)
    present = torch.tensor([[False], [True], [True]])
    _, valid, gamma = att(torch.randn(3, 1, 2), present, torch.randn(3, 2))
    assert valid[:, 0].tolist() == [False, True, True]
    assert gamma[0, 2, 0] == 0 and gamma[0, 0].sum() == 0
    assert abs(float(gamma[0, 2].sum().detach()) - 1) <= 1e-6


def _five_node_graph():
    rng = np.random.default_rng(7)
    s1 = Snapshot(1, [0, 1, 2, 3], [(0, 1), (1, 2), (2, 3), (0, 2)], rng.standard_normal((4, 4)), [0, 1, 2, 0])
    s2 = Snapshot(2, [0, 1, 2, 3, 4], [(0, 1), (1, 2), (3, 4), (1, 4), (0, 3)], rng.standard_normal((5, 4)),
                  [1, 0, 2, 1, 0])
    return DynamicGraph((s1, s2), 4, 3)


@pytest.mark.parametrize("layers", [1, 2])
def test_forward_matches_hand_oracle(layers):
    torch.manual_seed(0)
    graph = _five_node_graph()
    model = DyCIL(4, TrainConfig(r=0.6, hidden_dim=6, attention_layers=layers), 3)
    pg = prepare(graph)
    with torch.no_grad():
        out = model(pg)
    alphas = [s.numpy() for s in out.scores]
    want = oracles.forward_invariant(graph, model, out.causal_index, alphas)
    for (t, n), vec in want.items():
        g = int(np.flatnonzero(pg.node_ids == n)[0])
        np.testing.assert_allclose(out.z[t - 1, g].numpy(), vec, rtol=0, atol=1e-8)
    # node 4 is absent at t=1 and has no embedding there
    assert not out.valid[0, 4] and out.valid[1, 4]


def test_future_snapshots_do_not_leak():
    torch.manual_seed(0)
    graph = _five_node_graph()
    model = DyCIL(4, TrainConfig(hidden_dim=6), 3)
    s2 = graph[2]
    changed = Snapshot(2, s2.node_ids, [(0, 4), (2, 3)], s2.features + 1.0, s2.labels)
    other = DynamicGraph((graph[1], changed), 4, 3)
    with torch.no_grad():
        a = model(prepare(graph)).z[0]
        b = model(prepare(other)).z[0]
    torch.testing.assert_close(a, b, rtol=0, atol=0)


def test_no_am_equals_forced_unit_scores():
    torch.manual_seed(5)
    graph = _five_node_graph()
    model = DyCIL(4, TrainConfig(hidden_dim=6, no_am=True), 3)
    pg = prepare(graph)
    with torch.no_grad():
        out = model(pg)
        alphas = [np.ones_like(s.numpy()) for s in out.scores]
    want = oracles.forward_invariant(graph, model, out.causal_index, alphas)
    for (t, n), vec in want.items():
        np.testing.assert_allclose(out.z[t - 1, n].numpy(), vec, atol=1e-8)


def test_no_sg_uses_every_edge():
    torch.manual_seed(5)
    graph = _five_node_graph()
    model = DyCIL(4, TrainConfig(hidden_dim=6, no_sg=True), 3)
    out = model(prepare(graph))
    for t, snap in enumerate(graph, start=1):
        assert sorted(out.causal_index[t - 1]) == list(range(snap.num_edges))
        assert sorted(out.variant_index[t - 1]) == list(range(snap.num_edges))
        assert out.scores[t - 1] is None


def test_spatial_gradient_matches_finite_differences():
    torch.manual_seed(6)
    att = SpatialAttention(3, 3, num_layers=2)
    x = torch.randn(4, 3)
    edges = torch.tensor([[0, 1], [1, 2], [2, 3]])
    alpha = torch.tensor([0.3, 0.8, 0.5])
    att(x, edges, alpha).sum().backward()
    eps = 1e-5
    for p in att.parameters():
        for idx in np.ndindex(*p.shape):
            with torch.no_grad():
                p[idx] += eps
                up = att(x, edges, alpha).sum()
                p[idx] -= 2 * eps
                down = att(x, edges, alpha).sum()
                p[idx] += eps
            fd = float((up - down) / (2 * eps))
            g = float(p.grad[idx])
            assert abs(fd - g) <= 1e-4 * max(abs(fd), abs(g)) + 1e-9


def test_optional_extras_change_the_layer():
    torch.manual_seed(7)
    plain = SpatialAttentionLayer(3, 3)
    extra = SpatialAttentionLayer(3, 3, activation="elu", residual=True)
    extra.load_state_dict(plain.state_dict())
    x = torch.randn(3, 3)
    edges = torch.tensor([[0, 1], [1, 2]])
    a = torch.tensor([0.5, 0.5])
    torch.testing.assert_close(extra(x, edges, a), torch.nn.functional.elu(plain(x, edges, a) + x))
