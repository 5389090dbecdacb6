"""Loop-based reference implementations used as independent oracles.

Everything here works on plain numpy arrays and python loops, and only reads
parameter values out of the modules under test.
"""
import math

import numpy as np


def np_(t):
    return t.detach().cpu().numpy().astype(np.float64)


def te(t, freqs):
    d = 2 * len(freqs)
    out = []
    for w in freqs:
        out += [math.cos(w * t), math.sin(w * t)]
    return np.array(out) * math.sqrt(1.0 / d)


def neighbors(n, edges):
    nb = [[] for _ in range(n)]
    for u, v in edges:
        nb[u].append(v)
        nb[v].append(u)
    return nb


def gcn(x, edges, W, b):
    """Symmetric-normalized propagation with self loops, after the linear map x W^T + b."""
    n = x.shape[0]
    h = x @ W.T + (b if b is not None else 0.0)
    nb = neighbors(n, edges)
    deg = [1 + len(nb[i]) for i in range(n)]
    out = np.zeros_like(h)
    for i in range(n):
        out[i] = h[i] / deg[i]
        for j in nb[i]:
            out[i] += h[j] / math.sqrt(deg[i] * deg[j])
    return out


def st_input(x, degrees, t, enc):
    freqs = np_(enc.time_encoder.frequencies)
    table = np_(enc.degree.table.weight)
    W = np_(enc.proj.weight)
    rows = []
    for i in range(x.shape[0]):
        d = min(int(degrees[i]), enc.degree.max_degree + 1)
        rows.append(W @ (x[i] + table[d] + te(t, freqs)))
    return np.array(rows)


def relu(a):
    return np.maximum(a, 0.0)


def sigmoid(a):
    return 1.0 / (1.0 + math.exp(-a))


def edge_scores(h, edges, scorer):
    g1, g2 = scorer.gcn1.linear, scorer.gcn2.linear
    z = gcn(relu(gcn(h, edges, np_(g1.weight), np_(g1.bias))), edges, np_(g2.weight), np_(g2.bias))
    l1, l2 = scorer.mlp[0], scorer.mlp[2]
    W1, b1, W2, b2 = np_(l1.weight), np_(l1.bias), np_(l2.weight), np_(l2.bias)

    def mlp(a):
        return float((W2 @ relu(W1 @ a + b1) + b2)[0])

    out = []
    for u, v in edges:
        fwd = mlp(np.concatenate([z[u], z[v]]))
        bwd = mlp(np.concatenate([z[v], z[u]]))
        out.append(sigmoid(0.5 * (fwd + bwd)))
    return np.array(out)


def spatial_layer(x, edges, alpha, layer):
    Wq, Wk, Wv = np_(layer.q.weight), np_(layer.k.weight), np_(layer.v.weight)
    n = x.shape[0]
    dprime = Wq.shape[0]
    nb = [[] for _ in range(n)]
    for (u, v), a in zip(edges, alpha):
        nb[u].append((v, a))
        nb[v].append((u, a))
    out = np.zeros((n, dprime))
    for u in range(n):
        if not nb[u]:
            out[u] = Wv @ x[u]
            continue
        q = Wq @ x[u]
        logits = [float(q @ (Wk @ x[v])) / math.sqrt(dprime) * a for v, a in nb[u]]
        m = max(logits)
        ex = [math.exp(l - m) for l in logits]
        s = sum(ex)
        for (v, _), e in zip(nb[u], ex):
            out[u] += e / s * (Wv @ x[v])
    return out


def temporal(histories, te_rows, temporal_module):
    """histories: list over t' of spatial vector for one node (only timestamps where it is present).

    te_rows: matching TE(t') rows. Returns the output at the last timestamp.
    """
    Wq, Wk, Wv = np_(temporal_module.q.weight), np_(temporal_module.k.weight), np_(temporal_module.v.weight)
    d = Wq.shape[0]
    s = [np.concatenate([h, e]) for h, e in zip(histories, te_rows)]
    q = Wq @ s[-1]
    logits = [float(q @ (Wk @ si)) / math.sqrt(d) for si in s]
    m = max(logits)
    ex = [math.exp(l - m) for l in logits]
    tot = sum(ex)
    return sum(e / tot * (Wv @ si) for e, si in zip(ex, s))


def forward_invariant(graph, model, causal_index, alphas):
    """Embedding of every present node at every t, given the causal split and scores per snapshot.

    Returns dict (t, node_id) -> vector.
    """
    freqs = np_(model.time_encoder.frequencies)
    spatial = {}
    for snap in graph.snapshots:
        t = snap.timestamp
        x = np.array(snap.features, dtype=np.float64)
        h = st_input(x, snap.degrees(), t, model.st_input)
        le = snap.local_edges()
        idx = list(causal_index[t - 1])
        edges = [tuple(le[i]) for i in idx]
        a = [alphas[t - 1][i] for i in idx]
        for layer in model.spatial.layers:
            h = spatial_layer(h, edges, a, layer)
        for i, n in enumerate(snap.node_ids):
            spatial[(t, int(n))] = h[i]
    out = {}
    for snap in graph.snapshots:
        t = snap.timestamp
        for n in snap.node_ids:
            n = int(n)
            hist = [(tp, spatial[(tp, n)]) for tp in range(1, t + 1) if (tp, n) in spatial]
            out[(t, n)] = temporal([h for _, h in hist], [te(tp, freqs) for tp, _ in hist], model.temporal)
    return out


def bfs_within(adj, src, L):
    dist = {src: 0}
    queue = [src]
    while queue:
        u = queue.pop(0)
        if dist[u] == L:
            continue
        for v in adj.get(u, ()):
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    dist.pop(src)
    return set(dist)
