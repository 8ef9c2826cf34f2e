import itertools

import numpy as np
import pytest

from qknn.errors import DimensionError, ParameterError
from qknn.graph import KnnGraph, build_knn_graph, incidence_apply
from qknn.tv_prox import ProxOptions, fused_lasso_prox, weighted_laplacian_solve


def make_graph(kind, n):
    if kind == "path":
        edges = [[i, i + 1] for i in range(n - 1)]
    elif kind == "star":
        edges = [[0, i] for i in range(1, n)]
    elif kind == "cycle":
        edges = [[i, i + 1] for i in range(n - 1)] + [[0, n - 1]]
    elif kind == "complete":
        edges = [[i, j] for i, j in itertools.combinations(range(n), 2)]
    else:
        raise ValueError(kind)
    return KnnGraph(n=n, k=n - 1, edges=np.array(sorted(edges)))


def prox_objective(G, v, gamma, z):
    return 0.5 * np.sum((v - z) ** 2) + gamma * np.abs(
        incidence_apply(G, z)
    ).sum()


class TestFusedLassoProx:
    def test_gamma_zero_identity(self):
        G = make_graph("path", 4)
        v = np.array([3.0, -1.0, 2.0, 0.5])
        z, dual = fused_lasso_prox(G, v, 0.0)
        assert np.array_equal(z, v)
        assert np.all(dual == 0.0)

    @pytest.mark.parametrize(
        "gamma,expected",
        [(0.5, [0.5, 1.5]), (2.0, [1.0, 1.0])],
    )
    def test_two_node_closed_form(self, gamma, expected):
        # each coordinate moves min(gamma, gap/2) toward the other
        G = KnnGraph(n=2, k=1, edges=np.array([[0, 1]]))
        z, _ = fused_lasso_prox(G, np.array([0.0, 2.0]), gamma)
        assert z == pytest.approx(expected, abs=1e-8)

    def test_constant_input_fixed(self):
        G = make_graph("complete", 5)
        v = np.full(5, 1.3)
        for gamma in (0.1, 1.0, 50.0):
            z, _ = fused_lasso_prox(G, v, gamma)
            assert z == pytest.approx(v, abs=1e-10)

    def test_kkt_certificate(self):
        rng = np.random.default_rng(0)
        G = build_knn_graph(rng.uniform(size=(30, 2)), 3)
        v = rng.normal(size=30)
        gamma = 0.4
        z, dual = fused_lasso_prox(G, v, gamma)
        # z = v - grad^T dual and the dual is feasible
        recon = v - G.incidence().T @ dual
        assert z == pytest.approx(recon, abs=1e-12)
        assert np.max(np.abs(dual)) <= gamma + 1e-12
        dz = incidence_apply(G, z)
        big = np.abs(dz) > 1e-7
        assert np.allclose(dual[big], gamma * np.sign(dz[big]), atol=1e-7)

    def test_nonexpansive(self):
        rng = np.random.default_rng(1)
        G = build_knn_graph(rng.uniform(size=(20, 2)), 4)
        for _ in range(10):
            v1 = rng.normal(size=20)
            v2 = rng.normal(size=20)
            z1, _ = fused_lasso_prox(G, v1, 0.8)
            z2, _ = fused_lasso_prox(G, v2, 0.8)
            assert np.linalg.norm(z1 - z2) <= np.linalg.norm(v1 - v2) + 1e-8

    def test_mean_preserved_per_component(self):
        # two disjoint paths
        edges = np.array([[0, 1], [1, 2], [3, 4]])
        G = KnnGraph(n=5, k=1, edges=edges)
        rng = np.random.default_rng(2)
        v = rng.normal(size=5)
        z, _ = fused_lasso_prox(G, v, 0.7)
        assert z[:3].sum() == pytest.approx(v[:3].sum(), abs=1e-8)
        assert z[3:].sum() == pytest.approx(v[3:].sum(), abs=1e-8)

    def test_monotone_fusion(self):
        rng = np.random.default_rng(3)
        G = build_knn_graph(rng.uniform(size=(15, 2)), 3)
        v = rng.normal(size=15)
        tv_prev = np.inf
        for gamma in (0.01, 0.1, 0.5, 1.0, 5.0, 50.0):
            z, _ = fused_lasso_prox(G, v, gamma)
            tv = np.abs(incidence_apply(G, z)).sum()
            assert tv <= tv_prev + 1e-7
            tv_prev = tv

    def test_two_node_grid_search(self):
        # exhaustive 1-D x 1-D grid at step 0.01, the literal brute force
        G = KnnGraph(n=2, k=1, edges=np.array([[0, 1]]))
        v = np.array([0.3, 1.7])
        gamma = 0.4
        z, _ = fused_lasso_prox(G, v, gamma)
        grid = np.arange(v.min() - 1.0, v.max() + 1.0, 0.01)
        best = min(
            prox_objective(G, v, gamma, np.array([a, b]))
            for a in grid
            for b in grid
        )
        assert prox_objective(G, v, gamma, z) <= best + 1e-4

    def test_warm_start_agrees(self):
        rng = np.random.default_rng(4)
        G = build_knn_graph(rng.uniform(size=(25, 2)), 3)
        v = rng.normal(size=25)
        z_cold, dual = fused_lasso_prox(G, v, 0.6)
        z_warm, _ = fused_lasso_prox(
            G, v + 0.01, 0.6, ProxOptions(warm_start=dual)
        )
        z_ref, _ = fused_lasso_prox(G, v + 0.01, 0.6)
        assert z_warm == pytest.approx(z_ref, abs=1e-6)
        assert np.linalg.norm(z_warm - z_cold) < 1.0

    def test_dimension_and_parameter_errors(self):
        G = make_graph("path", 3)
        with pytest.raises(DimensionError):
            fused_lasso_prox(G, np.zeros(4), 1.0)
        with pytest.raises(ParameterError):
            fused_lasso_prox(G, np.zeros(3), -1.0)


class TestWeightedLaplacianSolve:
    def test_lambda_zero_identity(self):
        G = make_graph("path", 4)
        y = np.array([1.0, 2.0, 3.0, 4.0])
        out = weighted_laplacian_solve(G, np.ones(4), np.ones(3), 0.0, y)
        assert np.array_equal(out, y)

    def test_two_node_hand_solve(self):
        # (I + D^T D) theta = y with D = [1, -1]: [[2,-1],[-1,2]] theta = (0,2)
        G = KnnGraph(n=2, k=1, edges=np.array([[0, 1]]))
        out = weighted_laplacian_solve(
            G, np.ones(2), np.ones(1), 1.0, np.array([0.0, 2.0])
        )
        assert out == pytest.approx([2.0 / 3.0, 4.0 / 3.0], rel=1e-12)

    @pytest.mark.parametrize("kind", ["path", "star", "cycle", "complete"])
    def test_matches_dense_oracle(self, kind):
        rng = np.random.default_rng(hash(kind) % 2**32)
        n = 8
        G = make_graph(kind, n)
        w_node = rng.uniform(0.5, 2.0, size=n)
        w_edge = rng.uniform(0.5, 2.0, size=G.m)
        lam = 0.7
        y = rng.normal(size=n)
        out = weighted_laplacian_solve(G, w_node, w_edge, lam, y)
        D = G.incidence().toarray()
        A = np.diag(w_node) + lam * D.T @ np.diag(w_edge**2) @ D
        ref = np.linalg.solve(A, w_node * y)
        assert out == pytest.approx(ref, rel=1e-9, abs=1e-12)

    def test_large_instance_residual(self):
        rng = np.random.default_rng(11)
        G = build_knn_graph(rng.uniform(size=(800, 2)), 5)
        w_node = rng.uniform(0.01, 100.0, size=800)
        w_edge = rng.uniform(0.1, 10.0, size=G.m)
        y = rng.normal(size=800)
        lam = 2.0
        theta = weighted_laplacian_solve(G, w_node, w_edge, lam, y)
        D = G.incidence()
        A = np.diag(w_node) + lam * (D.T.toarray() @ np.diag(w_edge**2) @ D.toarray())
        b = w_node * y
        assert np.linalg.norm(A @ theta - b) <= 1e-10 * np.linalg.norm(b)

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(6)
        n = 12
        G = build_knn_graph(rng.uniform(size=(n, 2)), 3)
        w_node = rng.uniform(0.5, 2.0, size=n)
        w_edge = rng.uniform(0.5, 2.0, size=G.m)
        y = rng.normal(size=n)
        out = weighted_laplacian_solve(G, w_node, w_edge, 1.0, y)

        perm = rng.permutation(n)
        inv = np.argsort(perm)
        # relabel vertices: edge (i,j) -> sorted(inv[i], inv[j])
        new_edges = np.sort(inv[G.edges], axis=1)
        order = np.lexsort((new_edges[:, 1], new_edges[:, 0]))
        Gp = KnnGraph(n=n, k=G.k, edges=new_edges[order])
        out_p = weighted_laplacian_solve(
            Gp, w_node[perm], w_edge[order], 1.0, y[perm]
        )
        assert out_p == pytest.approx(out[perm], rel=1e-8, abs=1e-10)

    def test_positive_weights_required(self):
        G = make_graph("path", 3)
        with pytest.raises(ParameterError):
            weighted_laplacian_solve(
                G, np.array([1.0, 0.0, 1.0]), np.ones(2), 1.0, np.zeros(3)
            )
