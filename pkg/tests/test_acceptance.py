"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run as ``pytest tests/test_acceptance.py -v -s``. Thresholds are pinned here;
the synthetic benchmarks are seeded and deterministic.
"""

import contextlib
import json
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import random_graph
from gnz import cli, synth
from gnz.certainty import entropy_certainty
from gnz.errors import GnzError
from gnz.formats import decode_embeddings, decode_graph_triplets, read_embeddings, write_embeddings
from gnz.graph import normalized_operator, read_graph, write_graph
from gnz.metrics import binary_auc
from gnz.pipeline import (
    DiffusionSpec,
    GraphConfig,
    MockExtractorConfig,
    PipelineConfig,
    RampConfig,
    dynamic_pass,
    one_pass,
)
from gnz.spreading import DiffusionConfig, diffuse_iterative, fixed_point_residual
from gnz.tvratio import minimize_class_ratio, ratio_energy


@contextlib.contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"[ACCEPTANCE] {name}: FAIL")
        raise
    print(f"[ACCEPTANCE] {name}: PASS")


def _random_seed_matrix(n, c, seed):
    rng = np.random.default_rng(seed)
    labeled = rng.permutation(n)[: max(c, n // 10)]
    y = np.zeros((n, c))
    for idx, node in enumerate(labeled):
        y[node, idx % c] = 1.0
    return y


def test_solver_oracle_equivalence():
    """50 seeded random graphs: iterative solver vs dense LU oracle, <= 1e-6."""
    with criterion("solver-oracle equivalence (50 graphs, max-abs <= 1e-6, < 30 s)"):
        start = time.perf_counter()
        alphas = [0.5, 0.9, 0.99]
        for seed in range(50):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(20, 201))
            c = int(rng.integers(2, 5))
            alpha = alphas[seed % 3]
            g = random_graph(n, seed=seed)
            s = normalized_operator(g)
            y = _random_seed_matrix(n, c, seed)
            cfg = DiffusionConfig(alpha=alpha, tol=1e-11, max_iter=50000)
            h, _ = diffuse_iterative(s, y, cfg)
            oracle = np.linalg.solve(np.eye(n) - alpha * s.toarray(), y)
            assert np.abs(h - oracle).max() <= 1e-6
        elapsed = time.perf_counter() - start
        assert elapsed < 30.0, f"took {elapsed:.1f}s"


def test_fixed_point_residual_invariant():
    """Every iterative diffusion output satisfies the 10*tol residual bound."""
    with criterion("fixed-point residual <= 10*tol on every output"):
        for seed, alpha, tol in [
            (0, 0.5, 1e-8), (1, 0.9, 1e-8), (2, 0.99, 1e-8),
            (3, 0.99, 1e-6), (4, 0.7, 1e-10), (5, 0.95, 1e-9),
            (6, 0.99, 1e-8), (7, 0.9, 1e-12), (8, 0.5, 1e-7), (9, 0.85, 1e-8),
        ]:
            rng = np.random.default_rng(seed + 500)
            n = int(rng.integers(30, 120))
            g = random_graph(n, seed=seed + 500)
            s = normalized_operator(g)
            y = _random_seed_matrix(n, 3, seed + 500)
            cfg = DiffusionConfig(alpha=alpha, tol=tol, max_iter=100000)
            h, _ = diffuse_iterative(s, y, cfg)
            assert fixed_point_residual(s, y, alpha, h) <= 10.0 * tol


def test_p1_monotone_ratio_and_scale_invariance():
    """20 seeded instances: non-increasing ratio trace; exact 1-homogeneity."""
    with criterion("p=1 monotone ratio (20 instances) and scale invariance (1e-9)"):
        for seed in range(20):
            rng = np.random.default_rng(seed + 900)
            n = int(rng.integers(15, 45))
            g = random_graph(n, seed=seed + 900)
            ids = rng.permutation(n)[:6]
            pins = [(int(i), 1.0 if k < 3 else -1.0) for k, i in enumerate(ids)]
            u, rep = minimize_class_ratio(g, pins)
            for a, b in zip(rep.ratios, rep.ratios[1:]):
                assert b <= a + 1e-9
            base = ratio_energy(g, u)
            for c in (0.5, 2.0, 10.0):
                assert abs(ratio_energy(g, c * u) - base) <= 1e-9 * base


def test_two_moons_benchmark():
    """n=600, noise 0.1, 10 labels/class, k=10, seeds 0-4: p2 >= 0.90, p1 >= 0.85."""
    with criterion("two-moons one-pass: mean acc p2 >= 0.90, p1 >= 0.85, < 60 s"):
        start = time.perf_counter()
        means = {}
        for method in ("p2", "p1"):
            accs = []
            for seed in range(5):
                cfg = PipelineConfig(
                    data={"kind": "two-moons", "n": 600, "noise": 0.1, "seed": seed},
                    labels={"kind": "per-class", "count": 10},
                    graph=GraphConfig(k=10),
                    diffusion=DiffusionSpec(method=method, alpha=0.99),
                    extractor=MockExtractorConfig(projection="identity"),
                    seed=seed,
                )
                _, report = one_pass(cfg)
                accs.append(report.records[0].accuracy_vs_truth)
            means[method] = float(np.mean(accs))
        elapsed = time.perf_counter() - start
        print(f"  two-moons means: p2={means['p2']:.4f} p1={means['p1']:.4f} ({elapsed:.1f}s)")
        assert means["p2"] >= 0.90
        assert means["p1"] >= 0.85
        assert elapsed < 60.0, f"took {elapsed:.1f}s"


def test_dynamic_pass_improvement():
    """Blobs, 4 classes, 5 labels/class, sharpening mock, J=5, seeds 0-4."""
    with criterion("dynamic-pass: final >= epoch0 - 0.02 per seed, mean final >= mean epoch0"):
        firsts, finals = [], []
        for seed in range(5):
            cfg = PipelineConfig(
                data={
                    "kind": "blobs", "n": 400, "classes": 4,
                    "noise": 2.0, "sep": 6.0, "dim": 12, "seed": seed,
                },
                labels={"kind": "per-class", "count": 5},
                mode="dynamic",
                epochs=5,
                graph=GraphConfig(k=10),
                diffusion=DiffusionSpec(method="p2", alpha=0.99),
                extractor=MockExtractorConfig(projection="identity", eta=0.5),
                ramp=RampConfig(t_ramp=2, alpha_max=1.0),
                seed=seed,
            )
            _, report = dynamic_pass(cfg)
            accs = [r.accuracy_vs_truth for r in report.records]
            assert len(accs) == 5
            assert accs[-1] >= accs[0] - 0.02, f"seed {seed}: {accs[-1]:.4f} < {accs[0]:.4f} - 0.02"
            firsts.append(accs[0])
            finals.append(accs[-1])
        print(f"  blobs means: epoch0={np.mean(firsts):.4f} final={np.mean(finals):.4f}")
        assert np.mean(finals) >= np.mean(firsts)


def test_certainty_endpoints_and_monotonicity():
    """Uniform -> 0 and one-hot -> 1 exactly; strict monotonicity on 99 points."""
    with criterion("certainty endpoints exact, binary monotonicity on 99-point grid"):
        for c in (2, 3, 5, 10):
            assert entropy_certainty([1.0 / c] * c) == 0.0
            one_hot = [0.0] * c
            one_hot[c // 2] = 1.0
            assert entropy_certainty(one_hot) == 1.0
        grid = np.linspace(0.505, 1.0, 99)
        values = [entropy_certainty([p, 1.0 - p]) for p in grid]
        for a, b in zip(values, values[1:]):
            assert b > a


def test_auc_exact_vs_pairwise_oracle():
    """100 seeded instances with ties: exact equality with the rational oracle."""
    with criterion("AUC equals brute-force pairwise oracle exactly (100 instances)"):
        for seed in range(100):
            rng = np.random.default_rng(seed + 4000)
            n = int(rng.integers(4, 201))
            scores = rng.integers(0, 10, size=n) / 9.0  # discrete -> ties occur
            truth = rng.integers(0, 2, size=n)
            truth[0], truth[1] = 0, 1  # both classes present
            num = Fraction(0)
            pos = [s for s, t in zip(scores, truth) if t == 1]
            neg = [s for s, t in zip(scores, truth) if t == 0]
            for sp in pos:
                for sn in neg:
                    if sp > sn:
                        num += 1
                    elif sp == sn:
                        num += Fraction(1, 2)
            oracle = num / (len(pos) * len(neg))
            assert binary_auc(scores, truth) == float(oracle)


def test_format_round_trips_and_fuzz(tmp_path):
    """Bit-identical GNZE/GNZG round trips; decoding never aborts the process."""
    with criterion("format round-trips bit-identical; fuzz decoding returns errors"):
        for seed in range(30):
            rng = np.random.default_rng(seed + 7000)
            m = rng.normal(size=(int(rng.integers(1, 40)), int(rng.integers(1, 16)))).astype(np.float32)
            path = tmp_path / f"e{seed}.gnze"
            write_embeddings(m, path)
            assert np.array_equal(read_embeddings(path), m)
        for seed in range(20):
            g = random_graph(int(np.random.default_rng(seed).integers(5, 40)), seed=seed)
            path = tmp_path / f"g{seed}.gnzg"
            write_graph(g, path)
            assert read_graph(path) == g
        rng = np.random.default_rng(99)
        for _ in range(300):
            blob = rng.bytes(int(rng.integers(0, 120)))
            for buf in (blob, b"GNZE" + blob, b"GNZG" + blob):
                try:
                    decode_embeddings(buf)
                except GnzError:
                    pass
                try:
                    decode_graph_triplets(buf)
                except GnzError:
                    pass


def test_cli_one_pass_byte_identical(tmp_path, capsys):
    """`one-pass` twice with one seed produces byte-identical prediction files."""
    with criterion("CLI one-pass determinism: byte-identical prediction files"):
        cfg = {
            "data": {"kind": "two-moons", "n": 200, "noise": 0.1, "seed": 3},
            "labels": {"kind": "per-class", "count": 10},
            "graph": {"k": 10},
            "diffusion": {"method": "p2", "alpha": 0.99},
            "seed": 3,
        }
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        out1, out2 = tmp_path / "r1.csv", tmp_path / "r2.csv"
        assert cli.main(["one-pass", "--config", str(cfg_path), "--out", str(out1)]) == 0
        assert cli.main(["one-pass", "--config", str(cfg_path), "--out", str(out2)]) == 0
        capsys.readouterr()
        assert out1.read_bytes() == out2.read_bytes()
