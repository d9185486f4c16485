import http.server
import math
import socket
import threading

import numpy as np
import pytest

import oracles
from pdqubo.errors import ConfigError, ProtocolError, SolverError, TransportError
from pdqubo.qubo import QuboProblem, energy
from pdqubo.solvers import (
    EndpointConfig,
    SolverConfig,
    SolverKind,
    estimate_initial_temperature,
    external_sampler_submit,
    format_response,
    lexicographic_best,
    parse_response,
    relaxed_energy,
    relaxed_gradient,
    round_relaxed,
    sample_stability,
    solve,
    solve_exhaustive,
    solve_sa,
    solve_sgd,
    solve_tabu,
    temperature_schedule,
)


def sym(rng, n):
    a = rng.normal(size=(n, n))
    return np.triu(a) + np.triu(a, 1).T


class TestExhaustive:
    @pytest.mark.parametrize("seed", range(15))
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 8))
        q = sym(rng, n)
        k = int(rng.integers(0, n + 1)) if seed % 2 else None
        expected, x = oracles.brute_force_minimum(q, k, 1.5)
        res = solve_exhaustive(QuboProblem(q, k, 1.5))
        assert res.best_energy == pytest.approx(expected, abs=1e-10)
        np.testing.assert_array_equal(res.best, x)

    def test_hard_constraint_enumerates_feasible_only(self):
        q = sym(np.random.default_rng(0), 8)
        res = solve_exhaustive(QuboProblem(q, 3, math.inf))
        assert res.evaluations == math.comb(8, 3)
        assert res.best.sum() == 3
        brute, _ = oracles.brute_force_minimum(q, 3, 1e6)
        assert res.best_energy == pytest.approx(brute, abs=1e-8)

    def test_tie_break_lexicographic(self):
        # every one-hot vector has energy -1; with bit 0 most significant the smallest is 001
        res = solve_exhaustive(QuboProblem(-np.eye(3) + 2 * (np.ones((3, 3)) - np.eye(3))))
        np.testing.assert_array_equal(res.best, [0, 0, 1])

    def test_size_limit(self):
        with pytest.raises(SolverError):
            solve_exhaustive(QuboProblem(np.zeros((25, 25))))


class TestHeuristics:
    @pytest.mark.parametrize("kind", ["sa", "tabu"])
    @pytest.mark.parametrize("seed", range(10))
    def test_small_instances_reach_optimum(self, kind, seed):
        rng = np.random.default_rng(100 + seed)
        n = int(rng.integers(4, 11))
        p = QuboProblem(sym(rng, n), int(rng.integers(1, n)) if seed % 2 else None)
        opt = solve_exhaustive(p).best_energy
        res = solve(p, SolverConfig(kind=kind, seed=seed, num_samples=50))
        assert res.best_energy >= opt - 1e-9
        assert res.best_energy == pytest.approx(opt, abs=1e-9)

    @pytest.mark.parametrize("kind", ["sa", "tabu", "sgd"])
    def test_seeded_determinism(self, kind):
        p = QuboProblem(sym(np.random.default_rng(1), 12), 4)
        a = solve(p, SolverConfig(kind=kind, seed=3, num_samples=20))
        b = solve(p, SolverConfig(kind=kind, seed=3, num_samples=20))
        np.testing.assert_array_equal(a.best, b.best)
        np.testing.assert_array_equal(a.sample_energies, b.sample_energies)

    @pytest.mark.parametrize("kind", ["sa", "tabu"])
    def test_sample_prefix_property(self, kind):
        p = QuboProblem(sym(np.random.default_rng(2), 10))
        small = solve(p, SolverConfig(kind=kind, seed=5, num_samples=7))
        large = solve(p, SolverConfig(kind=kind, seed=5, num_samples=30))
        np.testing.assert_array_equal(small.sample_bits, large.sample_bits[:7])

    @pytest.mark.parametrize("kind", ["sa", "tabu"])
    def test_swap_moves_stay_feasible(self, kind):
        p = QuboProblem(sym(np.random.default_rng(4), 12), 5, math.inf)
        res = solve(p, SolverConfig(kind=kind, seed=0, num_samples=10))
        assert (res.sample_bits.sum(axis=1) == 5).all()
        assert res.best_energy == pytest.approx(solve_exhaustive(p).best_energy, abs=1e-9)

    def test_reported_energy_recomputed(self):
        p = QuboProblem(sym(np.random.default_rng(6), 9), 3, 0.7)
        res = solve_sa(p, SolverConfig(seed=1, num_samples=10, debug=True))
        for e, b in res.samples:
            assert e == energy(p, b)

    def test_single_variable(self):
        res = solve_tabu(QuboProblem(np.array([[-1.0]])), SolverConfig(kind="tabu", num_samples=3))
        np.testing.assert_array_equal(res.best, [1])

    def test_temperature_schedule(self):
        sched = temperature_schedule(1.0, 1e-3, 0.9)
        assert sched[0] == 1.0 and sched[-1] <= 1e-3 < sched[-2]
        assert np.all(np.diff(sched) < 0)
        p = QuboProblem(sym(np.random.default_rng(0), 6))
        assert estimate_initial_temperature(p, SolverConfig()) > 0

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            SolverConfig(cooling=1.0)
        with pytest.raises(ConfigError):
            SolverConfig(num_samples=0)
        with pytest.raises(ValueError):
            SolverConfig(kind="quantum")


class TestLexicographic:
    def test_ties(self):
        bits = np.array([[1, 0, 0], [0, 1, 1], [0, 1, 0]], dtype=np.int8)
        assert lexicographic_best(bits, np.array([0.0, 0.0, 0.0])) == 2
        assert lexicographic_best(bits, np.array([0.0, -1.0, 0.0])) == 1


class TestSGD:
    def test_gradient_finite_differences(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            n = int(rng.integers(2, 10))
            p = QuboProblem(sym(rng, n), int(rng.integers(0, n + 1)), float(rng.uniform(0, 3)))
            x = rng.uniform(0.05, 0.95, n)
            fd = oracles.finite_difference_gradient(lambda v: relaxed_energy(p, v), x)
            np.testing.assert_allclose(relaxed_gradient(p, x), fd, rtol=1e-5, atol=1e-7)

    def test_rounding(self):
        x = np.array([0.2, 0.9, 0.9, 0.6])
        np.testing.assert_array_equal(round_relaxed(x, 2), [[0, 1, 1, 0]])
        np.testing.assert_array_equal(round_relaxed(x, None), [[0, 1, 1, 1]])

    def test_cardinality(self):
        p = QuboProblem(sym(np.random.default_rng(3), 15), 6)
        res = solve_sgd(p, SolverConfig(kind="sgd", seed=0))
        assert res.best.sum() == 6


class TestStability:
    def test_min_energy_nonincreasing(self):
        p = QuboProblem(sym(np.random.default_rng(8), 14), 6)
        reports = sample_stability(p, SolverConfig(seed=0, steps_per_temp=1, cooling=0.5),
                                   [1, 2, 5, 10], repetitions=6)
        for a, b in zip(reports, reports[1:]):
            assert np.all(b.sample_energies <= a.sample_energies)
            assert b.mean <= a.mean

    def test_bad_counts(self):
        with pytest.raises(ConfigError):
            sample_stability(QuboProblem(np.eye(2)), SolverConfig(), [0])
        with pytest.raises(ConfigError):
            sample_stability(QuboProblem(np.eye(2)), SolverConfig(kind="exhaustive"), [1, 2])


class _Handler(http.server.BaseHTTPRequestHandler):
    reply = ""

    def do_POST(self):
        length = int(self.headers["Content-Length"])
        self.server.payloads.append(self.rfile.read(length).decode())
        body = self.reply.encode()
        self.send_response(200)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture
def sampler_server():
    servers = []

    def start(reply):
        handler = type("H", (_Handler,), {"reply": reply})
        srv = http.server.HTTPServer(("127.0.0.1", 0), handler)
        srv.payloads = []
        threading.Thread(target=srv.serve_forever, daemon=True).start()
        servers.append(srv)
        return srv

    yield start
    for srv in servers:
        srv.shutdown()
        srv.server_close()


class TestExternalSampler:
    def test_loopback(self):
        p = QuboProblem(sym(np.random.default_rng(0), 6), 2)
        res = solve(p, SolverConfig(kind="external-stub", seed=0, num_samples=20))
        assert res.solver == SolverKind.EXTERNAL.value
        assert res.best_energy == pytest.approx(solve_exhaustive(p).best_energy)

    def test_http_roundtrip(self, sampler_server):
        srv = sampler_server(format_response([1, 0, 1], 0.0))
        p = QuboProblem(np.eye(3))
        res = external_sampler_submit(p, EndpointConfig(f"http://127.0.0.1:{srv.server_port}/", 5))
        np.testing.assert_array_equal(res.best, [1, 0, 1])
        assert res.best_energy == 2.0  # recomputed locally, not trusted
        assert srv.payloads[0].startswith("qubo n=3 k=* ")

    def test_wrong_length_reply(self, sampler_server):
        srv = sampler_server(format_response([1, 0], 0.0))
        with pytest.raises(ProtocolError, match="expected 3 bits, got 2"):
            external_sampler_submit(QuboProblem(np.eye(3)),
                                    EndpointConfig(f"http://127.0.0.1:{srv.server_port}/", 5))

    def test_unreachable(self):
        with socket.socket() as s:
            s.bind(("127.0.0.1", 0))
            port = s.getsockname()[1]
        with pytest.raises(TransportError):
            external_sampler_submit(QuboProblem(np.eye(2)), EndpointConfig(f"http://127.0.0.1:{port}/", 2))

    @pytest.mark.parametrize("text", ["", "0 1\n", "0 2\nenergy=1\n", "0 1\nvalue=1\n", "0 1\nenergy=x\n"])
    def test_malformed(self, text):
        with pytest.raises(ProtocolError):
            parse_response(text, 2)
