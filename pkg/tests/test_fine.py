import numpy as np
import pytest

from fehmm.expressions import MultiscaleCoefficient, parse
from fehmm.fem import FeSpace, Mesh1D, assemble_stiffness, norms
from fehmm.fine import (
    FineConfig,
    MemoryCapError,
    NonNestedGridsError,
    compare_hmm_vs_fine,
    oscillatory_coefficient_at,
    run_fine,
)
from fehmm.macro import CoefficientMode, MacroConfig, MicroParams, run_hmm

from conftest import A0_EXAMPLE_1, DELTA, EPS, SIGMA, manufactured_rhs, zero_initial


def fine_config(coeff, n_elems, n_steps, epsilon=EPS, rhs=None, initial=None, **kw):
    return FineConfig(
        omega=(0.0, 1.0),
        final_time=1.0,
        epsilon=epsilon,
        coefficient=coeff,
        rhs=rhs or manufactured_rhs(0.5),
        initial=initial or zero_initial,
        n_elems=n_elems,
        n_steps=n_steps,
        **kw,
    )


class TestRunFine:
    def test_constant_matches_macro_solver(self, constant25):
        # same grids, same constant coefficient: identical discrete problems
        rhs = manufactured_rhs(2.5)
        fine = run_fine(fine_config(constant25, 32, 10, rhs=rhs))
        micro = MicroParams(delta=DELTA, sigma=SIGMA, h=DELTA / 16, theta=SIGMA / 4)
        macro = run_hmm(
            MacroConfig(
                omega=(0.0, 1.0),
                final_time=1.0,
                n_elems=32,
                n_steps=10,
                epsilon=EPS,
                coefficient=constant25,
                rhs=rhs,
                initial=zero_initial,
                micro=micro,
                mode=CoefficientMode.fixed(2.5),
            )
        )
        for uf, um in zip(fine.states, macro.states):
            assert np.abs(uf.coefficients - um.coefficients).max() <= 1e-10

    def test_frozen_coefficient_assembly(self):
        # with eps = 1 and t = 0 the oscillatory samples reduce to a(0, x, 0, x)
        coeff = MultiscaleCoefficient(parse("2 + x + 0.5*cos(2*pi*y)"), 1.0, 4.0)
        cfg = fine_config(coeff, 16, 4, epsilon=1.0)
        space = cfg.space()
        xq = space.mesh.quad_points(space.n_quad)
        assembled = assemble_stiffness(space, oscillatory_coefficient_at(cfg, 0.0, xq))
        direct = assemble_stiffness(space, lambda x: 2 + x + 0.5 * np.cos(2 * np.pi * x))
        assert np.abs(assembled.to_dense() - direct.to_dense()).max() <= 1e-14

    def test_l2_non_increasing_without_source(self, example1):
        cfg = fine_config(
            example1,
            64,
            16,
            epsilon=0.05,
            rhs=lambda t, x: np.zeros_like(x),
            initial=lambda x: np.sin(np.pi * x),
        )
        traj = run_fine(cfg)
        l2s = [norms(u)["l2"] for u in traj.states]
        assert all(a >= b - 1e-14 for a, b in zip(l2s, l2s[1:]))

    def test_memory_cap(self, example1):
        with pytest.raises(MemoryCapError):
            run_fine(fine_config(example1, 4096, 4096, memory_cap_bytes=10_000))

    def test_self_convergence_from_resolved_level(self, example1):
        # Richardson-style self-oracle at eps = 0.05: halving (h, tau) from a
        # resolved level cuts the error vs the next-finer run by >= 2x
        rhs = manufactured_rhs(A0_EXAMPLE_1)
        runs = {
            n: run_fine(fine_config(example1, n, n_steps, epsilon=0.05, rhs=rhs))
            for n, n_steps in ((512, 800), (1024, 1600), (2048, 3200))
        }
        coarse = compare_hmm_vs_fine(runs[512], runs[2048], 1.0)["l2"]
        halved = compare_hmm_vs_fine(runs[1024], runs[2048], 1.0)["l2"]
        assert coarse / halved >= 2.0


class TestCompare:
    def test_identical_trajectories(self, example1):
        traj = run_fine(fine_config(example1, 32, 8, epsilon=0.05))
        result = compare_hmm_vs_fine(traj, traj, 1.0, epsilon=0.05)
        assert result["l2"] == 0.0 and result["h1"] == 0.0

    def test_non_nested_grids_rejected(self, example1):
        a = run_fine(fine_config(example1, 12, 4, epsilon=0.05))
        b = run_fine(fine_config(example1, 32, 4, epsilon=0.05))
        with pytest.raises(NonNestedGridsError):
            compare_hmm_vs_fine(a, b, 1.0)

    def test_resolution_flag(self, example1):
        coarse = run_fine(fine_config(example1, 16, 8, epsilon=0.05))
        fine = run_fine(fine_config(example1, 256, 1600, epsilon=0.05))
        assert compare_hmm_vs_fine(coarse, fine, 1.0, epsilon=0.05)["fine_resolved"]
        assert not compare_hmm_vs_fine(coarse, coarse, 1.0, epsilon=0.05)["fine_resolved"]

    def test_hmm_distance_shrinks_with_eps(self, example2):
        # fixed resolution relative to eps: the gap to the resolved fine run
        # tracks the homogenization error and shrinks as eps decreases
        def gap(eps, n_f):
            rhs = manufactured_rhs(0.5)
            fine = run_fine(
                fine_config(example2, n_f, round(4.0 / eps**2), epsilon=eps, rhs=rhs)
            )
            micro = MicroParams(
                delta=eps ** (1 / 3), sigma=eps ** (2 / 3), h=eps / 16, theta=eps ** (2 / 3) / 64
            )
            hmm = run_hmm(
                MacroConfig(
                    omega=(0.0, 1.0),
                    final_time=1.0,
                    n_elems=16,
                    n_steps=50,
                    epsilon=eps,
                    coefficient=example2,
                    rhs=rhs,
                    initial=zero_initial,
                    micro=micro,
                    mode=CoefficientMode.hmm(),
                )
            )
            return compare_hmm_vs_fine(hmm, fine, 1.0, epsilon=eps)["l2"]

        wide = gap(0.04, 256)
        narrow = gap(0.02, 512)
        assert narrow < wide / 1.2
