"""Self-check suites behind ``ttedopa validate``.

Each suite returns a list of :class:`Check` records; a suite passes when all
of its checks pass. Random draws use fixed seeds so reports are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chainmap import ChainCoefficients, build_star_grid, compute_chain_coefficients
from .observables import extended_spectrum, measure_correlation_set
from .oracle import DenseInstance, dense_evolve, quadrature_moment
from .spectral import SpectralModel, SystemModel, ThermalizedSpectralModel, evaluate_thermalized_sdf
from .tensornet import EvolutionConfig, TdvpIntegrator, build_chain_mpo, init_state
from .tensornet.operators import SIGMA_Z
from .thermofield import physical_spectrum


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


def detailed_balance_errors(n: int = 1000, seed: int = 0) -> np.ndarray:
    """Relative errors of ``J_beta(w) / J_beta(-w) = exp(beta w)`` for random models."""
    rng = np.random.default_rng(seed)
    errs = np.empty(n)
    for i in range(n):
        s = rng.choice([0.5, 1.0, 2.0, 3.0])
        beta = 10.0 ** rng.uniform(-1, 2)
        w = rng.uniform(1e-3, 1.0)
        m = ThermalizedSpectralModel(SpectralModel(s, rng.uniform(0.01, 1.0)), beta)
        ratio = evaluate_thermalized_sdf(m, w) / evaluate_thermalized_sdf(m, -w)
        errs[i] = abs(ratio / np.exp(beta * w) - 1.0)
    return errs


def suite_balance() -> list[Check]:
    errs = detailed_balance_errors()
    return [Check("detailed balance, 1000 draws", bool(errs.max() <= 1e-12), f"max rel err {errs.max():.2e}")]


MOMENT_CASES = [(s, beta) for s in (0.5, 1.0, 2.0) for beta in (0.5, 2.0, 20.0, 2000.0)]


def suite_moments() -> list[Check]:
    out = []
    for s, beta in MOMENT_CASES:
        m = ThermalizedSpectralModel(SpectralModel(s, 0.05), beta)
        co = compute_chain_coefficients(m, 20)
        ref = quadrature_moment(m, 0)
        err = abs(co.g0**2 / ref - 1.0)
        out.append(Check(f"g0^2 = mu0 (s={s:g}, beta={beta:g})", err <= 1e-8, f"rel err {err:.1e}"))
    return out


def random_chain(rng, n: int) -> ChainCoefficients:
    return ChainCoefficients(rng.uniform(-1.0, 1.0, n), rng.uniform(0.1, 0.5, n - 1), float(rng.uniform(0.2, 0.6)))


def oracle_deviation(coeffs: ChainCoefficients, system: SystemModel, d: int, dt: float, t_final: float = 10.0):
    """Largest ``|<sz>_MPS - <sz>_dense|`` over a TDVP run with uncapped bonds."""
    mpo = build_chain_mpo(coeffs, system, d)
    inst = DenseInstance.from_chain(coeffs, system, d)
    sz = inst.local_operator(0, SIGMA_Z)
    cfg = EvolutionConfig(dt=dt, t_final=t_final, chi_max=10_000, precision_p=1e-10, d=d)
    state = init_state(system, coeffs.n_sites, d)
    integ = TdvpIntegrator(mpo, cfg)
    dev = 0.0
    for _ in range(cfg.n_steps):
        integ.step(state)
        ref = dense_evolve(inst, state.time).expect(sz).real
        dev = max(dev, abs(state.expect_local(0, SIGMA_Z).real - ref))
    return dev


def suite_oracle() -> list[Check]:
    rng = np.random.default_rng(2024)
    out = []
    for n in (2, 3, 4):
        for d in (3, 4):
            dev = oracle_deviation(random_chain(rng, n), SystemModel(0.2), d, 0.05)
            out.append(Check(f"MPS vs dense (N={n}, d={d})", dev <= 1e-4, f"max dev {dev:.2e}"))
    return out


def suite_thermofield() -> list[Check]:
    out = []
    for s, kappa in ((2.0, 0.4), (2.0, 400.0), (0.5, 0.4)):
        m = ThermalizedSpectralModel.from_kappa(SpectralModel(s, 0.01 / 0.2**s), kappa, 0.2)
        co = compute_chain_coefficients(m, 30)
        grid = build_star_grid(co, 200)
        spec = extended_spectrum(measure_correlation_set(init_state(SystemModel(0.2), 30, 4)), grid)
        ps = physical_spectrum(spec, m.beta)
        bw = m.beta * ps.frequencies
        near = bw <= 20
        rel = np.max(np.abs(ps.occupations[near] / ps.baseline[near] - 1.0), initial=0.0)
        far = np.max(np.abs(ps.occupations[~near] - ps.baseline[~near]), initial=0.0)
        ok = rel <= 1e-6 and far <= 1e-12
        out.append(Check(f"vacuum back-map (s={s:g}, kappa={kappa:g})", ok, f"rel {rel:.1e}, abs {far:.1e}"))
    return out


SUITES = {
    "balance": suite_balance,
    "moments": suite_moments,
    "oracle": suite_oracle,
    "thermofield": suite_thermofield,
}


def run_suites(names) -> list[Check]:
    checks = []
    for name in names:
        checks.extend(SUITES[name]())
    return checks
