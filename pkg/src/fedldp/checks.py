"""End-to-end consistency checks behind the ``validate`` CLI command.

Each check re-derives an expected property from first principles (closed-form
caps, independent numeric integration, recomposition, simulation) and reports
pass/fail with a one-line detail.  Informational entries are printed but not
gated: the sigma = 1 rows of the integration check quantify a known gap of
the leading-order cost formula (exp(4/sigma^2) - 1 is 13x its first-order
term there), and the bundled reference magnitudes are not reproducible from
the closed forms, so only orderings are ever asserted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from . import accountants, fedsgd_sim, tradeoff
from .accountants import CalibrationRequest, Method
from .privacy_core import (
    MechanismParams,
    PrivacyBudget,
    renyi_log_moment_numeric,
)

__all__ = ["CheckResult", "run_all_checks", "SEC32"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    gated: bool = True


# The homogeneous evaluation study: delta, q, K, and loss constants.
SEC32 = {
    "delta": 1e-4,
    "q": 1e-3,
    "users": 100,
    "t_list": (70_000, 700_000),
    "reg": tradeoff.LossRegularity(mu=1.0, lam=1.0, grad_bound=5.0, clip=1.0, dim=10_000),
}


def _grid_results(t: int) -> dict[float, dict[Method, object]]:
    out: dict[float, dict[Method, object]] = {}
    for eps in tradeoff.default_eps_grid():
        budget = PrivacyBudget(eps, SEC32["delta"])
        out[eps] = {
            m: accountants.calibrate(
                CalibrationRequest(budget=budget, q=SEC32["q"], rounds=t, method=m)
            )
            for m in Method
        }
    return out


def check_sigma_cap() -> CheckResult:
    caps = tradeoff.validity_caps(SEC32["q"], 70_000, SEC32["reg"], SEC32["users"])
    ok = abs(caps.sigma_sq_cap - 3906.25) <= 1e-9
    return CheckResult(
        "noise validity cap", ok, f"1/(16q)^2 = {caps.sigma_sq_cap!r} (expected 3906.25)"
    )


def check_utility_caps() -> CheckResult:
    published = {70_000: 0.0072, 700_000: 0.0717}
    details = []
    ok = True
    for t, ref in published.items():
        caps = tradeoff.validity_caps(SEC32["q"], t, SEC32["reg"], SEC32["users"])
        rel = abs(caps.utility_cap - ref) / ref
        ok = ok and rel <= 0.01
        details.append(f"T={t:g}: {caps.utility_cap:.6g} vs {ref} (rel {rel:.2e})")
    return CheckResult("utility caps at the validity edge", ok, "; ".join(details))


def check_ordering() -> CheckResult:
    """sigma^2(proposed) <= ma <= ac2 <= ac1 on all fully-valid grid rows,
    with the induced utility ordering reversed and rate ordering matching."""
    order = (Method.PROPOSED, Method.MA, Method.AC2, Method.AC1)
    checked = 0
    for t in SEC32["t_list"]:
        for eps, results in _grid_results(t).items():
            if not all(results[m].validity.overall for m in Method):
                continue
            checked += 1
            sig = [results[m].sigma_sq for m in order]
            if any(a > b for a, b in zip(sig, sig[1:])):
                return CheckResult(
                    "accountant ordering", False, f"noise order broken at eps={eps}, T={t}"
                )
            util = [
                tradeoff.utility_lower_bound(
                    t, SEC32["reg"], s / SEC32["users"]
                )
                for s in sig
            ]
            rate = [
                tradeoff.rate_upper_bound(SEC32["reg"], math.sqrt(s)) for s in sig
            ]
            if any(a < b for a, b in zip(util, util[1:])):
                return CheckResult(
                    "accountant ordering", False, f"utility order broken at eps={eps}, T={t}"
                )
            if any(a > b for a, b in zip(rate, rate[1:])):
                return CheckResult(
                    "accountant ordering", False, f"rate order broken at eps={eps}, T={t}"
                )
    return CheckResult(
        "accountant ordering",
        checked > 0,
        f"{checked} fully-valid grid points ordered proposed <= ma <= ac2 <= ac1",
    )


def check_ac1_roundtrip() -> CheckResult:
    worst = 0.0
    for t in SEC32["t_list"]:
        for eps in tradeoff.default_eps_grid():
            req = CalibrationRequest(
                budget=PrivacyBudget(eps, SEC32["delta"]), q=SEC32["q"], rounds=t,
                method=Method.AC1,
            )
            res = accountants.noise_ac1(req)
            recomposed = accountants._ac1_compose(res.epsilon0, t, req.ac1_delta_tilde)
            delta_back = t * res.delta0 + req.ac1_delta_tilde
            worst = max(
                worst,
                abs(recomposed - eps) / eps,
                abs(delta_back - SEC32["delta"]) / SEC32["delta"],
            )
    return CheckResult(
        "advanced-composition inversion", worst <= 1e-9, f"worst residual {worst:.2e}"
    )


def check_rdp_oracle() -> list[CheckResult]:
    """Integrated log-moment vs alpha * gamma from the closed form.

    Gated for sigma in {2, 4}: within a factor of 2 at q <= 1e-3 and monotone
    in q.  sigma = 1 rows are informational: there the dropped remainder of
    exp(4/sigma^2) - 1 dominates and the closed form is ~13x low.
    """
    results = []
    for sigma in (2.0, 4.0, 1.0):
        worst = (1.0, None)
        monotone = True
        for alpha in range(2, 9):
            ratios = []
            for q in (1e-2, 1e-3, 1e-4):
                if q * 16 * sigma >= 1 or alpha > sigma**2 * math.log(1 / (q * sigma)):
                    ratios.append(None)
                    continue
                exact = max(
                    renyi_log_moment_numeric(q, sigma, alpha, "forward"),
                    renyi_log_moment_numeric(q, sigma, alpha, "reverse"),
                )
                gamma = 2 * q * q * (alpha + 1) / ((1 - q) * sigma * sigma)
                ratios.append(exact / (alpha * gamma))
            present = [r for r in ratios if r is not None]
            diffs = [b - a for a, b in zip(present, present[1:])]
            if diffs and not (all(d <= 0 for d in diffs) or all(d >= 0 for d in diffs)):
                monotone = False
            for q, r in zip((1e-2, 1e-3, 1e-4), ratios):
                if r is not None and q <= 1e-3:
                    if abs(math.log2(r)) > abs(math.log2(worst[0])):
                        worst = (r, (alpha, q))
        factor_ok = 0.5 <= worst[0] <= 2.0
        detail = f"worst ratio {worst[0]:.3f} at (alpha, q)={worst[1]}, monotone={monotone}"
        if sigma == 1.0:
            results.append(
                CheckResult(
                    "rdp cost vs integration (sigma=1, known gap)",
                    True,
                    detail + " [informational: leading-order formula breaks down]",
                    gated=False,
                )
            )
        else:
            results.append(
                CheckResult(
                    f"rdp cost vs integration (sigma={sigma:g})",
                    factor_ok and monotone,
                    detail,
                )
            )
    return results


def check_forward_accountant() -> CheckResult:
    """epsilon_from_noise on the ma-calibrated sigma must stay within 5%.

    Restricted to grid points whose calibrated sigma lies inside the validity
    region; outside it the forward accountant's cost formula does not apply.
    """
    worst = 0.0
    checked = 0
    for t in SEC32["t_list"]:
        for eps in tradeoff.default_eps_grid():
            res = accountants.noise_ma(
                CalibrationRequest(
                    budget=PrivacyBudget(eps, SEC32["delta"]), q=SEC32["q"], rounds=t,
                    method=Method.MA,
                )
            )
            if not (res.validity.q_ok and res.validity.sigma_ok):
                continue
            checked += 1
            back = accountants.epsilon_from_noise(
                MechanismParams(q=SEC32["q"], sigma=res.sigma, clip=1.0, rounds=t),
                SEC32["delta"],
            )
            worst = max(worst, back / eps)
    return CheckResult(
        "forward/inverse accountant consistency",
        checked > 0 and worst <= 1.05,
        f"worst eps'/eps {worst:.4f} over {checked} in-region grid points",
    )


def check_simulation(full: bool) -> CheckResult:
    """Empirical utility of the seeded runs must clear the closed-form bound."""
    base = fedsgd_sim.SimConfig(
        users=5, dim=10, per_user_data=200, q=0.1, sigma=0.0, clip=1.0,
        rounds=5000 if full else 1500, grad_bound=10.0, seed=425_001,
        repetitions=100 if full else 30, data_radius=2.0,
        validate_grad_bound=False,
    )
    pilot = fedsgd_sim.run_simulation(replace(base, repetitions=1))
    bound_g = 1.5 * pilot.realized_grad_norm_max
    details = []
    ok = True
    for sigma in (0.0, 1.0):
        cfg = replace(
            base, sigma=sigma, grad_bound=bound_g, validate_grad_bound=(sigma == 0.0)
        )
        result = fedsgd_sim.run_simulation(cfg)
        reg = tradeoff.LossRegularity(
            mu=cfg.mu, lam=cfg.lam, grad_bound=cfg.grad_bound, clip=cfg.clip, dim=cfg.dim
        )
        bound = tradeoff.utility_lower_bound(
            cfg.rounds, reg, fedsgd_sim.aggregate_noise_sq(cfg)
        )
        frac = float(
            (1.0 / result.per_rep_final_loss_gap >= bound).mean()
        )
        ok = ok and frac >= 0.95
        details.append(f"sigma={sigma:g}: {frac:.0%} of runs above bound {bound:.3g}")
    return CheckResult("simulation vs utility bound", ok, "; ".join(details))


def reference_annotations() -> list[dict]:
    """Computed values next to the bundled reference magnitudes (informational)."""
    ref = tradeoff.REFERENCE_POINT
    budget = PrivacyBudget(ref["epsilon"], SEC32["delta"])
    rows = []
    for method in Method:
        res = accountants.calibrate(
            CalibrationRequest(
                budget=budget, q=SEC32["q"], rounds=ref["rounds"], method=method
            )
        )
        rows.append(
            {
                "method": method.value,
                "epsilon": ref["epsilon"],
                "rounds": ref["rounds"],
                "sigma_k_sq": res.sigma_sq,
                "utility_computed": tradeoff.utility_lower_bound(
                    ref["rounds"], SEC32["reg"], res.sigma_sq / SEC32["users"]
                ),
                "utility_reference": ref["utility"][method],
                "rate_bits_computed": tradeoff.rate_upper_bound(SEC32["reg"], res.sigma),
                "rate_bits_reference": ref["rate_bits"][method],
            }
        )
    return rows


def run_all_checks(full: bool = False) -> list[CheckResult]:
    results = [
        check_sigma_cap(),
        check_utility_caps(),
        check_ordering(),
        check_ac1_roundtrip(),
        *check_rdp_oracle(),
        check_forward_accountant(),
        check_simulation(full),
    ]
    ann = reference_annotations()
    by_ref_utility = sorted(ann, key=lambda r: -r["utility_reference"])
    by_ref_rate = sorted(ann, key=lambda r: r["rate_bits_reference"])
    ordering_ok = all(
        a["utility_computed"] >= b["utility_computed"]
        for a, b in zip(by_ref_utility, by_ref_utility[1:])
    ) and all(
        a["rate_bits_computed"] <= b["rate_bits_computed"]
        for a, b in zip(by_ref_rate, by_ref_rate[1:])
    )
    results.append(
        CheckResult(
            "reference-point ordering",
            ordering_ok,
            "computed utility and rate reproduce the reference cross-method "
            "orderings (magnitudes informational)",
        )
    )
    return results
