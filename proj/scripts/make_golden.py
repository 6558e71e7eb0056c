"""Regenerates fixtures/golden.json from independent numpy/scipy evaluations."""
import json
import math
import pathlib

import numpy as np
from scipy import integrate, special

rng = np.random.default_rng(20240917)


def pairs(m):
    m = np.asarray(m, dtype=complex).reshape(-1)
    return [[float(z.real), float(z.imag)] for z in m]


def random_choi(di, do, de):
    g = rng.normal(size=(do * de, di)) + 1j * rng.normal(size=(do * de, di))
    q, r = np.linalg.qr(g)
    v = q * (np.diag(r) / np.abs(np.diag(r)))
    # |V> index i*(do*de) + o*de + e
    vec = v.T.reshape(di, do, de)
    m = vec.reshape(di * do, de)
    return m @ m.conj().T, m


def avg_purity(di, do, de):
    return (di * do * (de**2 - 1) + di**2 * de * (do**2 - 1)) / (do**2 * de**2 - 1)


records = []


def add(name, op, inp, expected, tol, origin):
    records.append(dict(name=name, op=op, input=inp, expected=expected, tolerance=tol, origin=origin))


add("depolarizing_choi_2_2", "depolarizing_choi", {"d_I": 2, "d_O": 2}, pairs(np.eye(4) / 2), 1e-14, "reference")
add("depolarizing_choi_1_3", "depolarizing_choi", {"d_I": 1, "d_O": 3}, pairs(np.eye(3) / 3), 1e-14, "definition")
add("max_entangled_marginal_2_2", "max_entangled_marginal", {"d_I": 2, "d_O": 2}, pairs(np.eye(4) / 2), 1e-14, "reference")
add("avg_purity_2_2_2", "avg_purity", {"d_I": 2, "d_O": 2, "d_E": 2}, 2.4, 1e-13, "computed")
add("avg_purity_2_2_4", "avg_purity", {"d_I": 2, "d_O": 2, "d_E": 4}, 12 / 7, 1e-13, "computed")
add("avg_purity_3_2_1", "avg_purity", {"d_I": 3, "d_O": 2, "d_E": 1}, 9.0, 1e-13, "definition")
add("eps_dep_2_2_1", "eps_dep", {"d_I": 2, "d_O": 2, "d_E": 1}, 3.0, 1e-13, "reference")
add("eps_dep_2_2_4", "eps_dep", {"d_I": 2, "d_O": 2, "d_E": 4}, 3.75, 1e-13, "reference")
add("eps_avg_ue_2_2_2", "eps_avg_ue", {"d_I": 2, "d_O": 2, "d_E": 2}, 2.8, 1e-13, "computed")
add("eps_pure_separable_2_2", "eps_pure_separable", {"d_I": 2, "d_O": 2, "d_E": 4}, 6.0, 1e-13, "reference")
add("balanced_purity_2_2", "balanced_purity", {"d_I": 2, "d_O": 2}, 12 / 7, 1e-13, "computed")
add("eps_app_bounds_2_2_2", "eps_app_bounds", {"d_I": 2, "d_O": 2, "d_E": 2}, [1.6, 2.8], 1e-13, "computed")
add("eps_tomo_bound_infinite_k", "eps_tomo_bound",
    {"d_I": 2, "d_O": 2, "d_E": 2, "k": "inf", "delta": 1e-6, "kappa": 1.0}, 8e-6, 1e-18, "definition")
add("eps_tomo_bound_clamped", "eps_tomo_bound",
    {"d_I": 2, "d_O": 2, "d_E": 2, "k": 4, "delta": 0.01, "kappa": 1.0}, 8 * 1.01, 1e-12, "definition")

e0 = np.array([[1, 0], [0, 0]]); e01 = np.array([[0, 1], [0, 0]])
add("choi_identity_channel", "choi_from_kraus", {"d_I": 2, "d_O": 2, "kraus": [pairs(np.eye(2))]},
    pairs(np.outer([1, 0, 0, 1], [1, 0, 0, 1])), 1e-14, "definition")
add("choi_reset_channel", "choi_from_kraus", {"d_I": 2, "d_O": 2, "kraus": [pairs(e0), pairs(e01)]},
    pairs(np.kron(np.eye(2), e0)), 1e-14, "computed")

for de in (1, 2, 4):
    c, m = random_choi(2, 2, de)
    choi = {"d_I": 2, "d_O": 2, "matrix": pairs(c)}
    add(f"kraus_roundtrip_2_2_{de}", "kraus_roundtrip", {"choi": choi}, pairs(c), 1e-10, "computed")
    add(f"kraus_count_2_2_{de}", "kraus_count", {"choi": choi}, min(de, 4), 0, "computed")
    add(f"stinespring_marginal_2_2_{de}", "stinespring_marginal", {"choi": choi, "d_E": 4}, pairs(c), 1e-10, "computed")
    add(f"choi_json_roundtrip_2_2_{de}", "choi_json_roundtrip", {"choi": choi}, pairs(c), 0, "definition")
    purif = {"d_I": 2, "d_O": 2, "d_E": de, "vector": pairs(m.reshape(-1))}
    add(f"purification_marginal_2_2_{de}", "purification_marginal", {"purification": purif}, pairs(c), 1e-13,
        "definition")

a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)); a = a @ a.conj().T; a /= np.trace(a)
b = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)); b = b @ b.conj().T; b /= np.trace(b)
add("partial_trace_product", "partial_trace", {"matrix": pairs(np.kron(a, b)), "dims": [2, 3], "keep": [1]}, pairs(b),
    1e-13, "definition")


def sqrtm_psd(x):
    w, u = np.linalg.eigh(x)
    return (u * np.sqrt(np.clip(w, 0, None))) @ u.conj().T


rho = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)); rho = rho @ rho.conj().T; rho /= np.trace(rho)
sig = rng.normal(size=(3, 2)) + 1j * rng.normal(size=(3, 2)); sig = sig @ sig.conj().T; sig /= np.trace(sig)
fid = np.sum(np.linalg.svd(sqrtm_psd(rho) @ sqrtm_psd(sig), compute_uv=False)) ** 2
add("fidelity_random_pair", "fidelity", {"rho": pairs(rho), "sigma": pairs(sig)}, float(fid), 1e-10, "computed")

add("mp_mu_1", "mp_mu", {"c": 1.0}, 8 / (3 * math.pi), 1e-12, "reference")
lo, hi = (1 - math.sqrt(0.5)) ** 2, (1 + math.sqrt(0.5)) ** 2
dens = lambda x: math.sqrt((hi - x) * (x - lo)) / (2 * math.pi * 0.5 * x)
mu_half = integrate.quad(lambda x: math.sqrt(x) * dens(x), lo, hi, epsabs=1e-14, epsrel=1e-14)[0]
add("mp_mu_half", "mp_mu", {"c": 0.5}, mu_half, 1e-9, "computed")
add("mp_density_half_at_1", "mp_density", {"c": 0.5, "x": 1.0}, dens(1.0), 1e-14, "definition")
add("mp_density_outside", "mp_density", {"c": 0.5, "x": 3.5}, 0.0, 0, "definition")
add("complete_elliptic_half", "complete_elliptic", {"m": 0.5}, [float(special.ellipk(0.5)), float(special.ellipe(0.5))],
    1e-12, "computed")

out = pathlib.Path(__file__).resolve().parent.parent / "fixtures" / "golden.json"
out.write_text(json.dumps({"records": records}, indent=1) + "\n")
print(f"wrote {len(records)} records to {out}")
