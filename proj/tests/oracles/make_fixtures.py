"""Reference solutions from a generic conic solver (cvxpy + Clarabel).

Writes tests/data/fixtures.json. Every problem is stated directly in its
primal form, so the values do not depend on any algorithm in include/gsre.

    python3 tests/oracles/make_fixtures.py
"""

import json
import math
import pathlib

import cvxpy as cp
import numpy as np

ETA = math.log(2.0) / (2.0 * math.log(3.0))
OUT = pathlib.Path(__file__).resolve().parent.parent / "data" / "fixtures.json"


def solve(prob):
    prob.solve(solver=cp.CLARABEL)
    assert prob.status == cp.OPTIMAL, prob.status
    return prob.value


def neighborhoods(p, edges):
    nb = [{i} for i in range(p)]
    for a, b in edges:
        nb[a].add(b)
        nb[b].add(a)
    return [sorted(s) for s in nb]


def random_graph(rng, p, density):
    return [(i, j) for i in range(p) for j in range(i + 1, p) if rng.random() < density]


def latent_sum(p, nbrs):
    parts = [cp.Variable(len(n)) for n in nbrs]
    total = 0
    for n, v in zip(nbrs, parts):
        e = np.zeros((p, len(n)))
        e[n, range(len(n))] = 1.0
        total = total + e @ v
    return parts, total


def graph_norm_expr(parts, tau):
    return sum(t * cp.norm(v, 2) for t, v in zip(tau, parts))


def projection_cases(rng):
    cases = []
    # two overlapping blocks on three coordinates
    for _ in range(5):
        x = rng.normal(scale=3.0, size=3)
        blocks = [([0, 1], float(rng.uniform(0.3, 1.5))), ([1, 2], float(rng.uniform(0.3, 1.5)))]
        cases.append((x, blocks))
    for _ in range(25):
        p = int(rng.integers(4, 11))
        m = int(rng.integers(2, 6))
        x = rng.normal(scale=2.0, size=p)
        blocks = []
        for _ in range(m):
            k = int(rng.integers(1, min(p, 5) + 1))
            idx = sorted(rng.choice(p, size=k, replace=False).tolist())
            blocks.append((idx, float(rng.uniform(0.2, 2.0))))
        cases.append((x, blocks))
    out = []
    for x, blocks in cases:
        z = cp.Variable(len(x))
        cons = [cp.norm(z[idx], 2) <= c for idx, c in blocks]
        value = solve(cp.Problem(cp.Minimize(cp.sum_squares(z - x)), cons))
        out.append(
            {
                "x": x.tolist(),
                "blocks": [{"indices": idx, "radius": c} for idx, c in blocks],
                "projection": z.value.tolist(),
                "value": value,
            }
        )
    return out


def graph_norm_cases(rng):
    out = []
    for k in range(20):
        p = int(rng.integers(2, 7))
        edges = random_graph(rng, p, 0.45)
        nbrs = neighborhoods(p, edges)
        tau = [len(n) ** ETA for n in nbrs] if k % 2 == 0 else rng.uniform(0.5, 2.0, size=p).tolist()
        beta = rng.normal(size=p)
        parts, total = latent_sum(p, nbrs)
        value = solve(cp.Problem(cp.Minimize(graph_norm_expr(parts, tau)), [total == beta]))
        out.append({"p": p, "edges": edges, "tau": list(tau), "beta": beta.tolist(), "value": value})
    return out


def prox_cases(rng):
    out = []
    for _ in range(20):
        p = int(rng.integers(3, 9))
        edges = random_graph(rng, p, 0.35)
        nbrs = neighborhoods(p, edges)
        tau = [len(n) ** ETA for n in nbrs]
        x = rng.normal(scale=2.0, size=p)
        t = float(rng.uniform(0.2, 1.2))
        parts, total = latent_sum(p, nbrs)
        value = solve(cp.Problem(cp.Minimize(0.5 * cp.sum_squares(total - x) + t * graph_norm_expr(parts, tau))))
        out.append(
            {"p": p, "edges": edges, "tau": tau, "x": x.tolist(), "t": t, "prox": total.value.tolist(), "value": value}
        )
    return out


def regression_data(rng, n, p):
    X = rng.normal(size=(n, p))
    beta = np.zeros(p)
    beta[: max(1, p // 2)] = rng.uniform(1.0, 2.0, size=max(1, p // 2)) * rng.choice([-1, 1], size=max(1, p // 2))
    y = X @ beta + rng.normal(scale=0.7, size=n)
    return X, y


def sqrt_lasso_cases(rng):
    out = []
    n, p = 20, 5
    for _ in range(20):
        X, y = regression_data(rng, n, p)
        lam_max = math.sqrt(n) * np.max(np.abs(X.T @ y)) / np.linalg.norm(y)
        lam = float(rng.uniform(0.15, 0.6)) * lam_max
        b = cp.Variable(p)
        obj = cp.norm(y - X @ b, 2) / math.sqrt(n) + lam / n * cp.norm(b, 1)
        value = solve(cp.Problem(cp.Minimize(obj)))
        out.append({"X": X.tolist(), "y": y.tolist(), "lambda": lam, "objective": value, "beta": b.value.tolist()})
    return out


def group_sqrt_lasso_cases(rng):
    out = []
    n, p = 20, 6
    groups = [[0, 1, 2], [3, 4, 5]]
    tau = 3 ** ETA
    for _ in range(20):
        X, y = regression_data(rng, n, p)
        lam_max = math.sqrt(n) * max(np.linalg.norm(X[:, g].T @ y) for g in groups) / (tau * np.linalg.norm(y))
        lam = float(rng.uniform(0.2, 0.7)) * lam_max
        b = cp.Variable(p)
        obj = cp.norm(y - X @ b, 2) / math.sqrt(n) + lam / n * sum(tau * cp.norm(b[g], 2) for g in groups)
        value = solve(cp.Problem(cp.Minimize(obj)))
        out.append(
            {"X": X.tolist(), "y": y.tolist(), "blocks": [3, 3], "lambda": lam, "objective": value,
             "beta": b.value.tolist()}
        )
    return out


def gsre_cases(rng):
    out = []
    n = 20
    for _ in range(10):
        p = int(rng.integers(4, 7))
        edges = random_graph(rng, p, 0.4)
        nbrs = neighborhoods(p, edges)
        tau = [len(nb) ** ETA for nb in nbrs]
        X, y = regression_data(rng, n, p)
        lam_max = math.sqrt(n) * max(np.linalg.norm(X[:, nb].T @ y) / t for nb, t in zip(nbrs, tau)) / np.linalg.norm(y)
        lam = float(rng.uniform(0.2, 0.6)) * lam_max
        parts, total = latent_sum(p, nbrs)
        obj = cp.norm(y - X @ total, 2) / math.sqrt(n) + lam / n * graph_norm_expr(parts, tau)
        value = solve(cp.Problem(cp.Minimize(obj)))
        out.append(
            {"X": X.tolist(), "y": y.tolist(), "p": p, "edges": edges, "lambda": lam, "objective": value,
             "beta": total.value.tolist()}
        )
    return out


def main():
    rng = np.random.default_rng(20240611)
    fixtures = {
        "solver": f"cvxpy {cp.__version__} / CLARABEL",
        "eta": ETA,
        "projection": projection_cases(rng),
        "graph_norm": graph_norm_cases(rng),
        "prox": prox_cases(rng),
        "sqrt_lasso": sqrt_lasso_cases(rng),
        "group_sqrt_lasso": group_sqrt_lasso_cases(rng),
        "gsre": gsre_cases(rng),
    }
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(fixtures, indent=1) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
