"""Regenerate the bundled fixture datasets.

A latent-class generator gives every pair of columns real correlation, so
utility metrics respond to budget and model choice.  Run from the repo root:

    python scripts/make_fixtures.py
"""

import json
import os

import numpy as np

OUT = os.path.join(os.path.dirname(__file__), "..", "src", "dpsynth", "data")


def _draw(rng, probs, n):
    return rng.choice(len(probs), size=n, p=np.asarray(probs) / np.sum(probs))


def make_mixed10(n=5000, seed=20240601):
    """Latent classes couple the categorical columns; each numeric column is
    anchored to one categorical so cross-kind structure is learnable at small
    clique sizes."""
    rng = np.random.default_rng(seed)
    n_classes = 6
    z = _draw(rng, np.linspace(2.0, 0.9, n_classes), n)

    def cat_from_z(card, strength):
        # soft per-class preference tables: strength 0 = independent
        base = rng.dirichlet(np.full(card, 3.0))
        tables = np.stack(
            [base * (1 + strength * rng.dirichlet(np.full(card, 0.7)) * card)
             for _ in range(n_classes)]
        )
        tables = tables / tables.sum(axis=1, keepdims=True)
        u = rng.random(n)
        cum = np.cumsum(tables[z], axis=1)
        return (u[:, None] < cum).argmax(axis=1)

    education = cat_from_z(6, 1.6)
    employment = cat_from_z(5, 1.4)
    region = cat_from_z(8, 1.5)
    vehicle = cat_from_z(4, 1.1)
    married = cat_from_z(3, 1.0)
    product = cat_from_z(8, 1.6)

    # numerics: each keyed strongly to one categorical anchor
    age_mu = np.array([22, 38, 47, 26, 66])[employment]
    age = np.clip(rng.normal(age_mu, 6.5, n), 18, 90)
    inc_mu = np.array([9.3, 9.7, 10.1, 10.5, 10.9, 11.3])[education]
    income = np.clip(rng.lognormal(inc_mu, 0.35, n), 0, 150000)
    score_a = np.array([1.5, 2.0, 2.8, 3.8, 5.0, 6.5, 2.4, 4.4])[product]
    score = np.clip(rng.beta(score_a, 4.0, n), 0, 1)
    hours_mu = np.array([24, 40, 33])[married]
    hours = np.clip(rng.normal(hours_mu, 7.5, n), 0, 80)

    edu_labels = ["none", "primary", "secondary", "bachelor", "master", "phd"]
    emp_labels = ["student", "employed", "self-employed", "unemployed", "retired"]
    reg_labels = ["north", "south", "east", "west", "central", "coastal",
                  "mountain", "island"]
    veh_labels = ["none", "bike", "car", "multiple"]
    mar_labels = ["single", "married", "divorced"]
    prod_labels = ["basic", "bronze", "silver", "gold", "platinum", "elite",
                   "trial", "family"]

    header = [
        "education", "employment", "region", "vehicle", "married", "product",
        "age", "income", "score", "hours",
    ]
    rows = []
    for i in range(n):
        rows.append(
            [
                edu_labels[education[i]],
                emp_labels[employment[i]],
                reg_labels[region[i]],
                veh_labels[vehicle[i]],
                mar_labels[married[i]],
                prod_labels[product[i]],
                f"{age[i]:.3f}",
                f"{income[i]:.2f}",
                f"{score[i]:.5f}",
                f"{hours[i]:.3f}",
            ]
        )
    domain = {
        "columns": [
            {"name": "education", "kind": "categorical", "categories": edu_labels},
            {"name": "employment", "kind": "categorical", "categories": emp_labels},
            {"name": "region", "kind": "categorical", "categories": reg_labels},
            {"name": "vehicle", "kind": "categorical", "categories": veh_labels},
            {"name": "married", "kind": "categorical", "categories": mar_labels},
            {"name": "product", "kind": "categorical", "categories": prod_labels},
            {"name": "age", "kind": "numerical", "bounds": [18, 90]},
            {"name": "income", "kind": "numerical", "bounds": [0, 150000]},
            {"name": "score", "kind": "numerical", "bounds": [0, 1]},
            {"name": "hours", "kind": "numerical", "bounds": [0, 80]},
        ]
    }
    return header, rows, domain


def make_mixed5(n=500, seed=20240602):
    rng = np.random.default_rng(seed)
    z = _draw(rng, [0.5, 0.3, 0.2], n)
    color = np.array(["red", "green", "blue"])[
        np.minimum(z + (rng.random(n) < 0.2), 2)
    ]
    size = np.array(["small", "large"])[(z > 0).astype(int) ^ (rng.random(n) < 0.15)]
    shape = np.array(["circle", "square", "triangle"])[_draw(rng, [3, 2, 1], n)]
    weight = np.clip(rng.normal(10 + 5 * z, 3, n), 0, 40)
    length = np.clip(rng.normal(2 + z, 1, n), 0, 10)
    header = ["color", "size", "shape", "weight", "length"]
    rows = [
        [color[i], size[i], shape[i], f"{weight[i]:.3f}", f"{length[i]:.4f}"]
        for i in range(n)
    ]
    domain = {
        "columns": [
            {"name": "color", "kind": "categorical", "categories": ["red", "green", "blue"]},
            {"name": "size", "kind": "categorical", "categories": ["small", "large"]},
            {"name": "shape", "kind": "categorical",
             "categories": ["circle", "square", "triangle"]},
            {"name": "weight", "kind": "numerical", "bounds": [0, 40]},
            {"name": "length", "kind": "numerical", "bounds": [0, 10]},
        ]
    }
    return header, rows, domain


def write(name, header, rows, domain):
    os.makedirs(OUT, exist_ok=True)
    with open(os.path.join(OUT, f"{name}.csv"), "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")
    with open(os.path.join(OUT, f"{name}_domain.json"), "w") as fh:
        json.dump(domain, fh, indent=2)
        fh.write("\n")


if __name__ == "__main__":
    write("mixed10", *make_mixed10())
    write("mixed5", *make_mixed5())
    print("fixtures written to", os.path.abspath(OUT))
