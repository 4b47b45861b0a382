#!/usr/bin/env python3
"""Regenerate the benchmark CSVs in this directory.

wine.csv and iris.csv are the classic UCI datasets, exported verbatim from
scikit-learn. The remaining four files are synthetic stand-ins: the original
crabs/fglass/meat/oliveoil collections are not redistributable here, so we
simulate datasets with the same shape (classes, dimension, size) and the same
qualitative difficulty (size-dominated morphometrics for crabs, overlapping
grouped compositions for fglass, smooth high-dimensional spectra for
meat/oliveoil).

Run: python3 make_datasets.py
"""
import csv

import numpy as np
from sklearn.datasets import load_iris, load_wine


def write_csv(name, features, labels, feature_names, label_names):
    with open(name, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(feature_names) + ["class"])
        for row, lab in zip(features, labels):
            w.writerow([repr(float(v)) for v in row] + [label_names[lab]])
    print(f"{name}: {features.shape[0]} rows, {features.shape[1]} features, "
          f"{len(set(labels))} classes")


def export_sklearn():
    wine = load_wine()
    write_csv("wine.csv", wine.data, wine.target,
              [n.replace(" ", "_") for n in wine.feature_names],
              list(wine.target_names))
    iris = load_iris()
    write_csv("iris.csv", iris.data, iris.target,
              [n.replace(" ", "_").replace("_(cm)", "") for n in iris.feature_names],
              list(iris.target_names))


def synth_crabs(rng):
    # Four groups (2 species x 2 sexes), 50 each, five carapace measurements.
    # One latent log-size factor carries most of the variance; group identity
    # lives in small shape offsets, which is what makes raw euclidean kNN hard.
    base = np.log(np.array([15.6, 12.7, 32.1, 36.4, 14.0]))
    species_off = {
        "A": np.array([0.015, 0.000, -0.010, 0.000, -0.045]),
        "B": np.array([-0.015, 0.000, 0.010, 0.000, 0.045]),
    }
    sex_off = {
        "M": np.array([0.000, -0.040, 0.005, 0.005, 0.000]),
        "F": np.array([0.000, 0.040, -0.005, -0.005, 0.000]),
    }
    rows, labels, names = [], [], []
    for si, sp in enumerate(("A", "B")):
        for xi, sx in enumerate(("M", "F")):
            for _ in range(50):
                size = rng.normal(0.0, 0.22) + (0.03 if sp == "B" else 0.0)
                noise = rng.normal(0.0, 0.015, size=5)
                x = np.exp(base + size + species_off[sp] + sex_off[sx] + noise)
                rows.append(np.round(x, 1))
                labels.append(si * 2 + xi)
    names = ["frontal_lobe", "rear_width", "carapace_length", "carapace_width",
             "body_depth"]
    order = rng.permutation(len(rows))
    feats = np.array(rows)[order]
    labs = np.array(labels)[order]
    write_csv("crabs.csv", feats, labs, names, ["BM", "BF", "OM", "OF"])


def synth_fglass(rng):
    # Four glass groups with overlapping oxide compositions, 9 features.
    sizes = [70, 76, 39, 29]
    dim = 9
    centers = rng.normal(0.0, 1.0, size=(4, dim))
    # shared correlation so classes overlap along common directions
    mix = rng.normal(0.0, 1.0, size=(dim, dim))
    q, _ = np.linalg.qr(mix)
    scales = np.array([1.2, 1.0, 0.8, 0.7, 0.6, 0.5, 0.4, 0.35, 0.3])
    rows, labels = [], []
    for ci, n in enumerate(sizes):
        for _ in range(n):
            z = rng.normal(0.0, 1.0, size=dim) * scales
            x = centers[ci] * 0.9 + q @ z
            # a couple of skewed trace-element style features
            x[7] = abs(x[7]) * 0.5 + rng.exponential(0.2)
            x[8] = abs(x[8]) * 0.4 + rng.exponential(0.1)
            rows.append(np.round(x, 4))
            labels.append(ci)
    order = rng.permutation(len(rows))
    feats = np.array(rows)[order]
    labs = np.array(labels)[order]
    names = [f"oxide_{i}" for i in range(1, dim + 1)]
    write_csv("fglass.csv", feats, labs, names, ["WinF", "WinNF", "Con", "Head"])


def synth_spectra(rng, name, sizes, dim, label_names):
    # Smooth spectra: per-class bump pattern + multiplicative scatter + noise.
    t = np.linspace(0.0, 1.0, dim)
    n_classes = len(sizes)
    rows, labels = [], []
    for ci, n in enumerate(sizes):
        crng = np.random.default_rng(1000 + ci)
        centers = crng.uniform(0.1, 0.9, size=4)
        widths = crng.uniform(0.03, 0.12, size=4)
        heights = crng.uniform(0.4, 1.2, size=4)
        base = sum(h * np.exp(-0.5 * ((t - c) / w) ** 2)
                   for c, w, h in zip(centers, widths, heights))
        for _ in range(n):
            scatter = np.exp(rng.normal(0.0, 0.15))
            drift = rng.normal(0.0, 0.08) + rng.normal(0.0, 0.05) * t
            jitter = sum(rng.normal(0.0, 0.04) *
                         np.exp(-0.5 * ((t - c) / w) ** 2)
                         for c, w in zip(centers, widths))
            x = scatter * (base + jitter) + drift + rng.normal(0.0, 0.01, size=dim)
            rows.append(np.round(x, 5))
            labels.append(ci)
    order = rng.permutation(len(rows))
    feats = np.array(rows)[order]
    labs = np.array(labels)[order]
    names = [f"w{i}" for i in range(1, dim + 1)]
    write_csv(name, feats, labs, names, label_names)


def main():
    export_sklearn()
    synth_crabs(np.random.default_rng(20260809))
    synth_fglass(np.random.default_rng(20260810))
    synth_spectra(np.random.default_rng(20260811), "meat.csv",
                  [47, 46, 46, 46, 46], 1050,
                  ["chicken", "turkey", "pork", "beef", "lamb"])
    synth_spectra(np.random.default_rng(20260812), "oliveoil.csv",
                  [25, 20, 20], 1050, ["greek", "italian", "spanish"])


if __name__ == "__main__":
    main()
