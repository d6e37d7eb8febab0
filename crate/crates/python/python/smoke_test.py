"""Smoke test for the pyattrprof extension module.

Build and run from the repository root:

    cargo build --release -p pyattrprof --features extension-module
    cp target/release/libpyattrprof.so crates/python/python/pyattrprof.so
    python3 crates/python/python/smoke_test.py
"""

import os
import random
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import pyattrprof as ap


def squares(width, height, size, step, bright=200.0, dark=50.0):
    return [
        [bright if (r % step) < size and (c % step) < size else dark for c in range(width)]
        for r in range(height)
    ]


def main():
    image = squares(16, 16, 2, 4)

    # Area opening removes the 4-pixel squares and leaves the background.
    opened = ap.filter(image, "area", 5.0, tree="max")
    assert all(v == 50.0 for row in opened for v in row), opened
    closed = ap.filter(image, "area", 5.0, tree="min")
    assert closed == image
    assert ap.filter(image, "area", 3.0, tree="shapes") == image

    layers, names = ap.build_profile(image, [("area", [5.0, 20.0]), ("inertia", [0.2, 0.3])])
    assert len(layers) == 10 and len(names) == 10, names
    assert layers[2] == image
    sd_layers, _ = ap.build_profile(image, [("area", [5.0, 20.0])], variant="shapes", post="lf", window=3)
    assert len(sd_layers) == 6

    rng = random.Random(1)
    cube = [[[rng.random() + b * (r + c) for c in range(8)] for r in range(8)] for b in range(5)]
    scores, cumulative = ap.pca(cube, components=2)
    assert len(scores) == 2 and len(scores[0]) == 8
    assert 0.0 < cumulative[0] <= cumulative[1] <= 1.0 + 1e-12

    samples = [[float(i % 4), float(i % 7)] for i in range(60)]
    labels = [1 if s[0] < 2 else 2 for s in samples]
    forest = ap.Forest.train(samples, labels, trees=15, seed=7)
    assert forest.tree_count == 15 and forest.class_count == 2
    predicted = forest.predict(samples)
    assert predicted == labels
    assert ap.Forest.from_bytes(forest.to_bytes()).predict(samples) == predicted

    metrics = ap.evaluate(predicted, labels)
    assert metrics["oa"] == 1.0 and metrics["kappa"] == 1.0

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "model.aprf")
        forest.save(path)
        assert ap.Forest.load(path).predict(samples) == predicted
        try:
            ap.run_pipeline(preset="reykjavik")
        except ValueError as err:
            assert "input.image" in str(err)
        else:
            raise AssertionError("pipeline without inputs must fail")

    try:
        ap.filter(image, "roundness", 1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("unknown attribute must fail")

    print(f"pyattrprof {ap.__version__}: smoke test passed")


if __name__ == "__main__":
    main()
