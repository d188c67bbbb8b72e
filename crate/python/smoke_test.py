"""Smoke test for the socketvib_py extension module.

Build and install first:
    maturin develop --manifest-path crates/py/Cargo.toml --release
or
    pip install --no-build-isolation ./crates/py
"""

import math
import os
import tempfile

import socketvib_py as sv


def main():
    assert sv.HANDS == ["CH", "VP", "IL", "SH"]

    # A pure z-axis tone keeps its energy through DFT321.
    n = 300
    az = [math.sin(2 * math.pi * 50 * i / 1000.0) for i in range(n)]
    zeros = [0.0] * n
    reduced = sv.dft321(zeros, zeros, az, 1000.0)
    e_in = sum(v * v for v in az)
    e_out = sum(v * v for v in reduced)
    assert abs(e_out - e_in) < 1e-9 * e_in, (e_in, e_out)

    assert sv.spearman_rho([1, 2, 3, 4], [2, 4, 6, 8]) == 1.0
    assert sv.spearman_rho([1, 1, 1], [1, 2, 3]) is None
    assert sv.chance_level(5) == 20.0
    assert sv.perception_accuracy("CH") == 58.0

    archives = [sv.SimArchive(h, 2, seed=1) for h in sv.HANDS]
    assert all(len(a) == 10 for a in archives)
    text, rho = sv.transmission_report(archives)
    print(text.strip())
    assert rho is not None and -1.0 <= rho <= 1.0

    with tempfile.TemporaryDirectory() as tmp:
        archive = sv.SimArchive("VP", 10, seed=3)
        path = os.path.join(tmp, "sim.bin")
        archive.save(path)
        assert sv.SimArchive.load(path).summary()["impacts"] == 50

        data = archive.to_dataset()
        assert data.counts() == [10] * 5 and not data.validate()
        train, val, test = data.split((0.6, 0.2, 0.2), seed=2)
        assert (train.role, len(train), len(val), len(test)) == ("train", 30, 10, 10)

        model = sv.Model.train(train, val, epochs=2, dense=6, hidden=6)
        assert model.history_csv.count("\n") == 3
        report = model.evaluate(test)
        assert 0.0 <= report["accuracy"] <= 1.0 and not report["warnings"]
        assert model.evaluate(train)["warnings"]

        model.save(os.path.join(tmp, "model.bin"))
        again = sv.Model.load(os.path.join(tmp, "model.bin"))
        assert again.predict(test) == model.predict(test)

    try:
        sv.SimArchive("XX", 1, seed=1)
    except ValueError as e:
        assert "invalid-argument" in str(e)
    else:
        raise AssertionError("unknown hand accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
