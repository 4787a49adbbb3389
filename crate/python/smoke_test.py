"""Smoke test for the mmtpd extension module.

Build first:  pip install --no-build-isolation ./crates/py
(or: maturin develop -m crates/py/Cargo.toml)
"""

import json
import random
import sys

import mmtpd


def matmul(a, b):
    return [[sum(a[i][k] * b[k][j] for k in range(len(b))) for j in range(len(b[0]))] for i in range(len(a))]


def main():
    assert len(mmtpd.mmt_nonzeros(2, 3, 4)) == 24
    assert mmtpd.enumerate_st(11)[0] == (2, 3)
    assert len(mmtpd.enumerate_st(11)) == 30

    for name in mmtpd.fixture_names():
        pd = mmtpd.fixture(name)
        assert pd.verify() == "exact_integer", name
        pd.check_structure()

    strassen = mmtpd.fixture("strassen")
    rng = random.Random(7)
    a = [[rng.randint(-9, 9) for _ in range(2)] for _ in range(2)]
    b = [[rng.randint(-9, 9) for _ in range(2)] for _ in range(2)]
    assert strassen.multiply(a, b) == matmul(a, b)

    big = mmtpd.fixture("t222_r7_s4_t1").compose()
    assert big.shape == (4, 4, 4) and big.rank == 49 and big.structure == (16, 11)
    assert big.verify() == "exact_integer"

    again = mmtpd.Pd.from_json(strassen.to_json())
    assert again.U == strassen.U and again.practical

    report = mmtpd.fixture("t223_r11_s2_t2").jacobian_rank()
    assert report["rank"] < report["cols"]

    pd, status, cost = mmtpd.search(2, 2, 2, 7, 4, 1, seed=0)
    print(f"search T_222 r=7 (4,1): {status}, cost {cost:.2e}")
    if status == "exact":
        practical = pd.discretize()
        assert practical.practical and practical.verify() == "exact_integer"

    broken = json.loads(strassen.to_json())
    broken["U"][0][0] = -broken["U"][0][0] or 1
    assert mmtpd.Pd.from_json(json.dumps(broken)).verify() == "failed"

    csv = mmtpd.run_campaign('shape = [2, 2, 2]\nrank = 7\nst = [[4, 1]]\nseeds = 3\n')
    assert csv.splitlines()[0].startswith("r_cs")
    print(csv, end="")
    print("smoke test passed")


if __name__ == "__main__":
    sys.exit(main())
