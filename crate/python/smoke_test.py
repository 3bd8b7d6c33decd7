"""Smoke test for the shiftconv extension module.

Build and install first, e.g. `maturin build --release` in crates/shiftconv-py
followed by `pip install target/wheels/shiftconv-*.whl`.
"""

from fractions import Fraction

import shiftconv


def main():
    d3 = shiftconv.sieve_dk(3, 12)
    assert d3[12] == 18, d3
    assert shiftconv.ramanujan_sum(4, 2) == -2
    assert shiftconv.ramanujan_sum(6, 4) == -1
    assert shiftconv.factorize(360) == [(2, 3), (3, 2), (5, 1)]
    assert shiftconv.singular_series(2, 2) == Fraction(3, 2)
    assert shiftconv.coset_count(2, 2) == 6
    assert shiftconv.coset_count(3, 1) == 4

    s = shiftconv.direct_sum(2, 1, 1e5)
    m = shiftconv.main_term(2, 1, 1e5)
    assert abs(s - m.value) / s < 0.01, (s, m)

    direct, matrix = shiftconv.correspondence(2, 3, 1, 100.0)
    assert direct == matrix

    tag, witness = shiftconv.classify_partition([Fraction(1, 2), Fraction(1, 2)], Fraction(1, 16))
    assert tag == "A" and witness == []
    tag, _ = shiftconv.classify_partition([Fraction(3, 10)] * 3 + [Fraction(1, 10)], Fraction(1, 16))
    assert tag == "B"

    t = shiftconv.exponent_table(Fraction(1, 16), Fraction(7, 64))
    assert t["small"] == Fraction(501, 512)
    assert t["small_b_limit"] == Fraction(25, 28)

    rep = shiftconv.run_experiment("k = 2\nh = 1\nx_min = 1e4\nx_max = 1e6\ngrid_points = 8\n")
    assert len(rep.rows) == 8
    assert rep.to_csv().startswith("x,S,M,R,absR\n")
    assert rep.fitted_slope is not None and rep.fitted_slope < 0.85

    try:
        shiftconv.run_experiment("k = 2\nh = 1\nx_min = 10\nx_max = 1e6\ngrid_points = 8\n")
    except ValueError:
        pass
    else:
        raise AssertionError("bad config accepted")

    failed = [c for c in shiftconv.verify_all(0) if not c[1]]
    assert not failed, failed
    print(f"ok: S = {s:.6g}, M = {m.value:.6g}, k = 2 slope {rep.fitted_slope:.3f}")


if __name__ == "__main__":
    main()
