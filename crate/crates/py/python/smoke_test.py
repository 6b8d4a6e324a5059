"""Smoke test for the catloop_py extension module."""

import json
import math
from pathlib import Path

import catloop_py as cl

DATA = Path(__file__).resolve().parents[3] / "data"


def main():
    cu = cl.Structure.from_cif((DATA / "cu_fcc.cif").read_text())
    assert len(cu) == 4 and cu.formula == "Cu"
    assert abs(cu.min_pair_distance() - 3.61 / math.sqrt(2)) < 1e-6
    again = cl.Structure.from_cif(cu.to_cif())
    assert again.sites == cu.sites

    try:
        cl.Structure.from_cif("data_x\n_cell_length_a 'broken\n")
    except ValueError as e:
        print("bad CIF rejected:", e)
    else:
        raise AssertionError("bad CIF accepted")

    r = cl.pvcp(cu.to_cif(), "Cu4")
    assert r["total"] == 1.0
    print("pvcp:", {k: r[k] for k in ("s_parse", "s_valid", "s_comp", "s_phys", "total")})

    adv = cl.group_advantages([0.2, 0.5, 0.8], epsilon=0.0)
    assert abs(adv[2] - 1.224745) < 1e-5 and abs(sum(adv)) < 1e-12
    assert cl.kl_estimate([-0.3, -1.2], [-0.3, -1.2]) == 0.0
    loss = cl.grpo_loss([([-1.0], [-1.0], 0.2), ([-1.0], [-1.0], 0.8)])
    print("grpo loss:", loss["total"])
    assert abs(cl.mmtg_loss(2.0, 1.0, 1.0) - 2.47682) < 1e-5

    text = cl.system_text((DATA / "co_cu111.cif").read_text(), (DATA / "co_cu111.json").read_text())
    assert text == "C O</s>Cu (1 1 1)</s>primary: Cu@Cu5; secondary: Cu@Cu2, Cu@Cu8", text

    known = cl.Structure.from_cif((DATA / "cu_distorted.cif").read_text())
    report = cl.run_search(known, known.surrogate_energy(), seed=3)
    print("search success:", report["success"], "best |dE|:", report["best_abs_delta_e"])
    json.dumps(report)
    print("smoke test passed")


if __name__ == "__main__":
    main()
