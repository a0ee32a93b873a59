"""Smoke test for the dgvf extension module."""

import json
import math

import dgvf


def main():
    names = dgvf.preset_names()
    assert "lissajous3d-10" in names, names

    # On the unit circle with omega = 0 the field points along the tangent.
    v = dgvf.chi("circle", [1.0, 0.0], 0.0, [1.0, 1.0])
    assert len(v) == 3 and math.isclose(v[0], 0.0, abs_tol=1e-12), v

    text = dgvf.preset_toml("circle-usv-3")
    checks = dgvf.validate(text)
    assert all(status != "fail" for _, status, _ in checks), checks

    short = text.replace("duration = 60.0", "duration = 10.0")
    report_json, times, omegas = dgvf.simulate(short)
    report = json.loads(report_json)
    assert len(omegas) == 3 and len(omegas[0]) == len(times)
    assert report["claim4"]["passed"], report

    try:
        dgvf.preset_toml("nope")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown preset accepted")
    print("dgvf smoke test ok:", len(names), "presets,", len(times), "ticks")


if __name__ == "__main__":
    main()
