import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from ucaris.channel import build_chain
from ucaris.geometry import MAX_ROTATION, SegmentGeometry, Side, UcaSpec

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

WAVELENGTH = 0.003
BETA = 4 * math.pi
RADIUS = 0.12
REFERENCE_DISTANCES = (4.2, 4.5, 4.2)
REFERENCE_SIDES = (Side.TRANSMIT, Side.RECEIVE, Side.RECEIVE)


def make_segment(n=4, distance=4.2, side=Side.TRANSMIT, theta=0.0, phi=0.0,
                 rot_x=0.0, rot_y=0.0, radius=RADIUS, alpha_src=0.0, alpha_sink=0.0):
    return SegmentGeometry(UcaSpec(radius, n, alpha_src), UcaSpec(radius, n, alpha_sink),
                           distance, theta, phi, rot_x, rot_y, side)


def reference_segments(n=4, rotations=((0, 0), (0, 0), (0, 0)), included=((0, 0),) * 3):
    return [make_segment(n, d, s, th, ph, rx, ry)
            for d, s, (rx, ry), (th, ph) in zip(REFERENCE_DISTANCES, REFERENCE_SIDES, rotations,
                                                 included)]


def reference_chain(n=4, **kw):
    return build_chain(reference_segments(n, **kw), WAVELENGTH, BETA)


def random_pose(rng, max_rot=math.pi / 9):
    return dict(theta=float(rng.uniform(0, 2 * math.pi)),
                phi=float(rng.uniform(0, math.pi / 2 - 1e-6)),
                rot_x=float(rng.uniform(-max_rot, max_rot)),
                rot_y=float(rng.uniform(-max_rot, max_rot)))


def random_chain(rng, n, max_rot=math.pi / 9, hops=3):
    sides = [Side.TRANSMIT] + [Side.RECEIVE] * (hops - 1)
    dists = [4.2, 4.5, 4.2, 4.4, 4.6][:hops]
    segs = [make_segment(n, d, s, **random_pose(rng, max_rot)) for d, s in zip(dists, sides)]
    return build_chain(segs, WAVELENGTH, BETA)


angles = st.floats(-MAX_ROTATION, MAX_ROTATION, allow_nan=False)
small_angles = st.floats(-math.pi / 9, math.pi / 9, allow_nan=False)
azimuths = st.floats(0, 2 * math.pi, allow_nan=False, exclude_max=True)
polars = st.floats(0, math.pi / 2, allow_nan=False, exclude_max=True)
sides = st.sampled_from(list(Side))


@st.composite
def segments(draw, n=st.integers(1, 9), rot=angles):
    return make_segment(n=draw(n), distance=draw(st.floats(1.0, 30.0)), side=draw(sides),
                        theta=draw(azimuths), phi=draw(polars), rot_x=draw(rot),
                        rot_y=draw(rot), radius=draw(st.floats(0.01, 0.3)),
                        alpha_src=draw(azimuths), alpha_sink=draw(azimuths))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def reference():
    from ucaris.harness import load_scenario
    return load_scenario("reference")


ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion."""
    def report(number: int, title: str, ok: bool, detail: str) -> bool:
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        ACCEPTANCE[number] = line
        print(line)
        return ok
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
