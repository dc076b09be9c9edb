import numpy as np
import pytest

from ridepulse.ingest import RiderProfile, Sample, Session


def make_session(
    hr=None,
    power=None,
    speed=None,
    distance=None,
    cadence=None,
    altitude=None,
    session_id="s",
    rider_id="r",
    t=None,
):
    """Build a Session from per-channel lists; None entries mean absent."""
    channels = [hr, power, speed, distance, cadence, altitude]
    n = max(len(c) for c in channels if c is not None)
    t = list(range(n)) if t is None else t

    def cell(channel, i):
        if channel is None:
            return None
        v = channel[i]
        return None if v is None else float(v)

    samples = tuple(
        Sample(
            t=int(t[i]),
            heart_rate=cell(hr, i),
            power=cell(power, i),
            speed=cell(speed, i),
            distance=cell(distance, i),
            cadence=cell(cadence, i),
            altitude=cell(altitude, i),
        )
        for i in range(n)
    )
    return Session(session_id=session_id, rider_id=rider_id, samples=samples)


def make_profile(rider_id="r", weight=70.0, ftp=300.0):
    return RiderProfile(rider_id=rider_id, weight=weight, ftp=ftp)


@pytest.fixture
def ramp_session():
    """hr[t] = t for t = 0..100, constant power; long enough for the lag."""
    n = 101
    return make_session(
        hr=list(range(n)),
        power=[200.0] * n,
        speed=[30.0] * n,
        distance=[i * 0.008 for i in range(n)],
        cadence=[90.0] * n,
        altitude=[100.0] * n,
    )


def random_session(rng, n=None, blank_prob=0.2, session_id="s", rider_id="r"):
    """Random session with random blanks, for round-trip style properties."""
    n = n or int(rng.integers(1, 40))

    def channel(lo, hi, decimals):
        vals = np.round(rng.uniform(lo, hi, size=n), decimals)
        return [None if rng.random() < blank_prob else float(v) for v in vals]

    return make_session(
        hr=channel(50, 190, 1),
        power=channel(0, 450, 1),
        speed=channel(0, 60, 2),
        distance=sorted(channel(0, 150, 3), key=lambda v: (v is None, v or 0.0)),
        cadence=channel(40, 120, 1),
        altitude=channel(0, 2000, 1),
        session_id=session_id,
        rider_id=rider_id,
    )
