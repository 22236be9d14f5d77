import json
import math

import numpy as np
import pytest

from nmrsim.program import (
    Delay,
    EnsembleSpec,
    FrameZ,
    Pulse,
    PulseProgram,
    PulseSegment,
    RotationSpec,
    event_from_dict,
    event_to_dict,
    program,
)


def test_rotation_spec_validation():
    with pytest.raises(ValueError):
        RotationSpec((1.0, 1.0, 0.0), 1.0)
    r = RotationSpec.xy(math.pi / 2, math.pi, spin=[1, 2])
    assert r.targets == (1, 2)
    assert np.allclose(r.axis, (0, 1, 0))


def test_segment_validation():
    with pytest.raises(ValueError):
        PulseSegment(-1.0, 0.0, 1e-6)
    with pytest.raises(ValueError):
        PulseSegment(1.0, 0.0, 0.0)


def test_program_json_round_trip(tmp_path):
    prog = program(
        Pulse(RotationSpec.xy(0.0, math.pi / 2, 1)),
        Delay(1e-3),
        FrameZ(2, 0.3),
        Pulse(PulseSegment(5000.0, 0.1, 2e-5, 10.0, (1,))),
    )
    path = tmp_path / "p.json"
    prog.to_json(path)
    again = PulseProgram.from_json(path)
    assert again == prog
    assert again.duration_s == pytest.approx(1e-3 + 2e-5)
    json.loads(path.read_text())


def test_event_dict_errors():
    with pytest.raises(ValueError):
        event_from_dict({"type": "wait"})
    with pytest.raises(ValueError):
        event_from_dict({"type": "pulse"})
    assert event_from_dict(event_to_dict(Delay(2.0))) == Delay(2.0)


def test_rotation_axis_shorthand():
    r = RotationSpec.from_dict({"axis": "-y", "angle_rad": 1.0})
    assert r.axis == (0.0, -1.0, 0.0)


def test_program_rejects_non_events():
    with pytest.raises(TypeError):
        PulseProgram(("delay",))


def test_ensembles():
    e = EnsembleSpec.gaussian_offsets(50.0, 21)
    assert len(e) == 21
    assert math.fsum(m.weight for m in e.members) == pytest.approx(1.0)
    offs = [m.b0_offset_hz for m in e.members]
    assert offs[0] == pytest.approx(-150.0) and offs[-1] == pytest.approx(150.0)
    assert len(EnsembleSpec.gaussian_offsets(0.0, 21)) == 1
    again = EnsembleSpec.from_dict(e.to_dict())
    assert np.allclose([m.weight for m in again.members], [m.weight for m in e.members])
    with pytest.raises(ValueError):
        EnsembleSpec(())
