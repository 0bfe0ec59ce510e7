import numpy as np
import pytest

from core.errors import DomainError
from core.flow import FlowField
from core.ui.colorwheel import color_wheel, colorwheel_legend, flow_to_colorwheel_png


def _uniform(u: float, v: float, size: int = 2) -> FlowField:
    uv = np.empty((size, size, 2), np.float32)
    uv[..., 0], uv[..., 1] = u, v
    return FlowField(uv, np.ones((size, size), bool))


def test_wheel_has_55_columns_starting_red():
    wheel = color_wheel()
    assert wheel.shape == (55, 3)
    assert wheel[0].tolist() == [1.0, 0.0, 0.0]
    assert np.all((wheel >= 0) & (wheel <= 1))


def test_zero_flow_is_white():
    image = flow_to_colorwheel_png(FlowField.zeros(3, 2))
    assert image.shape == (2, 3, 3)
    assert np.all(image == 255)


def test_rightward_flow_at_max_is_red():
    image = flow_to_colorwheel_png(_uniform(1.0, 0.0), max_magnitude=1.0)
    assert image[0, 0].tolist() == [255, 0, 0]


def test_leftward_flow_is_cyan_blue():
    image = flow_to_colorwheel_png(_uniform(-1.0, 0.0), max_magnitude=1.0)
    red, green, blue = image[0, 0].tolist()
    assert red == 0
    assert blue == 255
    assert 150 < green < 255


def test_magnitude_saturates_at_max():
    capped = flow_to_colorwheel_png(_uniform(1.2, 1.6), max_magnitude=1.0)
    unit = flow_to_colorwheel_png(_uniform(0.6, 0.8), max_magnitude=1.0)
    assert np.array_equal(capped, unit)


def test_hue_follows_direction():
    angles = np.arange(8) * np.pi / 4
    colors = {
        tuple(flow_to_colorwheel_png(_uniform(np.cos(a), np.sin(a)), 1.0)[0, 0].tolist())
        for a in angles
    }
    assert len(colors) == 8


def test_auto_scale_uses_largest_valid_magnitude():
    uv = np.zeros((1, 3, 2), np.float32)
    uv[0, 0] = (2.0, 0.0)
    uv[0, 1] = (1.0, 0.0)
    uv[0, 2] = (50.0, 0.0)
    flow = FlowField(uv, np.array([[True, True, False]]))
    image = flow_to_colorwheel_png(flow)
    assert image[0, 0].tolist() == [255, 0, 0]
    assert image[0, 1].tolist() == [255, 128, 128]
    assert image[0, 2].tolist() == [0, 0, 0]


def test_max_magnitude_must_be_positive():
    with pytest.raises(DomainError):
        flow_to_colorwheel_png(FlowField.zeros(2, 2), max_magnitude=0.0)


def test_legend_disc():
    legend = colorwheel_legend(64)
    assert legend.shape == (64, 64, 3)
    assert legend.dtype == np.uint8
    assert np.all(legend[0, 0] == 255)
    # right edge of the disc is nearly pure red
    red, green, blue = legend[32, 63].tolist()
    assert red == 255
    assert green < 20 and blue < 20
    with pytest.raises(DomainError):
        colorwheel_legend(1)
