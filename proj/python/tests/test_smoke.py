import numpy as np
import pytest

import hexlens


def test_grid_counts():
    m = hexlens.grid(2, 3, 4)
    assert m.num_cells == 24
    assert m.num_vertices == 3 * 4 * 5
    assert m.vertices.shape == (60, 3)
    assert m.cells.shape == (24, 8)
    assert m.edges.shape == (m.num_edges, 2)
    assert m.orientation == "positive"


def test_medit_round_trip():
    m = hexlens.demo_mesh()
    back = hexlens.parse_mesh(m.to_medit(), "medit")
    assert back.num_cells == m.num_cells
    np.testing.assert_array_equal(back.cells, m.cells)
    np.testing.assert_array_equal(back.vertices, m.vertices)


def test_parse_errors_raise():
    with pytest.raises(hexlens.MeshParseError):
        hexlens.parse_mesh("MeshVersionFormatted 2\nDimension 3\nVertices\n2\n0 0\n", "medit")
    with pytest.raises(ValueError):
        hexlens.parse_mesh("", "stl")


def test_unit_cube_quality():
    cube = hexlens.grid(1, 1, 1)
    assert hexlens.scaled_jacobian(cube)[0] == pytest.approx(1.0, abs=1e-12)
    assert hexlens.cell_volumes(cube)[0] == pytest.approx(1.0, abs=1e-12)


def test_importance_is_normalized():
    imp = hexlens.importance(hexlens.demo_mesh())
    assert imp["cell"].min() == 0.0
    assert imp["cell"].max() == 1.0
    assert imp["edge"].shape == (hexlens.demo_mesh().num_edges,)


def test_sheets_of_a_cube_grid():
    s = hexlens.sheets(hexlens.grid(3, 3, 3))
    assert len(s) == 9
    assert all(len(cells) == 9 for cells, _ in s)


def test_scene_lod():
    scene = hexlens.Scene(hexlens.grid(2, 2, 2))
    assert scene.level_count == 2
    assert scene.sheet_count == 6
    assert len(scene.visible_edges(0)) == 54
    assert set(scene.visible_edges(1)) <= set(scene.visible_edges(0))
    assert '"merges"' in scene.merge_log()


def test_render_is_deterministic():
    scene = hexlens.Scene(hexlens.demo_mesh())
    img, stats = hexlens.render(scene, {"width": 96, "height": 64, "threads": 1})
    assert img.shape == (64, 96, 4)
    assert img.dtype == np.uint8
    assert stats["fragments"] > 0
    hexlens.update(scene, {"threads": 4})
    again, _ = scene.render()
    np.testing.assert_array_equal(img, again)
    assert scene.render_png()[:4] == b"\x89PNG"


def test_params_validation_is_atomic():
    scene = hexlens.Scene(hexlens.grid(1, 1, 1))
    before = hexlens.state(scene)
    with pytest.raises(hexlens.ParamsError):
        hexlens.update(scene, {"width": 32, "face_alpha": 7})
    assert hexlens.state(scene) == before


def test_capacity_error_carries_the_hint():
    scene = hexlens.Scene(hexlens.demo_mesh())
    hexlens.update(scene, {"width": 64, "height": 48, "fragment_capacity": 4})
    with pytest.raises(hexlens.CapacityError) as info:
        scene.render()
    required = info.value.required
    assert required > 4
    hexlens.update(scene, {"fragment_capacity": required})
    img, _ = scene.render()
    assert img.shape == (48, 64, 4)


def test_pick_anchors_the_object_lens():
    scene = hexlens.Scene(hexlens.grid(1, 1, 1))
    hexlens.update(scene, {"width": 64, "height": 64})
    assert scene.pick(32, 32, 0.3)
    lens = hexlens.state(scene)["lens"]
    assert lens["enabled"] and lens["mode"] == "object"
    assert not scene.pick(0, 0, 0.3)
