import numpy as np
import pytest

import tracelift as tl


@pytest.fixture(scope="module")
def spaces():
    mesh = tl.refine_uniform(tl.unit_cube_mesh(1))
    return tl.ComplexSpaces.create(mesh, 0)


def test_mesh_roundtrip():
    m = tl.unit_cube_mesh(1)
    assert m.num_cells == 6
    copy = tl.Mesh(m.vertices, m.cells)
    assert copy.num_faces == m.num_faces
    assert tl.refine_uniform(m).num_cells == 48
    with pytest.raises(tl.Error):
        tl.Mesh(np.zeros((4, 3)), np.array([[0, 1, 2, 5]]))


def test_complex_identities(spaces):
    s = spaces
    G = tl.diff_operator("grad", s.W, s.N)
    C = tl.diff_operator("curl", s.N, s.V)
    D = tl.diff_operator("div", s.V, s.U)
    assert G.shape == (s.N.dim, s.W.dim)
    assert abs(C @ G).max() < 1e-12
    assert abs(D @ C).max() < 1e-12
    report = tl.verify_exactness(s.mesh, 0)
    assert report["exact"]


def test_rt_extension(spaces):
    s = spaces
    ext = tl.RtExtension(s)
    a = s.M.integrals
    g = np.random.default_rng(0).standard_normal(s.M.dim)
    g -= a @ g / (a @ a) * a
    sigma = ext.extend_meanzero(g)
    assert np.linalg.norm(ext.normal_trace @ sigma - g) <= 1e-12 * np.linalg.norm(g)
    assert np.linalg.norm(ext.div @ sigma) <= 1e-10 * np.linalg.norm(sigma)
    with pytest.raises(tl.Error, match="nonzero mean"):
        ext.extend_meanzero(a)


def test_nedelec_extension(spaces):
    s = spaces
    ext = tl.NedelecExtension(s)
    r = np.random.default_rng(1).standard_normal(s.R.dim)
    st = ext.extend_stages(r)
    u = st["result"]
    assert np.linalg.norm(ext.tangential_trace @ u - r) <= 1e-9 * np.linalg.norm(r)
    # curl of the extension is the RT extension of div_G r
    C = tl.diff_operator("curl", s.N, s.V)
    v = tl.RtExtension(s).extend_meanzero(ext.surf_div @ r)
    assert np.linalg.norm(C @ u - v) <= 1e-9 * np.linalg.norm(v)
    assert st["potential_residual"] < 1e-9


def test_norms_and_estimates(spaces):
    s = spaces
    A = tl.slobodetskij_gram(s.P, 0.5, seminorm_only=True)
    assert np.allclose(A, A.T)
    assert abs(A @ np.ones(s.P.dim)).max() < 1e-10 * abs(A).max()
    H = tl.hminus_half_gram(s.M, 1)
    assert np.linalg.eigvalsh(H).min() > 0
    est = tl.extension_norm_estimate("rt", s.mesh, 0, 1)
    assert 1.0 < est["C_L"] < 10.0
    assert est["trace_residual"] < 1e-9
    with pytest.raises(tl.Error):
        tl.extension_norm_estimate("bogus", s.mesh, 0, 1)


def test_study_run(tmp_path):
    cfg = {"studies": ["exactness"], "levels": 2, "out": str(tmp_path)}
    res = tl.run(cfg)
    assert res["exit_code"] == 0
    assert res["report"]["studies"]["exactness"]["passed"]
    assert (tmp_path / "exactness.csv").exists()
    with pytest.raises(tl.ConfigError):
        tl.run({"studies": ["rt_norm"], "levels": 1})
    with pytest.raises(tl.ConfigError):
        tl.run({"studies": ["exactness"], "unknown": 1})


def test_mesh_family_and_tables():
    meshes = tl.mesh_family("cube", "uniform", 2)
    assert [m.num_cells for m in meshes] == [6, 48]
    t = tl.verify_inverse_inequality(meshes, samples=5)
    assert len(t["rows"]) == 2 and t["max_over_min"] >= 1.0
    e = tl.decoupled_error_study("mixed", meshes, eps=[0.0, 1.0])
    assert e["csv"].startswith("level,h_max,ndof,eps")
