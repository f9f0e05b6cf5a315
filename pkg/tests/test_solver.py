import math
from types import SimpleNamespace

import numpy as np
import pytest

from ale2fluid.assembly import EdgeBatch, tension_line_load
from ale2fluid.linalg import solve_direct
from ale2fluid.motion import discrete_normals, kinematic_trace, \
    solve_mesh_velocity, velocity_at_interface_nodes
from ale2fluid.params import PhysicalParams, SchemeConfig
from ale2fluid.solver import (
    State,
    assemble_momentum_system,
    measure_contact_state,
    solve_momentum_system,
    step,
    surface_tension_load,
)
from ale2fluid.spaces import build_spaces, make_reduction, pressure_cell_geometry

from conftest import couette_mesh, gravity_mesh, gravity_params, rest_state


def scheme(**kw):
    base = dict(motion_scheme="M1", gravity_domain="next", dt=0.025,
                motion_axis=1)
    base.update(kw)
    return SchemeConfig(**base)


class TestMomentumSystem:
    def test_rest_state_is_preserved_without_forcing(self, mesh_8x4):
        params = PhysicalParams(rho1=1.0, rho2=0.91, eta1=0.01, eta2=0.0091)
        s0 = rest_state(mesh_8x4)
        sc = scheme()
        system = assemble_momentum_system(s0, mesh_8x4,
                                          np.zeros(mesh_8x4.n_nodes), params, sc)
        assert np.abs(system.load).max() == 0.0
        u, p, _ = solve_momentum_system(system, sc)
        assert np.abs(u).max() <= 1e-12
        assert np.abs(p).max() <= 1e-12

    def test_hydrostatic_pressure_gradient(self, flat_8x4):
        params = gravity_params()
        s0 = rest_state(flat_8x4)
        res = step(s0, params, scheme())
        assert np.abs(res.state.velocity).max() <= 1e-10
        centers, scales = pressure_cell_geometry(res.state.mesh)
        p = res.state.pressure.reshape(-1, 3)
        gy = p[:, 2] / scales
        gx = p[:, 1] / scales
        rho = np.where(res.state.mesh.cell_region == 1, params.rho1, params.rho2)
        assert np.abs(gy + rho * params.g).max() <= 1e-8
        assert np.abs(gx).max() <= 1e-8

    def test_mesh_state_mismatch_raises(self, mesh_8x4):
        params = gravity_params()
        other = gravity_mesh(6, 4)
        with pytest.raises(ValueError):
            assemble_momentum_system(rest_state(mesh_8x4), other,
                                     np.zeros(other.n_nodes), params, scheme())

    def test_high_slip_coefficient_approaches_strong_dirichlet(self):
        # single fluid, periodic channel driven by the walls: beta -> inf
        # must converge to the Q2/P1 solve with the wall velocity imposed
        # strongly (no corners, so the constant wall data is exactly
        # representable in the constrained trace space)
        m = couette_mesh(nx=12, ny=4)
        V = 1.0
        sc = scheme(dt=0.1, motion_axis=0)
        params = PhysicalParams(rho1=1.0, rho2=1.0, eta1=1.0, eta2=1.0,
                                beta1=1e8, beta2=1e8,
                                u_b={"top": V, "bottom": -V})
        s0 = rest_state(m)
        res = step(s0, params, sc)

        # strong reference: same assembly with beta = 0 and the tangential
        # wall velocity eliminated by lifting
        params0 = PhysicalParams(rho1=1.0, rho2=1.0, eta1=1.0, eta2=1.0)
        system = assemble_momentum_system(s0, m, np.zeros(m.n_nodes), params0, sc)
        red0 = system.vspace.reduction
        fixed = {int(d): 0.0 for d in np.nonzero(red0.kind == 2)[0]}
        for tag, val in (("top", V), ("bottom", -V)):
            for n in np.unique(m.wall_edges[tag]):
                fixed.setdefault(2 * int(n), val)
        pairs = [(2 * int(s), 2 * int(mm)) for s, mm in m.periodic_pairs]
        pairs += [(2 * int(s) + 1, 2 * int(mm) + 1) for s, mm in m.periodic_pairs]
        red = make_reduction(system.vspace.dof_count, pairs=pairs,
                             fixed=sorted(fixed))
        import scipy.sparse as sp
        Ecol = sp.csr_matrix(system.E.reshape(-1, 1))
        T = red.T
        lift = red.lift(fixed)
        A_rr = (T.T @ system.A @ T).tocsr()
        B_r = (system.B @ T).tocsr()
        K = sp.bmat([[A_rr, -B_r.T, None], [B_r, None, Ecol],
                     [None, Ecol.T, None]], format="csr")
        rhs = np.concatenate([T.T @ (system.load - system.A @ lift),
                              -system.B @ lift, [0.0]])
        x = solve_direct(K, rhs)
        u_ref = red.expand(x[:red.n_free], lift)
        scale = np.abs(u_ref).max()
        assert np.abs(res.state.velocity - u_ref).max() <= 1e-6 * scale

    def test_direct_and_gmres_agree_on_step_systems(self, mesh_8x4):
        # the coupled saddle systems of one gravity step, both backends
        params = gravity_params()
        s0 = rest_state(mesh_8x4)
        r1 = step(s0, params, scheme(solver="direct"))
        r2 = step(s0, params, scheme(solver="gmres"))
        scale = np.abs(r1.state.velocity).max()
        assert np.abs(r1.state.velocity - r2.state.velocity).max() <= 1e-8 * scale
        # and the scalar mesh-velocity system
        nn = discrete_normals(mesh_8x4)
        rng = np.random.default_rng(0)
        tr = rng.standard_normal(len(nn.nodes))
        wd = solve_mesh_velocity(mesh_8x4, nn.nodes, tr, 1).w
        wg = solve_mesh_velocity(mesh_8x4, nn.nodes, tr, 1, solver="gmres").w
        assert np.abs(wd - wg).max() <= 1e-8 * np.abs(wd).max()


class TestSurfaceTension:
    def test_zero_gamma_zero_load(self, mesh_8x4):
        params = gravity_params(gamma=0.0)
        load = surface_tension_load(mesh_8x4, params)
        assert np.abs(load).max() == 0.0

    def test_straight_interface_at_static_angle_is_equilibrium(self):
        # vertical interfaces meeting horizontal walls at theta_s = pi/2:
        # the capillary load does no virtual work on admissible fields
        m = couette_mesh(nx=16, ny=4)
        params = PhysicalParams(rho1=1.0, rho2=1.0, eta1=1.0, eta2=1.0,
                                gamma=5.5, theta_s=math.pi / 2)
        load = surface_tension_load(m, params)
        vs, _ = build_spaces(m)
        reduced = vs.reduction.T.T @ load
        assert np.abs(reduced).max() <= 1e-10 * params.gamma

    def test_closed_circular_chain_total_power(self):
        # load applied to the identity position field equals -gamma |Sigma|
        E = 64
        R, gamma = 1.3, 2.2
        theta_nodes = np.linspace(0.0, 2 * np.pi, 2 * E + 1)[:-1]
        nodes = R * np.column_stack([np.cos(theta_nodes), np.sin(theta_nodes)])
        edges = np.array([[2 * e, 2 * e + 1, (2 * e + 2) % (2 * E)]
                          for e in range(E)])
        fake = SimpleNamespace(nodes=nodes, n_nodes=len(nodes))
        eb = EdgeBatch(fake, edges, 5)
        load = tension_line_load(eb, gamma)
        v_id = nodes.ravel()
        length = float(np.einsum("q,eq->", eb.w, eb.ds))
        assert load @ v_id == pytest.approx(-gamma * length, rel=1e-8)

    def test_right_angle_contact_term_vanishes(self):
        # theta_s = pi/2: the contact-point contribution is zero, so the
        # load is pure line tension
        m = couette_mesh(nx=16, ny=4)
        params = PhysicalParams(rho1=1.0, rho2=1.0, eta1=1.0, eta2=1.0,
                                gamma=5.5, theta_s=math.pi / 2)
        load = surface_tension_load(m, params)
        line_only = np.zeros_like(load)
        for ch in m.interface_chains:
            eb = EdgeBatch(m, ch.edges, 5)
            line_only += tension_line_load(eb, params.gamma)
        assert np.abs(load - line_only).max() <= 1e-14


class TestContactState:
    def test_vertical_interface_right_angle(self):
        m = couette_mesh(nx=16, ny=4)
        s = rest_state(m)
        params = PhysicalParams(rho1=1.0, rho2=1.0, eta1=1.0, eta2=1.0)
        for c in measure_contact_state(s, params):
            assert c.theta == pytest.approx(math.pi / 2, abs=1e-12)

    def test_tilted_interface_angles(self, mesh_8x4):
        s = rest_state(mesh_8x4)
        params = gravity_params()
        states = {c.wall: c for c in measure_contact_state(s, params)}
        assert states["left"].theta == pytest.approx(
            math.pi / 2 + math.atan(0.2), abs=1e-12)
        assert states["right"].theta == pytest.approx(
            math.pi / 2 - math.atan(0.2), abs=1e-12)

    def test_slip_velocity_relative_to_wall(self):
        m = couette_mesh(nx=16, ny=4)
        params = PhysicalParams(rho1=1.0, rho2=1.0, eta1=1.0, eta2=1.0,
                                u_b={"top": 0.25, "bottom": -0.25})
        u = np.zeros(2 * m.n_nodes)
        s = State(velocity=u, pressure=np.zeros(3 * m.n_cells), mesh=m)
        for c in measure_contact_state(s, params):
            expected = -params.wall_velocity(c.wall)
            assert c.slip == pytest.approx(expected, abs=1e-14)


class TestStep:
    def test_hydrostatic_rest_is_fixed_point_all_schemes(self, flat_8x4):
        params = gravity_params()
        for name in ("M1", "M2", "M3"):
            s0 = rest_state(flat_8x4)
            res = step(s0, params, scheme(motion_scheme=name))
            moved = np.abs(res.state.mesh.nodes - flat_8x4.nodes).max()
            assert moved <= 1e-10
            assert np.abs(res.state.velocity).max() <= 1e-9

    def test_m2_trace_condition_holds_at_convergence(self):
        m = gravity_mesh(10, 6)
        params = gravity_params()
        sc = scheme(motion_scheme="M2")
        s0 = rest_state(m)
        res = step(s0, params, sc)
        assert res.fixed_point_iterations >= 1
        nn = discrete_normals(res.state.mesh)
        u_if = velocity_at_interface_nodes(res.state.mesh, res.state.velocity, nn)
        tr_new = kinematic_trace(nn, u_if, 1)
        used = res.mesh_velocity.trace_values
        assert np.abs(tr_new - used).max() <= sc.m2_tol / sc.dt

    def test_m3_first_step_falls_back_to_m1(self, mesh_8x4):
        params = gravity_params()
        r3 = step(rest_state(mesh_8x4), params, scheme(motion_scheme="M3"))
        r1 = step(rest_state(mesh_8x4), params, scheme(motion_scheme="M1"))
        assert r3.solver_stats.get("m3_fallback")
        assert np.allclose(r3.state.velocity, r1.state.velocity)

    def test_mass_conserved_over_steps(self):
        from ale2fluid.mesh import region_integral
        m = gravity_mesh(12, 6)
        params = gravity_params()
        sc = scheme()
        s = rest_state(m)
        a0 = region_integral(m, 1, 1.0)
        for _ in range(8):
            s = step(s, params, sc).state
        assert abs(region_integral(s.mesh, 1, 1.0) - a0) <= 1e-12 * a0
