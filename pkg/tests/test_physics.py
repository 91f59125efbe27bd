import math

import numpy as np
import pytest

from roomsim import prefab
from roomsim.physics import (
    SUBSTEP_DT,
    SUBSTEPS_PER_STEP,
    ArmSpec,
    ControlCommands,
    DimensionMismatch,
    InvalidContact,
    PushOutcome,
    RobotSpec,
    Unreachable,
    World,
    forward_kinematics,
    inverse_kinematics,
)
from roomsim.scene import ObjectInstance, OrientedBBox, Scene, validate_scene

from oracles import (
    fk_matrix_chain,
    free_body_push_moves,
    revolute_push_torque,
    unicycle_closed_form,
)


def empty_world(width=20.0, depth=20.0):
    w = World(prefab.empty_room_scene(width, depth))
    w.place_robot(width / 2, depth / 2, 0.0)
    return w


class TestBaseStepping:
    def test_substep_contract(self):
        w = empty_world()
        assert SUBSTEP_DT == 1.0 / 120.0
        w.step(ControlCommands(linear=0.5))
        assert w.state.tick == 1
        assert w.state.substeps == SUBSTEPS_PER_STEP

    def test_straight_line_one_meter(self):
        w = empty_world()
        x0 = w.state.base_x
        for _ in range(30):
            w.step(ControlCommands(linear=1.0))
        assert w.state.base_x - x0 == pytest.approx(1.0, abs=1e-9)
        assert w.state.base_y == pytest.approx(10.0, abs=1e-12)

    def test_arc_matches_closed_form(self):
        w = empty_world()
        v, om = 1.0, math.pi / 2
        for _ in range(30):
            w.step(ControlCommands(linear=v, angular=om))
        ex, ey, eyaw = unicycle_closed_form(10.0, 10.0, 0.0, v, om, 1.0)
        assert ex - 10.0 == pytest.approx(2 / math.pi, abs=1e-9)
        assert ey - 10.0 == pytest.approx(2 / math.pi, abs=1e-9)
        assert w.state.base_x == pytest.approx(ex, abs=1e-9)
        assert w.state.base_y == pytest.approx(ey, abs=1e-9)
        assert w.state.base_yaw == pytest.approx(eyaw, abs=1e-9)

    def test_random_commands_match_closed_form_chain(self):
        rng = np.random.default_rng(5)
        w = empty_world(40.0, 40.0)
        x, y, yaw = 20.0, 20.0, 0.0
        w.place_robot(x, y, yaw)
        for _ in range(50):
            v = float(rng.uniform(-1, 1))
            om = float(rng.uniform(-math.pi, math.pi))
            w.step(ControlCommands(linear=v, angular=om))
            for _ in range(SUBSTEPS_PER_STEP):
                x, y, yaw = unicycle_closed_form(x, y, yaw, v, om, SUBSTEP_DT)
        assert w.state.base_x == pytest.approx(x, abs=1e-9)
        assert w.state.base_y == pytest.approx(y, abs=1e-9)

    def test_kinematic_stop_at_wall(self):
        w = empty_world(4.0, 4.0)
        w.place_robot(1.5, 2.0, 0.0)  # wall at x=4, 2.5 m ahead... use closer one
        w.place_robot(3.5 - 0.5, 2.0, 0.0)  # wall 1.0m ahead of center
        for _ in range(60):
            w.step(ControlCommands(linear=1.0))
        r = w.robot.footprint_radius
        assert w.state.base_x == pytest.approx(4.0 - r, abs=1e-3)
        collides, _ = w.check_collision()
        assert not collides

    def test_stop_never_in_collision_random(self):
        scene = prefab.furniture_scene(10, seed=2)
        w = World(scene)
        rng = np.random.default_rng(0)
        placed = False
        for _ in range(200):
            x, y = rng.uniform(1, 9, size=2)
            if w.base_free(x, y):
                w.place_robot(float(x), float(y), float(rng.uniform(-3, 3)))
                placed = True
                break
        assert placed
        for i in range(150):
            v = float(rng.uniform(-1, 1))
            om = float(rng.uniform(-math.pi, math.pi))
            w.step(ControlCommands(linear=v, angular=om))
            collides, contacts = w.check_collision()
            assert not collides, contacts

    def test_commands_clamped_and_reported(self):
        w = empty_world()
        info = w.step(ControlCommands(linear=5.0, angular=10.0))
        assert set(info["clamped"]) == {"linear", "angular"}
        # clamped to v=1 m/s, w=pi rad/s: arc for 4 substeps
        ex, ey, _ = unicycle_closed_form(10.0, 10.0, 0.0, 1.0, math.pi, 4.0 / 120.0)
        assert w.state.base_x == pytest.approx(ex, abs=1e-12)
        assert w.state.base_y == pytest.approx(ey, abs=1e-12)

    def test_determinism_hash(self):
        def run():
            scene = prefab.furniture_scene(8, seed=4)
            w = World(scene)
            w.place_robot(5.0, 5.0, 0.3)
            rng = np.random.default_rng(123)
            for _ in range(1000):
                w.step(ControlCommands(linear=float(rng.uniform(-1, 1)),
                                       angular=float(rng.uniform(-2, 2))))
            return w.state_hash()

        h1 = run()
        h2 = run()
        assert h1 == h2


class TestArmKinematics:
    def test_two_link_full_extension(self):
        arm = ArmSpec(axes=("y", "y"), lengths=(0.5, 0.5),
                      limits=((-3, 3), (-3, 3)), velocity_limits=(1, 1),
                      mount=(0.0, 0.0, 0.0))
        pos, _ = forward_kinematics(arm, [0.0, 0.0])
        assert pos == pytest.approx([1.0, 0.0, 0.0])

    def test_first_pitch_quarter_turn(self):
        arm = ArmSpec(axes=("y", "y"), lengths=(0.5, 0.5),
                      limits=((-3, 3), (-3, 3)), velocity_limits=(1, 1),
                      mount=(0.0, 0.0, 0.0))
        pos, R = forward_kinematics(arm, [math.pi / 2, 0.0])
        # pitch by +pi/2 about +y sends +x to -z
        assert pos == pytest.approx([0.0, 0.0, -1.0], abs=1e-12)
        assert R[:, 0] == pytest.approx([0.0, 0.0, -1.0], abs=1e-12)

    def test_fk_matches_matrix_chain_oracle(self):
        arm = ArmSpec()
        rng = np.random.default_rng(9)
        for _ in range(100):
            q = rng.uniform(-1.5, 1.5, size=arm.dof)
            pos, _ = forward_kinematics(arm, q)
            ref = fk_matrix_chain(arm.axes, arm.lengths, arm.mount, q)
            assert np.linalg.norm(pos - np.asarray(ref)) < 1e-9

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            forward_kinematics(ArmSpec(), [0.0, 0.0])

    def test_ik_full_extension_boundary(self):
        arm = ArmSpec()
        target, _ = forward_kinematics(arm, np.zeros(arm.dof))
        q = inverse_kinematics(target, arm)
        pos, _ = forward_kinematics(arm, q)
        assert np.linalg.norm(pos - target) <= 1e-3

    def test_ik_unreachable(self):
        arm = ArmSpec()
        with pytest.raises(Unreachable):
            inverse_kinematics(np.asarray(arm.mount) + [arm.reach + 0.2, 0, 0], arm)

    def test_ik_random_targets_round_trip(self):
        arm = ArmSpec()
        rng = np.random.default_rng(31)
        lo = np.array([l[0] for l in arm.limits])
        hi = np.array([l[1] for l in arm.limits])
        solved = 0
        for _ in range(100):
            q_true = rng.uniform(lo * 0.6, hi * 0.6)
            target, _ = forward_kinematics(arm, q_true)
            q = inverse_kinematics(target, arm, seed_config=rng.uniform(lo * 0.3, hi * 0.3))
            pos, _ = forward_kinematics(arm, q)
            assert np.linalg.norm(pos - target) <= 1e-3
            assert np.all(q >= lo - 1e-12) and np.all(q <= hi + 1e-12)
            solved += 1
        assert solved == 100

    def test_arm_tracks_target_under_velocity_limit(self):
        w = empty_world()
        rest = np.asarray(w.robot.arm.rest_config)
        target = np.array([0.5, -0.4, 0.3, 0.2])
        w.step(ControlCommands(arm_targets=target))
        # per joint: at most vel_limit * 4 * dt from the rest pose
        max_step = 1.0 * SUBSTEP_DT * SUBSTEPS_PER_STEP
        assert np.all(np.abs(w.state.arm_q - rest) <= max_step + 1e-12)
        for _ in range(120):
            w.step(ControlCommands(arm_targets=target))
        assert w.state.arm_q == pytest.approx(target, abs=1e-9)

    def test_joint_limits_never_exceeded_fuzz_100k_physics_steps(self):
        # >= 1e5 physics substeps of randomized commands (the stepper runs 4
        # substeps per env step)
        w = empty_world()
        arm = w.robot.arm
        lo = np.array([l[0] for l in arm.limits])
        hi = np.array([l[1] for l in arm.limits])
        rng = np.random.default_rng(77)
        t = rng.uniform(lo, hi)
        for k in range(25_000):
            if k % 20 == 0:
                t = rng.uniform(lo * 1.5, hi * 1.5)
            w.step(ControlCommands(linear=float(rng.uniform(-1, 1)),
                                   angular=float(rng.uniform(-3, 3)),
                                   arm_targets=t))
            assert np.all(w.state.arm_q >= lo - 1e-12)
            assert np.all(w.state.arm_q <= hi + 1e-12)
        assert w.state.substeps >= 100_000

    def test_object_joint_limits_under_velocity_fuzz(self):
        # residual joint velocities integrate, damp, and clamp at limits
        scene = prefab.furniture_scene(4, seed=2, with_cabinet=True)
        w = World(scene)
        w.place_robot(5.0, 8.5, 0.0)
        key = next(iter(w.state.joint_q))
        obj = w.scene.object_by_id(key[0])
        lo, hi = obj.model.joints[key[1]].limits
        rng = np.random.default_rng(3)
        for _ in range(300):
            w.state.joint_v[key] = float(rng.uniform(-4, 4))
            w.step(ControlCommands())
            assert lo - 1e-12 <= w.state.joint_q[key] <= hi + 1e-12


class TestPush:
    def free_box_world(self, mu_material="wood_oak", mass=1.0, half=(0.2, 0.2, 0.2)):
        scene = prefab.empty_room_scene(8.0, 8.0)
        box = ObjectInstance(
            id=1, class_label="box",
            bbox=OrientedBBox(center=(4.0, 4.0, half[2]), yaw=0.0, half_extents=half),
            model=prefab.box_model(half, material=mu_material, mass=mass),
            static=False)
        from dataclasses import replace
        scene = validate_scene(replace(scene, objects=(box,)))
        return World(scene)

    def test_free_box_moves_against_friction(self):
        # wood_oak mu=0.40, m=1 kg -> resistance 3.924 N < 60 N
        w = self.free_box_world(mass=1.0)
        mu = w.scene.materials["wood_oak"].friction
        assert free_body_push_moves(60.0, 1.0, mu)
        out = w.apply_push((3.8, 4.0, 0.2), (1.0, 0.0, 0.0))
        assert out.moved and out.displacement == pytest.approx(0.30, abs=1e-9)
        assert w.state.free_poses[1][0] == pytest.approx(4.30, abs=1e-9)

    def test_free_box_heavy_static_friction_wins(self):
        # m=20 kg: resistance = 0.4*20*9.81 = 78.5 N > 60 N
        w = self.free_box_world(mass=20.0)
        mu = w.scene.materials["wood_oak"].friction
        assert not free_body_push_moves(60.0, 20.0, mu)
        out = w.apply_push((3.8, 4.0, 0.2), (1.0, 0.0, 0.0))
        assert not out.moved and out.displacement == 0.0

    def test_push_static_wall(self):
        w = empty_world(4.0, 4.0)
        out = w.apply_push((2.0, 0.0, 1.0), (0.0, 1.0, 0.0))
        assert not out.moved and out.displacement == 0.0

    def test_invalid_contact(self):
        w = empty_world(4.0, 4.0)
        with pytest.raises(InvalidContact):
            w.apply_push((2.0, 2.0, 1.0), (1.0, 0.0, 0.0))

    def test_door_hinge_torque_balance(self):
        # push 5 cm from hinge, joint friction 5 Nm: torque 3.0 < 5 -> no move
        scene = prefab.door_scene(joint_friction=5.0)
        w = World(scene)
        door = scene.objects[0]
        anchor_model = door.model.joints[0].anchor
        anchor_world = (door.bbox.center[0] + anchor_model[0],
                        door.bbox.center[1] + anchor_model[1])
        px = anchor_world[0] + 0.05
        point = (px, anchor_world[1] + 0.02, 1.0)  # on +y face of panel
        tau = revolute_push_torque(60.0, (px, anchor_world[1]), anchor_world,
                                   1.0, (0.0, 1.0, 0.0))
        assert tau == pytest.approx(3.0, abs=1e-9)
        out = w.apply_push(point, (0.0, 1.0, 0.0))
        assert not out.moved
        assert abs(out.applied) == pytest.approx(3.0, abs=1e-6)

    def test_door_edge_swings(self):
        scene = prefab.door_scene(joint_friction=5.0)
        w = World(scene)
        door = scene.objects[0]
        cx, cy, cz = door.bbox.center
        hx = door.bbox.half_extents[0]
        point = (cx + hx - 0.03, cy + 0.02, 1.0)  # near the free edge
        out = w.apply_push(point, (0.0, 1.0, 0.0))
        assert out.moved
        assert out.displacement == pytest.approx(0.30, abs=1e-6)
        assert w.state.joint_q[(1, 0)] > 0.0

    def test_drawer_prismatic_force_balance(self):
        scene = prefab.empty_room_scene(8.0, 8.0)
        model = prefab.drawer_model(friction=8.0)
        from roomsim.scene import translate_model
        lo, hi = model.native_aabb()
        model = translate_model(model, -(lo + hi) / 2.0)
        half = tuple((hi - lo) / 2.0)
        cab = ObjectInstance(id=1, class_label="cabinet",
                             bbox=OrientedBBox(center=(4.0, 4.0, half[2]), yaw=0.0,
                                               half_extents=half),
                             model=model, static=True)
        from dataclasses import replace
        scene = validate_scene(replace(scene, objects=(cab,)))
        w = World(scene)
        # drawer front face +x: push along +x projects fully on the axis
        drawer_c, drawer_yaw, drawer_h = w._posed_links(1)[1]
        front = (drawer_c[0] + drawer_h[0], drawer_c[1], drawer_c[2])
        out = w.apply_push(front, (1.0, 0.0, 0.0))
        assert out.moved  # 60 N > 8 N
        assert out.displacement == pytest.approx(0.30, abs=1e-9)
        # opposing push projects negatively and still exceeds friction
        out2 = w.apply_push((drawer_c[0] + drawer_h[0] + 0.3, drawer_c[1],
                             drawer_c[2]), (-1.0, 0.0, 0.0))
        assert out2.applied < 0

    def test_push_monotone_in_force(self):
        scene = prefab.door_scene(joint_friction=12.0)
        door = scene.objects[0]
        cx, cy, cz = door.bbox.center
        hx = door.bbox.half_extents[0]
        point = (cx + hx * 0.5, cy + 0.02, 1.0)
        prev = -1.0
        for force in np.linspace(5.0, 120.0, 24):
            w = World(scene)
            out = w.apply_push(point, (0.0, 1.0, 0.0), max_force=float(force))
            assert out.displacement >= prev - 1e-12
            prev = out.displacement

    def test_pushes_capped_by_collision(self):
        # a second box directly in the path stops the slide early
        scene = prefab.empty_room_scene(8.0, 8.0)
        blocker_x = 4.55
        a = ObjectInstance(id=1, class_label="box",
                           bbox=OrientedBBox(center=(4.0, 4.0, 0.2), yaw=0.0,
                                             half_extents=(0.2, 0.2, 0.2)),
                           model=prefab.box_model((0.2, 0.2, 0.2), mass=1.0),
                           static=False)
        b = ObjectInstance(id=2, class_label="box",
                           bbox=OrientedBBox(center=(blocker_x, 4.0, 0.2), yaw=0.0,
                                             half_extents=(0.1, 0.2, 0.2)),
                           model=prefab.box_model((0.1, 0.2, 0.2), mass=50.0),
                           static=True)
        from dataclasses import replace
        scene = validate_scene(replace(scene, objects=(a, b)))
        w = World(scene)
        out = w.apply_push((3.8, 4.0, 0.2), (1.0, 0.0, 0.0))
        # gap between faces: (4.55-0.1) - (4.0+0.2) = 0.25 < 0.30
        assert out.displacement == pytest.approx(0.25, abs=1e-5)
        assert out.moved


class TestGraspRelease:
    def world_with_mug(self, mug_at):
        scene = prefab.empty_room_scene(8.0, 8.0)
        mug = ObjectInstance(id=1, class_label="mug",
                             bbox=OrientedBBox(center=mug_at, yaw=0.0,
                                               half_extents=(0.05, 0.05, 0.05)),
                             model=prefab.box_model((0.045, 0.045, 0.05),
                                                    material="ceramic_white", mass=0.3),
                             static=False)
        from dataclasses import replace
        scene = validate_scene(replace(scene, objects=(mug,)))
        w = World(scene)
        w.place_robot(4.0, 4.0, 0.0)
        return w

    def test_grasp_within_range(self):
        probe = self.world_with_mug((6.0, 6.0, 0.5))
        ee, _ = probe.ee_pose()
        # place the mug 3 cm from the end effector
        w = self.world_with_mug((float(ee[0] + 0.045 + 0.03), float(ee[1]),
                                 float(ee[2])))
        w.grasp()
        assert w.state.attached == 1
        assert not w.state.gripper_open

    def test_grasp_out_of_range(self):
        w = self.world_with_mug((6.0, 6.0, 0.5))
        w.grasp()
        assert w.state.attached is None
        assert not w.state.gripper_open  # gripper closed on nothing

    def test_attached_follows_and_release_settles(self):
        w = self.world_with_mug((4.0, 4.0, 0.5))
        ee, _ = w.ee_pose()
        mug = (float(ee[0] + 0.05), float(ee[1]), float(ee[2]))
        w = self.world_with_mug(mug)
        w.grasp()
        assert w.state.attached == 1
        for _ in range(30):
            w.step(ControlCommands(linear=0.5))
        pose = w.state.free_poses[1]
        ee2, _ = w.ee_pose()
        assert pose[0] - ee2[0] == pytest.approx(mug[0] - ee[0], abs=1e-9)
        w.release()
        assert w.state.attached is None
        # settled onto the floor: bottom at z=0
        assert w.state.free_poses[1][2] == pytest.approx(0.05, abs=1e-9)

    def test_release_onto_table(self):
        from dataclasses import replace
        from roomsim.scene import fill_bounding_box

        scene = prefab.empty_room_scene(8.0, 8.0)
        bbox = OrientedBBox(center=(4.6, 4.0, 0.375), yaw=0.0,
                            half_extents=(0.5, 0.4, 0.375))
        table = fill_bounding_box(bbox, prefab.table_model(), instance_id=5,
                                  class_label="table", static=True)
        mug = ObjectInstance(id=1, class_label="mug",
                             bbox=OrientedBBox(center=(4.0, 4.0, 0.9), yaw=0.0,
                                               half_extents=(0.05, 0.05, 0.05)),
                             model=prefab.box_model((0.045, 0.045, 0.05),
                                                    material="ceramic_white", mass=0.3),
                             static=False)
        scene = validate_scene(replace(scene, objects=(table, mug)))
        w = World(scene)
        w.place_robot(3.0, 4.0, 0.0)
        # hold the mug over the table top, then release
        w.state.attached = 1
        w.state.gripper_open = False
        w.state.free_poses[1] = (4.6, 4.0, 1.2, 0.0)
        w.state.grasp_local = (0.0, 0.0, 0.0)
        w.state.grasp_yaw = 0.0
        w.release()
        top = 0.75  # table bbox top
        assert w.state.free_poses[1][2] == pytest.approx(top + 0.05, abs=1e-6)


class TestCollisionOracle:
    def test_agreement_with_bruteforce(self):
        from roomsim.geometry import (points_obb_distance_2d, segment_box_distance,
                                      yaw_apply)
        from roomsim.physics import arm_joint_points

        scene = prefab.furniture_scene(10, seed=6)
        w = World(scene)
        f = w._flat_boxes()
        c, yaws, h = f["c"], f["yaw"], f["h"]
        rng = np.random.default_rng(42)
        for _ in range(1000):
            x, y = rng.uniform(0.5, 9.5, size=2)
            yaw = float(rng.uniform(-math.pi, math.pi))
            q = rng.uniform(-1.0, 1.0, size=4)
            got, _ = w.check_collision(base_pose=(x, y, yaw), arm_q=q)
            # brute force: disc vs every primitive + capsules vs every primitive
            expect = False
            r = w.robot.footprint_radius
            for i in range(len(yaws)):
                if c[i, 2] - h[i, 2] > w.robot.base_height or c[i, 2] + h[i, 2] < 0:
                    continue
                d = points_obb_distance_2d(np.array([[x, y]]), c[i, :2],
                                           yaws[i], h[i, :2])[0]
                if d < r:
                    expect = True
            if not expect:
                pts = yaw_apply(yaw, arm_joint_points(w.robot.arm, q)) + np.array(
                    [x, y, 0.0])
                segs = [(pts[i], pts[i + 1]) for i in range(len(pts) - 1)
                        if np.linalg.norm(pts[i + 1] - pts[i]) > 1e-9]
                for i in range(len(yaws)):
                    for p0, p1 in segs:
                        if segment_box_distance(p0, p1, c[i], yaws[i], h[i]) \
                                < w.robot.capsule_radius:
                            expect = True
                if pts[:, 2].min() < w.robot.capsule_radius:
                    expect = True
            assert got == expect

    def test_free_space_and_containment(self):
        w = empty_world(4.0, 4.0)
        got, contacts = w.check_collision(base_pose=(2.0, 2.0, 0.0),
                                          arm_q=np.zeros(4))
        assert not got and contacts == []
        got, contacts = w.check_collision(base_pose=(4.0, 2.0, 0.0),
                                          arm_q=np.zeros(4))
        assert got
        assert any("wall" in c[1] for c in contacts)
