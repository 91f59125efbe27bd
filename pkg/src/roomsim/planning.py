"""Sampling-based motion planning (RRT, bidirectional RRT, lazy PRM),
acceleration-bounded shortcut smoothing, and layout-only geodesic waypoints.

Planners operate on immutable snapshots through a PlanSpace and are
deterministic for a given seed.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import grid_traverse, segments_intersect_2d


class InvalidStart(Exception):
    pass


class InvalidGoal(Exception):
    pass


class NoPathFound(Exception):
    def __init__(self, msg, iterations_used=0):
        super().__init__(msg)
        self.iterations_used = iterations_used


class Unreachable(Exception):
    pass


@dataclass
class PlannerParams:
    max_iterations: int = 5000
    goal_bias: float = 0.05
    steer_step: float = 0.2
    goal_tolerance: float = 0.1
    prm_samples: int = 500
    prm_k: int = 10
    seed: int = 0

    def __post_init__(self):
        assert self.max_iterations > 0 and self.steer_step > 0
        assert self.goal_tolerance > 0 and self.prm_samples > 0 and self.prm_k > 0
        assert 0.0 <= self.goal_bias <= 1.0


@dataclass
class PlanSpace:
    """Configuration space: box bounds, a collision predicate and an
    interpolation resolution. kind is 'base' (x, y) or 'arm' (joint vector).
    """

    lo: np.ndarray
    hi: np.ndarray
    is_free: callable
    batch_free: callable = None  # (N, D) -> bool mask; defaults to a loop
    step_resolution: float = 0.05
    kind: str = "base"
    _prm_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=float)
        self.hi = np.asarray(self.hi, dtype=float)
        assert np.all(self.lo < self.hi)
        if self.batch_free is None:
            self.batch_free = lambda Q: np.array([self.is_free(q) for q in Q])

    @property
    def dim(self):
        return len(self.lo)

    def in_bounds(self, q):
        return bool(np.all(q >= self.lo) and np.all(q <= self.hi))

    def segment_free(self, a, b):
        """Collision check of the straight segment at step_resolution."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        dist = float(np.linalg.norm(b - a))
        n = max(2, int(math.ceil(dist / self.step_resolution)) + 1)
        ts = np.linspace(0.0, 1.0, n)
        pts = a[None, :] + ts[:, None] * (b - a)[None, :]
        return bool(np.all(self.batch_free(pts)))


@dataclass
class Path:
    waypoints: list
    algorithm: str
    iterations_used: int
    timing: "PathTiming" = None

    @property
    def length(self) -> float:
        return float(sum(np.linalg.norm(np.asarray(b) - np.asarray(a))
                         for a, b in zip(self.waypoints, self.waypoints[1:])))

    @property
    def duration(self) -> float:
        return self.timing.duration if self.timing else float("nan")

    def sample_at(self, t: float) -> np.ndarray:
        assert self.timing is not None, "path has no time parameterization"
        return self.timing.sample(t)

    def to_record(self) -> dict:
        return {"algorithm": self.algorithm,
                "waypoints": [[round(float(v), 6) for v in w] for w in self.waypoints],
                "length": round(self.length, 6),
                "iterations_used": self.iterations_used}


def base_plan_space(world, bounds=None, step_resolution=0.05) -> PlanSpace:
    """Planar (x, y) space over a world's footprint-collision predicate."""
    if bounds is None:
        pts = np.concatenate([[w.a, w.b] for w in world.scene.walls]) \
            if world.scene.walls else np.array([[0.0, 0.0], [1.0, 1.0]])
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
    else:
        lo, hi = np.asarray(bounds[0], dtype=float), np.asarray(bounds[1], dtype=float)
    return PlanSpace(lo=lo, hi=hi,
                     is_free=lambda q: world.base_free(float(q[0]), float(q[1])),
                     batch_free=lambda Q: world.base_free_batch(np.asarray(Q)[:, :2]),
                     step_resolution=step_resolution, kind="base")


def arm_plan_space(world, step_resolution=0.05) -> PlanSpace:
    """Joint space of the arm at the robot's current base pose."""
    arm = world.robot.arm
    lo = np.array([l[0] for l in arm.limits])
    hi = np.array([l[1] for l in arm.limits])
    s = world.state

    def free(q):
        return not world._arm_contacts((s.base_x, s.base_y, s.base_yaw),
                                       np.asarray(q, dtype=float), first_only=True)

    return PlanSpace(lo=lo, hi=hi, is_free=free, step_resolution=step_resolution,
                     kind="arm")


# ---------------------------------------------------------------------------
# Rest-to-rest trapezoidal time parameterization
# ---------------------------------------------------------------------------

@dataclass
class SegmentProfile:
    start: np.ndarray
    delta: np.ndarray
    length: float
    v_peak: float
    a_peak: float
    t_acc: float
    t_cruise: float

    @property
    def duration(self):
        return 2.0 * self.t_acc + self.t_cruise

    def position(self, t):
        t = min(max(t, 0.0), self.duration)
        if self.length == 0.0:
            return self.start.copy()
        if t < self.t_acc:
            s = 0.5 * self.a_peak * t * t
        elif t < self.t_acc + self.t_cruise:
            s = 0.5 * self.a_peak * self.t_acc ** 2 + self.v_peak * (t - self.t_acc)
        else:
            tr = self.duration - t
            s = self.length - 0.5 * self.a_peak * tr * tr
        return self.start + (s / self.length) * self.delta


def _make_profile(a, b, vel, acc) -> SegmentProfile:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    delta = b - a
    L = float(np.linalg.norm(delta))
    if L == 0.0:
        return SegmentProfile(a, delta, 0.0, 0.0, 0.0, 0.0, 0.0)
    u = np.abs(delta) / L
    with np.errstate(divide="ignore"):
        vmax = float(np.min(np.where(u > 0, vel / np.where(u > 0, u, 1.0), np.inf)))
        amax = float(np.min(np.where(u > 0, acc / np.where(u > 0, u, 1.0), np.inf)))
    if L >= vmax * vmax / amax:
        t_acc = vmax / amax
        t_cruise = (L - vmax * vmax / amax) / vmax
        v_peak = vmax
    else:
        t_acc = math.sqrt(L / amax)
        t_cruise = 0.0
        v_peak = amax * t_acc
    return SegmentProfile(a, delta, L, v_peak, amax, t_acc, t_cruise)


@dataclass
class PathTiming:
    profiles: list

    @property
    def duration(self):
        return float(sum(p.duration for p in self.profiles))

    def sample(self, t):
        for p in self.profiles:
            if t <= p.duration or p is self.profiles[-1]:
                return p.position(t)
            t -= p.duration
        return self.profiles[-1].position(self.profiles[-1].duration)


def time_parameterize(waypoints, vel, acc) -> PathTiming:
    vel = np.asarray(vel, dtype=float)
    acc = np.asarray(acc, dtype=float)
    profiles = [_make_profile(a, b, vel, acc)
                for a, b in zip(waypoints, waypoints[1:])
                if np.linalg.norm(np.asarray(b) - np.asarray(a)) > 0]
    if not profiles:
        profiles = [_make_profile(waypoints[0], waypoints[0], vel, acc)]
    return PathTiming(profiles)


# ---------------------------------------------------------------------------
# Planners
# ---------------------------------------------------------------------------

def plan(space: PlanSpace, start, goal, algorithm: str,
         params: PlannerParams | None = None) -> Path:
    params = params or PlannerParams()
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    if not space.in_bounds(start) or not space.is_free(start):
        raise InvalidStart(f"start {start.tolist()} out of bounds or in collision")
    if not space.in_bounds(goal) or not space.is_free(goal):
        raise InvalidGoal(f"goal {goal.tolist()} out of bounds or in collision")
    name = algorithm.lower()
    if name == "rrt":
        return _plan_rrt(space, start, goal, params)
    if name == "birrt":
        return _plan_birrt(space, start, goal, params)
    if name == "lazyprm":
        return _plan_lazyprm(space, start, goal, params)
    raise ValueError(f"unknown algorithm {algorithm!r}")


def _steer(q_near, q_rand, step):
    d = q_rand - q_near
    dist = float(np.linalg.norm(d))
    if dist <= step:
        return q_rand.copy()
    return q_near + (step / dist) * d


class _Tree:
    def __init__(self, root, dim, capacity):
        self.nodes = np.empty((capacity, dim))
        self.nodes[0] = root
        self.parents = np.full(capacity, -1, dtype=np.int64)
        self.size = 1

    def nearest(self, q):
        d = np.linalg.norm(self.nodes[:self.size] - q[None, :], axis=1)
        return int(np.argmin(d))

    def add(self, q, parent):
        i = self.size
        self.nodes[i] = q
        self.parents[i] = parent
        self.size += 1
        return i

    def trace(self, i):
        out = []
        while i >= 0:
            out.append(self.nodes[i].copy())
            i = self.parents[i]
        return out[::-1]


def _plan_rrt(space, start, goal, params) -> Path:
    rng = np.random.default_rng(params.seed)
    tree = _Tree(start, space.dim, params.max_iterations + 2)
    for it in range(1, params.max_iterations + 1):
        if rng.random() < params.goal_bias:
            q_rand = goal.copy()
        else:
            q_rand = rng.uniform(space.lo, space.hi)
        ni = tree.nearest(q_rand)
        q_new = _steer(tree.nodes[ni], q_rand, params.steer_step)
        if not space.is_free(q_new) or not space.segment_free(tree.nodes[ni], q_new):
            continue
        i_new = tree.add(q_new, ni)
        if np.linalg.norm(q_new - goal) <= params.goal_tolerance:
            if np.array_equal(q_new, goal) or space.segment_free(q_new, goal):
                waypoints = tree.trace(i_new)
                if not np.array_equal(waypoints[-1], goal):
                    waypoints.append(goal.copy())
                return Path(waypoints, "RRT", it)
    raise NoPathFound("RRT budget exhausted", iterations_used=params.max_iterations)


def _connect(space, tree, q_target, step):
    """Greedily extend the tree toward q_target; return node index if reached."""
    ni = tree.nearest(q_target)
    current = tree.nodes[ni]
    parent = ni
    while True:
        q_new = _steer(current, q_target, step)
        if not space.is_free(q_new) or not space.segment_free(current, q_new):
            return None
        parent = tree.add(q_new, parent)
        current = tree.nodes[parent]
        if np.linalg.norm(current - q_target) <= 1e-12:
            return parent


def _plan_birrt(space, start, goal, params) -> Path:
    rng = np.random.default_rng(params.seed)
    ta = _Tree(start, space.dim, 4 * params.max_iterations + 4)
    tb = _Tree(goal, space.dim, 4 * params.max_iterations + 4)
    a_is_start = True
    for it in range(1, params.max_iterations + 1):
        q_rand = rng.uniform(space.lo, space.hi)
        ni = ta.nearest(q_rand)
        q_new = _steer(ta.nodes[ni], q_rand, params.steer_step)
        if space.is_free(q_new) and space.segment_free(ta.nodes[ni], q_new):
            i_new = ta.add(q_new, ni)
            j = _connect(space, tb, q_new, params.steer_step)
            if j is not None:
                pa = ta.trace(i_new)
                pb = tb.trace(j)
                if a_is_start:
                    waypoints = pa + pb[::-1][1:]
                else:
                    waypoints = pb + pa[::-1][1:]
                return Path(waypoints, "BiRRT", it)
        ta, tb = tb, ta
        a_is_start = not a_is_start
    raise NoPathFound("BiRRT budget exhausted", iterations_used=params.max_iterations)


def _build_roadmap(space, params):
    from scipy.spatial import cKDTree

    rng = np.random.default_rng(params.seed)
    nodes = []
    attempts = 0
    while len(nodes) < params.prm_samples and attempts < 50 * params.prm_samples:
        q = rng.uniform(space.lo, space.hi)
        attempts += 1
        if space.is_free(q):
            nodes.append(q)
    nodes = np.asarray(nodes)
    tree = cKDTree(nodes)
    _, nbrs = tree.query(nodes, k=min(params.prm_k + 1, len(nodes)))
    edges = {}
    for i in range(len(nodes)):
        for j in nbrs[i][1:]:
            a, b = (i, int(j)) if i < j else (int(j), i)
            edges[(a, b)] = float(np.linalg.norm(nodes[a] - nodes[b]))
    return {"nodes": nodes, "edges": edges, "invalid": set(), "valid": set(),
            "kdtree": tree}


def _plan_lazyprm(space, start, goal, params) -> Path:
    key = (params.prm_samples, params.prm_k, params.seed)
    roadmap = space._prm_cache.get(key)
    if roadmap is None:
        roadmap = _build_roadmap(space, params)
        space._prm_cache[key] = roadmap
    nodes = roadmap["nodes"]
    n = len(nodes)
    # connect the query endpoints to their k nearest roadmap nodes
    adj = {}

    def add_edge(a, b, w):
        adj.setdefault(a, []).append((b, w))
        adj.setdefault(b, []).append((a, w))

    for (a, b), w in roadmap["edges"].items():
        if (a, b) not in roadmap["invalid"]:
            add_edge(a, b, w)
    q_ids = {n: np.asarray(start, dtype=float), n + 1: np.asarray(goal, dtype=float)}
    _, nbrs = roadmap["kdtree"].query(np.asarray([start, goal]),
                                      k=min(params.prm_k, n))
    nbrs = np.atleast_2d(nbrs)
    query_invalid = set()
    for qi, row in zip((n, n + 1), nbrs):
        for j in row:
            add_edge(qi, int(j), float(np.linalg.norm(q_ids[qi] - nodes[int(j)])))

    def coords(i):
        return q_ids[i] if i in q_ids else nodes[i]

    def dijkstra():
        dist = {n: 0.0}
        prev = {}
        pq = [(0.0, n)]
        while pq:
            d, u = heapq.heappop(pq)
            if d > dist.get(u, math.inf):
                continue
            if u == n + 1:
                break
            for v, w in adj.get(u, []):
                pair = (min(u, v), max(u, v))
                if pair in roadmap["invalid"] or pair in query_invalid:
                    continue
                nd = d + w
                if nd < dist.get(v, math.inf):
                    dist[v] = nd
                    prev[v] = u
                    heapq.heappush(pq, (nd, v))
        if n + 1 not in dist:
            return None
        path = [n + 1]
        while path[-1] != n:
            path.append(prev[path[-1]])
        return path[::-1]

    rounds = 0
    while True:
        rounds += 1
        node_path = dijkstra()
        if node_path is None:
            raise NoPathFound("lazy PRM roadmap exhausted", iterations_used=rounds)
        ok = True
        for u, v in zip(node_path, node_path[1:]):
            pair = (min(u, v), max(u, v))
            if pair in roadmap["valid"]:
                continue
            if space.segment_free(coords(u), coords(v)):
                if u < n and v < n:
                    roadmap["valid"].add(pair)
            else:
                if u < n and v < n:
                    roadmap["invalid"].add(pair)
                else:
                    query_invalid.add(pair)
                ok = False
                break
        if ok:
            waypoints = [coords(i).copy() for i in node_path]
            return Path(waypoints, "LazyPRM", rounds)


# ---------------------------------------------------------------------------
# Acceleration-bounded shortcutting
# ---------------------------------------------------------------------------

def _dedupe_collinear(waypoints):
    out = [np.asarray(waypoints[0], dtype=float)]
    for w in waypoints[1:]:
        w = np.asarray(w, dtype=float)
        if np.linalg.norm(w - out[-1]) < 1e-12:
            continue
        if len(out) >= 2:
            u = out[-1] - out[-2]
            v = w - out[-1]
            nu, nv = np.linalg.norm(u), np.linalg.norm(v)
            if nu > 0 and nv > 0 and np.allclose(u / nu, v / nv, atol=1e-12):
                out[-1] = w
                continue
        out.append(w)
    return out


def _point_at_arclength(waypoints, s):
    """(point, segment index) at arc length s along the polyline."""
    acc = 0.0
    for i, (a, b) in enumerate(zip(waypoints, waypoints[1:])):
        seg = float(np.linalg.norm(b - a))
        if s <= acc + seg or i == len(waypoints) - 2:
            f = 0.0 if seg == 0 else min(max((s - acc) / seg, 0.0), 1.0)
            return a + f * (b - a), i
        acc += seg
    return waypoints[-1].copy(), len(waypoints) - 2


def shortcut(path: Path, accel_limit, vel_limit, space: PlanSpace,
             rounds: int = 100, rng=None) -> Path:
    """Replace random subpaths with straight rest-to-rest trapezoidal
    segments, accepting only replacements that keep the path collision-free
    and do not increase total duration (length can then only shrink)."""
    rng = rng or np.random.default_rng(0)
    vel = np.broadcast_to(np.asarray(vel_limit, dtype=float), (path.waypoints[0].size,))
    acc = np.broadcast_to(np.asarray(accel_limit, dtype=float),
                          (path.waypoints[0].size,))
    waypoints = _dedupe_collinear([np.asarray(w, dtype=float)
                                   for w in path.waypoints])
    if len(waypoints) < 2:
        timing = time_parameterize(waypoints + [waypoints[-1]], vel, acc)
        return Path(waypoints, path.algorithm, path.iterations_used, timing)
    duration = time_parameterize(waypoints, vel, acc).duration
    for _ in range(rounds):
        total = float(sum(np.linalg.norm(b - a)
                          for a, b in zip(waypoints, waypoints[1:])))
        if total <= 0:
            break
        s1, s2 = sorted(rng.uniform(0.0, total, size=2))
        p1, i1 = _point_at_arclength(waypoints, s1)
        p2, i2 = _point_at_arclength(waypoints, s2)
        if i2 <= i1:  # same segment: replacement is collinear, no gain
            continue
        candidate = waypoints[:i1 + 1] + [p1, p2] + waypoints[i2 + 1:]
        candidate = _dedupe_collinear(candidate)
        new_duration = time_parameterize(candidate, vel, acc).duration
        if new_duration > duration + 1e-12:
            continue
        if not space.segment_free(p1, p2):
            continue
        waypoints = candidate
        duration = new_duration
    timing = time_parameterize(waypoints, vel, acc)
    return Path(waypoints, path.algorithm, path.iterations_used, timing)


# ---------------------------------------------------------------------------
# Layout-only geodesic waypoints
# ---------------------------------------------------------------------------

GEODESIC_RESOLUTION = 0.05


class WallGrid:
    """Occupancy of wall segments on a fine grid, for layout-only geodesics."""

    def __init__(self, walls, resolution=GEODESIC_RESOLUTION, bounds=None,
                 margin=0.3):
        self.resolution = resolution
        self.walls = [(np.asarray(w.a, dtype=float), np.asarray(w.b, dtype=float))
                      for w in walls]
        if bounds is None:
            if self.walls:
                pts = np.concatenate([np.stack(w) for w in self.walls])
                lo = pts.min(axis=0) - margin
                hi = pts.max(axis=0) + margin
            else:
                lo = np.array([-margin, -margin])
                hi = np.array([margin, margin])
        else:
            lo, hi = (np.asarray(bounds[0], dtype=float),
                      np.asarray(bounds[1], dtype=float))
        self.origin = lo
        self.nx = max(1, int(math.ceil((hi[0] - lo[0]) / resolution)))
        self.ny = max(1, int(math.ceil((hi[1] - lo[1]) / resolution)))
        self.blocked = np.zeros((self.nx, self.ny), dtype=bool)
        for a, b in self.walls:
            for gx, gy in grid_traverse(a, b, self.origin, resolution):
                if 0 <= gx < self.nx and 0 <= gy < self.ny:
                    self.blocked[gx, gy] = True

    def cell_of(self, p):
        return (int(math.floor((p[0] - self.origin[0]) / self.resolution)),
                int(math.floor((p[1] - self.origin[1]) / self.resolution)))

    def center_of(self, cell):
        return np.array([self.origin[0] + (cell[0] + 0.5) * self.resolution,
                         self.origin[1] + (cell[1] + 0.5) * self.resolution])

    def in_bounds(self, c):
        return 0 <= c[0] < self.nx and 0 <= c[1] < self.ny

    def is_free_cell(self, c):
        return self.in_bounds(c) and not self.blocked[c[0], c[1]]

    def neighbors(self, c):
        x, y = c
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                if dx == 0 and dy == 0:
                    continue
                n = (x + dx, y + dy)
                if not self.is_free_cell(n):
                    continue
                if dx != 0 and dy != 0:
                    # no corner cutting through blocked orthogonal cells
                    if not (self.is_free_cell((x + dx, y)) and
                            self.is_free_cell((x, y + dy))):
                        continue
                yield n, self.resolution * math.hypot(dx, dy)

    def line_of_sight(self, p, q):
        for a, b in self.walls:
            if segments_intersect_2d(p, q, a, b):
                return False
        return True

    def astar(self, start_cell, goal_cell):
        h = lambda c: self.resolution * math.hypot(c[0] - goal_cell[0],
                                                   c[1] - goal_cell[1])
        dist = {start_cell: 0.0}
        prev = {}
        counter = 0
        pq = [(h(start_cell), counter, start_cell)]
        closed = set()
        while pq:
            _, _, u = heapq.heappop(pq)
            if u in closed:
                continue
            closed.add(u)
            if u == goal_cell:
                path = [u]
                while path[-1] != start_cell:
                    path.append(prev[path[-1]])
                return path[::-1]
            for v, w in self.neighbors(u):
                nd = dist[u] + w
                if nd < dist.get(v, math.inf):
                    dist[v] = nd
                    prev[v] = u
                    counter += 1
                    heapq.heappush(pq, (nd + h(v), counter, v))
        return None

    def string_pull(self, pts):
        """Greedy line-of-sight reduction of a point path."""
        if len(pts) <= 2:
            return pts
        out = [pts[0]]
        i = 0
        while i < len(pts) - 1:
            j = len(pts) - 1
            while j > i + 1 and not self.line_of_sight(out[-1], pts[j]):
                j -= 1
            out.append(pts[j])
            i = j
        return out


def geodesic_waypoints(walls, start, goal, spacing: float = 0.2, count: int = 10,
                       resolution: float = GEODESIC_RESOLUTION,
                       grid: WallGrid | None = None):
    """First `count` samples at `spacing` along the layout-only shortest
    path, padded with the goal when the path runs out."""
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    grid = grid or WallGrid(walls, resolution=resolution)
    if np.linalg.norm(goal - start) < 1e-12:
        return [goal.copy() for _ in range(count)]
    sc, gc = grid.cell_of(start), grid.cell_of(goal)
    if not grid.is_free_cell(sc) or not grid.is_free_cell(gc):
        raise Unreachable("start or goal cell blocked by layout")
    cells = grid.astar(sc, gc)
    if cells is None:
        raise Unreachable("no layout path between start and goal")
    pts = [start] + [grid.center_of(c) for c in cells[1:-1]] + [goal]
    pts = grid.string_pull(pts)
    return _resample(pts, spacing, count, goal)


def _resample(pts, spacing, count, goal):
    out = []
    seg_i = 0
    acc = 0.0
    target = spacing
    pos = pts[0]
    while len(out) < count and seg_i < len(pts) - 1:
        a, b = pts[seg_i], pts[seg_i + 1]
        seg = float(np.linalg.norm(b - a))
        while target <= acc + seg + 1e-12 and len(out) < count:
            f = (target - acc) / seg if seg > 0 else 0.0
            out.append(a + min(f, 1.0) * (b - a))
            target += spacing
        acc += seg
        seg_i += 1
    while len(out) < count:
        out.append(goal.copy())
    return out


def geodesic_distance(walls, start, goal, resolution=GEODESIC_RESOLUTION,
                      grid: WallGrid | None = None) -> float:
    """Layout-only shortest-path length (string-pulled polyline length)."""
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    grid = grid or WallGrid(walls, resolution=resolution)
    if np.linalg.norm(goal - start) < 1e-12:
        return 0.0
    sc, gc = grid.cell_of(start), grid.cell_of(goal)
    if not grid.is_free_cell(sc) or not grid.is_free_cell(gc):
        raise Unreachable("start or goal cell blocked by layout")
    cells = grid.astar(sc, gc)
    if cells is None:
        raise Unreachable("no layout path between start and goal")
    pts = [start] + [grid.center_of(c) for c in cells[1:-1]] + [goal]
    pts = grid.string_pull(pts)
    return float(sum(np.linalg.norm(b - a) for a, b in zip(pts, pts[1:])))


class DistanceField:
    """Dijkstra distance-to-goal over a WallGrid, for per-step geodesic
    rewards and waypoint extraction without re-planning."""

    def __init__(self, grid: WallGrid, goal):
        self.grid = grid
        self.goal = np.asarray(goal, dtype=float)
        gc = grid.cell_of(goal)
        if not grid.is_free_cell(gc):
            raise Unreachable("goal cell blocked by layout")
        self.dist = np.full((grid.nx, grid.ny), np.inf)
        self.dist[gc] = 0.0
        pq = [(0.0, gc)]
        while pq:
            d, u = heapq.heappop(pq)
            if d > self.dist[u]:
                continue
            for v, w in grid.neighbors(u):
                nd = d + w
                if nd < self.dist[v]:
                    self.dist[v] = nd
                    heapq.heappush(pq, (nd, v))

    def distance(self, p) -> float:
        c = self.grid.cell_of(p)
        if not self.grid.in_bounds(c):
            return math.inf
        base = self.dist[c]
        if not math.isfinite(base):
            return math.inf
        return float(base + np.linalg.norm(np.asarray(p, dtype=float)[:2]
                                           - self.grid.center_of(c)))

    def path_from(self, p, max_steps=100000):
        """Greedy descent to the goal cell, then string-pulled points."""
        c = self.grid.cell_of(p)
        if not self.grid.in_bounds(c) or not math.isfinite(self.dist[c]):
            raise Unreachable("no layout path from here")
        cells = [c]
        for _ in range(max_steps):
            if self.dist[cells[-1]] == 0.0:
                break
            nxt = min((v for v, _ in self.grid.neighbors(cells[-1])),
                      key=lambda v: self.dist[v], default=None)
            if nxt is None or self.dist[nxt] >= self.dist[cells[-1]]:
                break
            cells.append(nxt)
        pts = [np.asarray(p, dtype=float)[:2]] + \
            [self.grid.center_of(c) for c in cells[1:]] + [self.goal[:2]]
        return self.grid.string_pull(pts)

    def waypoints_from(self, p, spacing=0.2, count=10):
        pts = self.path_from(p)
        return _resample(pts, spacing, count, self.goal[:2])
