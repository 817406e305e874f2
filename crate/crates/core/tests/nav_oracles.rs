use fva_core::nav::*;
use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;

type Q = BigRational;

fn q(x: f64) -> Q {
    Q::from_float(x).unwrap()
}

fn cross(o: (&Q, &Q), a: (&Q, &Q), b: (&Q, &Q)) -> Q {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Splits the segment at every parameter where it meets an edge line and
/// asks whether any sub-interval midpoint lies strictly inside.
fn exact_blocked(poly: &[[f64; 2]], a: [f64; 2], b: [f64; 2]) -> bool {
    let (ax, ay, bx, by) = (q(a[0]), q(a[1]), q(b[0]), q(b[1]));
    let verts: Vec<(Q, Q)> = poly.iter().map(|v| (q(v[0]), q(v[1]))).collect();
    let n = verts.len();
    let zero = Q::from_integer(BigInt::from(0));
    let one = Q::from_integer(BigInt::from(1));
    let mut ts = vec![zero.clone(), one.clone()];
    for i in 0..n {
        let (p, r) = (&verts[i], &verts[(i + 1) % n]);
        let fa = cross((&p.0, &p.1), (&r.0, &r.1), (&ax, &ay));
        let fb = cross((&p.0, &p.1), (&r.0, &r.1), (&bx, &by));
        if fa != fb {
            let t = &fa / (&fa - &fb);
            if t > zero && t < one {
                ts.push(t);
            }
        }
    }
    ts.sort();
    let two = Q::from_integer(BigInt::from(2));
    ts.windows(2).any(|w| {
        let t = (&w[0] + &w[1]) / &two;
        let mx = &ax + (&bx - &ax) * &t;
        let my = &ay + (&by - &ay) * &t;
        (0..n).all(|i| {
            let (p, r) = (&verts[i], &verts[(i + 1) % n]);
            cross((&p.0, &p.1), (&r.0, &r.1), (&mx, &my)) > zero
        })
    })
}

fn small() -> impl Strategy<Value = f64> {
    (-8i32..=16).prop_map(|k| k as f64 * 0.25)
}

fn point() -> impl Strategy<Value = [f64; 2]> {
    (small(), small()).prop_map(|(x, y)| [x, y])
}

fn convex() -> impl Strategy<Value = Polygon> {
    prop_oneof![
        (0i32..8, 0i32..8, 1i32..6, 1i32..6).prop_map(|(x, y, w, h)| {
            let (x, y, w, h) = (x as f64 * 0.25, y as f64 * 0.25, w as f64 * 0.25, h as f64 * 0.25);
            Polygon::rect([x, y], [x + w, y + h]).unwrap()
        }),
        (point(), point(), point())
            .prop_filter_map("degenerate", |(a, b, c)| Polygon::new(vec![a, b, c]).ok()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(3000))]

    #[test]
    fn sight_matches_exact_oracle(poly in convex(), a in point(), b in point()) {
        let env = EnvironmentState { obstacles: vec![poly.clone()], ..Default::default() };
        let expect = a == b || !exact_blocked(poly.vertices(), a, b);
        prop_assert_eq!(line_of_sight(&env, a, b), expect);
    }
}

#[test]
fn grazing_vertex_is_visible() {
    let tri = Polygon::new(vec![[0.0, 0.0], [2.0, 0.0], [1.0, 1.0]]).unwrap();
    let env = EnvironmentState { obstacles: vec![tri.clone()], ..Default::default() };
    assert!(line_of_sight(&env, [-1.0, 1.0], [3.0, 1.0]));
    assert!(!exact_blocked(tri.vertices(), [-1.0, 1.0], [3.0, 1.0]));
    assert!(!line_of_sight(&env, [-1.0, 0.5], [3.0, 0.5]));
}

fn arb_agent() -> impl Strategy<Value = AgentState> {
    (-3.0..3.0f64, -3.0..3.0f64, -1.0..1.0f64, -1.0..1.0f64, 0.1..0.4f64, 0.5..2.0f64).prop_map(|(x, y, vx, vy, r, s)| {
        let mut a = AgentState::new("x", [x, y], r, s, s);
        a.velocity = [vx, vy];
        a
    })
}

proptest! {
    #[test]
    fn speed_cap_holds(me in arb_agent(), others in prop::collection::vec(arb_agent(), 0..8),
                       px in -3.0..3.0f64, py in -3.0..3.0f64) {
        let nb: Vec<Neighbor> = others.iter().map(Neighbor::agent).collect();
        let wall = Polygon::rect([3.5, -5.0], [4.0, 5.0]).unwrap();
        let v = orca_velocity(&me, &nb, &[wall], Vec2::new(px, py), &OrcaParams::default(), 1.0 / 60.0);
        prop_assert!(v.norm() <= me.max_speed * (1.0 + 1e-9));
    }

    #[test]
    fn feasible_solution_satisfies_every_half_plane(me in arb_agent(), others in prop::collection::vec(arb_agent(), 0..4)) {
        let nb: Vec<Neighbor> = others.iter().map(Neighbor::agent).collect();
        let (lines, n_obst) = orca_lines(&me, &nb, &[], &OrcaParams::default(), 1.0 / 60.0);
        // zero velocity is admissible whenever every constraint line passes on the far side of the origin
        let zero_ok = lines.iter().all(|l| l.admits(Vec2::zeros(), 0.0));
        let v = solve_velocity(&lines, n_obst, me.max_speed, Vec2::new(me.pref_speed, 0.0));
        if zero_ok {
            for l in &lines {
                prop_assert!(l.admits(v, 1e-9));
            }
        }
    }
}

#[test]
fn static_neighbor_on_path_forces_lateral_deviation() {
    let mut me = AgentState::new("a", [0.0, 0.0], 0.25, 1.0, 1.0);
    me.velocity = [1.0, 0.0];
    let blocker = Neighbor::non_responsive([1.2, 0.0], [0.0, 0.0], 0.25);
    let params = OrcaParams::default();
    let straight = Vec2::new(1.0, 0.0);
    let (lines, n_obst) = orca_lines(&me, &[blocker], &[], &params, 1.0 / 60.0);
    assert!(!lines[n_obst].admits(straight, 0.0));
    let v = solve_velocity(&lines, n_obst, me.max_speed, straight);
    assert!(v.y.abs() > 0.05, "{v}");
    assert!(lines[n_obst].admits(v, 1e-12));
}

#[test]
fn head_on_outputs_mirror_about_x_axis() {
    let dt = 1.0 / 60.0;
    let env = EnvironmentState {
        agents: vec![
            AgentState::new("a", [-2.0, 0.0], 0.25, 1.0, 1.0),
            AgentState::new("b", [2.0, 0.0], 0.25, 1.0, 1.0),
        ],
        ..Default::default()
    };
    let mut crowd = Crowd::new(env, OrcaParams::default());
    crowd.set_goal(0, Some([2.0, 0.0])).unwrap();
    crowd.set_goal(1, Some([-2.0, 0.0])).unwrap();
    let mut min_dist = f64::INFINITY;
    let mut arrivals = 0;
    for _ in 0..(30 * 240) {
        arrivals += crowd.step(dt / 4.0).len();
        let (a, b) = (&crowd.agents[0].state, &crowd.agents[1].state);
        assert!((a.velocity[0] + b.velocity[0]).abs() < 1e-9);
        assert!((a.velocity[1] + b.velocity[1]).abs() < 1e-9);
        min_dist = min_dist.min(((a.position[0] - b.position[0]).powi(2) + (a.position[1] - b.position[1]).powi(2)).sqrt());
    }
    assert_eq!(arrivals, 2);
    assert!(min_dist >= 0.5 - 1e-6, "{min_dist}");
}
