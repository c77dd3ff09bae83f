//! Embedded Dormand–Prince 5(4) integrator for second-order radial problems
//! reduced to first-order systems, with Hermite dense sampling and event
//! location refined by re-integration.

use crate::error::Error;

pub type State = [f64; 2];

#[derive(Debug, Clone, Copy)]
pub struct Step {
    pub t: f64,
    pub y: State,
    pub dy: State,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub steps: Vec<Step>,
}

impl Trajectory {
    pub fn first(&self) -> &Step {
        self.steps.first().expect("trajectory is never empty")
    }

    pub fn last(&self) -> &Step {
        self.steps.last().expect("trajectory is never empty")
    }

    /// Cubic-Hermite sample at `t` (must lie inside the integrated range).
    pub fn sample(&self, t: f64) -> Option<State> {
        let increasing = self.last().t >= self.first().t;
        let cmp = |a: f64, b: f64| if increasing { a <= b } else { a >= b };
        if !(cmp(self.first().t, t) && cmp(t, self.last().t)) {
            return None;
        }
        let idx = match self.steps.binary_search_by(|s| {
            if increasing {
                s.t.total_cmp(&t)
            } else {
                t.total_cmp(&s.t)
            }
        }) {
            Ok(i) => return Some(self.steps[i].y),
            Err(i) => i.clamp(1, self.steps.len() - 1),
        };
        let s0 = &self.steps[idx - 1];
        let s1 = &self.steps[idx];
        Some(hermite(s0, s1, t))
    }
}

fn hermite(s0: &Step, s1: &Step, t: f64) -> State {
    let h = s1.t - s0.t;
    let th = (t - s0.t) / h;
    let th2 = th * th;
    let th3 = th2 * th;
    let h00 = 2.0 * th3 - 3.0 * th2 + 1.0;
    let h10 = th3 - 2.0 * th2 + th;
    let h01 = -2.0 * th3 + 3.0 * th2;
    let h11 = th3 - th2;
    [
        h00 * s0.y[0] + h10 * h * s0.dy[0] + h01 * s1.y[0] + h11 * h * s1.dy[0],
        h00 * s0.y[1] + h10 * h * s0.dy[1] + h01 * s1.y[1] + h11 * h * s1.dy[1],
    ]
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: None,
            max_steps: 2_000_000,
        }
    }
}

// Dormand-Prince coefficients.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate `dy/dt = f(t, y)` from `t0` to `t_end` (either direction).
pub fn integrate<F>(f: &mut F, t0: f64, y0: State, t_end: f64, opts: &OdeOptions) -> Result<Trajectory, Error>
where
    F: FnMut(f64, &State) -> Result<State, Error>,
{
    let (traj, _) =
        integrate_impl::<F, fn(f64, &State) -> f64>(f, t0, y0, t_end, opts, None)?;
    Ok(traj)
}

/// Integrate and stop at the first sign change of `event(t, y)`. Returns the
/// trajectory up to the event (last step exactly at the event when found).
pub fn integrate_with_event<F, E>(
    f: &mut F,
    t0: f64,
    y0: State,
    t_end: f64,
    opts: &OdeOptions,
    event: &E,
    event_ftol: f64,
) -> Result<(Trajectory, Option<Step>), Error>
where
    F: FnMut(f64, &State) -> Result<State, Error>,
    E: Fn(f64, &State) -> f64,
{
    integrate_impl(f, t0, y0, t_end, opts, Some((event, event_ftol)))
}

fn integrate_impl<F, E>(
    f: &mut F,
    t0: f64,
    y0: State,
    t_end: f64,
    opts: &OdeOptions,
    event: Option<(&E, f64)>,
) -> Result<(Trajectory, Option<Step>), Error>
where
    F: FnMut(f64, &State) -> Result<State, Error>,
    E: Fn(f64, &State) -> f64,
{
    let dir = (t_end - t0).signum();
    if dir == 0.0 {
        let dy = f(t0, &y0)?;
        let step = Step { t: t0, y: y0, dy };
        return Ok((Trajectory { steps: vec![step] }, None));
    }
    let mut t = t0;
    let mut y = y0;
    let mut dy = f(t, &y)?;
    let mut h = opts
        .h_init
        .unwrap_or_else(|| initial_step(t0, t_end, &y0, &dy, opts))
        .abs()
        * dir;
    let mut steps = vec![Step { t, y, dy }];
    let mut ev_prev = event.as_ref().map(|(e, _)| e(t, &y));

    for _ in 0..opts.max_steps {
        if (t - t_end) * dir >= 0.0 {
            return Ok((Trajectory { steps }, None));
        }
        if (t + h - t_end) * dir > 0.0 {
            h = t_end - t;
        }
        let mut k = [[0.0f64; 2]; 7];
        k[0] = dy;
        let mut failed = false;
        for i in 0..6 {
            let mut yi = y;
            for (j, kj) in k.iter().enumerate().take(i + 1) {
                yi[0] += h * A[i][j] * kj[0];
                yi[1] += h * A[i][j] * kj[1];
            }
            match f(t + C[i] * h, &yi) {
                Ok(v) => k[i + 1] = v,
                Err(_) => {
                    failed = true;
                    break;
                }
            }
        }
        if failed {
            // Evaluation failure inside a trial step: retry with a smaller one.
            h *= 0.25;
            if h.abs() < 1e-15 * t.abs().max(1.0) {
                return Err(Error::Integration(format!(
                    "step underflow near t = {t} after evaluation failure"
                )));
            }
            continue;
        }
        let mut y5 = y;
        let mut y4 = y;
        for i in 0..7 {
            y5[0] += h * B5[i] * k[i][0];
            y5[1] += h * B5[i] * k[i][1];
            y4[0] += h * B4[i] * k[i][0];
            y4[1] += h * B4[i] * k[i][1];
        }
        let mut err: f64 = 0.0;
        for i in 0..2 {
            let sc = opts.atol + opts.rtol * y[i].abs().max(y5[i].abs());
            let e = (y5[i] - y4[i]) / sc;
            err += e * e;
        }
        err = (err / 2.0).sqrt();
        if err <= 1.0 {
            // Accept. FSAL: k7 is the derivative at the new point.
            t += h;
            y = y5;
            dy = k[6];
            if y[0].abs() > 1e300 || y[1].abs() > 1e300 {
                return Err(Error::Integration(format!("solution blow-up near t = {t}")));
            }
            steps.push(Step { t, y, dy });
            if let (Some((ev, ftol)), Some(prev)) = (event.as_ref(), ev_prev) {
                let cur = ev(t, &y);
                if prev == 0.0 || (prev.signum() != cur.signum()) {
                    let hit = locate_event(f, &steps, *ev, *ftol, opts)?;
                    let n = steps.len();
                    steps.truncate(n - 1);
                    steps.push(hit);
                    return Ok((Trajectory { steps }, Some(hit)));
                }
                ev_prev = Some(cur);
            }
        }
        let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 5.0);
        h *= fac;
        if h.abs() < 1e-15 * t.abs().max(1.0) {
            return Err(Error::Integration(format!("step underflow near t = {t}")));
        }
    }
    Err(Error::Integration(format!(
        "step budget {} exhausted at t = {t}",
        opts.max_steps
    )))
}

/// Locate the event inside the last accepted step: bisect on the Hermite
/// interpolant to get close, then correct with secant steps that re-integrate
/// from the step start, so the final point satisfies the integrator's own
/// accuracy rather than the interpolant's.
fn locate_event<F, E>(
    f: &mut F,
    steps: &[Step],
    event: E,
    ftol: f64,
    opts: &OdeOptions,
) -> Result<Step, Error>
where
    F: FnMut(f64, &State) -> Result<State, Error>,
    E: Fn(f64, &State) -> f64,
{
    let s0 = steps[steps.len() - 2];
    let s1 = steps[steps.len() - 1];
    let g_h = |t: f64| event(t, &hermite(&s0, &s1, t));
    let (mut lo, mut hi) = (s0.t, s1.t);
    let (mut glo, ghi) = (g_h(lo), g_h(hi));
    if glo == 0.0 {
        return Ok(s0);
    }
    if glo.signum() == ghi.signum() {
        // Sign change seen on mesh but not on the interpolant; fall back to
        // the step end.
        return Ok(s1);
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let gm = g_h(mid);
        if gm == 0.0 {
            lo = mid;
            break;
        }
        if gm.signum() == glo.signum() {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() <= 1e-14 * hi.abs().max(1.0) {
            break;
        }
    }
    // Exact refinement: secant on G(t) = event evaluated on an actually
    // integrated state, so the located point inherits the integrator's
    // accuracy rather than the interpolant's.
    let (t_min, t_max) = (s0.t.min(s1.t), s0.t.max(s1.t));
    let mut eval = |tc: f64| -> Result<(f64, Step), Error> {
        let inner = OdeOptions {
            h_init: Some(((tc - s0.t) / 8.0).abs().max(1e-14)),
            ..*opts
        };
        let traj = integrate(f, s0.t, s0.y, tc, &inner)?;
        let last = *traj.last();
        Ok((event(last.t, &last.y), last))
    };
    let mut ta = 0.5 * (lo + hi);
    let (mut ga, mut best) = eval(ta)?;
    let mut tb = (ta + (s1.t - s0.t) * 1e-4).clamp(t_min, t_max);
    let (mut gb, stb) = eval(tb)?;
    if gb.abs() < ga.abs() {
        std::mem::swap(&mut ta, &mut tb);
        std::mem::swap(&mut ga, &mut gb);
        best = stb;
    }
    for _ in 0..12 {
        if ga.abs() <= ftol {
            return Ok(best);
        }
        if ga == gb || ta == tb {
            break;
        }
        let tn = (ta - ga * (ta - tb) / (ga - gb)).clamp(t_min, t_max);
        let (gn, stn) = eval(tn)?;
        tb = ta;
        gb = ga;
        ta = tn;
        ga = gn;
        best = stn;
    }
    if ga.abs() <= ftol {
        Ok(best)
    } else {
        Err(Error::RootFinding(format!(
            "event refinement stalled at t = {ta} (residual {ga:.3e})"
        )))
    }
}

fn initial_step(t0: f64, t_end: f64, y0: &State, dy0: &State, opts: &OdeOptions) -> f64 {
    let span = (t_end - t0).abs();
    let scale = (y0[0].abs() + y0[1].abs()).max(opts.atol);
    let rate = (dy0[0].abs() + dy0[1].abs()).max(1e-30);
    (0.01 * scale / rate).min(span / 100.0).max(span * 1e-12)
}
