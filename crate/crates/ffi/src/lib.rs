//! C ABI over `bi_core`.
//!
//! Every fallible function returns a [`BiStatus`]; on failure a message is
//! available from [`bi_last_error_message`] on the same thread. Simulations
//! are opaque [`BiSimulation`] handles created by `bi_simulation_new_*` and
//! released with [`bi_simulation_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use bi_core::diagnostics::{DiagnosticRecord, FixedWindow};
use bi_core::dynamics::{
    lorentz_density, pde_utt, Backend, BornInfeld, FieldState, Jet, GAMMA_FLOOR,
};
use bi_core::grid::Grid;
use bi_core::identity::{check_qnum, check_qtilde, JetResidual};
use bi_core::integrator::Stepper;
use bi_core::weights::WeightFamily;
use bi_core::BiError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BiStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Domain = 3,
    Breakdown = 4,
    Structural = 5,
    Precondition = 6,
    Io = 7,
    BufferSize = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BiBackend {
    Explicit = 0,
    Flux = 1,
}

impl From<BiBackend> for Backend {
    fn from(b: BiBackend) -> Self {
        match b {
            BiBackend::Explicit => Backend::Explicit,
            BiBackend::Flux => Backend::Flux,
        }
    }
}

/// Grid and stepping parameters shared by every constructor.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiParams {
    pub half_length: f64,
    pub points: usize,
    pub t_start: f64,
    pub cfl: f64,
    pub window_constant: f64,
    pub gamma_floor: f64,
    pub backend: BiBackend,
}

/// Functionals at the current state.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BiDiagnostics {
    pub t: f64,
    pub virial_i: f64,
    pub virial_j: f64,
    pub weighted_energy: f64,
    pub mass: f64,
    pub energy: f64,
    pub loc_norm: f64,
    pub sup_ux: f64,
    pub sup_v: f64,
    pub gamma_min: f64,
    pub integra_density: f64,
}

/// Opaque simulation handle.
pub struct BiSimulation {
    stepper: Stepper,
    weights: WeightFamily,
    cfl: f64,
    state: FieldState,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &BiError) -> BiStatus {
    match err {
        BiError::Structural(_) => BiStatus::Structural,
        BiError::Breakdown { .. } => BiStatus::Breakdown,
        BiError::Domain(_) => BiStatus::Domain,
        BiError::Config(_) => BiStatus::Config,
        BiError::Precondition(_) => BiStatus::Precondition,
        BiError::Io { .. } => BiStatus::Io,
    }
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), BiStatusError>) -> BiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BiStatus::Ok,
        Ok(Err(BiStatusError(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            BiStatus::Panic
        }
    }
}

struct BiStatusError(BiStatus, String);

impl From<BiError> for BiStatusError {
    fn from(e: BiError) -> Self {
        BiStatusError(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> BiStatusError {
    BiStatusError(BiStatus::NullPointer, format!("{what} is null"))
}

fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), BiStatusError> {
    if out.is_null() {
        return Err(null(what));
    }
    // SAFETY: caller passes a valid, aligned, writable pointer or null.
    unsafe { out.write(value) };
    Ok(())
}

/// Message describing the last failure on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bi_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Fills `out` with the library defaults.
#[no_mangle]
pub extern "C" fn bi_params_default(out: *mut BiParams) -> BiStatus {
    guard(|| {
        write_out(
            out,
            BiParams {
                half_length: 250.0,
                points: 8192,
                t_start: 2.0,
                cfl: 0.4,
                window_constant: 1.0,
                gamma_floor: GAMMA_FLOOR,
                backend: BiBackend::Explicit,
            },
            "out",
        )
    })
}

fn build(
    params: *const BiParams,
    init: impl FnOnce(&Grid, f64) -> Result<FieldState, BiStatusError>,
    out: *mut *mut BiSimulation,
) -> BiStatus {
    guard(|| {
        if params.is_null() {
            return Err(null("params"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: checked non-null; caller guarantees a valid BiParams.
        let p = unsafe { *params };
        if !(p.cfl > 0.0 && p.cfl <= 0.5) {
            return Err(BiStatusError(
                BiStatus::Config,
                format!("cfl must lie in (0, 0.5], got {}", p.cfl),
            ));
        }
        let grid = Grid::new(p.half_length, p.points)?;
        let weights = WeightFamily::new(p.window_constant)?;
        let system = BornInfeld::with_gamma_floor(grid.clone(), p.gamma_floor)?;
        let state = init(&grid, p.t_start)?;
        state.validate(&grid)?;
        let sim = BiSimulation {
            stepper: Stepper::new(system, p.backend.into()),
            weights,
            cfl: p.cfl,
            state,
        };
        // SAFETY: checked non-null.
        unsafe { *out = Box::into_raw(Box::new(sim)) };
        Ok(())
    })
}

/// `u = a g`, `u_t = a s g` with `g = exp(-((x - center)/width)^2)`.
#[no_mangle]
pub extern "C" fn bi_simulation_new_gaussian(
    params: *const BiParams,
    amplitude: f64,
    center: f64,
    width: f64,
    velocity_scale: f64,
    out: *mut *mut BiSimulation,
) -> BiStatus {
    build(
        params,
        |grid, t| {
            if width.is_nan() || width <= 0.0 {
                return Err(BiStatusError(
                    BiStatus::Config,
                    format!("width must be positive, got {width}"),
                ));
            }
            let g = |x: f64| amplitude * (-((x - center) / width).powi(2)).exp();
            Ok(FieldState {
                t,
                u: grid.sample(g),
                v: grid.sample(|x| velocity_scale * g(x)),
            })
        },
        out,
    )
}

/// Copies `len` nodal values of `u` and `u_t`; `len` must equal
/// `params.points`.
///
/// # Safety
/// `u` and `v` must each point to `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn bi_simulation_new_from_arrays(
    params: *const BiParams,
    u: *const f64,
    v: *const f64,
    len: usize,
    out: *mut *mut BiSimulation,
) -> BiStatus {
    build(
        params,
        |grid, t| {
            if u.is_null() || v.is_null() {
                return Err(null("u or v"));
            }
            if len != grid.len() {
                return Err(BiStatusError(
                    BiStatus::BufferSize,
                    format!("arrays have {len} entries, grid has {}", grid.len()),
                ));
            }
            // SAFETY: caller guarantees len readable doubles at each pointer.
            let (u, v) = unsafe {
                (
                    std::slice::from_raw_parts(u, len),
                    std::slice::from_raw_parts(v, len),
                )
            };
            Ok(FieldState {
                t,
                u: u.to_vec(),
                v: v.to_vec(),
            })
        },
        out,
    )
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `sim` must come from a `bi_simulation_new_*` call and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn bi_simulation_free(sim: *mut BiSimulation) {
    if !sim.is_null() {
        // SAFETY: produced by Box::into_raw in `build`.
        drop(unsafe { Box::from_raw(sim) });
    }
}

fn with_sim<'a>(sim: *mut BiSimulation) -> Result<&'a mut BiSimulation, BiStatusError> {
    // SAFETY: caller passes a live handle or null.
    unsafe { sim.as_mut() }.ok_or_else(|| null("sim"))
}

fn advance(sim: &mut BiSimulation, dt: f64, steps: usize) -> Result<(), BiStatusError> {
    for _ in 0..steps {
        let mut next = sim.stepper.step(&sim.state, dt)?;
        next.validate(sim.stepper.grid())?;
        next.t = sim.state.t + dt;
        sim.state = next;
    }
    Ok(())
}

/// Takes `steps` RK4 steps of size `dt`. On failure the handle keeps the
/// last valid state.
#[no_mangle]
pub extern "C" fn bi_simulation_step(sim: *mut BiSimulation, dt: f64, steps: usize) -> BiStatus {
    guard(|| {
        let sim = with_sim(sim)?;
        if dt > sim.cfl * sim.stepper.grid().spacing() * (1.0 + 1e-12) {
            return Err(BiStatusError(
                BiStatus::Config,
                format!(
                    "dt {dt} exceeds cfl * h = {}",
                    sim.cfl * sim.stepper.grid().spacing()
                ),
            ));
        }
        advance(sim, dt, steps)
    })
}

/// Advances to `t_end` with equal steps no larger than `cfl * h`.
#[no_mangle]
pub extern "C" fn bi_simulation_advance_to(sim: *mut BiSimulation, t_end: f64) -> BiStatus {
    guard(|| {
        let sim = with_sim(sim)?;
        let span = t_end - sim.state.t;
        if !(span >= 0.0 && span.is_finite()) {
            return Err(BiStatusError(
                BiStatus::Config,
                format!("cannot advance from t = {} to {t_end}", sim.state.t),
            ));
        }
        if span == 0.0 {
            return Ok(());
        }
        let n = (span / (sim.cfl * sim.stepper.grid().spacing()))
            .ceil()
            .max(1.0) as usize;
        advance(sim, span / n as f64, n)?;
        sim.state.t = t_end;
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn bi_simulation_time(sim: *const BiSimulation, out: *mut f64) -> BiStatus {
    guard(|| {
        let sim = with_sim(sim as *mut _)?;
        write_out(out, sim.state.t, "out")
    })
}

#[no_mangle]
pub extern "C" fn bi_simulation_len(sim: *const BiSimulation, out: *mut usize) -> BiStatus {
    guard(|| {
        let sim = with_sim(sim as *mut _)?;
        write_out(out, sim.state.u.len(), "out")
    })
}

/// Copies the nodal `u` and `u_t` into caller buffers of `len` doubles.
/// Either buffer may be null to skip it.
///
/// # Safety
/// Non-null `u`/`v` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn bi_simulation_copy_fields(
    sim: *const BiSimulation,
    u: *mut f64,
    v: *mut f64,
    len: usize,
) -> BiStatus {
    guard(|| {
        let sim = with_sim(sim as *mut _)?;
        let n = sim.state.u.len();
        if len != n {
            return Err(BiStatusError(
                BiStatus::BufferSize,
                format!("buffer has {len} entries, state has {n}"),
            ));
        }
        for (dst, src) in [(u, &sim.state.u), (v, &sim.state.v)] {
            if !dst.is_null() {
                // SAFETY: caller guarantees len writable doubles; no overlap with our Vec.
                unsafe { ptr::copy_nonoverlapping(src.as_ptr(), dst, n) };
            }
        }
        Ok(())
    })
}

/// Functionals at the current state. Requires `t >= 2`.
#[no_mangle]
pub extern "C" fn bi_simulation_diagnostics(
    sim: *const BiSimulation,
    out: *mut BiDiagnostics,
) -> BiStatus {
    guard(|| {
        let sim = with_sim(sim as *mut _)?;
        let fixed = FixedWindow::Sech2 { lambda0: 5.0 };
        let r = DiagnosticRecord::sample(sim.stepper.grid(), &sim.state, &sim.weights, &fixed)?;
        write_out(
            out,
            BiDiagnostics {
                t: r.t,
                virial_i: r.virial_i,
                virial_j: r.virial_j,
                weighted_energy: r.weighted_energy,
                mass: r.mass,
                energy: r.energy,
                loc_norm: r.loc_norm,
                sup_ux: r.sup_ux,
                sup_v: r.sup_v,
                gamma_min: r.gamma_min,
                integra_density: r.integra_density,
            },
            "out",
        )
    })
}

/// `sqrt(1 + ux^2 - ut^2)`; `BI_STATUS_BREAKDOWN` outside the hyperbolic region.
#[no_mangle]
pub extern "C" fn bi_lorentz_density(ux: f64, ut: f64, out: *mut f64) -> BiStatus {
    guard(|| {
        let g = lorentz_density(ux, ut)?;
        write_out(out, g, "out")
    })
}

/// `u_tt` determined by the equation from the other jet entries.
#[no_mangle]
pub extern "C" fn bi_pde_utt(ut: f64, ux: f64, utx: f64, uxx: f64) -> f64 {
    pde_utt(ut, ux, utx, uxx)
}

#[no_mangle]
pub extern "C" fn bi_lambda(window_constant: f64, t: f64, out: *mut f64) -> BiStatus {
    guard(|| {
        let l = WeightFamily::new(window_constant)?.lambda(t)?;
        write_out(out, l, "out")
    })
}

/// Bounds of the open window `(-lambda(|t|), lambda(|t|))`.
#[no_mangle]
pub extern "C" fn bi_window(
    window_constant: f64,
    t: f64,
    lower: *mut f64,
    upper: *mut f64,
) -> BiStatus {
    guard(|| {
        if lower.is_null() || upper.is_null() {
            return Err(null("lower or upper"));
        }
        let w = WeightFamily::new(window_constant)?.window(t)?;
        write_out(lower, w.lower, "lower")?;
        write_out(upper, w.upper, "upper")
    })
}

fn jet_check(
    check: fn(&Jet) -> bi_core::Result<JetResidual>,
    jet: Jet,
    lhs: *mut f64,
    rhs: *mut f64,
) -> BiStatus {
    guard(|| {
        if lhs.is_null() || rhs.is_null() {
            return Err(null("lhs or rhs"));
        }
        let r = check(&jet)?;
        write_out(lhs, r.lhs, "lhs")?;
        write_out(rhs, r.rhs, "rhs")
    })
}

/// Both sides of the momentum-numerator identity on an on-shell jet;
/// `BI_STATUS_PRECONDITION` when `utt` is off shell.
#[no_mangle]
pub extern "C" fn bi_check_qnum(
    ut: f64,
    ux: f64,
    utx: f64,
    uxx: f64,
    utt: f64,
    lhs: *mut f64,
    rhs: *mut f64,
) -> BiStatus {
    jet_check(
        check_qnum,
        Jet {
            ut,
            ux,
            utx,
            uxx,
            utt,
        },
        lhs,
        rhs,
    )
}

/// Both sides of the energy-numerator identity on an on-shell jet.
#[no_mangle]
pub extern "C" fn bi_check_qtilde(
    ut: f64,
    ux: f64,
    utx: f64,
    uxx: f64,
    utt: f64,
    lhs: *mut f64,
    rhs: *mut f64,
) -> BiStatus {
    jet_check(
        check_qtilde,
        Jet {
            ut,
            ux,
            utx,
            uxx,
            utt,
        },
        lhs,
        rhs,
    )
}
